#include <doctest.h>

#include "tunet/io.hpp"
#include "tunet/phantom.hpp"

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <unistd.h>

using namespace tunet;
namespace fs = std::filesystem;

namespace {

struct RunResult {
    int code;
    std::string output;
};

RunResult run_cli(const std::string& args) {
    const std::string cmd = std::string(TUNET_CLI_PATH) + " " + args + " 2>&1";
    std::array<char, 4096> buf;
    std::string out;
    FILE* p = popen(cmd.c_str(), "r");
    REQUIRE(p != nullptr);
    while (std::fgets(buf.data(), int(buf.size()), p)) out += buf.data();
    const int status = pclose(p);
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

struct TempDir {
    fs::path path;
    TempDir() {
        static int counter = 0;
        path = fs::temp_directory_path() /
               ("tunet_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string operator/(const std::string& p) const { return (path / p).string(); }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_CASE("cli: usage errors exit 1") {
    CHECK(run_cli("definitely-not-a-command").code == 1);
    CHECK(run_cli("preprocess --no-such-flag x").code == 1);
    CHECK(run_cli("--help").code == 0);
}

TEST_CASE("cli: empty manifest exits with a data error saying no cases") {
    TempDir tmp;
    std::ofstream(tmp.path / "empty.tsv").close();
    RunResult r = run_cli("preprocess --manifest " + (tmp / "empty.tsv") + " --out " + (tmp / "o"));
    CHECK(r.code == 2);
    CHECK(r.output.find("no cases") != std::string::npos);
}

TEST_CASE("cli: corrupt input file exits 2") {
    TempDir tmp;
    {
        std::ofstream bad(tmp.path / "case_bad_img.mvol", std::ios::binary);
        bad << "GARBAGEGARBAGE";
        std::ofstream bad2(tmp.path / "case_bad_lbl.mvol", std::ios::binary);
        bad2 << "GARBAGEGARBAGE";
        std::ofstream mf(tmp.path / "manifest.tsv");
        mf << "case_bad\tcase_bad_img.mvol\tcase_bad_lbl.mvol\n";
    }
    // single corrupt case: preprocess skips it, then fails because nothing succeeded
    RunResult r = run_cli("preprocess --manifest " + (tmp / "manifest.tsv") + " --out " + (tmp / "o"));
    CHECK(r.code == 2);
}

TEST_CASE("cli: preprocess produces configured dims and is idempotent bit-for-bit") {
    TempDir tmp;
    PhantomConfig cfg;
    cfg.count = 1;
    cfg.seed = 11;
    write_phantom_dataset(tmp.path / "raw", cfg);
    const std::string prep = tmp / "prep";
    RunResult r1 = run_cli("preprocess --manifest " + (tmp / "raw") + "/manifest.tsv --out " + prep +
                           " --divisor 8");
    REQUIRE(r1.code == 0);
    Volume<float> img = read_scalar_volume(fs::path(prep) / "case_000_img.mvol");
    CHECK(img.dims == Dims3{32, 32, 16});
    const std::string bytes = slurp(fs::path(prep) / "case_000_img.mvol");
    RunResult r2 = run_cli("preprocess --manifest " + (tmp / "raw") + "/manifest.tsv --out " + prep +
                           " --divisor 8");
    REQUIRE(r2.code == 0);
    CHECK(bytes == slurp(fs::path(prep) / "case_000_img.mvol"));
}

TEST_CASE("cli: evaluate on prediction equal to ground truth reports 1.0") {
    TempDir tmp;
    LabelMap lab(Dims3{8, 8, 8});
    lab(2, 2, 2) = 1;
    lab(3, 3, 3) = 2;
    Volume<float> img(Dims3{8, 8, 8}, Spacing{});
    write_volume(img, tmp.path / "c0_img.mvol");
    write_volume(lab, tmp.path / "c0_lbl.mvol");
    write_volume(lab, tmp.path / "c0_seg.mvol");
    {
        std::ofstream mf(tmp.path / "manifest.tsv");
        mf << "c0\tc0_img.mvol\tc0_lbl.mvol\n";
    }
    RunResult r = run_cli("evaluate --pred " + tmp.operator/("") + " --manifest " +
                          (tmp / "manifest.tsv") + " --out " + (tmp / "metrics.csv"));
    REQUIRE(r.code == 0);
    const std::string csv = slurp(tmp.path / "metrics.csv");
    CHECK(csv.find("c0,kidney+tumor,1,0") != std::string::npos);
    CHECK(csv.find("c0,tumor,1,0") != std::string::npos);
}

TEST_CASE("cli: ensemble of a single input directory copies the maps") {
    TempDir tmp;
    fs::create_directories(tmp.path / "pred");
    SplitMix64 rng(3);
    for (const char* kind : {"_whole", "_tumor", "_loc"}) {
        ProbMap<float> p(Dims3{6, 6, 6}, Spacing{});
        for (Index i = 0; i < p.data.size(); ++i) p.data[i] = float(rng.uniform());
        write_volume(p, tmp.path / "pred" / (std::string("c0") + kind + ".mvol"));
    }
    Volume<float> img(Dims3{6, 6, 6}, Spacing{});
    LabelMap lbl(Dims3{6, 6, 6});
    write_volume(img, tmp.path / "c0_img.mvol");
    write_volume(lbl, tmp.path / "c0_lbl.mvol");
    {
        std::ofstream mf(tmp.path / "manifest.tsv");
        mf << "c0\tc0_img.mvol\tc0_lbl.mvol\n";
    }
    RunResult r = run_cli("ensemble --inputs " + (tmp / "pred") + " --manifest " +
                          (tmp / "manifest.tsv") + " --out " + (tmp / "ens"));
    REQUIRE(r.code == 0);
    for (const char* kind : {"_whole", "_tumor", "_loc"}) {
        const std::string name = std::string("c0") + kind + ".mvol";
        CHECK(slurp(tmp.path / "pred" / name) == slurp(tmp.path / "ens" / name));
    }
}

TEST_CASE("cli: full pipeline smoke run") {
    TempDir tmp;
    REQUIRE(run_cli("phantom --out " + (tmp / "raw") + " --count 6 --seed 3").code == 0);
    REQUIRE(run_cli("preprocess --manifest " + (tmp / "raw") + "/manifest.tsv --out " +
                    (tmp / "prep") + " --divisor 8")
                .code == 0);
    REQUIRE(run_cli("train --manifest " + (tmp / "prep") + "/manifest.tsv --out " + (tmp / "model") +
                    " --seed 3 --epochs 2 --depth 2 --base 2 --patch 8,8,8 --infer-overlap 4,4,4" +
                    " --lnet-dims 8,8,4")
                .code == 0);
    CHECK(fs::exists(tmp.path / "model" / "wnet.mpar"));
    CHECK(fs::exists(tmp.path / "model" / "train_log.csv"));
    const std::string log = slurp(tmp.path / "model" / "train_log.csv");
    CHECK(log.find("epoch,lr,l_whole,l_tumor,l_total,val_total") == 0);

    REQUIRE(run_cli("predict --manifest " + (tmp / "prep") + "/manifest.tsv --params " +
                    (tmp / "model") + " --out " + (tmp / "pred"))
                .code == 0);
    CHECK(fs::exists(tmp.path / "pred" / "case_000_whole.mvol"));

    REQUIRE(run_cli("postprocess --pred " + (tmp / "pred") + " --manifest " + (tmp / "prep") +
                    "/manifest.tsv --out " + (tmp / "seg"))
                .code == 0);
    CHECK(fs::exists(tmp.path / "seg" / "case_000_seg.mvol"));

    RunResult ev = run_cli("evaluate --pred " + (tmp / "seg") + " --manifest " + (tmp / "prep") +
                           "/manifest.tsv --out " + (tmp / "metrics.csv"));
    REQUIRE(ev.code == 0);
    const std::string csv = slurp(tmp.path / "metrics.csv");
    CHECK(csv.find("case_id,region,dsc,both_empty") == 0);
    CHECK(csv.find("case_005,mean,") != std::string::npos);
    CHECK(csv.find("mean,kidney+tumor,") != std::string::npos);

    // original-space evaluation through the plan sidecars
    RunResult ev2 = run_cli("evaluate --pred " + (tmp / "seg") + " --manifest " + (tmp / "prep") +
                            "/manifest.tsv --out " + (tmp / "metrics_orig.csv") +
                            " --original-space --plans " + (tmp / "prep") + " --orig-manifest " +
                            (tmp / "raw") + "/manifest.tsv");
    CHECK(ev2.code == 0);
}

TEST_CASE("cli: predict with mismatched params directory exits 2") {
    TempDir tmp;
    PhantomConfig cfg;
    cfg.count = 1;
    cfg.seed = 4;
    write_phantom_dataset(tmp.path / "raw", cfg);
    REQUIRE(run_cli("preprocess --manifest " + (tmp / "raw") + "/manifest.tsv --out " +
                    (tmp / "prep") + " --divisor 8")
                .code == 0);
    RunResult r = run_cli("predict --manifest " + (tmp / "prep") + "/manifest.tsv --params " +
                          (tmp / "nonexistent") + " --out " + (tmp / "pred"));
    CHECK(r.code == 2);
}
