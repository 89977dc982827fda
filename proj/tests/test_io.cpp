#include <doctest.h>

#include "tunet/io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

using namespace tunet;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        static int counter = 0;
        path = fs::temp_directory_path() / ("tunet_io_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_CASE("mvol: single-voxel round trip") {
    TempDir tmp;
    Volume<float> v(Dims3{1, 1, 1}, Spacing{0.5, 0.5, 0.5});
    v.data[0] = 0.5f;
    write_volume(v, tmp.path / "a.mvol");
    Volume<float> r = read_scalar_volume(tmp.path / "a.mvol");
    CHECK(r.dims == v.dims);
    CHECK(r.spacing == v.spacing);
    CHECK(r.data[0] == 0.5f);
}

TEST_CASE("mvol: random volume round trips bit-exactly") {
    TempDir tmp;
    Volume<float> v(Dims3{3, 4, 5}, Spacing{1.5, 2.0, 3.0});
    SplitMix64 rng(99);
    for (Index i = 0; i < v.data.size(); ++i) v.data[i] = float(rng.uniform(-10, 10));
    write_volume(v, tmp.path / "r.mvol");
    Volume<float> r = read_scalar_volume(tmp.path / "r.mvol");
    CHECK(std::memcmp(r.data.data(), v.data.data(), std::size_t(v.data.size()) * 4) == 0);
    // file contents are also stable across rewrites
    std::string bytes1 = slurp(tmp.path / "r.mvol");
    write_volume(v, tmp.path / "r.mvol");
    CHECK(bytes1 == slurp(tmp.path / "r.mvol"));
}

TEST_CASE("mvol: label and mask round trips") {
    TempDir tmp;
    LabelMap lab(Dims3{4, 3, 2});
    for (Index i = 0; i < lab.data.size(); ++i) lab.data[i] = std::uint8_t(i % 3);
    write_volume(lab, tmp.path / "l.mvol");
    LabelMap rl = read_label_map(tmp.path / "l.mvol");
    CHECK((rl.data == lab.data).all());

    BinaryMask m(Dims3{2, 2, 2});
    m.data << 1, 0, 1, 1, 0, 0, 1, 0;
    write_volume(m, tmp.path / "m.mvol");
    BinaryMask rm = read_mask(tmp.path / "m.mvol");
    CHECK((rm.data == m.data).all());
}

TEST_CASE("mvol: error codes are distinct") {
    TempDir tmp;
    // wrong magic
    {
        std::ofstream out(tmp.path / "bad.mvol", std::ios::binary);
        out << "NOPE!everything else";
    }
    try {
        read_scalar_volume(tmp.path / "bad.mvol");
        FAIL("expected bad magic");
    } catch (const IoError& e) {
        CHECK(e.code == IoError::Code::bad_magic);
    }
    // truncated payload
    Volume<float> v(Dims3{4, 4, 4}, Spacing{});
    write_volume(v, tmp.path / "t.mvol");
    auto bytes = slurp(tmp.path / "t.mvol");
    {
        std::ofstream out(tmp.path / "t.mvol", std::ios::binary);
        out.write(bytes.data(), std::streamsize(bytes.size() - 17));
    }
    try {
        read_scalar_volume(tmp.path / "t.mvol");
        FAIL("expected truncation");
    } catch (const IoError& e) {
        CHECK(e.code == IoError::Code::truncated);
    }
    // absurd dims
    {
        std::ofstream out(tmp.path / "d.mvol", std::ios::binary);
        out.write("MVOL1", 5);
        char kec[3] = {0, 1, 0};
        out.write(kec, 3);
        for (int i = 0; i < 3; ++i) detail::put_u64(out, std::uint64_t(1) << 40);
        for (int i = 0; i < 3; ++i) detail::put_f64(out, 1.0);
    }
    try {
        read_scalar_volume(tmp.path / "d.mvol");
        FAIL("expected dim overflow");
    } catch (const IoError& e) {
        CHECK(e.code == IoError::Code::dim_overflow);
    }
    // kind mismatch
    LabelMap lab(Dims3{1, 1, 1});
    write_volume(lab, tmp.path / "k.mvol");
    try {
        read_scalar_volume(tmp.path / "k.mvol");
        FAIL("expected kind mismatch");
    } catch (const IoError& e) {
        CHECK(e.code == IoError::Code::kind_mismatch);
    }
}

TEST_CASE("manifest: round trip, duplicate detection, existence check") {
    TempDir tmp;
    Volume<float> v(Dims3{1, 1, 1}, Spacing{});
    LabelMap l(Dims3{1, 1, 1});
    write_volume(v, tmp.path / "c0_img.mvol");
    write_volume(l, tmp.path / "c0_lbl.mvol");
    CaseManifest m;
    m.cases.push_back({"c0", tmp.path / "c0_img.mvol", tmp.path / "c0_lbl.mvol"});
    save_manifest(m, tmp.path / "manifest.tsv");
    CaseManifest r = load_manifest(tmp.path / "manifest.tsv");
    REQUIRE(r.cases.size() == 1);
    CHECK(r.cases[0].id == "c0");

    m.cases.push_back({"c0", tmp.path / "c0_img.mvol", tmp.path / "c0_lbl.mvol"});
    save_manifest(m, tmp.path / "dup.tsv");
    CHECK_THROWS_AS(load_manifest(tmp.path / "dup.tsv"), IoError);

    CaseManifest missing;
    missing.cases.push_back({"c1", tmp.path / "absent.mvol", tmp.path / "c0_lbl.mvol"});
    save_manifest(missing, tmp.path / "missing.tsv");
    CHECK_THROWS_AS(load_manifest(tmp.path / "missing.tsv"), IoError);
}

TEST_CASE("manifest: relative paths resolve against manifest directory") {
    TempDir tmp;
    Volume<float> v(Dims3{1, 1, 1}, Spacing{});
    LabelMap l(Dims3{1, 1, 1});
    write_volume(v, tmp.path / "img.mvol");
    write_volume(l, tmp.path / "lbl.mvol");
    {
        std::ofstream out(tmp.path / "rel.tsv");
        out << "c0\timg.mvol\tlbl.mvol\n";
    }
    CaseManifest r = load_manifest(tmp.path / "rel.tsv");
    CHECK(fs::exists(r.cases[0].image_path));
}

namespace {
CaseManifest fake_manifest(int n) {
    CaseManifest m;
    for (int i = 0; i < n; ++i)
        m.cases.push_back({"case_" + std::to_string(i), "x", "y"});
    return m;
}
}  // namespace

TEST_CASE("split_folds: balanced sizes") {
    FoldSplit s = split_folds(fake_manifest(10), 5, 7);
    std::vector<int> sizes(5, 0);
    for (const auto& [id, f] : s.assignment) sizes[std::size_t(f)]++;
    for (int f = 0; f < 5; ++f) CHECK(sizes[std::size_t(f)] == 2);

    FoldSplit s11 = split_folds(fake_manifest(11), 5, 7);
    std::vector<int> sz(5, 0);
    for (const auto& [id, f] : s11.assignment) sz[std::size_t(f)]++;
    std::sort(sz.begin(), sz.end());
    CHECK(sz == std::vector<int>{2, 2, 2, 2, 3});
}

TEST_CASE("split_folds: deterministic and order-independent") {
    CaseManifest a = fake_manifest(9);
    CaseManifest b = a;
    std::reverse(b.cases.begin(), b.cases.end());
    FoldSplit s1 = split_folds(a, 3, 123);
    FoldSplit s2 = split_folds(b, 3, 123);
    CHECK(s1.assignment == s2.assignment);
    FoldSplit s3 = split_folds(a, 3, 124);
    CHECK(s1.assignment != s3.assignment);
}

TEST_CASE("split_folds: errors") {
    CHECK_THROWS_AS(split_folds(fake_manifest(0), 2, 1), DataError);
    CHECK_THROWS_AS(split_folds(fake_manifest(3), 5, 1), DataError);
    CHECK_THROWS_AS(split_folds(fake_manifest(3), 1, 1), DataError);
}

TEST_CASE("params: empty set round trips") {
    TempDir tmp;
    save_params({}, tmp.path / "empty.mpar");
    auto blocks = load_params(tmp.path / "empty.mpar");
    CHECK(blocks.empty());
}

TEST_CASE("params: blocks round trip bit-exactly") {
    TempDir tmp;
    std::vector<ParamFileEntry> blocks(2);
    blocks[0].name = "net/enc0/conv1/w";
    blocks[0].values.resize(54);
    blocks[1].name = "net/enc0/conv1/b";
    blocks[1].values.resize(2);
    SplitMix64 rng(5);
    for (auto& b : blocks)
        for (Index i = 0; i < b.values.size(); ++i) b.values[i] = float(rng.uniform(-1, 1));
    save_params(blocks, tmp.path / "p.mpar");
    auto r = load_params(tmp.path / "p.mpar");
    REQUIRE(r.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(r[i].name == blocks[i].name);
        CHECK(std::memcmp(r[i].values.data(), blocks[i].values.data(),
                          std::size_t(blocks[i].values.size()) * 4) == 0);
    }
}

TEST_CASE("kv sidecar round trip") {
    TempDir tmp;
    std::map<std::string, std::string> kv{{"depth", "3"}, {"kind", "wnet"}};
    save_kv(kv, tmp.path / "arch.txt");
    CHECK(load_kv(tmp.path / "arch.txt") == kv);
}
