// tunet: cascaded 3D U-Net pipeline for kidney/tumor segmentation.
// Subcommands cover the whole pipeline: phantom data generation,
// preprocessing, training, patchwise prediction, post-processing,
// ensembling, evaluation and gradient checking.

#include <CLI11.hpp>

#include "tunet/gradcheck.hpp"
#include "tunet/phantom.hpp"
#include "tunet/trainer.hpp"

#include <atomic>
#include <cstdlib>
#include <iostream>
#include <mutex>
#include <thread>

namespace fs = std::filesystem;
using namespace tunet;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

int default_jobs() {
    if (const char* env = std::getenv("TUNET_JOBS")) {
        const int n = std::atoi(env);
        if (n >= 1) return n;
    }
    return 1;
}

void run_parallel(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
    jobs = std::max(1, jobs);
    if (jobs == 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::mutex err_mx;
    std::exception_ptr err;
    std::vector<std::thread> pool;
    for (int t = 0; t < jobs; ++t)
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(err_mx);
                    if (!err) err = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
}

Dims3 parse_dims_flag(const std::string& s) { return detail::parse_dims(s); }

Spacing parse_spacing_flag(const std::string& s) {
    Spacing sp;
    if (std::sscanf(s.c_str(), "%lf,%lf,%lf", &sp.dx, &sp.dy, &sp.dz) != 3 || !sp.valid())
        throw DataError("cannot parse spacing triple: " + s);
    return sp;
}

// ---------------------------------------------------------------------------
// phantom
// ---------------------------------------------------------------------------

struct PhantomArgs {
    std::string out;
    PhantomConfig cfg;
};

int cmd_phantom(const PhantomArgs& a) {
    CaseManifest m = write_phantom_dataset(a.out, a.cfg);
    std::cout << "wrote " << m.cases.size() << " phantom cases to " << a.out << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// preprocess
// ---------------------------------------------------------------------------

struct PreprocessArgs {
    std::string manifest, out;
    int divisor = 8;
    bool median = false;
    std::string spacing = "1,1,1";
    int jobs = default_jobs();
};

int cmd_preprocess(const PreprocessArgs& a) {
    CaseManifest manifest = load_manifest(a.manifest);
    if (manifest.cases.empty()) throw DataError("no cases in manifest " + a.manifest);
    require(a.divisor >= 1 && 256 % a.divisor == 0 && 128 % a.divisor == 0,
            "divisor must divide 256 and 128");
    const Dims3 final_dims{256 / a.divisor, 256 / a.divisor, 128 / a.divisor};
    const Spacing target = parse_spacing_flag(a.spacing);
    fs::create_directories(a.out);

    std::vector<std::optional<PreprocessedCase>> staged(manifest.cases.size());
    std::mutex log_mx;

    run_parallel(manifest.cases.size(), a.jobs, [&](std::size_t i) {
        const CaseRecord& rec = manifest.cases[i];
        try {
            Volume<float> img = read_scalar_volume(rec.image_path);
            LabelMap lbl = read_label_map(rec.label_path);
            staged[i] = preprocess_resample_stage(rec.id, img, lbl, target, a.median);
        } catch (const std::exception& e) {
            std::lock_guard lock(log_mx);
            std::cerr << "skipping case " << rec.id << ": " << e.what() << "\n";
        }
    });

    std::vector<PreprocessedCase> ok_cases;
    for (auto& st : staged)
        if (st) ok_cases.push_back(std::move(*st));
    if (ok_cases.empty()) throw DataError("preprocess: every case failed");
    const Dims3 padded = max_dims(ok_cases);

    CaseManifest out_manifest;
    std::mutex manifest_mx;
    run_parallel(ok_cases.size(), a.jobs, [&](std::size_t i) {
        PreprocessedCase& pc = ok_cases[i];
        preprocess_final_stage(pc, padded, final_dims);
        write_volume(pc.image, fs::path(a.out) / (pc.id + "_img.mvol"));
        write_volume(pc.label, fs::path(a.out) / (pc.id + "_lbl.mvol"), pc.image.spacing);
        save_plan(pc.plan, fs::path(a.out) / (pc.id + "_plan.txt"));
        std::lock_guard lock(manifest_mx);
        out_manifest.cases.push_back({pc.id, pc.id + "_img.mvol", pc.id + "_lbl.mvol"});
    });

    std::sort(out_manifest.cases.begin(), out_manifest.cases.end(),
              [](const CaseRecord& x, const CaseRecord& y) { return x.id < y.id; });
    save_manifest(out_manifest, fs::path(a.out) / "manifest.tsv");
    std::cout << "preprocessed " << out_manifest.cases.size() << "/" << manifest.cases.size()
              << " cases to " << a.out << " at " << final_dims.str() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
    std::string manifest, out;
    std::uint64_t seed = 1;
    int epochs = 200;
    int depth = 3;
    long base = 8;
    bool se = false;
    long se_reduction = 2;
    double lr = 1e-4;
    double l2 = 1e-5;
    double augment = 1.0;
    int divisor = 8;
    std::string patch, train_overlap, infer_overlap, lnet_dims;
    double val_frac = 0.2;
    int cv = 0;
};

std::vector<TrainCase> load_cases(const CaseManifest& manifest) {
    std::vector<TrainCase> cases;
    for (const CaseRecord& rec : manifest.cases) {
        TrainCase c;
        c.id = rec.id;
        c.image = read_scalar_volume(rec.image_path);
        c.label = read_label_map(rec.label_path);
        require(c.label.dims == c.image.dims, "image/label dims mismatch for case " + rec.id);
        cases.push_back(std::move(c));
    }
    return cases;
}

TrainConfig make_train_config(const TrainArgs& a) {
    TrainConfig cfg;
    cfg.seed = a.seed;
    cfg.max_epochs = a.epochs;
    cfg.adam.lr = a.lr;
    cfg.adam.l2 = a.l2;
    cfg.augment_degrees = a.augment;
    const Index div = a.divisor;
    cfg.patch_shape =
        a.patch.empty() ? Dims3{128 / div, 128 / div, 128 / div} : parse_dims_flag(a.patch);
    cfg.train_overlap = a.train_overlap.empty() ? Dims3{0, 0, 0} : parse_dims_flag(a.train_overlap);
    cfg.infer_overlap =
        a.infer_overlap.empty() ? Dims3{96 / div, 96 / div, 96 / div}
                                : parse_dims_flag(a.infer_overlap);
    cfg.bundle.depth = a.depth;
    cfg.bundle.base_channels = a.base;
    cfg.bundle.se = a.se;
    cfg.bundle.se_reduction = a.se_reduction;
    cfg.bundle.lnet_dims =
        a.lnet_dims.empty() ? Dims3{128 / div, 128 / div, 64 / div} : parse_dims_flag(a.lnet_dims);
    return cfg;
}

int cmd_train(const TrainArgs& a) {
    CaseManifest manifest = load_manifest(a.manifest);
    if (manifest.cases.empty()) throw DataError("no cases in manifest " + a.manifest);
    std::vector<TrainCase> cases = load_cases(manifest);
    TrainConfig cfg = make_train_config(a);
    check_dims_divisible(cfg.patch_shape, cfg.bundle.depth, "train: patch");
    fs::create_directories(a.out);

    if (a.cv > 0) {
        CvResult r = cross_validate(cases, a.cv, cfg, ThresholdPolicy{});
        write_file_atomic(fs::path(a.out) / "cv_metrics.csv",
                          [&](std::ostream& o) { o << format_cv_csv(r); });
        for (const auto& [region, v] : r.mean)
            std::cout << region << ": mean " << v << " sd " << r.sd.at(region) << "\n";
        return 0;
    }

    // deterministic train/val split via the fold machinery
    const int k = std::max(2, int(std::lround(1.0 / std::max(0.05, a.val_frac))));
    require(std::size_t(k) <= cases.size(), "not enough cases for the validation split");
    FoldSplit split = split_folds(manifest, k, a.seed);
    std::vector<TrainCase> tr, va;
    for (auto& c : cases) (split.assignment.at(c.id) == 0 ? va : tr).push_back(std::move(c));

    CascadeBundle<float> bundle = make_bundle<float>(cfg.bundle, cfg.seed);
    TrainResult result = train(bundle, tr, va, cfg);
    save_bundle(a.out, bundle, cfg.patch_shape, cfg.infer_overlap);
    write_file_atomic(fs::path(a.out) / "train_log.csv",
                      [&](std::ostream& o) { o << format_train_log(result.log); });
    std::cout << "trained " << result.log.size() << " epochs (best val " << result.best_val
              << " at epoch " << result.best_epoch
              << (result.early_stopped ? ", early-stopped" : "") << "); params in " << a.out
              << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// predict
// ---------------------------------------------------------------------------

struct PredictArgs {
    std::string manifest, params, out;
    std::string patch, overlap;
    int jobs = default_jobs();
};

int cmd_predict(const PredictArgs& a) {
    CaseManifest manifest = load_manifest(a.manifest);
    if (manifest.cases.empty()) throw DataError("no cases in manifest " + a.manifest);
    fs::create_directories(a.out);
    run_parallel(manifest.cases.size(), a.jobs, [&](std::size_t i) {
        // each worker owns a bundle instance; graphs cache activations and
        // cannot be shared across threads
        LoadedBundle lb = load_bundle(a.params);
        const Dims3 shape = a.patch.empty() ? lb.patch_shape : parse_dims_flag(a.patch);
        const Dims3 overlap = a.overlap.empty() ? lb.infer_overlap : parse_dims_flag(a.overlap);
        const CaseRecord& rec = manifest.cases[i];
        Volume<float> img = read_scalar_volume(rec.image_path);
        CascadeMaps<float> maps = cascade_forward(img, lb.bundle, shape, overlap);
        write_volume(maps.whole, fs::path(a.out) / (rec.id + "_whole.mvol"));
        write_volume(maps.tumor, fs::path(a.out) / (rec.id + "_tumor.mvol"));
        write_volume(maps.loc, fs::path(a.out) / (rec.id + "_loc.mvol"));
    });
    std::cout << "predicted " << manifest.cases.size() << " cases to " << a.out << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// postprocess
// ---------------------------------------------------------------------------

struct PostprocessArgs {
    std::string pred, manifest, out;
    ThresholdPolicy policy;
    bool naive = false;
    bool no_scale_cutoff = false;
    int jobs = default_jobs();
};

int cmd_postprocess(const PostprocessArgs& a) {
    CaseManifest manifest = load_manifest(a.manifest);
    if (manifest.cases.empty()) throw DataError("no cases in manifest " + a.manifest);
    fs::create_directories(a.out);
    std::vector<std::string> meta(manifest.cases.size());
    run_parallel(manifest.cases.size(), a.jobs, [&](std::size_t i) {
        const CaseRecord& rec = manifest.cases[i];
        ProbMap<float> whole = read_scalar_volume(fs::path(a.pred) / (rec.id + "_whole.mvol"));
        ProbMap<float> tumor = read_scalar_volume(fs::path(a.pred) / (rec.id + "_tumor.mvol"));
        LabelMap seg;
        std::string note;
        if (a.naive) {
            seg = threshold_labels(whole, tumor, a.policy.global_t);
            note = rec.id + "\tnaive_threshold\t" + std::to_string(a.policy.global_t);
        } else {
            ProbMap<float> loc = read_scalar_volume(fs::path(a.pred) / (rec.id + "_loc.mvol"));
            ThresholdPolicy policy = a.no_scale_cutoff ? a.policy : a.policy.scaled_for(whole.dims);
            PostprocessTrace trace;
            seg = postprocess_case(whole, tumor, loc, policy, &trace);
            note = rec.id + "\tcutoff\t" + std::to_string(trace.cutoff_used);
        }
        write_volume(seg, fs::path(a.out) / (rec.id + "_seg.mvol"), whole.spacing);
        meta[i] = note;
    });
    write_file_atomic(fs::path(a.out) / "postproc_meta.txt", [&](std::ostream& o) {
        for (const auto& line : meta) o << line << "\n";
    });
    std::cout << "post-processed " << manifest.cases.size() << " cases to " << a.out << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// ensemble
// ---------------------------------------------------------------------------

struct EnsembleArgs {
    std::vector<std::string> inputs;
    std::string manifest, out;
    int jobs = default_jobs();
};

int cmd_ensemble(const EnsembleArgs& a) {
    if (a.inputs.empty()) throw DataError("ensemble: no input directories");
    CaseManifest manifest = load_manifest(a.manifest);
    if (manifest.cases.empty()) throw DataError("no cases in manifest " + a.manifest);
    fs::create_directories(a.out);
    const char* kinds[] = {"_whole.mvol", "_tumor.mvol", "_loc.mvol"};
    run_parallel(manifest.cases.size(), a.jobs, [&](std::size_t i) {
        const CaseRecord& rec = manifest.cases[i];
        for (const char* kind : kinds) {
            std::vector<ProbMap<float>> maps;
            for (const std::string& dir : a.inputs)
                maps.push_back(read_scalar_volume(fs::path(dir) / (rec.id + kind)));
            write_volume(ensemble_average(maps), fs::path(a.out) / (rec.id + kind));
        }
    });
    std::cout << "ensembled " << a.inputs.size() << " models over " << manifest.cases.size()
              << " cases to " << a.out << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

struct EvaluateArgs {
    std::string pred, manifest, out;
    bool original_space = false;
    std::string plans, orig_manifest;
    int jobs = default_jobs();
};

int cmd_evaluate(const EvaluateArgs& a) {
    CaseManifest manifest = load_manifest(a.manifest);
    if (manifest.cases.empty()) throw DataError("no cases in manifest " + a.manifest);
    std::optional<CaseManifest> orig;
    if (a.original_space) {
        require(!a.plans.empty() && !a.orig_manifest.empty(),
                "evaluate: --original-space needs --plans and --orig-manifest");
        orig = load_manifest(a.orig_manifest);
    }

    std::vector<CaseMetrics> metrics(manifest.cases.size());
    run_parallel(manifest.cases.size(), a.jobs, [&](std::size_t i) {
        const CaseRecord& rec = manifest.cases[i];
        LabelMap pred = read_label_map(fs::path(a.pred) / (rec.id + "_seg.mvol"));
        LabelMap gt;
        if (a.original_space) {
            PreprocessPlan plan = load_plan(fs::path(a.plans) / (rec.id + "_plan.txt"));
            pred = invert_plan(pred, plan);
            const CaseRecord* orec = nullptr;
            for (const auto& r : orig->cases)
                if (r.id == rec.id) orec = &r;
            require(orec != nullptr, "evaluate: case " + rec.id + " missing from --orig-manifest");
            gt = read_label_map(orec->label_path);
        } else {
            gt = read_label_map(rec.label_path);
        }
        metrics[i] = evaluate_labels(pred, gt);
    });

    auto region_values = [&](auto getter) {
        std::vector<double> v;
        for (const auto& m : metrics) v.push_back(getter(m));
        return v;
    };
    auto mean_sd = [](const std::vector<double>& v) {
        double m = 0;
        for (double x : v) m += x;
        m /= double(v.size());
        double var = 0;
        for (double x : v) var += (x - m) * (x - m);
        return std::pair<double, double>(m, std::sqrt(var / double(v.size())));
    };
    const auto kt = mean_sd(region_values([](const CaseMetrics& m) { return m.kidney_tumor; }));
    const auto tu = mean_sd(region_values([](const CaseMetrics& m) { return m.tumor; }));
    const auto me = mean_sd(region_values([](const CaseMetrics& m) { return m.mean(); }));

    write_file_atomic(a.out, [&](std::ostream& o) {
        o.precision(9);
        o << "case_id,region,dsc,both_empty\n";
        for (std::size_t i = 0; i < metrics.size(); ++i) {
            const auto& m = metrics[i];
            const std::string& id = manifest.cases[i].id;
            o << id << ",kidney+tumor," << m.kidney_tumor << ',' << (m.kt_both_empty ? 1 : 0)
              << '\n';
            o << id << ",tumor," << m.tumor << ',' << (m.tumor_both_empty ? 1 : 0) << '\n';
            o << id << ",mean," << m.mean() << ",0\n";
        }
        o << "mean,kidney+tumor," << kt.first << ",\n";
        o << "mean,tumor," << tu.first << ",\n";
        o << "mean,mean," << me.first << ",\n";
        o << "sd,kidney+tumor," << kt.second << ",\n";
        o << "sd,tumor," << tu.second << ",\n";
        o << "sd,mean," << me.second << ",\n";
    });

    std::cout << "kidney+tumor: " << kt.first << " (" << kt.second << ")\n";
    std::cout << "tumor:        " << tu.first << " (" << tu.second << ")\n";
    std::cout << "metrics written to " << a.out << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// gradcheck
// ---------------------------------------------------------------------------

struct GradcheckArgs {
    int seeds = 20;
    double h = 1e-3;
    double tol = 1e-4;
};

int cmd_gradcheck(const GradcheckArgs& a) {
    bool ok = true;
    double worst_layer = 0, worst_cascade = 0;
    Index skipped = 0, checked = 0;
    for (int s = 1; s <= a.seeds; ++s) {
        for (const auto& r : run_layer_gradient_checks(std::uint64_t(s), a.h)) {
            worst_layer = std::max(worst_layer, r.max_rel_err);
            if (r.max_rel_err >= a.tol) {
                std::cout << "FAIL " << r.what << " seed " << s << " rel err " << r.max_rel_err
                          << "\n";
                ok = false;
            }
        }
        GradCheckResult c = check_cascade_gradients(std::uint64_t(s), a.h);
        worst_cascade = std::max(worst_cascade, c.max_rel_err);
        skipped += c.skipped_ties;
        checked += c.checked;
        if (c.max_rel_err >= a.tol) {
            std::cout << "FAIL cascade seed " << s << " rel err " << c.max_rel_err << "\n";
            ok = false;
        }
    }
    std::cout << "layers:  worst rel err " << worst_layer << " over " << a.seeds << " seeds\n";
    std::cout << "cascade: worst rel err " << worst_cascade << " (" << checked
              << " gradients checked, " << skipped << " tie points excluded)\n";
    std::cout << (ok ? "PASS" : "FAIL") << " at tolerance " << a.tol << "\n";
    return ok ? 0 : kExitNumeric;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cascaded 3D U-Net kidney/tumor segmentation pipeline"};
    app.require_subcommand(1);

    PhantomArgs ph;
    auto* sph = app.add_subcommand("phantom", "generate a synthetic sphere/blob dataset");
    sph->add_option("--out", ph.out, "output directory")->required();
    sph->add_option("--count", ph.cfg.count, "number of cases");
    sph->add_option("--seed", ph.cfg.seed, "generator seed");
    sph->add_option("--noise", ph.cfg.noise_sd, "additive noise SD");

    PreprocessArgs pp;
    auto* spp = app.add_subcommand("preprocess", "resample, pad, downsample, normalize");
    spp->add_option("--manifest", pp.manifest, "input manifest")->required();
    spp->add_option("--out", pp.out, "output directory")->required();
    spp->add_option("--divisor", pp.divisor, "desk-scale divisor of the 256x256x128 grid");
    spp->add_flag("--median", pp.median, "apply 3x3x3 median denoising");
    spp->add_option("--spacing", pp.spacing, "target spacing dx,dy,dz in mm");
    spp->add_option("--jobs", pp.jobs, "parallel cases");

    TrainArgs ta;
    auto* str_ = app.add_subcommand("train", "train the L-Net/W-Net/T-Net cascade");
    str_->add_option("--manifest", ta.manifest, "preprocessed manifest")->required();
    str_->add_option("--out", ta.out, "output directory")->required();
    str_->add_option("--seed", ta.seed, "training seed");
    str_->add_option("--epochs", ta.epochs, "max epochs");
    str_->add_option("--depth", ta.depth, "encoder levels");
    str_->add_option("--base", ta.base, "base channel count");
    str_->add_flag("--se", ta.se, "enable squeeze-and-excitation blocks");
    str_->add_option("--se-reduction", ta.se_reduction, "SE bottleneck reduction");
    str_->add_option("--lr", ta.lr, "learning rate");
    str_->add_option("--l2", ta.l2, "L2 coefficient on conv kernels");
    str_->add_option("--augment", ta.augment, "rotation augmentation bound in degrees");
    str_->add_option("--divisor", ta.divisor, "desk-scale divisor (sets default dims)");
    str_->add_option("--patch", ta.patch, "patch shape w,h,d");
    str_->add_option("--train-overlap", ta.train_overlap, "training patch overlap w,h,d");
    str_->add_option("--infer-overlap", ta.infer_overlap, "inference patch overlap w,h,d");
    str_->add_option("--lnet-dims", ta.lnet_dims, "L-Net input dims w,h,d");
    str_->add_option("--val-frac", ta.val_frac, "validation fraction");
    str_->add_option("--cv", ta.cv, "run k-fold cross-validation instead of a single fit");

    PredictArgs pr;
    auto* spr = app.add_subcommand("predict", "run the cascade, write probability maps");
    spr->add_option("--manifest", pr.manifest, "preprocessed manifest")->required();
    spr->add_option("--params", pr.params, "trained parameter directory")->required();
    spr->add_option("--out", pr.out, "output directory")->required();
    spr->add_option("--patch", pr.patch, "patch shape w,h,d");
    spr->add_option("--overlap", pr.overlap, "patch overlap w,h,d");
    spr->add_option("--jobs", pr.jobs, "parallel cases");

    PostprocessArgs po;
    auto* spo = app.add_subcommand("postprocess", "adaptive thresholding and merging");
    spo->add_option("--pred", po.pred, "probability map directory")->required();
    spo->add_option("--manifest", po.manifest, "manifest with case ids")->required();
    spo->add_option("--out", po.out, "output directory")->required();
    spo->add_option("--t", po.policy.global_t, "global threshold");
    spo->add_option("--whole-fallback", po.policy.whole_fallback, "whole empty-mask threshold");
    spo->add_option("--whole-low", po.policy.whole_refine_low, "whole refine threshold");
    spo->add_option("--tumor-empty", po.policy.tumor_fallback_empty, "tumor empty-mask threshold");
    spo->add_option("--tumor-small", po.policy.tumor_refine_small, "tumor small-region threshold");
    spo->add_option("--tumor-default", po.policy.tumor_refine_default, "tumor refine threshold");
    spo->add_option("--cutoff", po.policy.small_region_cutoff,
                    "small-region cutoff at the 256x256x128 reference grid");
    spo->add_flag("--no-scale-cutoff", po.no_scale_cutoff, "use the cutoff verbatim");
    spo->add_flag("--naive", po.naive, "plain global threshold, no refinement or gating");
    spo->add_option("--jobs", po.jobs, "parallel cases");

    EnsembleArgs en;
    auto* sen = app.add_subcommand("ensemble", "average probability maps of several models");
    sen->add_option("--inputs", en.inputs, "prediction directories")->required()->delimiter(',');
    sen->add_option("--manifest", en.manifest, "manifest with case ids")->required();
    sen->add_option("--out", en.out, "output directory")->required();
    sen->add_option("--jobs", en.jobs, "parallel cases");

    EvaluateArgs ev;
    auto* sev = app.add_subcommand("evaluate", "score segmentations against ground truth");
    sev->add_option("--pred", ev.pred, "segmentation directory")->required();
    sev->add_option("--manifest", ev.manifest, "manifest with ground-truth labels")->required();
    sev->add_option("--out", ev.out, "metrics CSV path")->required();
    sev->add_flag("--original-space", ev.original_space,
                  "invert preprocessing before scoring (needs --plans, --orig-manifest)");
    sev->add_option("--plans", ev.plans, "plan sidecar directory");
    sev->add_option("--orig-manifest", ev.orig_manifest, "manifest with original-space labels");
    sev->add_option("--jobs", ev.jobs, "parallel cases");

    GradcheckArgs gc;
    auto* sgc = app.add_subcommand("gradcheck", "finite-difference gradient verification");
    sgc->add_option("--seeds", gc.seeds, "number of random seeds");
    sgc->add_option("--step", gc.h, "finite-difference step");
    sgc->add_option("--tol", gc.tol, "relative error tolerance");

    try {
        app.parse(argc, argv);
        if (*sph) return cmd_phantom(ph);
        if (*spp) return cmd_preprocess(pp);
        if (*str_) return cmd_train(ta);
        if (*spr) return cmd_predict(pr);
        if (*spo) return cmd_postprocess(po);
        if (*sen) return cmd_ensemble(en);
        if (*sev) return cmd_evaluate(ev);
        if (*sgc) return cmd_gradcheck(gc);
        return kExitUsage;
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
}
