#ifndef TUNET_TRAINER_HPP
#define TUNET_TRAINER_HPP

#include "tunet/adam.hpp"
#include "tunet/models.hpp"
#include "tunet/postproc.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <vector>

namespace tunet {

// ---------------------------------------------------------------------------
// Learning-rate plateau schedule with early stopping. An epoch improves when
// the validation loss drops by at least min_delta below the best seen. After
// plateau_patience+1 consecutive non-improving epochs the rate drops once by
// drop_factor; after early_stop_patience+1 the run stops.
// ---------------------------------------------------------------------------

struct ScheduleState {
    double base_lr = 1e-4;
    double lr = 1e-4;
    int plateau_patience = 6;
    double drop_factor = 0.2;
    int early_stop_patience = 15;
    double min_delta = 1e-4;
    double best_val = std::numeric_limits<double>::infinity();
    int since_improvement = 0;
    int drops = 0;
};

struct ScheduleDecision {
    bool improved = false;
    bool dropped = false;
    bool stop = false;
};

inline ScheduleDecision schedule_update(ScheduleState& s, double val_loss) {
    ScheduleDecision d;
    if (val_loss <= s.best_val - s.min_delta) {
        s.best_val = val_loss;
        s.since_improvement = 0;
        d.improved = true;
        return d;
    }
    ++s.since_improvement;
    if (s.since_improvement == s.plateau_patience + 1) {
        ++s.drops;
        // computed from the base rate so lr is exactly base * factor^drops
        s.lr = s.base_lr * std::pow(s.drop_factor, double(s.drops));
        d.dropped = true;
    }
    if (s.since_improvement == s.early_stop_patience + 1) d.stop = true;
    return d;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct TrainCase {
    std::string id;
    Volume<float> image;
    LabelMap label;
};

struct TrainConfig {
    std::uint64_t seed = 1;
    int max_epochs = 200;
    AdamConfig adam;  // lr 1e-4, beta 0.9/0.999, L2 1e-5 on kernels
    double min_delta = 1e-4;
    int plateau_patience = 6;
    double drop_factor = 0.2;
    int early_stop_patience = 15;
    Dims3 patch_shape{16, 16, 16};
    Dims3 train_overlap{0, 0, 0};
    Dims3 infer_overlap{12, 12, 12};
    double augment_degrees = 1.0;
    BundleConfig bundle;
};

struct EpochLog {
    int epoch = 0;
    double lr = 0, l_whole = 0, l_tumor = 0, l_total = 0, val_total = 0;
};

struct TrainResult {
    std::vector<EpochLog> log;
    int best_epoch = -1;
    double best_val = std::numeric_limits<double>::infinity();
    bool early_stopped = false;
};

namespace detail {

inline ArrayX<float> mask_patch(const BinaryMask& m, Dims3 origin, Dims3 shape) {
    return extract_patch<std::uint8_t>(m, origin, shape).data.cast<float>();
}

}  // namespace detail

/// Validation loss of the full cascade on stitched, unaugmented volumes.
inline double validation_loss(CascadeBundle<float>& bundle, const std::vector<TrainCase>& cases,
                              const TrainConfig& cfg) {
    require(!cases.empty(), "validation_loss: no validation cases");
    double total = 0.0;
    for (const TrainCase& c : cases) {
        CascadeMaps<float> maps =
            cascade_forward(c.image, bundle, cfg.patch_shape, cfg.infer_overlap);
        total += combined_loss(maps.whole, maps.tumor, c.label).l_total;
    }
    return total / double(cases.size());
}

/// Trains the cascade: W-Net and T-Net jointly, patch by patch, with the
/// tumor gradient flowing through the W-Net output; L-Net separately on the
/// downsampled whole-region target, one step per case. The bundle holds the
/// best-validation parameters when this returns.
inline TrainResult train(CascadeBundle<float>& bundle, const std::vector<TrainCase>& train_cases,
                         const std::vector<TrainCase>& val_cases, const TrainConfig& cfg) {
    require(!train_cases.empty(), "train: no training cases");
    require(!val_cases.empty(), "train: no validation cases");

    std::vector<ParamBlock<float>*> joint_params = bundle.wnet.params();
    for (auto* p : bundle.tnet.params()) joint_params.push_back(p);
    std::vector<ParamBlock<float>*> lnet_params = bundle.lnet.params();

    AdamState<float> joint_adam{cfg.adam, 0};
    AdamState<float> lnet_adam{cfg.adam, 0};

    ScheduleState sched;
    sched.base_lr = cfg.adam.lr;
    sched.lr = cfg.adam.lr;
    sched.plateau_patience = cfg.plateau_patience;
    sched.drop_factor = cfg.drop_factor;
    sched.early_stop_patience = cfg.early_stop_patience;
    sched.min_delta = cfg.min_delta;

    SplitMix64 master(cfg.seed);
    TrainResult result;
    std::vector<ArrayX<float>> best_l, best_w, best_t;

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        double sum_lw = 0.0, sum_lt = 0.0;
        long steps = 0;
        for (std::size_t ci = 0; ci < train_cases.size(); ++ci) {
            const TrainCase& c = train_cases[ci];
            SplitMix64 aug_rng = master.fork(std::uint64_t(epoch) * 100003ull + ci);
            const double angle = aug_rng.uniform(-cfg.augment_degrees, cfg.augment_degrees);
            Volume<float> img = augment_rotate(c.image, angle);
            LabelMap lab = augment_rotate(c.label, angle);
            BinaryMask wm = whole_region(lab), tm = tumor_region(lab);

            PatchGrid grid = PatchGrid::make(img.dims, cfg.patch_shape, cfg.train_overlap);
            for (const Dims3& org : grid.origins) {
                Grid3<float> patch = extract_patch<float>(img, org, grid.shape);
                Tensor5<float> x(1, 1, grid.shape.d, grid.shape.h, grid.shape.w);
                x.data = patch.data;
                ArrayX<float> wmp = detail::mask_patch(wm, org, grid.shape);
                ArrayX<float> tmp = detail::mask_patch(tm, org, grid.shape);

                bundle.wnet.zero_grads();
                bundle.tnet.zero_grads();
                JointPatchState<float> st =
                    cascade_patch_forward(bundle.wnet, bundle.tnet, x, wmp, tmp);
                if (!std::isfinite(st.l_whole) || !std::isfinite(st.l_tumor))
                    throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) +
                                       ", case " + c.id);
                cascade_patch_backward(bundle.wnet, bundle.tnet, st, wmp, tmp);
                joint_adam.step(joint_params);
                sum_lw += st.l_whole;
                sum_lt += st.l_tumor;
                ++steps;
            }

            // L-Net: one step per case at its own working resolution. The
            // coarse target is inclusive (any covered voxel foreground) so
            // the learned gate covers the region instead of clipping it.
            Volume<float> lin = resize_to_dims(img, bundle.lnet_dims, Interp::trilinear);
            ArrayX<float> ltarget =
                downsample_mask_any(wm, bundle.lnet_dims).data.cast<float>();
            bundle.lnet.zero_grads();
            Tensor5<float> ly = bundle.lnet.forward(to_tensor(lin));
            ArrayX<float> dl;
            const double lloss = soft_dice_grad(ly.data, ltarget, dl);
            if (!std::isfinite(lloss))
                throw NumericError("train: non-finite L-Net loss at epoch " + std::to_string(epoch));
            Tensor5<float> lg = ly;
            lg.data = dl;
            bundle.lnet.backward(lg);
            lnet_adam.step(lnet_params);
        }

        const double val = validation_loss(bundle, val_cases, cfg);
        if (!std::isfinite(val))
            throw NumericError("train: non-finite validation loss at epoch " + std::to_string(epoch));

        EpochLog el;
        el.epoch = epoch;
        el.lr = sched.lr;
        el.l_whole = sum_lw / double(steps);
        el.l_tumor = sum_lt / double(steps);
        el.l_total = el.l_whole + el.l_tumor;
        el.val_total = val;
        result.log.push_back(el);

        ScheduleDecision d = schedule_update(sched, val);
        joint_adam.cfg.lr = sched.lr;
        lnet_adam.cfg.lr = sched.lr;
        if (d.improved) {
            result.best_epoch = epoch;
            result.best_val = val;
            best_l = snapshot_params(bundle.lnet);
            best_w = snapshot_params(bundle.wnet);
            best_t = snapshot_params(bundle.tnet);
        }
        if (d.stop) {
            result.early_stopped = true;
            break;
        }
    }

    if (result.best_epoch > 0) {
        restore_params(bundle.lnet, best_l);
        restore_params(bundle.wnet, best_w);
        restore_params(bundle.tnet, best_t);
    }
    return result;
}

inline std::string format_train_log(const std::vector<EpochLog>& log) {
    std::ostringstream out;
    out << "epoch,lr,l_whole,l_tumor,l_total,val_total\n";
    out.precision(9);
    for (const EpochLog& e : log)
        out << e.epoch << ',' << e.lr << ',' << e.l_whole << ',' << e.l_tumor << ',' << e.l_total
            << ',' << e.val_total << '\n';
    return out.str();
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

struct CaseMetrics {
    double kidney_tumor = 0.0;  // whole region: label >= 1
    double tumor = 0.0;         // label == 2
    bool kt_both_empty = false;
    bool tumor_both_empty = false;

    double mean() const { return 0.5 * (kidney_tumor + tumor); }
};

inline CaseMetrics evaluate_labels(const LabelMap& pred, const LabelMap& gt) {
    CaseMetrics m;
    DscResult kt = dsc(whole_region(pred), whole_region(gt));
    DscResult tu = dsc(tumor_region(pred), tumor_region(gt));
    m.kidney_tumor = kt.value;
    m.tumor = tu.value;
    m.kt_both_empty = kt.both_empty;
    m.tumor_both_empty = tu.both_empty;
    return m;
}

// ---------------------------------------------------------------------------
// k-fold cross-validation: one model per fold, evaluated on its held-out
// fold after post-processing. Per-fold RNG streams derive from the master
// seed by fold index.
// ---------------------------------------------------------------------------

struct CvResult {
    struct Row {
        int fold;
        std::string region;
        double value;
    };
    std::vector<Row> rows;
    std::map<std::string, double> mean, sd;
};

/// Population mean/SD per region over per-fold values.
inline void summarize_folds(CvResult& r) {
    std::map<std::string, std::vector<double>> by_region;
    for (const auto& row : r.rows) by_region[row.region].push_back(row.value);
    for (auto& [region, vals] : by_region) {
        double m = 0;
        for (double v : vals) m += v;
        m /= double(vals.size());
        double var = 0;
        for (double v : vals) var += (v - m) * (v - m);
        var /= double(vals.size());
        r.mean[region] = m;
        r.sd[region] = std::sqrt(var);
    }
}

inline CvResult cross_validate(const std::vector<TrainCase>& cases, int k, const TrainConfig& cfg,
                               const ThresholdPolicy& policy) {
    CaseManifest manifest;
    for (const auto& c : cases) manifest.cases.push_back({c.id, "", ""});
    FoldSplit split = split_folds(manifest, k, cfg.seed);

    CvResult result;
    for (int fold = 0; fold < k; ++fold) {
        std::vector<TrainCase> tr, va;
        for (const auto& c : cases)
            (split.assignment.at(c.id) == fold ? va : tr).push_back(c);

        TrainConfig fold_cfg = cfg;
        fold_cfg.seed = SplitMix64(cfg.seed).fork(std::uint64_t(fold) + 1).next();
        CascadeBundle<float> bundle = make_bundle<float>(fold_cfg.bundle, fold_cfg.seed);
        train(bundle, tr, va, fold_cfg);

        const ThresholdPolicy scaled = policy.scaled_for(va[0].image.dims);
        double kt = 0, tu = 0;
        for (const auto& c : va) {
            CascadeMaps<float> maps =
                cascade_forward(c.image, bundle, fold_cfg.patch_shape, fold_cfg.infer_overlap);
            LabelMap pred = postprocess_case(maps.whole, maps.tumor, maps.loc, scaled);
            CaseMetrics m = evaluate_labels(pred, c.label);
            kt += m.kidney_tumor;
            tu += m.tumor;
        }
        kt /= double(va.size());
        tu /= double(va.size());
        result.rows.push_back({fold, "kidney+tumor", kt});
        result.rows.push_back({fold, "tumor", tu});
        result.rows.push_back({fold, "mean", 0.5 * (kt + tu)});
    }
    summarize_folds(result);
    return result;
}

inline std::string format_cv_csv(const CvResult& r) {
    std::ostringstream out;
    out << "fold,region,dsc\n";
    out.precision(9);
    for (const auto& row : r.rows) out << row.fold << ',' << row.region << ',' << row.value << '\n';
    for (const auto& [region, v] : r.mean) out << "mean," << region << ',' << v << '\n';
    for (const auto& [region, v] : r.sd) out << "sd," << region << ',' << v << '\n';
    return out.str();
}

}  // namespace tunet

#endif
