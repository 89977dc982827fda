#ifndef TUNET_POSTPROC_HPP
#define TUNET_POSTPROC_HPP

#include "tunet/preprocess.hpp"
#include "tunet/volcore.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace tunet {

/// The adaptive thresholding constants. The small-region cutoff is defined at
/// the 256x256x128 reference grid; scaled_for() adjusts it proportionally for
/// other volume sizes.
struct ThresholdPolicy {
    double global_t = 0.5;
    double whole_fallback = 0.1;
    double whole_refine_low = 0.4;
    double tumor_fallback_empty = 0.1;
    double tumor_refine_small = 0.2;
    double tumor_refine_default = 0.3;
    Index small_region_cutoff = 100;

    void validate() const {
        for (double t : {global_t, whole_fallback, whole_refine_low, tumor_fallback_empty,
                         tumor_refine_small, tumor_refine_default})
            require(t > 0.0 && t < 1.0, "threshold policy: thresholds must lie in (0,1)");
        require(whole_refine_low < global_t && tumor_refine_default < global_t,
                "threshold policy: refine thresholds must be below the global threshold");
        require(small_region_cutoff >= 0, "threshold policy: cutoff must be nonnegative");
    }

    static constexpr Index kReferenceVoxels = Index(256) * 256 * 128;

    ThresholdPolicy scaled_for(Dims3 dims) const {
        ThresholdPolicy p = *this;
        const double ratio = double(dims.voxels()) / double(kReferenceVoxels);
        p.small_region_cutoff = std::max<Index>(1, Index(std::llround(double(small_region_cutoff) * ratio)));
        return p;
    }
};

/// Region growing from an explicit seed set: components of binarize(p, t_low)
/// that touch the seed are merged into it.
template <typename Scalar>
BinaryMask region_grow_from_seed(const BinaryMask& seed, const ProbMap<Scalar>& p, double t_low) {
    require(seed.dims == p.dims, "region grow: dims mismatch");
    BinaryMask lowmask = binarize(p, t_low);
    auto [comp, count] = connected_components(lowmask);
    std::vector<char> keep(std::size_t(count) + 1, 0);
    for (Index i = 0; i < seed.data.size(); ++i)
        if (seed.data[i] && comp.data[i]) keep[std::size_t(comp.data[i])] = 1;
    BinaryMask out = seed;
    for (Index i = 0; i < out.data.size(); ++i)
        if (comp.data[i] && keep[std::size_t(comp.data[i])]) out.data[i] = 1;
    return out;
}

/// Two-threshold refinement: A = binarize(p, t_high) grows by absorbing the
/// connected components of B = binarize(p, t_low) that intersect it. The
/// result always satisfies A <= output <= A u B.
template <typename Scalar>
BinaryMask region_grow_refine(const ProbMap<Scalar>& p, double t_high, double t_low) {
    require(t_low < t_high, "region_grow_refine: t_low must be below t_high");
    return region_grow_from_seed(binarize(p, t_high), p, t_low);
}

enum class WholeBranch { refined, fallback_rebinarized };
enum class TumorBranch { refined_default, refined_small, fallback_rebinarized, fallback_whole_copy };

struct PostprocessTrace {
    WholeBranch whole = WholeBranch::refined;
    TumorBranch tumor = TumorBranch::refined_default;
    Index cutoff_used = 0;
};

inline BinaryMask resize_mask_nearest(const BinaryMask& m, Dims3 dims) {
    if (m.dims == dims) return m;
    BinaryMask out(dims);
    detail::resize_grid(m, out, Interp::nearest);
    return out;
}

/// Adaptive-threshold post-processing of one case.
///
/// Whole region: binarize at T; if empty, rebinarize at the fallback
/// threshold, otherwise refine with (T, 0.4). Tumor region: binarize at T; if
/// empty, rebinarize at 0.1 and, if still empty, substitute the whole region,
/// then refine from that seed; below the small-region cutoff refine with
/// (T, 0.2); otherwise with (T, 0.3). Tumor labels take precedence over
/// whole in the merge, and everything is gated by the binarized localization
/// mask (nearest-upsampled to the working grid).
template <typename Scalar>
LabelMap postprocess_case(const ProbMap<Scalar>& whole, const ProbMap<Scalar>& tumor,
                          const ProbMap<Scalar>& loc, const ThresholdPolicy& policy,
                          PostprocessTrace* trace = nullptr) {
    require(whole.dims == tumor.dims,
            "postprocess: whole/tumor dims mismatch " + whole.dims.str() + " vs " + tumor.dims.str());
    policy.validate();
    PostprocessTrace tr;
    tr.cutoff_used = policy.small_region_cutoff;

    BinaryMask whole_mask;
    {
        BinaryMask a = binarize(whole, policy.global_t);
        if (count_foreground(a) == 0) {
            whole_mask = binarize(whole, policy.whole_fallback);
            tr.whole = WholeBranch::fallback_rebinarized;
        } else {
            whole_mask = region_grow_from_seed(a, whole, policy.whole_refine_low);
            tr.whole = WholeBranch::refined;
        }
    }

    BinaryMask tumor_mask;
    {
        BinaryMask a = binarize(tumor, policy.global_t);
        const Index cnt = count_foreground(a);
        if (cnt == 0) {
            BinaryMask t = binarize(tumor, policy.tumor_fallback_empty);
            if (count_foreground(t) == 0) {
                t = whole_mask;
                tr.tumor = TumorBranch::fallback_whole_copy;
            } else {
                tr.tumor = TumorBranch::fallback_rebinarized;
            }
            tumor_mask = region_grow_from_seed(t, tumor, policy.tumor_fallback_empty);
        } else if (cnt < policy.small_region_cutoff) {
            tumor_mask = region_grow_from_seed(a, tumor, policy.tumor_refine_small);
            tr.tumor = TumorBranch::refined_small;
        } else {
            tumor_mask = region_grow_from_seed(a, tumor, policy.tumor_refine_default);
            tr.tumor = TumorBranch::refined_default;
        }
    }

    LabelMap lab(whole.dims);
    for (Index i = 0; i < lab.data.size(); ++i)
        lab.data[i] = tumor_mask.data[i] ? 2 : (whole_mask.data[i] ? 1 : 0);

    BinaryMask loc_mask = resize_mask_nearest(binarize(loc, policy.global_t), whole.dims);
    lab = mask_multiply(lab, loc_mask);

    if (trace) *trace = tr;
    return lab;
}

/// Plain global thresholding without refinement or localization gating; the
/// "no post-processing" readout of the pipeline.
template <typename Scalar>
LabelMap threshold_labels(const ProbMap<Scalar>& whole, const ProbMap<Scalar>& tumor,
                          double t = 0.5) {
    require(whole.dims == tumor.dims, "threshold_labels: dims mismatch");
    BinaryMask w = binarize(whole, t), tm = binarize(tumor, t);
    LabelMap lab(whole.dims);
    for (Index i = 0; i < lab.data.size(); ++i)
        lab.data[i] = tm.data[i] ? 2 : (w.data[i] ? 1 : 0);
    return lab;
}

/// Voxelwise mean of per-model probability maps. Sums are accumulated in
/// double so the result does not depend on the list order.
template <typename Scalar>
ProbMap<Scalar> ensemble_average(const std::vector<ProbMap<Scalar>>& maps) {
    require(!maps.empty(), "ensemble_average: empty model list");
    for (const auto& m : maps)
        require(m.dims == maps[0].dims, "ensemble_average: dims mismatch across models");
    ProbMap<Scalar> out = maps[0];
    ArrayX<double> acc = ArrayX<double>::Zero(maps[0].data.size());
    for (const auto& m : maps) acc += m.data.template cast<double>();
    out.data = (acc / double(maps.size())).template cast<Scalar>();
    return out;
}

}  // namespace tunet

#endif
