#ifndef TUNET_LOSS_HPP
#define TUNET_LOSS_HPP

#include "tunet/volcore.hpp"

#include <cmath>
#include <string>

namespace tunet {

/// Whole region = kidney or tumor (label >= 1).
inline BinaryMask whole_region(const LabelMap& gt) {
    BinaryMask m(gt.dims);
    m.data = (gt.data >= 1).cast<std::uint8_t>();
    return m;
}

inline BinaryMask tumor_region(const LabelMap& gt) {
    BinaryMask m(gt.dims);
    m.data = (gt.data == 2).cast<std::uint8_t>();
    return m;
}

constexpr double kDiceEps = 1e-5;

/// Soft dice loss -2*sum(u*v) / (sum(u) + sum(v) + eps) over flat arrays.
/// Always in (-1, 0]. Accumulates in double regardless of Scalar.
template <typename Scalar>
double soft_dice(const ArrayX<Scalar>& u, const ArrayX<Scalar>& v, double eps = kDiceEps) {
    require(u.size() == v.size(), "soft_dice: size mismatch");
    const double inter = (u.template cast<double>() * v.template cast<double>()).sum();
    const double denom = u.template cast<double>().sum() + v.template cast<double>().sum() + eps;
    return -2.0 * inter / denom;
}

/// Loss plus analytic gradient w.r.t. u.
template <typename Scalar>
double soft_dice_grad(const ArrayX<Scalar>& u, const ArrayX<Scalar>& v, ArrayX<Scalar>& du,
                      double eps = kDiceEps) {
    require(u.size() == v.size(), "soft_dice: size mismatch");
    const double inter = (u.template cast<double>() * v.template cast<double>()).sum();
    const double denom = u.template cast<double>().sum() + v.template cast<double>().sum() + eps;
    const double loss = -2.0 * inter / denom;
    // d/du_i = -2 v_i / denom + 2 inter / denom^2
    du = (v.template cast<double>() * (-2.0 / denom) + 2.0 * inter / (denom * denom))
             .template cast<Scalar>();
    return loss;
}

template <typename Scalar>
double soft_dice_loss(const ProbMap<Scalar>& u, const BinaryMask& v, double eps = kDiceEps) {
    require(u.dims == v.dims, "soft_dice_loss: dims mismatch " + u.dims.str() + " vs " + v.dims.str());
    ArrayX<Scalar> vb = v.data.template cast<Scalar>();
    return soft_dice(u.data, vb, eps);
}

/// Combined loss: soft dice of the whole region plus soft dice of the tumor
/// region.
struct LossReport {
    double l_whole = 0.0;
    double l_tumor = 0.0;
    double l_total = 0.0;
    int epoch = 0;
    std::string split;
};

template <typename Scalar>
LossReport combined_loss(const ProbMap<Scalar>& whole_pred, const ProbMap<Scalar>& tumor_pred,
                         const LabelMap& gt, double eps = kDiceEps) {
    LossReport r;
    r.l_whole = soft_dice_loss(whole_pred, whole_region(gt), eps);
    r.l_tumor = soft_dice_loss(tumor_pred, tumor_region(gt), eps);
    r.l_total = r.l_whole + r.l_tumor;
    return r;
}

/// Sorensen-Dice coefficient between two masks. When both are empty the
/// overlap is vacuously perfect: value 1 with the flag set so reports can
/// mark it.
struct DscResult {
    double value = 0.0;
    bool both_empty = false;
};

inline DscResult dsc(const BinaryMask& x, const BinaryMask& y) {
    require(x.dims == y.dims, "dsc: dims mismatch " + x.dims.str() + " vs " + y.dims.str());
    const double nx = double(count_foreground(x));
    const double ny = double(count_foreground(y));
    if (nx == 0.0 && ny == 0.0) return {1.0, true};
    const double inter = double((x.data * y.data).template cast<std::int64_t>().sum());
    return {2.0 * inter / (nx + ny), false};
}

}  // namespace tunet

#endif
