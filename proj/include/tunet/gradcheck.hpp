#ifndef TUNET_GRADCHECK_HPP
#define TUNET_GRADCHECK_HPP

#include "tunet/models.hpp"

#include <algorithm>
#include <functional>
#include <string>
#include <vector>

namespace tunet {

// Central-difference gradient verification, always in double. The projection
// trick turns a tensor output into a scalar functional: f = sum(R .* y) for a
// fixed random R, whose analytic gradient is backward(R).

struct GradCheckResult {
    std::string what;
    double max_rel_err = 0.0;
    Index checked = 0;
    Index skipped_ties = 0;
};

inline double rel_err(double a, double b) {
    const double denom = std::max({std::abs(a), std::abs(b), 1e-6});
    return std::abs(a - b) / denom;
}

namespace detail {

/// Central differences at h and h/2. For a locally smooth functional the two
/// agree to O(h^2); a relu/maxpool tie crossed by the perturbation makes them
/// disagree at the percent level, which flags the element as a measure-zero
/// tie point to exclude. A wrong analytic gradient cannot hide here: both
/// estimates would agree with each other and differ from the analytic value.
template <typename F>
bool central_diff_checked(double& x, F&& f, double h, double& fd_out) {
    const double x0 = x;
    x = x0 + h;
    const double fp = f();
    x = x0 - h;
    const double fm = f();
    x = x0 + h / 2;
    const double fp2 = f();
    x = x0 - h / 2;
    const double fm2 = f();
    x = x0;
    const double fd = (fp - fm) / (2.0 * h);
    const double fd2 = (fp2 - fm2) / h;
    fd_out = fd;
    return rel_err(fd, fd2) < 3e-5;
}

}  // namespace detail

namespace detail {

inline Tensor5<double> random_tensor(std::array<Index, 5> shape, SplitMix64& rng, double lo = -1.0,
                                     double hi = 1.0) {
    Tensor5<double> t(shape[0], shape[1], shape[2], shape[3], shape[4]);
    for (Index i = 0; i < t.data.size(); ++i) t.data[i] = rng.uniform(lo, hi);
    return t;
}

/// ReLU tie avoidance: push every element at least `margin` away from zero.
inline void away_from_zero(Tensor5<double>& t, double margin) {
    for (Index i = 0; i < t.data.size(); ++i)
        if (std::abs(t.data[i]) < margin) t.data[i] = t.data[i] < 0 ? -margin : margin;
}

/// MaxPool tie avoidance: regenerate each 2x2x2 window until its values are
/// pairwise separated by at least `gap`.
inline void pool_safe(Tensor5<double>& t, SplitMix64& rng, double gap) {
    for (Index n = 0; n < t.n(); ++n)
        for (Index c = 0; c < t.c(); ++c)
            for (Index d = 0; d + 1 < t.d(); d += 2)
                for (Index h = 0; h + 1 < t.h(); h += 2)
                    for (Index w = 0; w + 1 < t.w(); w += 2) {
                        for (int tries = 0; tries < 100; ++tries) {
                            double vals[8];
                            int k = 0;
                            for (Index dz = 0; dz < 2; ++dz)
                                for (Index dy = 0; dy < 2; ++dy)
                                    for (Index dx = 0; dx < 2; ++dx)
                                        vals[k++] = t.at(n, c, d + dz, h + dy, w + dx);
                            bool ok = true;
                            for (int i = 0; i < 8 && ok; ++i)
                                for (int j = i + 1; j < 8 && ok; ++j)
                                    if (std::abs(vals[i] - vals[j]) < gap) ok = false;
                            if (ok) break;
                            for (Index dz = 0; dz < 2; ++dz)
                                for (Index dy = 0; dy < 2; ++dy)
                                    for (Index dx = 0; dx < 2; ++dx)
                                        t.at(n, c, d + dz, h + dy, w + dx) = rng.uniform(-1.0, 1.0);
                        }
                    }
}

}  // namespace detail

/// Checks every input element and every parameter element of one layer.
inline GradCheckResult check_layer(Layer<double>& layer, std::vector<Tensor5<double>> inputs,
                                   SplitMix64& rng, const std::string& what, double h = 1e-3) {
    std::vector<const Tensor5<double>*> ptrs;
    for (auto& t : inputs) ptrs.push_back(&t);

    Tensor5<double> out = layer.forward(ptrs);
    Tensor5<double> proj = out;
    for (Index i = 0; i < proj.data.size(); ++i) proj.data[i] = rng.uniform(-1.0, 1.0);

    auto f = [&]() { return (layer.forward(ptrs).data * proj.data).sum(); };

    for (auto* p : layer.params()) p->grad.setZero();
    layer.forward(ptrs);
    std::vector<Tensor5<double>> gin = layer.backward(proj);

    GradCheckResult res{what, 0.0, 0, 0};
    auto check_elem = [&](double& x, double analytic) {
        double fd;
        if (!detail::central_diff_checked(x, f, h, fd)) {
            ++res.skipped_ties;
            return;
        }
        res.max_rel_err = std::max(res.max_rel_err, rel_err(analytic, fd));
        ++res.checked;
    };
    for (std::size_t t = 0; t < inputs.size(); ++t)
        for (Index i = 0; i < inputs[t].data.size(); ++i)
            check_elem(inputs[t].data[i], gin[t].data[i]);
    for (auto* p : layer.params()) {
        const ArrayX<double> g = p->grad;
        for (Index i = 0; i < p->value.size(); ++i) check_elem(p->value[i], g[i]);
    }
    return res;
}

/// One gradient check per layer type in the closed set.
inline std::vector<GradCheckResult> run_layer_gradient_checks(std::uint64_t seed, double h = 1e-3) {
    SplitMix64 rng(seed * 0x9e3779b97f4a7c15ull + 0x243f6a8885a308d3ull);
    std::vector<GradCheckResult> out;
    using detail::random_tensor;

    {
        Conv3D<double> conv("t/conv", 2, 3, rng);
        out.push_back(check_layer(conv, {random_tensor({1, 2, 4, 4, 4}, rng)}, rng, "conv3d", h));
    }
    {
        ReLU<double> relu;
        Tensor5<double> x = random_tensor({2, 2, 3, 3, 3}, rng);
        detail::away_from_zero(x, 50.0 * h);
        out.push_back(check_layer(relu, {x}, rng, "relu", h));
    }
    {
        Sigmoid<double> sig;
        out.push_back(check_layer(sig, {random_tensor({2, 2, 3, 3, 3}, rng)}, rng, "sigmoid", h));
    }
    {
        MaxPool3D<double> pool;
        Tensor5<double> x = random_tensor({1, 2, 4, 4, 4}, rng);
        detail::pool_safe(x, rng, 100.0 * h);
        out.push_back(check_layer(pool, {x}, rng, "maxpool3d", h));
    }
    {
        NearestUpsample3D<double> up;
        out.push_back(check_layer(up, {random_tensor({1, 2, 2, 2, 2}, rng)}, rng, "upsample3d", h));
    }
    {
        ConcatChannels<double> cat;
        out.push_back(check_layer(
            cat, {random_tensor({1, 2, 3, 3, 3}, rng), random_tensor({1, 3, 3, 3, 3}, rng)}, rng,
            "concat", h));
    }
    {
        AvgPoolToScalarPerChannel<double> gap;
        out.push_back(check_layer(gap, {random_tensor({1, 3, 2, 2, 2}, rng)}, rng, "gavgpool", h));
    }
    {
        Dense<double> dense("t/dense", 4, 3, rng);
        out.push_back(check_layer(dense, {random_tensor({2, 4, 1, 1, 1}, rng)}, rng, "dense", h));
    }
    {
        DownsampleInput<double> down(2);
        out.push_back(check_layer(down, {random_tensor({1, 2, 4, 4, 4}, rng)}, rng, "downsample", h));
    }
    {
        SEBlock<double> se("t/se", 4, 2, rng);
        out.push_back(check_layer(se, {random_tensor({1, 4, 2, 2, 2}, rng)}, rng, "seblock", h));
    }
    return out;
}

/// Combined-loss gradients through a depth-1 W-Net + T-Net cascade on a 4^3
/// patch, checked for every parameter of both networks and the input.
inline GradCheckResult check_cascade_gradients(std::uint64_t seed, double h = 1e-3) {
    SplitMix64 rng(seed * 0x9e3779b97f4a7c15ull + 0x13198a2e03707344ull);
    UNetSpec wspec{1, 2, 1, true, true, 2};
    UNetSpec tspec{1, 2, 2, true, true, 2};
    Graph<double> wnet = build_unet<double>(wspec, "wnet", rng);
    Graph<double> tnet = build_unet<double>(tspec, "tnet", rng);
    // Zero-initialized biases put relu kinks exactly at the evaluation point
    // wherever a receptive field is all-zero; shift the checking nets away
    // from those ties.
    for (Graph<double>* g : {&wnet, &tnet})
        for (auto* p : g->params())
            if (p->value.size() > 0 && p->name.ends_with("/b"))
                for (Index i = 0; i < p->value.size(); ++i) p->value[i] = rng.uniform(-0.2, 0.2);

    Tensor5<double> x = detail::random_tensor({1, 1, 4, 4, 4}, rng);
    ArrayX<double> mw(x.data.size()), mt(x.data.size());
    for (Index i = 0; i < mw.size(); ++i) {
        mw[i] = rng.uniform() < 0.5 ? 1.0 : 0.0;
        mt[i] = mw[i] != 0.0 && rng.uniform() < 0.5 ? 1.0 : 0.0;
    }

    auto f = [&]() {
        auto st = cascade_patch_forward(wnet, tnet, x, mw, mt);
        return st.l_whole + st.l_tumor;
    };

    wnet.zero_grads();
    tnet.zero_grads();
    auto st = cascade_patch_forward(wnet, tnet, x, mw, mt);
    Tensor5<double> gx = cascade_patch_backward(wnet, tnet, st, mw, mt);

    GradCheckResult res{"cascade_eq1", 0.0, 0, 0};
    auto check_elem = [&](double& v, double analytic) {
        double fd;
        if (!detail::central_diff_checked(v, f, h, fd)) {
            ++res.skipped_ties;
            return;
        }
        res.max_rel_err = std::max(res.max_rel_err, rel_err(analytic, fd));
        ++res.checked;
    };
    for (Graph<double>* g : {&wnet, &tnet})
        for (auto* p : g->params()) {
            const ArrayX<double> grad = p->grad;
            for (Index i = 0; i < p->value.size(); ++i) check_elem(p->value[i], grad[i]);
        }
    for (Index i = 0; i < x.data.size(); ++i) check_elem(x.data[i], gx.data[i]);
    return res;
}

}  // namespace tunet

#endif
