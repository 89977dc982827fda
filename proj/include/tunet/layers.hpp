#ifndef TUNET_LAYERS_HPP
#define TUNET_LAYERS_HPP

#include "tunet/rng.hpp"
#include "tunet/tensor.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstring>
#include <memory>
#include <string>
#include <vector>

namespace tunet {

/// Learnable array plus its gradient and Adam moment buffers, all
/// shape-congruent. `decay` marks blocks subject to L2 (conv kernels only).
template <typename Scalar>
struct ParamBlock {
    std::string name;
    ArrayX<Scalar> value, grad, m, v;
    bool decay = false;

    void resize(Index n) {
        value = ArrayX<Scalar>::Zero(n);
        grad = ArrayX<Scalar>::Zero(n);
        m = ArrayX<Scalar>::Zero(n);
        v = ArrayX<Scalar>::Zero(n);
    }

    /// He-uniform fan-in init: U(-sqrt(6/fan_in), +sqrt(6/fan_in)).
    void init_he_uniform(Index n, Index fan_in, SplitMix64& rng) {
        resize(n);
        const double limit = std::sqrt(6.0 / double(fan_in));
        for (Index i = 0; i < n; ++i) value[i] = Scalar(rng.uniform(-limit, limit));
    }
};

template <typename Scalar>
using MatRM = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using VecS = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// A layer owns its parameters and caches whatever the backward pass needs.
/// backward() must be called right after the forward() whose state it uses,
/// and returns one gradient tensor per input.
template <typename Scalar>
class Layer {
public:
    virtual ~Layer() = default;
    virtual const char* kind() const = 0;
    virtual Tensor5<Scalar> forward(const std::vector<const Tensor5<Scalar>*>& in) = 0;
    virtual std::vector<Tensor5<Scalar>> backward(const Tensor5<Scalar>& gout) = 0;
    virtual std::vector<ParamBlock<Scalar>*> params() { return {}; }
};

namespace detail {

template <typename Scalar>
const Tensor5<Scalar>& single(const std::vector<const Tensor5<Scalar>*>& in, const char* kind) {
    require(in.size() == 1, std::string(kind) + ": expected exactly one input");
    return *in[0];
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Conv3D: 3x3x3 kernel, stride 1, zero same-padding. im2col + GEMM on both
// passes; this is where nearly all of the training time goes.
// ---------------------------------------------------------------------------

template <typename Scalar>
class Conv3D : public Layer<Scalar> {
public:
    Conv3D(const std::string& name, Index cin, Index cout, SplitMix64& rng) : cin_(cin), cout_(cout) {
        w_.name = name + "/w";
        w_.decay = true;
        w_.init_he_uniform(cout * cin * 27, cin * 27, rng);
        b_.name = name + "/b";
        b_.resize(cout);
    }

    const char* kind() const override { return "conv3d"; }
    Index in_channels() const { return cin_; }
    Index out_channels() const { return cout_; }

    Tensor5<Scalar> forward(const std::vector<const Tensor5<Scalar>*>& in) override {
        const Tensor5<Scalar>& x = detail::single(in, kind());
        require(x.c() == cin_, "conv3d: expected " + std::to_string(cin_) + " input channels, got " +
                                   std::to_string(x.c()));
        x_ = x;
        const Index V = x.spatial();
        Tensor5<Scalar> out(x.n(), cout_, x.d(), x.h(), x.w());
        Eigen::Map<const MatRM<Scalar>> wmat(w_.value.data(), cout_, cin_ * 27);
        Eigen::Map<const VecS<Scalar>> bvec(b_.value.data(), cout_);
        for (Index n = 0; n < x.n(); ++n) {
            im2col(x, n);
            Eigen::Map<MatRM<Scalar>> ymat(out.data.data() + n * cout_ * V, cout_, V);
            ymat.noalias() = wmat * col_;
            ymat.colwise() += bvec;
        }
        return out;
    }

    std::vector<Tensor5<Scalar>> backward(const Tensor5<Scalar>& gout) override {
        require(x_.data.size() > 0, "conv3d: backward before forward");
        const Index V = x_.spatial();
        Tensor5<Scalar> dx = Tensor5<Scalar>::zeros_like(x_);
        Eigen::Map<const MatRM<Scalar>> wmat(w_.value.data(), cout_, cin_ * 27);
        Eigen::Map<MatRM<Scalar>> dwmat(w_.grad.data(), cout_, cin_ * 27);
        Eigen::Map<VecS<Scalar>> dbvec(b_.grad.data(), cout_);
        for (Index n = 0; n < x_.n(); ++n) {
            im2col(x_, n);
            Eigen::Map<const MatRM<Scalar>> gmat(gout.data.data() + n * cout_ * V, cout_, V);
            dwmat.noalias() += gmat * col_.transpose();
            dbvec.noalias() += gmat.rowwise().sum();
            colg_.resize(cin_ * 27, V);
            colg_.noalias() = wmat.transpose() * gmat;
            col2im_add(dx, n);
        }
        return {std::move(dx)};
    }

    std::vector<ParamBlock<Scalar>*> params() override { return {&w_, &b_}; }

private:
    void im2col(const Tensor5<Scalar>& x, Index n) {
        const Index D = x.d(), H = x.h(), W = x.w(), V = D * H * W;
        col_.resize(cin_ * 27, V);
        for (Index c = 0; c < cin_; ++c) {
            const Scalar* xc = x.data.data() + (n * cin_ + c) * V;
            for (Index kd = 0; kd < 3; ++kd)
                for (Index kh = 0; kh < 3; ++kh)
                    for (Index kw = 0; kw < 3; ++kw) {
                        Scalar* dst = col_.data() + (((c * 3 + kd) * 3 + kh) * 3 + kw) * V;
                        const Index od = kd - 1, oh = kh - 1, ow = kw - 1;
                        for (Index d = 0; d < D; ++d) {
                            const Index sd = d + od;
                            if (sd < 0 || sd >= D) {
                                std::memset(dst + d * H * W, 0, std::size_t(H * W) * sizeof(Scalar));
                                continue;
                            }
                            for (Index h = 0; h < H; ++h) {
                                const Index sh = h + oh;
                                Scalar* dr = dst + (d * H + h) * W;
                                if (sh < 0 || sh >= H) {
                                    std::memset(dr, 0, std::size_t(W) * sizeof(Scalar));
                                    continue;
                                }
                                const Scalar* src = xc + (sd * H + sh) * W;
                                if (ow == 0) {
                                    std::memcpy(dr, src, std::size_t(W) * sizeof(Scalar));
                                } else if (ow < 0) {
                                    dr[0] = Scalar(0);
                                    std::memcpy(dr + 1, src, std::size_t(W - 1) * sizeof(Scalar));
                                } else {
                                    std::memcpy(dr, src + 1, std::size_t(W - 1) * sizeof(Scalar));
                                    dr[W - 1] = Scalar(0);
                                }
                            }
                        }
                    }
        }
    }

    void col2im_add(Tensor5<Scalar>& dx, Index n) const {
        const Index D = dx.d(), H = dx.h(), W = dx.w(), V = D * H * W;
        for (Index c = 0; c < cin_; ++c) {
            Scalar* xc = dx.data.data() + (n * cin_ + c) * V;
            for (Index kd = 0; kd < 3; ++kd)
                for (Index kh = 0; kh < 3; ++kh)
                    for (Index kw = 0; kw < 3; ++kw) {
                        const Scalar* src = colg_.data() + (((c * 3 + kd) * 3 + kh) * 3 + kw) * V;
                        const Index od = kd - 1, oh = kh - 1, ow = kw - 1;
                        for (Index d = 0; d < D; ++d) {
                            const Index sd = d + od;
                            if (sd < 0 || sd >= D) continue;
                            for (Index h = 0; h < H; ++h) {
                                const Index sh = h + oh;
                                if (sh < 0 || sh >= H) continue;
                                Scalar* xrow = xc + (sd * H + sh) * W;
                                const Scalar* srow = src + (d * H + h) * W;
                                if (ow == 0)
                                    Eigen::Map<ArrayX<Scalar>>(xrow, W) +=
                                        Eigen::Map<const ArrayX<Scalar>>(srow, W);
                                else if (ow < 0)
                                    Eigen::Map<ArrayX<Scalar>>(xrow, W - 1) +=
                                        Eigen::Map<const ArrayX<Scalar>>(srow + 1, W - 1);
                                else
                                    Eigen::Map<ArrayX<Scalar>>(xrow + 1, W - 1) +=
                                        Eigen::Map<const ArrayX<Scalar>>(srow, W - 1);
                            }
                        }
                    }
        }
    }

    Index cin_, cout_;
    ParamBlock<Scalar> w_, b_;
    Tensor5<Scalar> x_;
    MatRM<Scalar> col_, colg_;
};

// ---------------------------------------------------------------------------

template <typename Scalar>
class ReLU : public Layer<Scalar> {
public:
    const char* kind() const override { return "relu"; }

    Tensor5<Scalar> forward(const std::vector<const Tensor5<Scalar>*>& in) override {
        const Tensor5<Scalar>& x = detail::single(in, kind());
        x_ = x;
        Tensor5<Scalar> out = x;
        out.data = x.data.max(Scalar(0));
        return out;
    }

    std::vector<Tensor5<Scalar>> backward(const Tensor5<Scalar>& gout) override {
        Tensor5<Scalar> dx = gout;
        dx.data = gout.data * (x_.data > Scalar(0)).template cast<Scalar>();
        return {std::move(dx)};
    }

private:
    Tensor5<Scalar> x_;
};

template <typename Scalar>
class Sigmoid : public Layer<Scalar> {
public:
    const char* kind() const override { return "sigmoid"; }

    Tensor5<Scalar> forward(const std::vector<const Tensor5<Scalar>*>& in) override {
        const Tensor5<Scalar>& x = detail::single(in, kind());
        y_ = x;
        y_.data = (Scalar(1) / (Scalar(1) + (-x.data).exp()));
        return y_;
    }

    std::vector<Tensor5<Scalar>> backward(const Tensor5<Scalar>& gout) override {
        Tensor5<Scalar> dx = gout;
        dx.data = gout.data * y_.data * (Scalar(1) - y_.data);
        return {std::move(dx)};
    }

private:
    Tensor5<Scalar> y_;
};

// ---------------------------------------------------------------------------

/// 2x2x2 max pooling, stride 2. Gradient routes to the argmax; ties keep the
/// first candidate in (d,h,w) scan order.
template <typename Scalar>
class MaxPool3D : public Layer<Scalar> {
public:
    const char* kind() const override { return "maxpool3d"; }

    Tensor5<Scalar> forward(const std::vector<const Tensor5<Scalar>*>& in) override {
        const Tensor5<Scalar>& x = detail::single(in, kind());
        require(x.d() % 2 == 0 && x.h() % 2 == 0 && x.w() % 2 == 0,
                "maxpool3d: odd spatial dims " + x.shape_str());
        in_shape_ = x.shape;
        Tensor5<Scalar> out(x.n(), x.c(), x.d() / 2, x.h() / 2, x.w() / 2);
        argmax_.resize(out.data.size());
        Index o = 0;
        for (Index n = 0; n < x.n(); ++n)
            for (Index c = 0; c < x.c(); ++c)
                for (Index d = 0; d < out.d(); ++d)
                    for (Index h = 0; h < out.h(); ++h)
                        for (Index w = 0; w < out.w(); ++w, ++o) {
                            Scalar best{};
                            Index best_i = -1;
                            for (Index dz = 0; dz < 2; ++dz)
                                for (Index dy = 0; dy < 2; ++dy)
                                    for (Index dxi = 0; dxi < 2; ++dxi) {
                                        const Index i =
                                            x.index(n, c, 2 * d + dz, 2 * h + dy, 2 * w + dxi);
                                        if (best_i < 0 || x.data[i] > best) {
                                            best = x.data[i];
                                            best_i = i;
                                        }
                                    }
                            out.data[o] = best;
                            argmax_[o] = best_i;
                        }
        return out;
    }

    std::vector<Tensor5<Scalar>> backward(const Tensor5<Scalar>& gout) override {
        Tensor5<Scalar> dx;
        dx.shape = in_shape_;
        dx.data = ArrayX<Scalar>::Zero(in_shape_[0] * in_shape_[1] * in_shape_[2] * in_shape_[3] *
                                       in_shape_[4]);
        for (Index o = 0; o < gout.data.size(); ++o) dx.data[argmax_[o]] += gout.data[o];
        return {std::move(dx)};
    }

private:
    std::array<Index, 5> in_shape_{};
    ArrayX<Index> argmax_;
};

/// Nearest-neighbor 2x upsampling; backward sums over each 2x2x2 replication
/// set.
template <typename Scalar>
class NearestUpsample3D : public Layer<Scalar> {
public:
    const char* kind() const override { return "upsample3d"; }

    Tensor5<Scalar> forward(const std::vector<const Tensor5<Scalar>*>& in) override {
        const Tensor5<Scalar>& x = detail::single(in, kind());
        in_shape_ = x.shape;
        Tensor5<Scalar> out(x.n(), x.c(), x.d() * 2, x.h() * 2, x.w() * 2);
        for (Index n = 0; n < x.n(); ++n)
            for (Index c = 0; c < x.c(); ++c)
                for (Index d = 0; d < out.d(); ++d)
                    for (Index h = 0; h < out.h(); ++h)
                        for (Index w = 0; w < out.w(); ++w)
                            out.at(n, c, d, h, w) = x.at(n, c, d / 2, h / 2, w / 2);
        return out;
    }

    std::vector<Tensor5<Scalar>> backward(const Tensor5<Scalar>& gout) override {
        Tensor5<Scalar> dx;
        dx.shape = in_shape_;
        dx.data = ArrayX<Scalar>::Zero(in_shape_[0] * in_shape_[1] * in_shape_[2] * in_shape_[3] *
                                       in_shape_[4]);
        for (Index n = 0; n < dx.n(); ++n)
            for (Index c = 0; c < dx.c(); ++c)
                for (Index d = 0; d < gout.d(); ++d)
                    for (Index h = 0; h < gout.h(); ++h)
                        for (Index w = 0; w < gout.w(); ++w)
                            dx.at(n, c, d / 2, h / 2, w / 2) += gout.at(n, c, d, h, w);
        return {std::move(dx)};
    }

private:
    std::array<Index, 5> in_shape_{};
};

/// Channel-wise concatenation of two or more tensors with equal N/D/H/W.
template <typename Scalar>
class ConcatChannels : public Layer<Scalar> {
public:
    const char* kind() const override { return "concat"; }

    Tensor5<Scalar> forward(const std::vector<const Tensor5<Scalar>*>& in) override {
        require(in.size() >= 2, "concat: needs at least two inputs");
        channels_.clear();
        Index ctot = 0;
        for (const auto* t : in) {
            require(t->n() == in[0]->n() && t->d() == in[0]->d() && t->h() == in[0]->h() &&
                        t->w() == in[0]->w(),
                    "concat: spatial/batch dims differ: " + t->shape_str() + " vs " +
                        in[0]->shape_str());
            channels_.push_back(t->c());
            ctot += t->c();
        }
        const Index N = in[0]->n(), V = in[0]->spatial();
        Tensor5<Scalar> out(N, ctot, in[0]->d(), in[0]->h(), in[0]->w());
        for (Index n = 0; n < N; ++n) {
            Index coff = 0;
            for (std::size_t i = 0; i < in.size(); ++i) {
                const Index ci = channels_[i];
                out.data.segment((n * ctot + coff) * V, ci * V) =
                    in[i]->data.segment(n * ci * V, ci * V);
                coff += ci;
            }
        }
        return out;
    }

    std::vector<Tensor5<Scalar>> backward(const Tensor5<Scalar>& gout) override {
        const Index N = gout.n(), V = gout.spatial(), ctot = gout.c();
        std::vector<Tensor5<Scalar>> grads;
        for (Index ci : channels_) grads.emplace_back(N, ci, gout.d(), gout.h(), gout.w());
        for (Index n = 0; n < N; ++n) {
            Index coff = 0;
            for (std::size_t i = 0; i < channels_.size(); ++i) {
                const Index ci = channels_[i];
                grads[i].data.segment(n * ci * V, ci * V) =
                    gout.data.segment((n * ctot + coff) * V, ci * V);
                coff += ci;
            }
        }
        return grads;
    }

private:
    std::vector<Index> channels_;
};

/// Global average pool to one scalar per channel: (N,C,D,H,W) -> (N,C,1,1,1).
template <typename Scalar>
class AvgPoolToScalarPerChannel : public Layer<Scalar> {
public:
    const char* kind() const override { return "gavgpool"; }

    Tensor5<Scalar> forward(const std::vector<const Tensor5<Scalar>*>& in) override {
        const Tensor5<Scalar>& x = detail::single(in, kind());
        in_shape_ = x.shape;
        const Index V = x.spatial();
        Tensor5<Scalar> out(x.n(), x.c(), 1, 1, 1);
        for (Index nc = 0; nc < x.n() * x.c(); ++nc)
            out.data[nc] = x.data.segment(nc * V, V).sum() / Scalar(V);
        return out;
    }

    std::vector<Tensor5<Scalar>> backward(const Tensor5<Scalar>& gout) override {
        Tensor5<Scalar> dx(in_shape_[0], in_shape_[1], in_shape_[2], in_shape_[3], in_shape_[4]);
        const Index V = dx.spatial();
        for (Index nc = 0; nc < dx.n() * dx.c(); ++nc)
            dx.data.segment(nc * V, V).setConstant(gout.data[nc] / Scalar(V));
        return {std::move(dx)};
    }

private:
    std::array<Index, 5> in_shape_{};
};

/// Bias-free fully connected map on (N,C,1,1,1) tensors.
template <typename Scalar>
class Dense : public Layer<Scalar> {
public:
    Dense(const std::string& name, Index cin, Index cout, SplitMix64& rng) : cin_(cin), cout_(cout) {
        w_.name = name + "/w";
        w_.init_he_uniform(cout * cin, cin, rng);
    }

    const char* kind() const override { return "dense"; }

    Tensor5<Scalar> forward(const std::vector<const Tensor5<Scalar>*>& in) override {
        const Tensor5<Scalar>& x = detail::single(in, kind());
        require(x.c() == cin_ && x.spatial() == 1, "dense: expected (N," + std::to_string(cin_) +
                                                       ",1,1,1), got " + x.shape_str());
        x_ = x;
        Tensor5<Scalar> out(x.n(), cout_, 1, 1, 1);
        Eigen::Map<const MatRM<Scalar>> wmat(w_.value.data(), cout_, cin_);
        for (Index n = 0; n < x.n(); ++n) {
            Eigen::Map<const VecS<Scalar>> xv(x.data.data() + n * cin_, cin_);
            Eigen::Map<VecS<Scalar>> yv(out.data.data() + n * cout_, cout_);
            yv.noalias() = wmat * xv;
        }
        return out;
    }

    std::vector<Tensor5<Scalar>> backward(const Tensor5<Scalar>& gout) override {
        Tensor5<Scalar> dx = Tensor5<Scalar>::zeros_like(x_);
        Eigen::Map<const MatRM<Scalar>> wmat(w_.value.data(), cout_, cin_);
        Eigen::Map<MatRM<Scalar>> dwmat(w_.grad.data(), cout_, cin_);
        for (Index n = 0; n < x_.n(); ++n) {
            Eigen::Map<const VecS<Scalar>> xv(x_.data.data() + n * cin_, cin_);
            Eigen::Map<const VecS<Scalar>> gv(gout.data.data() + n * cout_, cout_);
            Eigen::Map<VecS<Scalar>> dxv(dx.data.data() + n * cin_, cin_);
            dwmat.noalias() += gv * xv.transpose();
            dxv.noalias() = wmat.transpose() * gv;
        }
        return {std::move(dx)};
    }

    std::vector<ParamBlock<Scalar>*> params() override { return {&w_}; }

private:
    Index cin_, cout_;
    ParamBlock<Scalar> w_;
    Tensor5<Scalar> x_;
};

/// Non-overlapping average pool by an integer factor. Feeds raw input copies
/// into deeper encoder levels (the input pyramid).
template <typename Scalar>
class DownsampleInput : public Layer<Scalar> {
public:
    explicit DownsampleInput(Index factor) : factor_(factor) {}

    const char* kind() const override { return "downsample"; }
    Index factor() const { return factor_; }

    Tensor5<Scalar> forward(const std::vector<const Tensor5<Scalar>*>& in) override {
        const Tensor5<Scalar>& x = detail::single(in, kind());
        require(x.d() % factor_ == 0 && x.h() % factor_ == 0 && x.w() % factor_ == 0,
                "downsample: dims " + x.shape_str() + " not divisible by " + std::to_string(factor_));
        in_shape_ = x.shape;
        Tensor5<Scalar> out(x.n(), x.c(), x.d() / factor_, x.h() / factor_, x.w() / factor_);
        const Scalar inv = Scalar(1) / Scalar(factor_ * factor_ * factor_);
        for (Index n = 0; n < x.n(); ++n)
            for (Index c = 0; c < x.c(); ++c)
                for (Index d = 0; d < out.d(); ++d)
                    for (Index h = 0; h < out.h(); ++h)
                        for (Index w = 0; w < out.w(); ++w) {
                            Scalar acc = Scalar(0);
                            for (Index dz = 0; dz < factor_; ++dz)
                                for (Index dy = 0; dy < factor_; ++dy)
                                    for (Index dxi = 0; dxi < factor_; ++dxi)
                                        acc += x.at(n, c, d * factor_ + dz, h * factor_ + dy,
                                                    w * factor_ + dxi);
                            out.at(n, c, d, h, w) = acc * inv;
                        }
        return out;
    }

    std::vector<Tensor5<Scalar>> backward(const Tensor5<Scalar>& gout) override {
        Tensor5<Scalar> dx(in_shape_[0], in_shape_[1], in_shape_[2], in_shape_[3], in_shape_[4]);
        const Scalar inv = Scalar(1) / Scalar(factor_ * factor_ * factor_);
        for (Index n = 0; n < dx.n(); ++n)
            for (Index c = 0; c < dx.c(); ++c)
                for (Index d = 0; d < gout.d(); ++d)
                    for (Index h = 0; h < gout.h(); ++h)
                        for (Index w = 0; w < gout.w(); ++w) {
                            const Scalar g = gout.at(n, c, d, h, w) * inv;
                            for (Index dz = 0; dz < factor_; ++dz)
                                for (Index dy = 0; dy < factor_; ++dy)
                                    for (Index dxi = 0; dxi < factor_; ++dxi)
                                        dx.at(n, c, d * factor_ + dz, h * factor_ + dy,
                                              w * factor_ + dxi) = g;
                        }
        return {std::move(dx)};
    }

private:
    Index factor_;
    std::array<Index, 5> in_shape_{};
};

// ---------------------------------------------------------------------------
// Squeeze-and-excitation: squeeze to per-channel means, two bias-free dense
// maps with a bottleneck of C/r, sigmoid gate, rescale channels.
// ---------------------------------------------------------------------------

template <typename Scalar>
class SEBlock : public Layer<Scalar> {
public:
    SEBlock(const std::string& name, Index channels, Index reduction, SplitMix64& rng)
        : c_(channels), cr_(channels / reduction) {
        require(reduction >= 1 && channels % reduction == 0,
                "seblock: channels " + std::to_string(channels) + " not divisible by reduction " +
                    std::to_string(reduction));
        w1_.name = name + "/w1";
        w1_.init_he_uniform(cr_ * c_, c_, rng);
        w2_.name = name + "/w2";
        w2_.init_he_uniform(c_ * cr_, cr_, rng);
    }

    const char* kind() const override { return "seblock"; }

    Tensor5<Scalar> forward(const std::vector<const Tensor5<Scalar>*>& in) override {
        const Tensor5<Scalar>& x = detail::single(in, kind());
        require(x.c() == c_, "seblock: channel mismatch");
        x_ = x;
        const Index N = x.n(), V = x.spatial();
        s_.resize(N, c_);
        h1_.resize(N, cr_);
        z_.resize(N, c_);
        Tensor5<Scalar> out = x;
        Eigen::Map<const MatRM<Scalar>> w1m(w1_.value.data(), cr_, c_);
        Eigen::Map<const MatRM<Scalar>> w2m(w2_.value.data(), c_, cr_);
        for (Index n = 0; n < N; ++n) {
            for (Index c = 0; c < c_; ++c)
                s_(n, c) = x.data.segment((n * c_ + c) * V, V).sum() / Scalar(V);
            VecS<Scalar> h1 = w1m * s_.row(n).transpose();
            h1_.row(n) = h1.transpose();
            VecS<Scalar> a = h1.cwiseMax(Scalar(0));
            VecS<Scalar> z = (Scalar(1) / (Scalar(1) + (-(w2m * a).array()).exp())).matrix();
            z_.row(n) = z.transpose();
            for (Index c = 0; c < c_; ++c)
                out.data.segment((n * c_ + c) * V, V) *= z[c];
        }
        return out;
    }

    std::vector<Tensor5<Scalar>> backward(const Tensor5<Scalar>& gout) override {
        const Index N = x_.n(), V = x_.spatial();
        Tensor5<Scalar> dx = Tensor5<Scalar>::zeros_like(x_);
        Eigen::Map<const MatRM<Scalar>> w1m(w1_.value.data(), cr_, c_);
        Eigen::Map<const MatRM<Scalar>> w2m(w2_.value.data(), c_, cr_);
        Eigen::Map<MatRM<Scalar>> dw1m(w1_.grad.data(), cr_, c_);
        Eigen::Map<MatRM<Scalar>> dw2m(w2_.grad.data(), c_, cr_);
        for (Index n = 0; n < N; ++n) {
            VecS<Scalar> dz(c_);
            for (Index c = 0; c < c_; ++c) {
                const auto xc = x_.data.segment((n * c_ + c) * V, V);
                const auto gc = gout.data.segment((n * c_ + c) * V, V);
                dz[c] = (xc * gc).sum();
                dx.data.segment((n * c_ + c) * V, V) = gc * z_(n, c);
            }
            VecS<Scalar> z = z_.row(n).transpose();
            VecS<Scalar> dpre2 =
                (dz.array() * z.array() * (Scalar(1) - z.array())).matrix();
            VecS<Scalar> a = h1_.row(n).transpose().cwiseMax(Scalar(0));
            dw2m.noalias() += dpre2 * a.transpose();
            VecS<Scalar> da = w2m.transpose() * dpre2;
            VecS<Scalar> dh1 =
                (da.array() * (h1_.row(n).transpose().array() > Scalar(0)).template cast<Scalar>())
                    .matrix();
            dw1m.noalias() += dh1 * s_.row(n);
            VecS<Scalar> ds = w1m.transpose() * dh1;
            for (Index c = 0; c < c_; ++c)
                dx.data.segment((n * c_ + c) * V, V) += ds[c] / Scalar(V);
        }
        return {std::move(dx)};
    }

    std::vector<ParamBlock<Scalar>*> params() override { return {&w1_, &w2_}; }

private:
    Index c_, cr_;
    ParamBlock<Scalar> w1_, w2_;
    Tensor5<Scalar> x_;
    MatRM<Scalar> s_, h1_, z_;
};

}  // namespace tunet

#endif
