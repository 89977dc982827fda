#ifndef TUNET_TENSOR_HPP
#define TUNET_TENSOR_HPP

#include "tunet/types.hpp"

#include <array>

namespace tunet {

/// Rank-5 array with shape (N, C, D, H, W), row-major with W fastest. The
/// sole currency of the network engine.
template <typename Scalar>
struct Tensor5 {
    std::array<Index, 5> shape{0, 0, 0, 0, 0};
    ArrayX<Scalar> data;

    Tensor5() = default;
    Tensor5(Index n, Index c, Index d, Index h, Index w, Scalar fill = Scalar(0))
        : shape{n, c, d, h, w}, data(ArrayX<Scalar>::Constant(n * c * d * h * w, fill)) {}

    static Tensor5 zeros_like(const Tensor5& o) {
        Tensor5 t;
        t.shape = o.shape;
        t.data = ArrayX<Scalar>::Zero(o.data.size());
        return t;
    }

    Index n() const { return shape[0]; }
    Index c() const { return shape[1]; }
    Index d() const { return shape[2]; }
    Index h() const { return shape[3]; }
    Index w() const { return shape[4]; }

    /// Voxels per channel.
    Index spatial() const { return shape[2] * shape[3] * shape[4]; }

    Index index(Index n, Index c, Index d, Index h, Index w) const {
        return (((n * shape[1] + c) * shape[2] + d) * shape[3] + h) * shape[4] + w;
    }

    Scalar& at(Index n, Index c, Index d, Index h, Index w) { return data[index(n, c, d, h, w)]; }
    Scalar at(Index n, Index c, Index d, Index h, Index w) const {
        return data[index(n, c, d, h, w)];
    }

    bool same_shape(const Tensor5& o) const { return shape == o.shape; }

    std::string shape_str() const {
        std::string s = "(";
        for (int i = 0; i < 5; ++i) s += std::to_string(shape[i]) + (i < 4 ? "," : ")");
        return s;
    }
};

}  // namespace tunet

#endif
