#ifndef TUNET_VOLUME_HPP
#define TUNET_VOLUME_HPP

#include "tunet/types.hpp"

#include <cstdint>
#include <utility>

namespace tunet {

/// Dense 3D grid, row-major with x fastest: index = x + W*(y + H*z).
template <typename T>
struct Grid3 {
    Dims3 dims;
    ArrayX<T> data;

    Grid3() = default;
    explicit Grid3(Dims3 d, T fill = T(0)) : dims(d), data(ArrayX<T>::Constant(d.voxels(), fill)) {}

    Index index(Index x, Index y, Index z) const { return x + dims.w * (y + dims.h * z); }

    T& operator()(Index x, Index y, Index z) { return data[index(x, y, z)]; }
    T operator()(Index x, Index y, Index z) const { return data[index(x, y, z)]; }

    bool in_bounds(Index x, Index y, Index z) const {
        return x >= 0 && y >= 0 && z >= 0 && x < dims.w && y < dims.h && z < dims.d;
    }
};

/// Scalar volume with physical voxel spacing. The carrier for CT images and
/// probability maps.
template <typename Scalar>
struct Volume : Grid3<Scalar> {
    Spacing spacing;

    Volume() = default;
    Volume(Dims3 d, Spacing s, Scalar fill = Scalar(0)) : Grid3<Scalar>(d, fill), spacing(s) {}
};

/// A Volume whose values lie in [0, 1].
template <typename Scalar>
using ProbMap = Volume<Scalar>;

/// One foreground bit per voxel, stored as u8 in {0, 1}.
struct BinaryMask : Grid3<std::uint8_t> {
    BinaryMask() = default;
    explicit BinaryMask(Dims3 d, std::uint8_t fill = 0) : Grid3<std::uint8_t>(d, fill) {}
};

/// Per-voxel label: 0 = background, 1 = kidney, 2 = tumor.
struct LabelMap : Grid3<std::uint8_t> {
    LabelMap() = default;
    explicit LabelMap(Dims3 d, std::uint8_t fill = 0) : Grid3<std::uint8_t>(d, fill) {}
};

template <typename Scalar>
bool is_prob_map(const Volume<Scalar>& v) {
    return v.data.size() == 0 || (v.data.minCoeff() >= Scalar(0) && v.data.maxCoeff() <= Scalar(1));
}

}  // namespace tunet

#endif
