#ifndef TUNET_TYPES_HPP
#define TUNET_TYPES_HPP

#include <Eigen/Core>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace tunet {

using Index = Eigen::Index;

template <typename Scalar>
using ArrayX = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

/// Unusable or inconsistent input data (bad files, dimension mismatches).
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Numeric breakdown (NaN/Inf where finite values are required).
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Grid extents in voxels. Axis order is fixed project-wide: x (width) is the
/// fastest-varying index in memory, then y (height), then z (depth).
struct Dims3 {
    Index w = 0, h = 0, d = 0;

    Index voxels() const { return w * h * d; }
    bool operator==(const Dims3& o) const { return w == o.w && h == o.h && d == o.d; }
    bool operator!=(const Dims3& o) const { return !(*this == o); }

    std::string str() const {
        return std::to_string(w) + "x" + std::to_string(h) + "x" + std::to_string(d);
    }
};

/// Physical voxel size in millimeters along x/y/z.
struct Spacing {
    double dx = 1.0, dy = 1.0, dz = 1.0;

    bool valid() const { return dx > 0.0 && dy > 0.0 && dz > 0.0; }
    bool operator==(const Spacing& o) const { return dx == o.dx && dy == o.dy && dz == o.dz; }
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw DataError(msg);
}

}  // namespace tunet

#endif
