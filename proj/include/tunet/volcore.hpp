#ifndef TUNET_VOLCORE_HPP
#define TUNET_VOLCORE_HPP

#include "tunet/volume.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace tunet {

/// Threshold comparison is inclusive: a voxel is foreground iff p >= t.
template <typename Scalar>
BinaryMask binarize(const ProbMap<Scalar>& p, double t) {
    require(t > 0.0 && t < 1.0, "binarize: threshold must lie in (0,1), got " + std::to_string(t));
    BinaryMask m(p.dims);
    m.data = (p.data >= Scalar(t)).template cast<std::uint8_t>();
    return m;
}

inline Index count_foreground(const BinaryMask& m) {
    return Index(m.data.template cast<std::int64_t>().sum());
}

/// Component index per voxel (0 = background, components numbered 1..count).
struct ComponentGrid : Grid3<std::int32_t> {
    ComponentGrid() = default;
    explicit ComponentGrid(Dims3 d) : Grid3<std::int32_t>(d, 0) {}
};

/// Labels foreground voxels into 26-connected components with an explicit
/// BFS worklist. Ids are assigned in raster-scan order of the first voxel
/// reached, so the result is deterministic.
inline std::pair<ComponentGrid, int> connected_components(const BinaryMask& m) {
    ComponentGrid comp(m.dims);
    const Index W = m.dims.w, H = m.dims.h, D = m.dims.d;
    int count = 0;
    std::vector<Index> worklist;
    for (Index z = 0; z < D; ++z)
        for (Index y = 0; y < H; ++y)
            for (Index x = 0; x < W; ++x) {
                const Index i = m.index(x, y, z);
                if (!m.data[i] || comp.data[i]) continue;
                ++count;
                comp.data[i] = count;
                worklist.assign(1, i);
                while (!worklist.empty()) {
                    const Index cur = worklist.back();
                    worklist.pop_back();
                    const Index cz = cur / (W * H);
                    const Index cy = (cur / W) % H;
                    const Index cx = cur % W;
                    for (Index dz = -1; dz <= 1; ++dz)
                        for (Index dy = -1; dy <= 1; ++dy)
                            for (Index dx = -1; dx <= 1; ++dx) {
                                if (!dx && !dy && !dz) continue;
                                const Index nx = cx + dx, ny = cy + dy, nz = cz + dz;
                                if (!m.in_bounds(nx, ny, nz)) continue;
                                const Index n = m.index(nx, ny, nz);
                                if (m.data[n] && !comp.data[n]) {
                                    comp.data[n] = count;
                                    worklist.push_back(n);
                                }
                            }
                }
            }
    return {std::move(comp), count};
}

/// Voxelwise product: values of `a` survive where `b` is set, zero elsewhere.
template <typename Scalar>
ProbMap<Scalar> mask_multiply(const ProbMap<Scalar>& a, const BinaryMask& b) {
    require(a.dims == b.dims,
            "mask_multiply: dims mismatch " + a.dims.str() + " vs " + b.dims.str());
    ProbMap<Scalar> out = a;
    out.data = a.data * b.data.template cast<Scalar>();
    return out;
}

inline LabelMap mask_multiply(const LabelMap& a, const BinaryMask& b) {
    require(a.dims == b.dims,
            "mask_multiply: dims mismatch " + a.dims.str() + " vs " + b.dims.str());
    LabelMap out = a;
    out.data = a.data * b.data;
    return out;
}

}  // namespace tunet

#endif
