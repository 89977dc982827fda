#ifndef TUNET_PREPROCESS_HPP
#define TUNET_PREPROCESS_HPP

#include "tunet/io.hpp"
#include "tunet/rng.hpp"
#include "tunet/volume.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

namespace tunet {

// ---------------------------------------------------------------------------
// Interpolation primitives. Voxel (i) is sampled at its center, so resizing
// maps output index i to source coordinate (i + 0.5) * scale - 0.5.
// ---------------------------------------------------------------------------

enum class Interp { trilinear, nearest };

namespace detail {

template <typename T>
double sample_trilinear(const Grid3<T>& v, double x, double y, double z) {
    const Index x0 = Index(std::floor(x)), y0 = Index(std::floor(y)), z0 = Index(std::floor(z));
    const double fx = x - double(x0), fy = y - double(y0), fz = z - double(z0);
    auto clamp = [](Index i, Index n) { return std::min(std::max(i, Index(0)), n - 1); };
    double acc = 0.0;
    for (int dz = 0; dz <= 1; ++dz)
        for (int dy = 0; dy <= 1; ++dy)
            for (int dx = 0; dx <= 1; ++dx) {
                const double w = (dx ? fx : 1.0 - fx) * (dy ? fy : 1.0 - fy) * (dz ? fz : 1.0 - fz);
                if (w == 0.0) continue;
                acc += w * double(v(clamp(x0 + dx, v.dims.w), clamp(y0 + dy, v.dims.h),
                                    clamp(z0 + dz, v.dims.d)));
            }
    return acc;
}

template <typename T>
T sample_nearest(const Grid3<T>& v, double x, double y, double z) {
    auto near = [](double c, Index n) {
        Index i = Index(std::llround(c));
        return std::min(std::max(i, Index(0)), n - 1);
    };
    return v(near(x, v.dims.w), near(y, v.dims.h), near(z, v.dims.d));
}

template <typename TIn, typename TOut>
void resize_grid(const Grid3<TIn>& in, Grid3<TOut>& out, Interp mode) {
    const double sx = double(in.dims.w) / double(out.dims.w);
    const double sy = double(in.dims.h) / double(out.dims.h);
    const double sz = double(in.dims.d) / double(out.dims.d);
    for (Index z = 0; z < out.dims.d; ++z) {
        const double zc = (double(z) + 0.5) * sz - 0.5;
        for (Index y = 0; y < out.dims.h; ++y) {
            const double yc = (double(y) + 0.5) * sy - 0.5;
            for (Index x = 0; x < out.dims.w; ++x) {
                const double xc = (double(x) + 0.5) * sx - 0.5;
                if (mode == Interp::trilinear)
                    out(x, y, z) = TOut(sample_trilinear(in, xc, yc, zc));
                else
                    out(x, y, z) = TOut(sample_nearest(in, xc, yc, zc));
            }
        }
    }
}

}  // namespace detail

/// Resamples to a target physical spacing. New dims = round(dims * sp / target).
template <typename Scalar>
Volume<Scalar> resample(const Volume<Scalar>& v, Spacing target, Interp mode) {
    require(target.valid(), "resample: target spacing must be positive");
    Dims3 nd{Index(std::llround(double(v.dims.w) * v.spacing.dx / target.dx)),
             Index(std::llround(double(v.dims.h) * v.spacing.dy / target.dy)),
             Index(std::llround(double(v.dims.d) * v.spacing.dz / target.dz))};
    require(nd.w > 0 && nd.h > 0 && nd.d > 0, "resample: target spacing collapses a dimension");
    Volume<Scalar> out(nd, target);
    detail::resize_grid(v, out, mode);
    return out;
}

inline LabelMap resample(const LabelMap& v, Spacing current, Spacing target) {
    require(target.valid() && current.valid(), "resample: spacing must be positive");
    Dims3 nd{Index(std::llround(double(v.dims.w) * current.dx / target.dx)),
             Index(std::llround(double(v.dims.h) * current.dy / target.dy)),
             Index(std::llround(double(v.dims.d) * current.dz / target.dz))};
    require(nd.w > 0 && nd.h > 0 && nd.d > 0, "resample: target spacing collapses a dimension");
    LabelMap out(nd);
    detail::resize_grid(v, out, Interp::nearest);
    return out;
}

/// Resizes to explicit dims, keeping physical extent (spacing rescales).
template <typename Scalar>
Volume<Scalar> resize_to_dims(const Volume<Scalar>& v, Dims3 dims, Interp mode) {
    require(dims.w > 0 && dims.h > 0 && dims.d > 0, "resize_to_dims: dims must be positive");
    Spacing sp{v.spacing.dx * double(v.dims.w) / double(dims.w),
               v.spacing.dy * double(v.dims.h) / double(dims.h),
               v.spacing.dz * double(v.dims.d) / double(dims.d)};
    Volume<Scalar> out(dims, sp);
    detail::resize_grid(v, out, mode);
    return out;
}

inline LabelMap resize_to_dims(const LabelMap& v, Dims3 dims) {
    require(dims.w > 0 && dims.h > 0 && dims.d > 0, "resize_to_dims: dims must be positive");
    LabelMap out(dims);
    detail::resize_grid(v, out, Interp::nearest);
    return out;
}

/// Coarsens a mask so that a cell is foreground when any covered fine voxel
/// is. Used for localization targets, where the coarse mask must cover the
/// region rather than quantize its boundary away.
inline BinaryMask downsample_mask_any(const BinaryMask& m, Dims3 dims) {
    require(dims.w > 0 && dims.h > 0 && dims.d > 0, "downsample_mask_any: dims must be positive");
    require(dims.w <= m.dims.w && dims.h <= m.dims.h && dims.d <= m.dims.d,
            "downsample_mask_any: target dims exceed source");
    BinaryMask out(dims);
    auto lo = [](Index i, Index n_out, Index n_in) { return (i * n_in) / n_out; };
    auto hi = [](Index i, Index n_out, Index n_in) {
        return std::max(((i + 1) * n_in + n_out - 1) / n_out, (i * n_in) / n_out + 1);
    };
    for (Index z = 0; z < dims.d; ++z)
        for (Index y = 0; y < dims.h; ++y)
            for (Index x = 0; x < dims.w; ++x) {
                std::uint8_t any = 0;
                for (Index sz = lo(z, dims.d, m.dims.d); sz < hi(z, dims.d, m.dims.d) && !any; ++sz)
                    for (Index sy = lo(y, dims.h, m.dims.h); sy < hi(y, dims.h, m.dims.h) && !any;
                         ++sy)
                        for (Index sx = lo(x, dims.w, m.dims.w); sx < hi(x, dims.w, m.dims.w) && !any;
                             ++sx)
                            any = m(sx, sy, sz);
                out(x, y, z) = any;
            }
    return out;
}

/// Crop offsets [x1,x2,y1,y2,z1,z2]: voxels added below/above each axis.
using CropOffsets = std::array<Index, 6>;

namespace detail {

template <typename T>
void pad_grid(const Grid3<T>& in, Grid3<T>& out, const CropOffsets& off) {
    for (Index z = 0; z < in.dims.d; ++z)
        for (Index y = 0; y < in.dims.h; ++y) {
            const Index src = in.index(0, y, z);
            const Index dst = out.index(off[0], y + off[2], z + off[4]);
            out.data.segment(dst, in.dims.w) = in.data.segment(src, in.dims.w);
        }
}

}  // namespace detail

/// Centered zero-padding; when the gap is odd, the extra voxel goes to the
/// high side (x2/y2/z2).
template <typename T>
std::pair<Grid3<T>, CropOffsets> pad_to_impl(const Grid3<T>& v, Dims3 dims) {
    require(dims.w >= v.dims.w && dims.h >= v.dims.h && dims.d >= v.dims.d,
            "pad_to: target dims " + dims.str() + " smaller than input " + v.dims.str());
    const Index gx = dims.w - v.dims.w, gy = dims.h - v.dims.h, gz = dims.d - v.dims.d;
    CropOffsets off{gx / 2, gx - gx / 2, gy / 2, gy - gy / 2, gz / 2, gz - gz / 2};
    Grid3<T> out(dims, T(0));
    detail::pad_grid(v, out, off);
    return {std::move(out), off};
}

template <typename Scalar>
std::pair<Volume<Scalar>, CropOffsets> pad_to(const Volume<Scalar>& v, Dims3 dims) {
    auto [grid, off] = pad_to_impl<Scalar>(v, dims);
    Volume<Scalar> out;
    out.dims = grid.dims;
    out.data = std::move(grid.data);
    out.spacing = v.spacing;
    return {std::move(out), off};
}

inline std::pair<LabelMap, CropOffsets> pad_to(const LabelMap& v, Dims3 dims) {
    auto [grid, off] = pad_to_impl<std::uint8_t>(v, dims);
    LabelMap out;
    out.dims = grid.dims;
    out.data = std::move(grid.data);
    return {std::move(out), off};
}

template <typename T>
Grid3<T> crop(const Grid3<T>& v, const CropOffsets& off) {
    Dims3 nd{v.dims.w - off[0] - off[1], v.dims.h - off[2] - off[3], v.dims.d - off[4] - off[5]};
    require(nd.w > 0 && nd.h > 0 && nd.d > 0, "crop: offsets exceed dims");
    Grid3<T> out(nd);
    for (Index z = 0; z < nd.d; ++z)
        for (Index y = 0; y < nd.h; ++y)
            out.data.segment(out.index(0, y, z), nd.w) =
                v.data.segment(v.index(off[0], y + off[2], z + off[4]), nd.w);
    return out;
}

/// Shifts to zero mean and unit population variance. Constant volumes are an
/// error (zero standard deviation).
template <typename Scalar>
Volume<Scalar> normalize(const Volume<Scalar>& v) {
    const double n = double(v.data.size());
    const double mean = v.data.template cast<double>().sum() / n;
    const double var = (v.data.template cast<double>() - mean).square().sum() / n;
    if (var <= 0.0) throw DataError("normalize: constant volume has zero variance");
    const double inv_sd = 1.0 / std::sqrt(var);
    Volume<Scalar> out = v;
    out.data = ((v.data.template cast<double>() - mean) * inv_sd).template cast<Scalar>();
    return out;
}

/// 3x3x3 median filter with replicated borders.
template <typename Scalar>
Volume<Scalar> median_denoise(const Volume<Scalar>& v) {
    Volume<Scalar> out = v;
    std::array<Scalar, 27> window;
    auto clampi = [](Index i, Index n) { return std::min(std::max(i, Index(0)), n - 1); };
    for (Index z = 0; z < v.dims.d; ++z)
        for (Index y = 0; y < v.dims.h; ++y)
            for (Index x = 0; x < v.dims.w; ++x) {
                int k = 0;
                for (Index dz = -1; dz <= 1; ++dz)
                    for (Index dy = -1; dy <= 1; ++dy)
                        for (Index dx = -1; dx <= 1; ++dx)
                            window[std::size_t(k++)] =
                                v(clampi(x + dx, v.dims.w), clampi(y + dy, v.dims.h),
                                  clampi(z + dz, v.dims.d));
                std::nth_element(window.begin(), window.begin() + 13, window.end());
                out(x, y, z) = window[13];
            }
    return out;
}

// ---------------------------------------------------------------------------
// In-plane (axial) rotation about the volume center. Trilinear for images,
// nearest for labels; samples falling outside are filled with the volume
// minimum (background air for CT) or label 0.
// ---------------------------------------------------------------------------

template <typename Scalar>
Volume<Scalar> augment_rotate(const Volume<Scalar>& v, double angle_deg) {
    Volume<Scalar> out = v;
    if (angle_deg == 0.0) return out;
    const double rad = angle_deg * 3.14159265358979323846 / 180.0;
    const double c = std::cos(rad), s = std::sin(rad);
    const double cx = double(v.dims.w - 1) / 2.0, cy = double(v.dims.h - 1) / 2.0;
    const Scalar fill = v.data.minCoeff();
    for (Index z = 0; z < v.dims.d; ++z)
        for (Index y = 0; y < v.dims.h; ++y)
            for (Index x = 0; x < v.dims.w; ++x) {
                const double rx = double(x) - cx, ry = double(y) - cy;
                const double sx = c * rx + s * ry + cx;
                const double sy = -s * rx + c * ry + cy;
                if (sx < -0.5 || sy < -0.5 || sx > double(v.dims.w) - 0.5 ||
                    sy > double(v.dims.h) - 0.5)
                    out(x, y, z) = fill;
                else
                    out(x, y, z) = Scalar(detail::sample_trilinear(v, sx, sy, double(z)));
            }
    return out;
}

inline LabelMap augment_rotate(const LabelMap& v, double angle_deg) {
    LabelMap out = v;
    if (angle_deg == 0.0) return out;
    const double rad = angle_deg * 3.14159265358979323846 / 180.0;
    const double c = std::cos(rad), s = std::sin(rad);
    const double cx = double(v.dims.w - 1) / 2.0, cy = double(v.dims.h - 1) / 2.0;
    for (Index z = 0; z < v.dims.d; ++z)
        for (Index y = 0; y < v.dims.h; ++y)
            for (Index x = 0; x < v.dims.w; ++x) {
                const double rx = double(x) - cx, ry = double(y) - cy;
                const double sx = c * rx + s * ry + cx;
                const double sy = -s * rx + c * ry + cy;
                if (sx < -0.5 || sy < -0.5 || sx > double(v.dims.w) - 0.5 ||
                    sy > double(v.dims.h) - 0.5)
                    out(x, y, z) = 0;
                else
                    out(x, y, z) = detail::sample_nearest(v, sx, sy, double(z));
            }
    return out;
}

// ---------------------------------------------------------------------------
// Patch grids: sliding window with overlap; when the last stride does not
// land flush with the boundary, one extra patch is shifted flush (its overlap
// grows) so every voxel is covered.
// ---------------------------------------------------------------------------

struct PatchGrid {
    Dims3 shape;
    Dims3 overlap;
    std::vector<Dims3> origins;  // ordered by z, then y, then x

    static std::vector<Index> axis_origins(Index dim, Index shape, Index stride) {
        std::vector<Index> out;
        for (Index o = 0; o + shape <= dim; o += stride) out.push_back(o);
        if (out.empty() || out.back() + shape < dim) out.push_back(dim - shape);
        return out;
    }

    static PatchGrid make(Dims3 dims, Dims3 shape, Dims3 overlap) {
        require(shape.w <= dims.w && shape.h <= dims.h && shape.d <= dims.d,
                "patch shape " + shape.str() + " exceeds volume dims " + dims.str());
        Dims3 stride{shape.w - overlap.w, shape.h - overlap.h, shape.d - overlap.d};
        require(stride.w >= 1 && stride.h >= 1 && stride.d >= 1,
                "patch overlap must be smaller than the patch shape");
        PatchGrid g;
        g.shape = shape;
        g.overlap = overlap;
        auto xs = axis_origins(dims.w, shape.w, stride.w);
        auto ys = axis_origins(dims.h, shape.h, stride.h);
        auto zs = axis_origins(dims.d, shape.d, stride.d);
        for (Index z : zs)
            for (Index y : ys)
                for (Index x : xs) g.origins.push_back(Dims3{x, y, z});
        return g;
    }
};

template <typename T>
Grid3<T> extract_patch(const Grid3<T>& v, Dims3 origin, Dims3 shape) {
    require(origin.w >= 0 && origin.h >= 0 && origin.d >= 0 && origin.w + shape.w <= v.dims.w &&
                origin.h + shape.h <= v.dims.h && origin.d + shape.d <= v.dims.d,
            "extract_patch: patch outside volume");
    Grid3<T> out(shape);
    for (Index z = 0; z < shape.d; ++z)
        for (Index y = 0; y < shape.h; ++y)
            out.data.segment(out.index(0, y, z), shape.w) =
                v.data.segment(v.index(origin.w, origin.h + y, origin.d + z), shape.w);
    return out;
}

template <typename Scalar>
std::vector<Volume<Scalar>> extract_patches(const Volume<Scalar>& v, const PatchGrid& g) {
    std::vector<Volume<Scalar>> out;
    out.reserve(g.origins.size());
    for (const Dims3& o : g.origins) {
        Grid3<Scalar> p = extract_patch<Scalar>(v, o, g.shape);
        Volume<Scalar> vol;
        vol.dims = p.dims;
        vol.data = std::move(p.data);
        vol.spacing = v.spacing;
        out.push_back(std::move(vol));
    }
    return out;
}

/// Streaming mean-stitcher: each voxel of the result is the arithmetic mean
/// of all patch predictions covering it. Sums are accumulated in double so a
/// constant prediction reconstructs exactly.
template <typename Scalar>
class PatchAccumulator {
public:
    explicit PatchAccumulator(Dims3 dims)
        : dims_(dims),
          sum_(ArrayX<double>::Zero(dims.voxels())),
          cnt_(ArrayX<std::int32_t>::Zero(dims.voxels())) {}

    void add(const Grid3<Scalar>& patch, Dims3 origin) {
        require(origin.w >= 0 && origin.h >= 0 && origin.d >= 0 &&
                    origin.w + patch.dims.w <= dims_.w && origin.h + patch.dims.h <= dims_.h &&
                    origin.d + patch.dims.d <= dims_.d,
                "stitch: patch outside volume");
        for (Index z = 0; z < patch.dims.d; ++z)
            for (Index y = 0; y < patch.dims.h; ++y) {
                const Index dst = origin.w + dims_.w * (origin.h + y + dims_.h * (origin.d + z));
                sum_.segment(dst, patch.dims.w) +=
                    patch.data.segment(patch.index(0, y, z), patch.dims.w).template cast<double>();
                cnt_.segment(dst, patch.dims.w) += 1;
            }
    }

    ProbMap<Scalar> finish(Spacing spacing = {}) const {
        if ((cnt_ == 0).any()) throw DataError("stitch: coverage hole, some voxel has no patch");
        ProbMap<Scalar> out(dims_, spacing);
        out.data = (sum_ / cnt_.cast<double>()).template cast<Scalar>();
        return out;
    }

private:
    Dims3 dims_;
    ArrayX<double> sum_;
    ArrayX<std::int32_t> cnt_;
};

template <typename Scalar>
ProbMap<Scalar> stitch_patches(const std::vector<Volume<Scalar>>& patches,
                               const std::vector<Dims3>& origins, Dims3 dims) {
    require(patches.size() == origins.size(), "stitch: patches/origins size mismatch");
    PatchAccumulator<Scalar> acc(dims);
    for (std::size_t i = 0; i < patches.size(); ++i) acc.add(patches[i], origins[i]);
    return acc.finish(patches.empty() ? Spacing{} : patches[0].spacing);
}

// ---------------------------------------------------------------------------
// PreprocessPlan: everything needed to map a prediction at final dims back to
// the original geometry. Serialized as a text sidecar next to each
// preprocessed volume.
// ---------------------------------------------------------------------------

struct PreprocessPlan {
    Dims3 orig_dims;
    Spacing orig_spacing;
    Spacing target_spacing;
    Dims3 resampled_dims;
    Dims3 padded_dims;
    CropOffsets crop_offsets{0, 0, 0, 0, 0, 0};
    Dims3 final_dims;

    bool operator==(const PreprocessPlan& o) const {
        return orig_dims == o.orig_dims && orig_spacing == o.orig_spacing &&
               target_spacing == o.target_spacing && resampled_dims == o.resampled_dims &&
               padded_dims == o.padded_dims && crop_offsets == o.crop_offsets &&
               final_dims == o.final_dims;
    }
};

inline void save_plan(const PreprocessPlan& p, const std::filesystem::path& path) {
    write_file_atomic(path, [&](std::ostream& out) {
        out.precision(17);
        out << "mvolplan 1\n";
        out << "orig_dims " << p.orig_dims.w << ' ' << p.orig_dims.h << ' ' << p.orig_dims.d << '\n';
        out << "orig_spacing " << p.orig_spacing.dx << ' ' << p.orig_spacing.dy << ' '
            << p.orig_spacing.dz << '\n';
        out << "target_spacing " << p.target_spacing.dx << ' ' << p.target_spacing.dy << ' '
            << p.target_spacing.dz << '\n';
        out << "resampled_dims " << p.resampled_dims.w << ' ' << p.resampled_dims.h << ' '
            << p.resampled_dims.d << '\n';
        out << "padded_dims " << p.padded_dims.w << ' ' << p.padded_dims.h << ' '
            << p.padded_dims.d << '\n';
        out << "crop_offsets";
        for (Index o : p.crop_offsets) out << ' ' << o;
        out << '\n';
        out << "final_dims " << p.final_dims.w << ' ' << p.final_dims.h << ' ' << p.final_dims.d
            << '\n';
    });
}

inline PreprocessPlan load_plan(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError(IoError::Code::unreadable, "cannot open plan " + path.string());
    PreprocessPlan p;
    std::string line;
    bool saw_magic = false;
    while (std::getline(in, line)) {
        std::istringstream ss(line);
        std::string key;
        ss >> key;
        if (key == "mvolplan")
            saw_magic = true;
        else if (key == "orig_dims")
            ss >> p.orig_dims.w >> p.orig_dims.h >> p.orig_dims.d;
        else if (key == "orig_spacing")
            ss >> p.orig_spacing.dx >> p.orig_spacing.dy >> p.orig_spacing.dz;
        else if (key == "target_spacing")
            ss >> p.target_spacing.dx >> p.target_spacing.dy >> p.target_spacing.dz;
        else if (key == "resampled_dims")
            ss >> p.resampled_dims.w >> p.resampled_dims.h >> p.resampled_dims.d;
        else if (key == "padded_dims")
            ss >> p.padded_dims.w >> p.padded_dims.h >> p.padded_dims.d;
        else if (key == "crop_offsets")
            for (Index& o : p.crop_offsets) ss >> o;
        else if (key == "final_dims")
            ss >> p.final_dims.w >> p.final_dims.h >> p.final_dims.d;
        if (!ss && !line.empty()) throw IoError(IoError::Code::bad_format, "bad plan line: " + line);
    }
    if (!saw_magic) throw IoError(IoError::Code::bad_magic, "missing plan magic in " + path.string());
    return p;
}

// ---------------------------------------------------------------------------
// The preprocessing pipeline proper: resample to a common spacing, zero-pad
// to the largest resampled grid, downsample to the fixed final dims,
// normalize. Split in two stages because the padding target is the maximum
// over the whole dataset.
// ---------------------------------------------------------------------------

struct PreprocessedCase {
    std::string id;
    Volume<float> image;
    LabelMap label;
    PreprocessPlan plan;
};

inline PreprocessedCase preprocess_resample_stage(const std::string& id, const Volume<float>& img,
                                                  const LabelMap& lbl, Spacing target,
                                                  bool median) {
    require(lbl.dims == img.dims, "preprocess: image/label dims mismatch for case " + id);
    PreprocessedCase pc;
    pc.id = id;
    pc.plan.orig_dims = img.dims;
    pc.plan.orig_spacing = img.spacing;
    pc.plan.target_spacing = target;
    Volume<float> work = median ? median_denoise(img) : img;
    pc.image = resample(work, target, Interp::trilinear);
    pc.label = resample(lbl, img.spacing, target);
    pc.plan.resampled_dims = pc.image.dims;
    return pc;
}

inline Dims3 max_dims(const std::vector<PreprocessedCase>& cases) {
    Dims3 padded{0, 0, 0};
    for (const auto& pc : cases) {
        padded.w = std::max(padded.w, pc.image.dims.w);
        padded.h = std::max(padded.h, pc.image.dims.h);
        padded.d = std::max(padded.d, pc.image.dims.d);
    }
    return padded;
}

inline void preprocess_final_stage(PreprocessedCase& pc, Dims3 padded, Dims3 final_dims) {
    auto [pimg, off] = pad_to(pc.image, padded);
    auto [plbl, off_lbl] = pad_to(pc.label, padded);
    (void)off_lbl;
    pc.plan.padded_dims = padded;
    pc.plan.crop_offsets = off;
    pc.plan.final_dims = final_dims;
    pc.image = normalize(resize_to_dims(pimg, final_dims, Interp::trilinear));
    pc.label = resize_to_dims(plbl, final_dims);
}

/// Maps a label map predicted at final dims back to the original geometry:
/// upsample to the padded grid, crop the padding, resample to the original
/// dims (nearest throughout).
inline LabelMap invert_plan(const LabelMap& pred, const PreprocessPlan& p) {
    require(pred.dims == p.final_dims, "invert_plan: prediction dims do not match plan");
    LabelMap padded = resize_to_dims(pred, p.padded_dims);
    Grid3<std::uint8_t> cropped = crop<std::uint8_t>(padded, p.crop_offsets);
    LabelMap resampled;
    resampled.dims = cropped.dims;
    resampled.data = std::move(cropped.data);
    return resize_to_dims(resampled, p.orig_dims);
}

}  // namespace tunet

#endif
