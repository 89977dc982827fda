#ifndef TUNET_PHANTOM_HPP
#define TUNET_PHANTOM_HPP

#include "tunet/io.hpp"
#include "tunet/rng.hpp"
#include "tunet/volume.hpp"

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

namespace tunet {

/// Synthetic test-bench cases: one bright sphere per volume standing in for
/// the kidney, with a smaller, brighter blob embedded in it as the tumor.
/// Geometry and noise are drawn deterministically from the seed.
struct PhantomConfig {
    int count = 20;
    std::uint64_t seed = 1;
    Index min_xy = 40, max_xy = 56;
    Index min_z = 20, max_z = 28;
    Spacing spacing{1.0, 1.0, 2.0};
    double noise_sd = 4.0;
};

struct PhantomCase {
    std::string id;
    Volume<float> image;
    LabelMap label;
};

inline PhantomCase make_phantom_case(const std::string& id, const PhantomConfig& cfg,
                                     SplitMix64& rng) {
    Dims3 dims{cfg.min_xy + Index(rng.below(std::uint64_t(cfg.max_xy - cfg.min_xy + 1))),
               cfg.min_xy + Index(rng.below(std::uint64_t(cfg.max_xy - cfg.min_xy + 1))),
               cfg.min_z + Index(rng.below(std::uint64_t(cfg.max_z - cfg.min_z + 1)))};
    PhantomCase pc;
    pc.id = id;
    pc.image = Volume<float>(dims, cfg.spacing);
    pc.label = LabelMap(dims);

    const double ex = double(dims.w) * cfg.spacing.dx;
    const double ey = double(dims.h) * cfg.spacing.dy;
    const double ez = double(dims.d) * cfg.spacing.dz;
    const double half_min = 0.5 * std::min({ex, ey, ez});

    // kidney sphere, jittered around the center
    const double kr = half_min * rng.uniform(0.70, 0.80);
    const double kx = 0.5 * ex + rng.uniform(-0.05, 0.05) * ex;
    const double ky = 0.5 * ey + rng.uniform(-0.05, 0.05) * ey;
    const double kz = 0.5 * ez + rng.uniform(-0.05, 0.05) * ez;

    // tumor blob strictly inside the kidney
    const double tr = kr * rng.uniform(0.40, 0.52);
    const double max_off = (kr - tr) * 0.8;
    const double theta = rng.uniform(0.0, 6.283185307179586);
    const double phi = std::acos(rng.uniform(-1.0, 1.0));
    const double off = rng.uniform(0.2, 1.0) * max_off;
    const double tx = kx + off * std::sin(phi) * std::cos(theta);
    const double ty = ky + off * std::sin(phi) * std::sin(theta);
    const double tz = kz + off * std::cos(phi);

    for (Index z = 0; z < dims.d; ++z)
        for (Index y = 0; y < dims.h; ++y)
            for (Index x = 0; x < dims.w; ++x) {
                const double px = (double(x) + 0.5) * cfg.spacing.dx;
                const double py = (double(y) + 0.5) * cfg.spacing.dy;
                const double pz = (double(z) + 0.5) * cfg.spacing.dz;
                const double dk = std::sqrt((px - kx) * (px - kx) + (py - ky) * (py - ky) +
                                            (pz - kz) * (pz - kz));
                const double dt = std::sqrt((px - tx) * (px - tx) + (py - ty) * (py - ty) +
                                            (pz - tz) * (pz - tz));
                double value = -40.0;
                std::uint8_t lab = 0;
                if (dt <= tr) {
                    value = 80.0;
                    lab = 2;
                } else if (dk <= kr) {
                    value = 20.0;
                    lab = 1;
                }
                pc.image(x, y, z) = float(value + cfg.noise_sd * rng.normal());
                pc.label(x, y, z) = lab;
            }
    return pc;
}

inline std::vector<PhantomCase> make_phantoms(const PhantomConfig& cfg) {
    SplitMix64 root(cfg.seed);
    std::vector<PhantomCase> out;
    for (int i = 0; i < cfg.count; ++i) {
        SplitMix64 rng = root.fork(std::uint64_t(i) + 1);
        char id[16];
        std::snprintf(id, sizeof id, "case_%03d", i);
        out.push_back(make_phantom_case(id, cfg, rng));
    }
    return out;
}

/// Writes images, labels and a manifest with paths relative to `dir`.
inline CaseManifest write_phantom_dataset(const std::filesystem::path& dir,
                                          const PhantomConfig& cfg) {
    std::filesystem::create_directories(dir);
    CaseManifest manifest;
    for (const PhantomCase& pc : make_phantoms(cfg)) {
        const std::string img = pc.id + "_img.mvol";
        const std::string lbl = pc.id + "_lbl.mvol";
        write_volume(pc.image, dir / img);
        write_volume(pc.label, dir / lbl, pc.image.spacing);
        manifest.cases.push_back({pc.id, dir / img, dir / lbl});
    }
    CaseManifest rel;  // manifest on disk uses relative paths
    for (const auto& c : manifest.cases)
        rel.cases.push_back({c.id, c.image_path.filename(), c.label_path.filename()});
    save_manifest(rel, dir / "manifest.tsv");
    return manifest;
}

}  // namespace tunet

#endif
