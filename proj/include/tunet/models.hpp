#ifndef TUNET_MODELS_HPP
#define TUNET_MODELS_HPP

#include "tunet/graph.hpp"
#include "tunet/loss.hpp"
#include "tunet/preprocess.hpp"
#include "tunet/volcore.hpp"

#include <cstdio>
#include <map>
#include <string>

namespace tunet {

/// Architecture knobs for one U-Net of the cascade.
struct UNetSpec {
    int depth = 3;            // encoder levels (poolings); bottleneck sits below
    Index base_channels = 8;  // channels double per level
    Index in_channels = 1;    // 1 for L-Net/W-Net, 2 for T-Net
    bool input_pyramid = false;
    bool se_block = false;
    Index se_reduction = 2;

    std::map<std::string, std::string> to_kv(const std::string& kind) const {
        return {{"kind", kind},
                {"depth", std::to_string(depth)},
                {"base_channels", std::to_string(base_channels)},
                {"in_channels", std::to_string(in_channels)},
                {"input_pyramid", input_pyramid ? "1" : "0"},
                {"se_block", se_block ? "1" : "0"},
                {"se_reduction", std::to_string(se_reduction)}};
    }

    static UNetSpec from_kv(const std::map<std::string, std::string>& kv) {
        UNetSpec s;
        s.depth = std::stoi(kv.at("depth"));
        s.base_channels = std::stol(kv.at("base_channels"));
        s.in_channels = std::stol(kv.at("in_channels"));
        s.input_pyramid = kv.at("input_pyramid") == "1";
        s.se_block = kv.at("se_block") == "1";
        s.se_reduction = std::stol(kv.at("se_reduction"));
        return s;
    }
};

inline void check_dims_divisible(Dims3 dims, int depth, const std::string& what) {
    const Index div = Index(1) << depth;
    require(dims.w % div == 0 && dims.h % div == 0 && dims.d % div == 0,
            what + ": dims " + dims.str() + " not divisible by 2^" + std::to_string(depth));
}

/// Builds the encoder-decoder graph. Each encoder level runs conv-ReLU x2 on
/// its input (deeper levels first concatenate the average-pooled raw input
/// when the input pyramid is on), an optional SE gate, then pools; the
/// decoder mirrors it with nearest-upsample + skip concatenation. The head is
/// a 1-channel conv + sigmoid.
template <typename Scalar>
Graph<Scalar> build_unet(const UNetSpec& spec, const std::string& prefix, SplitMix64& rng) {
    require(spec.depth >= 1, "build_unet: depth must be >= 1");
    require(spec.base_channels >= 1, "build_unet: base_channels must be >= 1");
    require(spec.in_channels >= 1, "build_unet: in_channels must be >= 1");

    Graph<Scalar> g;
    const int input = g.input_node();
    int cur = input;
    Index ch = spec.in_channels;
    std::vector<int> skips;
    std::vector<Index> skip_ch;

    auto conv_block = [&](const std::string& name, Index in_ch, Index out_ch, int from) {
        int c1 = g.add(name + "/conv1", std::make_unique<Conv3D<Scalar>>(name + "/conv1", in_ch, out_ch, rng), {from});
        int r1 = g.add(name + "/relu1", std::make_unique<ReLU<Scalar>>(), {c1});
        int c2 = g.add(name + "/conv2", std::make_unique<Conv3D<Scalar>>(name + "/conv2", out_ch, out_ch, rng), {r1});
        return g.add(name + "/relu2", std::make_unique<ReLU<Scalar>>(), {c2});
    };

    // encoder levels 0..depth-1 plus the bottleneck at level `depth`
    for (int lvl = 0; lvl <= spec.depth; ++lvl) {
        const std::string name = lvl < spec.depth ? prefix + "/enc" + std::to_string(lvl) : prefix + "/bot";
        if (lvl > 0) {
            cur = g.add(name + "/pool", std::make_unique<MaxPool3D<Scalar>>(), {cur});
            if (spec.input_pyramid) {
                int pyr = g.add(name + "/pyr",
                                std::make_unique<DownsampleInput<Scalar>>(Index(1) << lvl), {input});
                cur = g.add(name + "/cat_pyr", std::make_unique<ConcatChannels<Scalar>>(), {cur, pyr});
                ch += spec.in_channels;
            }
        }
        const Index oc = spec.base_channels << lvl;
        cur = conv_block(name, ch, oc, cur);
        ch = oc;
        if (spec.se_block) {
            Index r = spec.se_reduction;
            require(ch % r == 0, "build_unet: SE reduction " + std::to_string(r) +
                                     " does not divide " + std::to_string(ch) + " channels");
            cur = g.add(name + "/se", std::make_unique<SEBlock<Scalar>>(name + "/se", ch, r, rng), {cur});
        }
        if (lvl < spec.depth) {
            skips.push_back(cur);
            skip_ch.push_back(ch);
        }
    }

    // decoder
    for (int lvl = spec.depth - 1; lvl >= 0; --lvl) {
        const std::string name = prefix + "/dec" + std::to_string(lvl);
        cur = g.add(name + "/up", std::make_unique<NearestUpsample3D<Scalar>>(), {cur});
        cur = g.add(name + "/cat", std::make_unique<ConcatChannels<Scalar>>(),
                    {cur, skips[std::size_t(lvl)]});
        ch += skip_ch[std::size_t(lvl)];
        const Index oc = spec.base_channels << lvl;
        cur = conv_block(name, ch, oc, cur);
        ch = oc;
    }

    cur = g.add(prefix + "/head",
                std::make_unique<Conv3D<Scalar>>(prefix + "/head", ch, 1, rng), {cur});
    g.add(prefix + "/sigmoid", std::make_unique<Sigmoid<Scalar>>(), {cur});
    return g;
}

// ---------------------------------------------------------------------------
// The three-network cascade: L-Net localizes at coarse resolution, W-Net
// segments the whole kidney+tumor region patchwise, T-Net segments the tumor
// from the image concatenated with the stitched W-Net probability map.
// ---------------------------------------------------------------------------

template <typename Scalar>
struct CascadeBundle {
    UNetSpec lspec, wspec, tspec;
    Dims3 lnet_dims{16, 16, 8};
    Graph<Scalar> lnet, wnet, tnet;
};

struct BundleConfig {
    int depth = 3;
    Index base_channels = 8;
    bool se = false;
    Index se_reduction = 2;
    Dims3 lnet_dims{16, 16, 8};
};

template <typename Scalar>
CascadeBundle<Scalar> make_bundle(const BundleConfig& c, std::uint64_t seed) {
    CascadeBundle<Scalar> b;
    b.lspec = UNetSpec{c.depth, c.base_channels, 1, false, false, c.se_reduction};
    b.wspec = UNetSpec{c.depth, c.base_channels, 1, true, c.se, c.se_reduction};
    b.tspec = UNetSpec{c.depth, c.base_channels, 2, true, c.se, c.se_reduction};
    b.lnet_dims = c.lnet_dims;
    check_dims_divisible(c.lnet_dims, c.depth, "make_bundle: L-Net input");
    SplitMix64 root(seed);
    SplitMix64 lr = root.fork(1), wr = root.fork(2), tr = root.fork(3);
    b.lnet = build_unet<Scalar>(b.lspec, "lnet", lr);
    b.wnet = build_unet<Scalar>(b.wspec, "wnet", wr);
    b.tnet = build_unet<Scalar>(b.tspec, "tnet", tr);
    return b;
}

namespace detail {

inline std::string dims_str(Dims3 d) {
    return std::to_string(d.w) + "," + std::to_string(d.h) + "," + std::to_string(d.d);
}

inline Dims3 parse_dims(const std::string& s) {
    Dims3 d;
    if (std::sscanf(s.c_str(), "%td,%td,%td", &d.w, &d.h, &d.d) != 3)
        throw DataError("cannot parse dims triple: " + s);
    return d;
}

}  // namespace detail

/// One .mpar and .arch sidecar per network, plus cascade-level geometry.
inline void save_bundle(const std::filesystem::path& dir, CascadeBundle<float>& b,
                        Dims3 patch_shape, Dims3 infer_overlap) {
    std::filesystem::create_directories(dir);
    save_params(params_to_entries(b.lnet), dir / "lnet.mpar");
    save_params(params_to_entries(b.wnet), dir / "wnet.mpar");
    save_params(params_to_entries(b.tnet), dir / "tnet.mpar");
    save_kv(b.lspec.to_kv("lnet"), dir / "lnet.arch");
    save_kv(b.wspec.to_kv("wnet"), dir / "wnet.arch");
    save_kv(b.tspec.to_kv("tnet"), dir / "tnet.arch");
    save_kv({{"lnet_dims", detail::dims_str(b.lnet_dims)},
             {"patch_shape", detail::dims_str(patch_shape)},
             {"infer_overlap", detail::dims_str(infer_overlap)}},
            dir / "bundle.arch");
}

struct LoadedBundle {
    CascadeBundle<float> bundle;
    Dims3 patch_shape, infer_overlap;
};

/// Rebuilds the cascade from the arch sidecars and loads the parameters,
/// validating block names and sizes against the reconstructed graphs.
inline LoadedBundle load_bundle(const std::filesystem::path& dir) {
    LoadedBundle lb;
    auto bkv = load_kv(dir / "bundle.arch");
    lb.bundle.lnet_dims = detail::parse_dims(bkv.at("lnet_dims"));
    lb.patch_shape = detail::parse_dims(bkv.at("patch_shape"));
    lb.infer_overlap = detail::parse_dims(bkv.at("infer_overlap"));
    auto load_net = [&](const char* name, UNetSpec& spec, Graph<float>& g) {
        auto kv = load_kv(dir / (std::string(name) + ".arch"));
        require(kv.at("kind") == name, std::string("arch sidecar kind mismatch for ") + name);
        spec = UNetSpec::from_kv(kv);
        SplitMix64 rng(0);
        g = build_unet<float>(spec, name, rng);
        entries_to_params(g, load_params(dir / (std::string(name) + ".mpar")));
    };
    load_net("lnet", lb.bundle.lspec, lb.bundle.lnet);
    load_net("wnet", lb.bundle.wspec, lb.bundle.wnet);
    load_net("tnet", lb.bundle.tspec, lb.bundle.tnet);
    return lb;
}

template <typename Scalar>
Tensor5<Scalar> to_tensor(const Volume<Scalar>& v) {
    Tensor5<Scalar> t(1, 1, v.dims.d, v.dims.h, v.dims.w);
    t.data = v.data;
    return t;
}

/// Two same-shaped volumes as a (1,2,D,H,W) tensor.
template <typename Scalar>
Tensor5<Scalar> to_tensor2(const Volume<Scalar>& a, const Volume<Scalar>& b) {
    require(a.dims == b.dims, "to_tensor2: dims mismatch");
    Tensor5<Scalar> t(1, 2, a.dims.d, a.dims.h, a.dims.w);
    t.data.segment(0, a.data.size()) = a.data;
    t.data.segment(a.data.size(), b.data.size()) = b.data;
    return t;
}

template <typename Scalar>
Volume<Scalar> to_volume(const Tensor5<Scalar>& t, Spacing sp = {}) {
    require(t.n() == 1 && t.c() == 1, "to_volume: expected (1,1,D,H,W), got " + t.shape_str());
    Volume<Scalar> v(Dims3{t.w(), t.h(), t.d()}, sp);
    v.data = t.data;
    return v;
}

template <typename Scalar>
struct CascadeMaps {
    ProbMap<Scalar> whole, tumor, loc;  // loc stays at L-Net resolution
};

/// Full-volume inference: W-Net patchwise and stitched, T-Net patchwise on
/// (image, stitched whole map), L-Net on the whole image downsampled to its
/// working resolution.
template <typename Scalar>
CascadeMaps<Scalar> cascade_forward(const Volume<Scalar>& image, CascadeBundle<Scalar>& bundle,
                                    Dims3 patch_shape, Dims3 patch_overlap) {
    check_dims_divisible(patch_shape, bundle.wspec.depth, "cascade_forward: patch");
    CascadeMaps<Scalar> out;

    Volume<Scalar> lnet_in = resize_to_dims(image, bundle.lnet_dims, Interp::trilinear);
    out.loc = to_volume(bundle.lnet.forward(to_tensor(lnet_in)), lnet_in.spacing);

    PatchGrid grid = PatchGrid::make(image.dims, patch_shape, patch_overlap);
    PatchAccumulator<Scalar> wacc(image.dims);
    for (const Dims3& org : grid.origins) {
        Grid3<Scalar> p = extract_patch<Scalar>(image, org, grid.shape);
        Tensor5<Scalar> t(1, 1, grid.shape.d, grid.shape.h, grid.shape.w);
        t.data = p.data;
        Tensor5<Scalar> y = bundle.wnet.forward(t);
        Grid3<Scalar> yp(grid.shape);
        yp.data = y.data;
        wacc.add(yp, org);
    }
    out.whole = wacc.finish(image.spacing);

    PatchAccumulator<Scalar> tacc(image.dims);
    for (const Dims3& org : grid.origins) {
        Grid3<Scalar> pi = extract_patch<Scalar>(image, org, grid.shape);
        Grid3<Scalar> pw = extract_patch<Scalar>(out.whole, org, grid.shape);
        Tensor5<Scalar> t(1, 2, grid.shape.d, grid.shape.h, grid.shape.w);
        t.data.segment(0, pi.data.size()) = pi.data;
        t.data.segment(pi.data.size(), pw.data.size()) = pw.data;
        Tensor5<Scalar> y = bundle.tnet.forward(t);
        Grid3<Scalar> yp(grid.shape);
        yp.data = y.data;
        tacc.add(yp, org);
    }
    out.tumor = tacc.finish(image.spacing);
    return out;
}

// ---------------------------------------------------------------------------
// One joint W-Net + T-Net step on a single patch. The two are trained
// end-to-end: the tumor loss gradient flows through the T-Net input back into
// the W-Net probability map (no stop-gradient).
// ---------------------------------------------------------------------------

template <typename Scalar>
struct JointPatchState {
    double l_whole = 0.0;
    double l_tumor = 0.0;
    Tensor5<Scalar> w_out, t_out;
};

template <typename Scalar>
JointPatchState<Scalar> cascade_patch_forward(Graph<Scalar>& wnet, Graph<Scalar>& tnet,
                                              const Tensor5<Scalar>& x,
                                              const ArrayX<Scalar>& whole_mask,
                                              const ArrayX<Scalar>& tumor_mask,
                                              double eps = kDiceEps) {
    JointPatchState<Scalar> st;
    st.w_out = wnet.forward(x);
    Tensor5<Scalar> t_in(1, 2, x.d(), x.h(), x.w());
    t_in.data.segment(0, x.data.size()) = x.data;
    t_in.data.segment(x.data.size(), st.w_out.data.size()) = st.w_out.data;
    st.t_out = tnet.forward(t_in);
    st.l_whole = soft_dice(st.w_out.data, whole_mask, eps);
    st.l_tumor = soft_dice(st.t_out.data, tumor_mask, eps);
    return st;
}

/// Backpropagates the combined loss of a cascade_patch_forward call.
/// Gradients accumulate into both graphs' parameter blocks; returns the
/// gradient w.r.t. the input patch.
template <typename Scalar>
Tensor5<Scalar> cascade_patch_backward(Graph<Scalar>& wnet, Graph<Scalar>& tnet,
                                       const JointPatchState<Scalar>& st,
                                       const ArrayX<Scalar>& whole_mask,
                                       const ArrayX<Scalar>& tumor_mask, double eps = kDiceEps) {
    ArrayX<Scalar> d_whole, d_tumor;
    soft_dice_grad(st.w_out.data, whole_mask, d_whole, eps);
    soft_dice_grad(st.t_out.data, tumor_mask, d_tumor, eps);

    Tensor5<Scalar> gt_out = st.t_out;
    gt_out.data = d_tumor;
    Tensor5<Scalar> gt_in = tnet.backward(gt_out);

    const Index V = st.w_out.data.size();
    Tensor5<Scalar> gw_out = st.w_out;
    gw_out.data = d_whole + gt_in.data.segment(V, V);
    Tensor5<Scalar> gx = wnet.backward(gw_out);
    gx.data += gt_in.data.segment(0, V);
    return gx;
}

}  // namespace tunet

#endif
