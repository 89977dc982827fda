#include <doctest.h>

#include "tunet/postproc.hpp"

#include <algorithm>

using namespace tunet;

namespace {

ProbMap<float> constant_map(Dims3 dims, float v) { return ProbMap<float>(dims, Spacing{}, v); }

// values quantized to multiples of 1/64 keep thresholds unambiguous
ProbMap<float> random_map_q(Dims3 dims, std::uint64_t seed) {
    ProbMap<float> p(dims, Spacing{});
    SplitMix64 rng(seed);
    for (Index i = 0; i < p.data.size(); ++i) p.data[i] = float(rng.below(65)) / 64.0f;
    return p;
}

}  // namespace

TEST_CASE("region_grow_refine: empty seed yields empty output") {
    ProbMap<float> p = constant_map(Dims3{5, 5, 5}, 0.45f);
    BinaryMask out = region_grow_refine(p, 0.5, 0.4);
    CHECK(count_foreground(out) == 0);
}

TEST_CASE("region_grow_refine: halo grows from the core, isolated blob excluded") {
    ProbMap<float> p = constant_map(Dims3{12, 5, 5}, 0.05f);
    // blob A: core at x in [1,2], halo x in [0,4]
    for (Index x = 0; x <= 4; ++x)
        for (Index y = 1; y <= 3; ++y)
            for (Index z = 1; z <= 3; ++z) p(x, y, z) = 0.45f;
    for (Index y = 1; y <= 3; ++y)
        for (Index z = 1; z <= 3; ++z) p(1, y, z) = p(2, y, z) = 0.9f;
    // isolated blob B: halo-level values only, far from A
    for (Index y = 1; y <= 3; ++y)
        for (Index z = 1; z <= 3; ++z) p(9, y, z) = p(10, y, z) = 0.45f;

    BinaryMask out = region_grow_refine(p, 0.5, 0.4);
    // the whole of blob A is returned
    for (Index x = 0; x <= 4; ++x) CHECK(out(x, 2, 2) == 1);
    // blob B stays out
    CHECK(out(9, 2, 2) == 0);
    CHECK(out(10, 2, 2) == 0);
}

TEST_CASE("region_grow_refine: B equal to A returns A") {
    ProbMap<float> p = random_map_q(Dims3{6, 6, 6}, 3);
    // no values between 0.40 and 0.50 => B == A
    for (Index i = 0; i < p.data.size(); ++i)
        if (p.data[i] >= 0.40f && p.data[i] < 0.50f) p.data[i] = 0.25f;
    BinaryMask a = binarize(p, 0.5);
    BinaryMask out = region_grow_refine(p, 0.5, 0.4);
    CHECK((out.data == a.data).all());
}

TEST_CASE("region_grow_refine: A <= output <= B always") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        ProbMap<float> p = random_map_q(Dims3{7, 6, 5}, seed);
        BinaryMask a = binarize(p, 0.6);
        BinaryMask b = binarize(p, 0.3);
        BinaryMask out = region_grow_refine(p, 0.6, 0.3);
        for (Index i = 0; i < p.data.size(); ++i) {
            CHECK(out.data[i] >= a.data[i]);
            CHECK(out.data[i] <= b.data[i]);
        }
    }
}

TEST_CASE("region_grow_refine: t_low -> t_high collapses to A") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        ProbMap<float> p = random_map_q(Dims3{6, 6, 6}, 100 + seed);
        BinaryMask a = binarize(p, 0.5);
        BinaryMask out = region_grow_refine(p, 0.5, 0.5 - 1e-6);
        CHECK((out.data == a.data).all());
    }
}

TEST_CASE("region_grow_refine: threshold order enforced") {
    ProbMap<float> p = constant_map(Dims3{2, 2, 2}, 0.5f);
    CHECK_THROWS_AS(region_grow_refine(p, 0.4, 0.5), DataError);
}

TEST_CASE("postprocess_case: uniform 0.9 maps label everything tumor inside loc") {
    const Dims3 dims{8, 8, 8};
    ThresholdPolicy policy;
    LabelMap lab = postprocess_case(constant_map(dims, 0.9f), constant_map(dims, 0.9f),
                                    constant_map(dims, 0.9f), policy);
    CHECK((lab.data == 2).all());
}

TEST_CASE("postprocess_case: tumor map below every threshold copies the whole region") {
    const Dims3 dims{10, 10, 10};
    ProbMap<float> whole = constant_map(dims, 0.02f);
    for (Index x = 3; x <= 6; ++x)
        for (Index y = 3; y <= 6; ++y)
            for (Index z = 3; z <= 6; ++z) whole(x, y, z) = 0.95f;
    ProbMap<float> tumor = constant_map(dims, 0.05f);  // below the 0.1 fallback
    ProbMap<float> loc = constant_map(dims, 1.0f - 1e-6f);
    PostprocessTrace trace;
    LabelMap lab = postprocess_case(whole, tumor, loc, ThresholdPolicy{}, &trace);
    CHECK(trace.tumor == TumorBranch::fallback_whole_copy);
    for (Index x = 0; x < 10; ++x)
        for (Index y = 0; y < 10; ++y)
            for (Index z = 0; z < 10; ++z) {
                const bool inside = x >= 3 && x <= 6 && y >= 3 && y <= 6 && z >= 3 && z <= 6;
                CHECK(lab(x, y, z) == (inside ? 2 : 0));
            }
}

TEST_CASE("postprocess_case: all-zero loc annihilates everything") {
    const Dims3 dims{8, 8, 8};
    LabelMap lab = postprocess_case(constant_map(dims, 0.9f), constant_map(dims, 0.9f),
                                    constant_map(dims, 1e-4f), ThresholdPolicy{});
    CHECK((lab.data == 0).all());
}

TEST_CASE("postprocess_case: loc at coarser resolution is upsampled nearest") {
    const Dims3 dims{8, 8, 8};
    ProbMap<float> loc(Dims3{4, 4, 4}, Spacing{}, 0.9f);
    LabelMap lab = postprocess_case(constant_map(dims, 0.9f), constant_map(dims, 0.9f), loc,
                                    ThresholdPolicy{});
    CHECK((lab.data == 2).all());
}

TEST_CASE("postprocess_case: output invariants on random instances") {
    for (std::uint64_t seed = 1; seed <= 30; ++seed) {
        SplitMix64 rng(seed);
        const Dims3 dims{8, 8, 8};
        // scale regimes push different branches
        const float wscale = float(rng.uniform(0.05, 1.0));
        const float tscale = float(rng.uniform(0.05, 1.0));
        ProbMap<float> whole = random_map_q(dims, seed * 7 + 1);
        ProbMap<float> tumor = random_map_q(dims, seed * 7 + 2);
        ProbMap<float> loc = random_map_q(dims, seed * 7 + 3);
        whole.data *= wscale;
        tumor.data *= tscale;
        ThresholdPolicy policy;
        policy.small_region_cutoff = 40;
        PostprocessTrace trace;
        LabelMap lab = postprocess_case(whole, tumor, loc, policy, &trace);
        BinaryMask locmask = binarize(loc, policy.global_t);
        for (Index i = 0; i < lab.data.size(); ++i) {
            CHECK(lab.data[i] <= 2);
            if (lab.data[i] != 0) CHECK(locmask.data[i] == 1);
        }
    }
}

TEST_CASE("threshold policy: validation and desk-scale cutoff") {
    ThresholdPolicy p;
    p.validate();
    ThresholdPolicy scaled = p.scaled_for(Dims3{256, 256, 128});
    CHECK(scaled.small_region_cutoff == 100);
    ThresholdPolicy desk = p.scaled_for(Dims3{32, 32, 16});
    CHECK(desk.small_region_cutoff == 1);  // floor of the proportional rule
    ThresholdPolicy bad;
    bad.global_t = 1.5;
    CHECK_THROWS_AS(bad.validate(), DataError);
    ThresholdPolicy reversed;
    reversed.whole_refine_low = 0.9;
    CHECK_THROWS_AS(reversed.validate(), DataError);
}

TEST_CASE("ensemble_average: single model is the identity") {
    ProbMap<float> p = random_map_q(Dims3{5, 4, 3}, 9);
    ProbMap<float> out = ensemble_average<float>({p});
    CHECK((out.data == p.data).all());
}

TEST_CASE("ensemble_average: two constants average") {
    ProbMap<float> a = constant_map(Dims3{4, 4, 4}, 0.2f);
    ProbMap<float> b = constant_map(Dims3{4, 4, 4}, 0.6f);
    ProbMap<float> out = ensemble_average<float>({a, b});
    CHECK((out.data == 0.4f).all());
}

TEST_CASE("ensemble_average: matches scalar-loop mean, permutation-invariant") {
    std::vector<ProbMap<float>> maps;
    for (std::uint64_t m = 0; m < 5; ++m) maps.push_back(random_map_q(Dims3{6, 5, 4}, 50 + m));
    ProbMap<float> out = ensemble_average(maps);
    for (Index i = 0; i < out.data.size(); ++i) {
        double s = 0;
        for (const auto& m : maps) s += double(m.data[i]);
        CHECK(double(out.data[i]) == doctest::Approx(s / 5.0).epsilon(1e-6));
        CHECK(out.data[i] >= 0.0f);
        CHECK(out.data[i] <= 1.0f);
    }
    std::vector<ProbMap<float>> shuffled = {maps[3], maps[0], maps[4], maps[2], maps[1]};
    ProbMap<float> out2 = ensemble_average(shuffled);
    CHECK((out.data == out2.data).all());
}

TEST_CASE("ensemble_average: errors") {
    CHECK_THROWS_AS(ensemble_average<float>({}), DataError);
    ProbMap<float> a = constant_map(Dims3{4, 4, 4}, 0.2f);
    ProbMap<float> b = constant_map(Dims3{5, 4, 4}, 0.2f);
    CHECK_THROWS_AS(ensemble_average<float>({a, b}), DataError);
}

TEST_CASE("threshold_labels: plain global threshold, tumor precedence, no gating") {
    const Dims3 dims{4, 4, 4};
    ProbMap<float> whole = constant_map(dims, 0.7f);
    ProbMap<float> tumor = constant_map(dims, 0.2f);
    tumor(0, 0, 0) = 0.8f;
    LabelMap lab = threshold_labels(whole, tumor, 0.5);
    CHECK(lab(0, 0, 0) == 2);
    CHECK(lab(1, 0, 0) == 1);
}
