#include <gtest/gtest.h>

#include <cmath>

#include "test_util.hpp"
#include "wavesr/error.hpp"
#include "wavesr/shading.hpp"
#include "wavesr/temporal.hpp"

using namespace wsr;
using wsr::testing::max_abs_diff;
using wsr::testing::random_tensor;

namespace {

GBuffer flat_gbuffer(int H, int W, float albedo, float metallic) {
    GBuffer g;
    g.albedo = Tensor::full({3, H, W}, albedo);
    g.normal = Tensor::zeros({3, H, W});
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) g.normal.at(2, y, x) = 1.0f;
    g.depth = Tensor::full({1, H, W}, 2.0f);
    g.roughness = Tensor::full({1, H, W}, 0.5f);
    g.metallic = Tensor::full({1, H, W}, metallic);
    return g;
}

MotionField zero_motion(int H, int W) { return {Tensor::zeros({2, H, W})}; }

}  // namespace

TEST(Brdf, DielectricGrey) {
    const BrdfFactor f = compute_brdf_factor(flat_gbuffer(2, 2, 0.5f, 0.0f));
    for (float v : f.f.data()) EXPECT_NEAR(v, 0.54f, 1e-7f);
}

TEST(Brdf, RedMetalClampsBlackChannels) {
    GBuffer g = flat_gbuffer(1, 1, 0.0f, 1.0f);
    g.albedo.at(0, 0, 0) = 1.0f;
    const BrdfFactor f = compute_brdf_factor(g);
    EXPECT_FLOAT_EQ(f.f.at(0, 0, 0), 1.0f);
    EXPECT_FLOAT_EQ(f.f.at(1, 0, 0), kBrdfEpsilon);
    EXPECT_FLOAT_EQ(f.f.at(2, 0, 0), kBrdfEpsilon);
}

TEST(Brdf, BlackDielectricFloor) {
    const BrdfFactor f = compute_brdf_factor(flat_gbuffer(1, 1, 0.0f, 0.0f));
    for (float v : f.f.data()) EXPECT_FLOAT_EQ(v, 0.04f);
}

TEST(Brdf, MonotoneInAlbedo) {
    for (float m : {0.0f, 0.3f, 0.7f, 1.0f}) {
        float prev = -1.0f;
        for (int i = 0; i <= 20; ++i) {
            const float v = compute_brdf_factor(flat_gbuffer(1, 1, i / 20.0f, m)).f[0];
            EXPECT_GE(v, prev);
            prev = v;
        }
    }
}

TEST(Demodulate, Arithmetic) {
    const BrdfFactor f{Tensor::full({3, 1, 1}, 0.25f)};
    EXPECT_FLOAT_EQ(demodulate(Tensor::full({3, 1, 1}, 0.5f), f)[0], 2.0f);
    EXPECT_FLOAT_EQ(demodulate(Tensor::zeros({3, 1, 1}), f)[0], 0.0f);
    EXPECT_FLOAT_EQ(remodulate(Tensor::full({3, 1, 1}, 2.0f), f)[0], 0.5f);
    const Tensor l = random_tensor({3, 4, 4}, 3, 0.0f, 5.0f);
    EXPECT_EQ(max_abs_diff(remodulate(l, {Tensor::full({3, 4, 4}, 1.0f)}), l), 0.0);
}

TEST(Demodulate, RoundTripAndFinite) {
    const Tensor I = random_tensor({3, 16, 16}, 1, 0.0f, 1.0f);
    Tensor F = random_tensor({3, 16, 16}, 2, 0.0f, 1.0f);
    for (float& v : F.mutable_data()) v = std::max(v, kBrdfEpsilon);
    const BrdfFactor f{F};
    const Tensor L = demodulate(I, f);
    for (float v : L.data()) EXPECT_TRUE(std::isfinite(v));
    const Tensor back = remodulate(L, f);
    for (std::size_t i = 0; i < I.numel(); ++i) EXPECT_NEAR(back[i], I[i], 1e-6 * std::max(1.0f, I[i]));
}

TEST(Demodulate, ShapeMismatch) {
    const BrdfFactor f{Tensor::full({3, 2, 2}, 1.0f)};
    EXPECT_THROW(remodulate(Tensor::zeros({3, 2, 3}), f), ShapeError);
    EXPECT_THROW(demodulate(Tensor::zeros({1, 2, 2}), f), ShapeError);
}

TEST(GBufferCheck, RejectsBadPlanes) {
    GBuffer g = flat_gbuffer(2, 2, 0.5f, 0.0f);
    EXPECT_NO_THROW(g.validate());
    EXPECT_EQ(g.stacked().shape(), (Shape{9, 2, 2}));
    GBuffer bad_normal = g;
    bad_normal.normal = Tensor::full({3, 2, 2}, 1.0f);
    EXPECT_THROW(bad_normal.validate(), ParamError);
    GBuffer bad_albedo = g;
    bad_albedo.albedo = Tensor::full({3, 2, 2}, 1.5f);
    EXPECT_THROW(bad_albedo.validate(), ParamError);
    GBuffer bad_shape = g;
    bad_shape.depth = Tensor::zeros({1, 3, 2});
    EXPECT_THROW(bad_shape.validate(), ShapeError);
}

TEST(Warp, ZeroMotionIsBitwiseIdentity) {
    const Tensor prev = random_tensor({3, 9, 7}, 4, -10.0f, 10.0f);
    const Tensor out = warp(prev, zero_motion(9, 7));
    for (std::size_t i = 0; i < prev.numel(); ++i) ASSERT_EQ(out[i], prev[i]);
}

TEST(Warp, IntegerShiftMovesColumns) {
    const Tensor prev = random_tensor({2, 6, 8}, 5);
    MotionField mv = zero_motion(6, 8);
    for (int y = 0; y < 6; ++y)
        for (int x = 0; x < 8; ++x) mv.mv.at(1, y, x) = 1.0f;
    const Tensor out = warp(prev, mv);
    for (int c = 0; c < 2; ++c)
        for (int y = 0; y < 6; ++y)
            for (int x = 0; x < 7; ++x) EXPECT_EQ(out.at(c, y, x), prev.at(c, y, x + 1));
}

TEST(Warp, ConvexBoundAndLinearity) {
    const Tensor P = random_tensor({3, 10, 10}, 6);
    const Tensor Q = random_tensor({3, 10, 10}, 7);
    const MotionField mv{random_tensor({2, 10, 10}, 8, -4.0f, 4.0f)};
    const Tensor out = warp(P, mv);
    const auto [lo, hi] = std::minmax_element(P.data().begin(), P.data().end());
    for (float v : out.data()) {
        EXPECT_GE(v, *lo - 1e-6f);
        EXPECT_LE(v, *hi + 1e-6f);
    }
    const float a = 0.7f, b = -1.3f;
    const Tensor lhs = warp(add(scale(P, a), scale(Q, b)), mv);
    const Tensor rhs = add(scale(warp(P, mv), a), scale(warp(Q, mv), b));
    EXPECT_LE(max_abs_diff(lhs, rhs), 1e-6);
}

TEST(Warp, GradientMatchesFiniteDifferences) {
    const MotionField mv{random_tensor({2, 6, 6}, 9, -2.0f, 2.0f)};
    const Tensor x = random_tensor({2, 6, 6}, 10);
    const auto r = wsr::testing::grad_check([&] { return warp(x, mv); }, x, 11);
    EXPECT_LT(r.rel_error, 1e-3);
}

TEST(Warp, ShapeMismatch) {
    EXPECT_THROW(warp(Tensor::zeros({3, 4, 4}), zero_motion(4, 5)), ShapeError);
}

TEST(Masks, StaticSceneIsAllOnes) {
    const GBuffer g = flat_gbuffer(5, 5, 0.3f, 0.2f);
    const GBuffer gw = warp(g, zero_motion(5, 5));
    const Tensor l = random_tensor({3, 5, 5}, 12, 0.0f, 2.0f);
    const MaskPair m = compute_masks(g, gw, warp(l, zero_motion(5, 5)), l);
    for (float v : m.temporal.data()) EXPECT_EQ(v, 1.0f);
    for (float v : m.spatial.data()) EXPECT_EQ(v, 1.0f);
}

TEST(Masks, DepthDiscontinuity) {
    const GBuffer g = flat_gbuffer(3, 3, 0.3f, 0.0f);
    GBuffer prev = g;
    prev.depth = g.depth.clone();
    prev.depth.at(0, 1, 1) += 10.0f;
    const Tensor l = Tensor::zeros({3, 3, 3});
    const MaskPair m = compute_masks(g, prev, l, l);
    EXPECT_NEAR(m.temporal.at(0, 1, 1), std::exp(-10.0f), 1e-9);
    EXPECT_EQ(m.temporal.at(0, 0, 0), 1.0f);
}

TEST(Masks, BoundedForRandomInputs) {
    GBuffer a = flat_gbuffer(6, 6, 0.5f, 0.5f), b = a;
    b.depth = random_tensor({1, 6, 6}, 13, 0.0f, 50.0f);
    b.normal = random_tensor({3, 6, 6}, 14);
    const MaskPair m = compute_masks(a, b, random_tensor({3, 6, 6}, 15, 0, 9), random_tensor({3, 6, 6}, 16, 0, 9));
    for (const Tensor* t : {&m.spatial, &m.temporal})
        for (float v : t->data()) {
            EXPECT_GE(v, 0.0f);
            EXPECT_LE(v, 1.0f);
        }
    EXPECT_FALSE(m.spatial.requires_grad());
}

TEST(Masks, ResolutionMismatch) {
    const GBuffer g = flat_gbuffer(4, 4, 0.3f, 0.0f);
    EXPECT_THROW(compute_masks(g, g, Tensor::zeros({3, 2, 2}), Tensor::zeros({3, 4, 4})), ShapeError);
}
