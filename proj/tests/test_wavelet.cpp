#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "test_util.hpp"
#include "wavesr/error.hpp"
#include "wavesr/ops.hpp"
#include "wavesr/wavelet.hpp"

namespace wsr {
namespace {

using testing::grad_check;
using testing::max_abs_diff;
using testing::random_tensor;

constexpr Basis kBases[] = {Basis::haar, Basis::db4, Basis::sym4};

Tensor circular_shift(const Tensor& t, int dy, int dx) {
    const int C = t.dim(0), H = t.dim(1), W = t.dim(2);
    Tensor out(t.shape());
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) out.at(c, (y + dy) % H, (x + dx) % W) = t.at(c, y, x);
    return out;
}

TEST(FilterBank, HaarCoefficients) {
    FilterBank b = make_filter_bank(Basis::haar);
    const double a = 1.0 / std::sqrt(2.0);
    ASSERT_EQ(b.length(), 2);
    EXPECT_DOUBLE_EQ(b.dec_lo[0], a);
    EXPECT_DOUBLE_EQ(b.dec_lo[1], a);
    EXPECT_DOUBLE_EQ(b.dec_hi[0], a);
    EXPECT_DOUBLE_EQ(b.dec_hi[1], -a);
}

TEST(FilterBank, OrthonormalAndDoubleShiftOrthogonal) {
    for (Basis basis : kBases) {
        FilterBank b = make_filter_bank(basis);
        const int L = b.length();
        EXPECT_EQ(L, basis == Basis::haar ? 2 : 8);
        double lo2 = 0, hi2 = 0, cross = 0, total = 0;
        for (int k = 0; k < L; ++k) {
            lo2 += b.dec_lo[k] * b.dec_lo[k];
            hi2 += b.dec_hi[k] * b.dec_hi[k];
            cross += b.dec_lo[k] * b.dec_hi[k];
            total += b.dec_lo[k];
        }
        EXPECT_NEAR(lo2, 1.0, 1e-10) << to_string(basis);
        EXPECT_NEAR(hi2, 1.0, 1e-10) << to_string(basis);
        EXPECT_NEAR(cross, 0.0, 1e-10) << to_string(basis);
        EXPECT_NEAR(total, std::sqrt(2.0), 1e-10) << to_string(basis);
        for (int shift = 2; shift < L; shift += 2) {
            double auto_lo = 0, cross_lo_hi = 0;
            for (int k = 0; k + shift < L; ++k) {
                auto_lo += b.dec_lo[k] * b.dec_lo[k + shift];
                cross_lo_hi += b.dec_lo[k] * b.dec_hi[k + shift] + b.dec_hi[k] * b.dec_lo[k + shift];
            }
            EXPECT_NEAR(auto_lo, 0.0, 1e-10) << to_string(basis) << " shift " << shift;
        }
    }
}

TEST(FilterBank, FourVanishingMoments) {
    // Both 8-tap bases annihilate polynomials up to degree 3.
    for (Basis basis : {Basis::db4, Basis::sym4}) {
        FilterBank b = make_filter_bank(basis);
        for (int p = 0; p < 4; ++p) {
            double m = 0;
            for (int k = 0; k < b.length(); ++k) m += b.dec_hi[k] * std::pow(double(k), p);
            EXPECT_NEAR(m, 0.0, 1e-8) << to_string(basis) << " moment " << p;
        }
    }
}

TEST(FilterBank, ReconstructionFiltersAreReversed) {
    FilterBank b = make_filter_bank(Basis::db4);
    for (int k = 0; k < b.length(); ++k) {
        EXPECT_EQ(b.rec_lo[k], b.dec_lo[b.length() - 1 - k]);
        EXPECT_EQ(b.rec_hi[k], b.dec_hi[b.length() - 1 - k]);
    }
}

TEST(FilterBank, UnsupportedBasisIsConfigError) { EXPECT_THROW(parse_basis("coif2"), ConfigError); }

TEST(Dwt, ConstantImageHaar) {
    SubbandSet s = dwt_forward(Tensor(Shape{3, 4, 4}, 1.0f), make_filter_bank(Basis::haar));
    EXPECT_EQ(s.ll.shape(), (Shape{3, 2, 2}));
    for (float v : s.ll.data()) EXPECT_NEAR(v, 2.0f, 1e-6);
    for (const Tensor* t : {&s.lh, &s.hl, &s.hh})
        for (float v : t->data()) EXPECT_NEAR(v, 0.0f, 1e-6);
}

TEST(Dwt, VerticalStepEdgeHaar) {
    // Column 3 is bright: the edge sits inside the Haar pair (2,3).
    Tensor img(Shape{1, 4, 4}, 0.0f);
    for (int y = 0; y < 4; ++y) img.at(0, y, 3) = 1.0f;
    SubbandSet s = dwt_forward(img, make_filter_bank(Basis::haar));
    for (float v : s.lh.data()) EXPECT_NEAR(v, 0.0f, 1e-7);
    for (int y = 0; y < 2; ++y) {
        EXPECT_NEAR(s.hl.at(0, y, 0), 0.0f, 1e-7);
        EXPECT_NEAR(s.hl.at(0, y, 1), -1.0f, 1e-6);  // (0 - 1)/sqrt2 along x, times sqrt2 along y
    }
}

TEST(Dwt, InverseOfConstant) {
    const FilterBank bank = make_filter_bank(Basis::haar);
    SubbandSet s{Tensor(Shape{3, 2, 2}, 2.0f), Tensor(Shape{3, 2, 2}), Tensor(Shape{3, 2, 2}), Tensor(Shape{3, 2, 2}),
                 SubbandLayout::decimated, WaveletSpec{Transform::dwt, Basis::haar, 1}};
    Tensor img = dwt_inverse(s, bank);
    EXPECT_EQ(img.shape(), (Shape{3, 4, 4}));
    for (float v : img.data()) EXPECT_NEAR(v, 1.0f, 1e-6);
    s.ll = Tensor(Shape{3, 2, 2});
    const Tensor zero = dwt_inverse(s, bank);
    for (float v : zero.data()) EXPECT_EQ(v, 0.0f);
}

TEST(Dwt, RoundTripAllBases) {
    for (Basis basis : kBases) {
        const FilterBank bank = make_filter_bank(basis);
        Tensor x = random_tensor({3, 8, 8}, 31);
        EXPECT_LT(max_abs_diff(dwt_inverse(dwt_forward(x, bank), bank), x), 1e-5) << to_string(basis);
    }
}

TEST(Dwt, Errors) {
    const FilterBank haar = make_filter_bank(Basis::haar);
    EXPECT_THROW(dwt_forward(random_tensor({3, 7, 8}, 1), haar), ShapeError);
    EXPECT_THROW(dwt_forward(random_tensor({3, 6, 6}, 1), make_filter_bank(Basis::db4)), ShapeError);
    SubbandSet s = dwt_forward(random_tensor({3, 8, 8}, 1), haar);
    s.hh = Tensor(Shape{3, 2, 2});
    EXPECT_THROW(dwt_inverse(s, haar), ShapeError);
}

TEST(Dwt, InterleavedSynthesisMatchesPacked) {
    for (Basis basis : kBases) {
        const FilterBank bank = make_filter_bank(basis);
        SubbandSet s = dwt_forward(random_tensor({3, 16, 12}, 8), bank);
        Tensor via_shuffle = dwt_synthesize_interleaved(pixel_shuffle(pack_dwt_channels(s), 2), bank);
        EXPECT_LT(max_abs_diff(via_shuffle, dwt_inverse(s, bank)), 1e-6) << to_string(basis);
    }
}

TEST(Swt, ConstantImageHaar) {
    SubbandSet s = swt_forward(Tensor(Shape{3, 4, 4}, 1.0f), make_filter_bank(Basis::haar));
    EXPECT_EQ(s.ll.shape(), (Shape{3, 4, 4}));
    for (float v : s.ll.data()) EXPECT_NEAR(v, 2.0f, 1e-6);
    for (const Tensor* t : {&s.lh, &s.hl, &s.hh})
        for (float v : t->data()) EXPECT_NEAR(v, 0.0f, 1e-6);
}

TEST(Swt, RoundTripAllBases) {
    for (Basis basis : kBases) {
        const FilterBank bank = make_filter_bank(basis);
        Tensor x = random_tensor({3, 8, 8}, 41);
        EXPECT_LT(max_abs_diff(swt_inverse(swt_forward(x, bank), bank), x), 1e-5) << to_string(basis);
    }
}

TEST(Swt, ZeroAndLinearity) {
    const FilterBank bank = make_filter_bank(Basis::sym4);
    SubbandSet a = swt_forward(random_tensor({3, 8, 8}, 1), bank);
    SubbandSet b = swt_forward(random_tensor({3, 8, 8}, 2), bank);
    SubbandSet zero = a;
    zero.ll = zero.lh = zero.hl = zero.hh = Tensor(Shape{3, 8, 8});
    const Tensor zero_img = swt_inverse(zero, bank);
    for (float v : zero_img.data()) EXPECT_EQ(v, 0.0f);

    SubbandSet mix = a;
    mix.ll = add(scale(a.ll, 2.0f), scale(b.ll, -0.5f));
    mix.lh = add(scale(a.lh, 2.0f), scale(b.lh, -0.5f));
    mix.hl = add(scale(a.hl, 2.0f), scale(b.hl, -0.5f));
    mix.hh = add(scale(a.hh, 2.0f), scale(b.hh, -0.5f));
    Tensor lhs = swt_inverse(mix, bank);
    Tensor rhs = add(scale(swt_inverse(a, bank), 2.0f), scale(swt_inverse(b, bank), -0.5f));
    EXPECT_LT(max_abs_diff(lhs, rhs), 1e-5);
}

TEST(Swt, CircularShiftEquivarianceIsExact) {
    for (Basis basis : kBases) {
        const FilterBank bank = make_filter_bank(basis);
        Tensor x = random_tensor({3, 16, 16}, 51);
        SubbandSet base = swt_forward(x, bank);
        for (auto [dy, dx] : {std::pair{1, 0}, std::pair{0, 1}, std::pair{3, 5}}) {
            SubbandSet shifted = swt_forward(circular_shift(x, dy, dx), bank);
            EXPECT_EQ(max_abs_diff(shifted.ll, circular_shift(base.ll, dy, dx)), 0.0);
            EXPECT_EQ(max_abs_diff(shifted.lh, circular_shift(base.lh, dy, dx)), 0.0);
            EXPECT_EQ(max_abs_diff(shifted.hl, circular_shift(base.hl, dy, dx)), 0.0);
            EXPECT_EQ(max_abs_diff(shifted.hh, circular_shift(base.hh, dy, dx)), 0.0);
        }
    }
}

TEST(Dwt, OddShiftBreaksEquivariance) {
    const FilterBank bank = make_filter_bank(Basis::haar);
    Tensor x = random_tensor({3, 16, 16}, 52);
    SubbandSet base = dwt_forward(x, bank);
    SubbandSet shifted = dwt_forward(circular_shift(x, 1, 0), bank);
    // No circular shift of the decimated subbands reproduces the result.
    EXPECT_GT(max_abs_diff(shifted.lh, base.lh), 1e-3);
    EXPECT_GT(max_abs_diff(shifted.lh, circular_shift(base.lh, 1, 0)), 1e-3);
}

TEST(Dwt, ParsevalEnergy) {
    for (Basis basis : kBases) {
        Tensor x = random_tensor({3, 16, 16}, 61);
        Tensor coef = analyze(x, make_filter_bank(basis), Transform::dwt);
        double e_img = 0, e_coef = 0;
        for (float v : x.data()) e_img += double(v) * v;
        for (float v : coef.data()) e_coef += double(v) * v;
        EXPECT_NEAR(e_coef / e_img, 1.0, 1e-5) << to_string(basis);
    }
}

TEST(Pack, RoundTripAndOrdering) {
    SubbandSet s = dwt_forward(random_tensor({3, 8, 8}, 71), make_filter_bank(Basis::haar));
    Tensor packed = pack_dwt_channels(s);
    EXPECT_EQ(packed.dim(0), 12);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) EXPECT_EQ(packed.at(0, y, x), s.ll.at(0, y, x));
    EXPECT_EQ(packed.at(5, 1, 2), s.lh.at(1, 1, 2));
    SubbandSet back = unpack_dwt_channels(packed, s.spec);
    EXPECT_EQ(max_abs_diff(back.ll, s.ll), 0.0);
    EXPECT_EQ(max_abs_diff(back.hh, s.hh), 0.0);
    Tensor z = random_tensor({12, 3, 3}, 72);
    EXPECT_EQ(max_abs_diff(pack_dwt_channels(unpack_dwt_channels(z, s.spec)), z), 0.0);
    EXPECT_THROW(unpack_dwt_channels(random_tensor({8, 3, 3}, 1), s.spec), ShapeError);
}

TEST(Gradients, InverseTransformsMatchFiniteDifferences) {
    for (Transform tr : {Transform::dwt, Transform::swt}) {
        for (Basis basis : kBases) {
            const FilterBank bank = make_filter_bank(basis);
            const int h = tr == Transform::dwt ? 4 : 8;
            Tensor coef = random_tensor({12, h, h}, 81);
            auto f = [&] { return synthesize(coef, bank, tr); };
            EXPECT_LT(grad_check(f, coef, 82).rel_error, 1e-3) << to_string(tr) << "-" << to_string(basis);
            Tensor img = random_tensor({3, 8, 8}, 83);
            auto g = [&] { return analyze(img, bank, tr); };
            EXPECT_LT(grad_check(g, img, 84).rel_error, 1e-3) << to_string(tr) << "-" << to_string(basis);
        }
    }
}

TEST(Gradients, L1ThroughDwtInverse) {
    const FilterBank bank = make_filter_bank(Basis::db4);
    Tensor target = random_tensor({3, 8, 8}, 91);
    Tensor coef = random_tensor({12, 4, 4}, 92);
    auto f = [&](double* value) {
        SubbandSet s = unpack_dwt_channels(coef, WaveletSpec{Transform::dwt, Basis::db4, 1});
        return mean(abs(sub(dwt_inverse(s, bank), target)), value);
    };
    EXPECT_LT(testing::grad_check_scalar(f, coef, 93).rel_error, 1e-3);
}

}  // namespace
}  // namespace wsr
