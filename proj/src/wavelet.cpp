#include "wavesr/wavelet.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "wavesr/error.hpp"
#include "wavesr/ops.hpp"

namespace wsr {

std::string to_string(Transform t) { return t == Transform::dwt ? "dwt" : "swt"; }

std::string to_string(Basis b) {
    switch (b) {
        case Basis::haar: return "haar";
        case Basis::db4: return "db4";
        case Basis::sym4: return "sym4";
    }
    return "?";
}

Transform parse_transform(std::string_view s) {
    if (s == "dwt") return Transform::dwt;
    if (s == "swt") return Transform::swt;
    throw ConfigError("unknown wavelet transform '" + std::string(s) + "' (expected dwt or swt)");
}

Basis parse_basis(std::string_view s) {
    if (s == "haar") return Basis::haar;
    if (s == "db4") return Basis::db4;
    if (s == "sym4") return Basis::sym4;
    throw ConfigError("unsupported wavelet basis '" + std::string(s) + "' (expected haar, db4 or sym4)");
}

std::string to_string(const WaveletSpec& spec) { return to_string(spec.transform) + "-" + to_string(spec.basis); }

FilterBank make_filter_bank(Basis basis) {
    FilterBank bank;
    bank.basis = basis;
    switch (basis) {
        case Basis::haar: {
            const double a = 1.0 / std::sqrt(2.0);
            bank.dec_lo = {a, a};
            break;
        }
        case Basis::db4:
            bank.dec_lo = {-0.010597401785069032, 0.0328830116668852,  0.030841381835560764, -0.18703481171909309,
                           -0.027983769416859854, 0.6308807679298589,  0.7148465705529157,   0.2303778133088965};
            break;
        case Basis::sym4:
            bank.dec_lo = {-0.07576571478927333, -0.02963552764599851, 0.49761866763201545,  0.8037387518059161,
                           0.29785779560527736,  -0.09921954357684722, -0.012603967262037833, 0.0322231006040427};
            break;
        default:
            throw ConfigError("unsupported wavelet basis");
    }
    const std::size_t L = bank.dec_lo.size();
    bank.dec_hi.resize(L);
    for (std::size_t k = 0; k < L; ++k) bank.dec_hi[k] = (k % 2 == 0 ? 1.0 : -1.0) * bank.dec_lo[L - 1 - k];
    bank.rec_lo.assign(bank.dec_lo.rbegin(), bank.dec_lo.rend());
    bank.rec_hi.assign(bank.dec_hi.rbegin(), bank.dec_hi.rend());
    return bank;
}

namespace {

// Where coefficient (c, band, y, x) lives in a coefficient buffer.
struct CoefLayout {
    int h, w;  // plane size of one subband
    bool interleaved;

    std::size_t index(int c, int band, int y, int x) const {
        if (interleaved) {
            const int dy = band >> 1, dx = band & 1;
            return (static_cast<std::size_t>(c) * 2 * h + 2 * y + dy) * (2 * w) + 2 * x + dx;
        }
        return ((static_cast<std::size_t>(c) * 4 + band) * h + y) * w + x;
    }
};

struct Geometry {
    int channels, H, W;
    int step;  // 2 for decimated, 1 for stationary
    CoefLayout coef;
};

// Coefficients are correlations with periodic wrap:
//   lo[n] = sum_k dec_lo[k] x[(step*n + k) mod N]
// rows (x axis) first, then columns (y axis).
void analysis_kernel(const float* img, float* coef, const Geometry& g, const FilterBank& bank) {
    const int L = bank.length();
    const int h = g.coef.h, w = g.coef.w;
    std::vector<double> lo(static_cast<std::size_t>(g.H) * w), hi(lo.size());
    for (int c = 0; c < g.channels; ++c) {
        const float* src = img + static_cast<std::size_t>(c) * g.H * g.W;
        for (int y = 0; y < g.H; ++y) {
            const float* row = src + static_cast<std::size_t>(y) * g.W;
            for (int n = 0; n < w; ++n) {
                double a = 0.0, d = 0.0;
                for (int k = 0; k < L; ++k) {
                    const double v = row[(g.step * n + k) % g.W];
                    a += bank.dec_lo[k] * v;
                    d += bank.dec_hi[k] * v;
                }
                lo[static_cast<std::size_t>(y) * w + n] = a;
                hi[static_cast<std::size_t>(y) * w + n] = d;
            }
        }
        for (int m = 0; m < h; ++m) {
            for (int n = 0; n < w; ++n) {
                double ll = 0.0, lh = 0.0, hl = 0.0, hh = 0.0;
                for (int k = 0; k < L; ++k) {
                    const std::size_t r = static_cast<std::size_t>((g.step * m + k) % g.H) * w + n;
                    ll += bank.dec_lo[k] * lo[r];
                    lh += bank.dec_hi[k] * lo[r];
                    hl += bank.dec_lo[k] * hi[r];
                    hh += bank.dec_hi[k] * hi[r];
                }
                coef[g.coef.index(c, kLL, m, n)] = static_cast<float>(ll);
                coef[g.coef.index(c, kLH, m, n)] = static_cast<float>(lh);
                coef[g.coef.index(c, kHL, m, n)] = static_cast<float>(hl);
                coef[g.coef.index(c, kHH, m, n)] = static_cast<float>(hh);
            }
        }
    }
}

// Adds scale * A^T(coef) into img, A being analysis_kernel's linear map.
void adjoint_kernel(const float* coef, float* img, const Geometry& g, const FilterBank& bank, double scale) {
    const int L = bank.length();
    const int h = g.coef.h, w = g.coef.w;
    std::vector<double> lo(static_cast<std::size_t>(g.H) * w), hi(lo.size());
    for (int c = 0; c < g.channels; ++c) {
        std::fill(lo.begin(), lo.end(), 0.0);
        std::fill(hi.begin(), hi.end(), 0.0);
        for (int m = 0; m < h; ++m) {
            for (int n = 0; n < w; ++n) {
                const double ll = coef[g.coef.index(c, kLL, m, n)];
                const double lh = coef[g.coef.index(c, kLH, m, n)];
                const double hl = coef[g.coef.index(c, kHL, m, n)];
                const double hh = coef[g.coef.index(c, kHH, m, n)];
                for (int k = 0; k < L; ++k) {
                    const std::size_t r = static_cast<std::size_t>((g.step * m + k) % g.H) * w + n;
                    lo[r] += bank.dec_lo[k] * ll + bank.dec_hi[k] * lh;
                    hi[r] += bank.dec_lo[k] * hl + bank.dec_hi[k] * hh;
                }
            }
        }
        float* dst = img + static_cast<std::size_t>(c) * g.H * g.W;
        std::vector<double> row(static_cast<std::size_t>(g.W));
        for (int y = 0; y < g.H; ++y) {
            std::fill(row.begin(), row.end(), 0.0);
            for (int n = 0; n < w; ++n) {
                const double a = lo[static_cast<std::size_t>(y) * w + n];
                const double d = hi[static_cast<std::size_t>(y) * w + n];
                for (int k = 0; k < L; ++k) row[(g.step * n + k) % g.W] += bank.dec_lo[k] * a + bank.dec_hi[k] * d;
            }
            float* out = dst + static_cast<std::size_t>(y) * g.W;
            for (int x = 0; x < g.W; ++x) out[x] += static_cast<float>(scale * row[x]);
        }
    }
}

void check_image_for_analysis(const Tensor& image, const FilterBank& bank, Transform transform) {
    if (image.ndim() != 3) throw ShapeError("wavelet analysis expects C x H x W, got " + shape_str(image.shape()));
    const int H = image.dim(1), W = image.dim(2);
    if (H < bank.length() || W < bank.length()) {
        throw ShapeError("image " + shape_str(image.shape()) + " smaller than " + to_string(bank.basis) +
                         " filter length " + std::to_string(bank.length()));
    }
    if (transform == Transform::dwt && (H % 2 != 0 || W % 2 != 0)) {
        throw ShapeError("DWT requires even image dimensions, got " + shape_str(image.shape()));
    }
}

// Adjoint scale making synthesis the exact inverse: the stationary frame is
// tight with bound 2 per axis.
double synthesis_scale(Transform t) { return t == Transform::swt ? 0.25 : 1.0; }

Tensor synthesize_impl(const Tensor& coef, const FilterBank& bank, Transform transform, bool interleaved) {
    if (coef.ndim() != 3) throw ShapeError("wavelet synthesis expects a 3-D tensor, got " + shape_str(coef.shape()));
    Geometry g{};
    g.step = transform == Transform::dwt ? 2 : 1;
    if (interleaved) {
        if (coef.dim(1) % 2 || coef.dim(2) % 2) throw ShapeError("interleaved DWT layout needs even dimensions");
        g.channels = coef.dim(0);
        g.coef = {coef.dim(1) / 2, coef.dim(2) / 2, true};
    } else {
        if (coef.dim(0) % 4 != 0) {
            throw ShapeError("packed coefficients need a multiple of 4 channels, got " + std::to_string(coef.dim(0)));
        }
        g.channels = coef.dim(0) / 4;
        g.coef = {coef.dim(1), coef.dim(2), false};
    }
    g.H = g.coef.h * g.step;
    g.W = g.coef.w * g.step;
    if (g.H < bank.length() || g.W < bank.length()) {
        throw ShapeError("coefficient planes " + shape_str(coef.shape()) + " too small for filter length " +
                         std::to_string(bank.length()));
    }
    const double s = synthesis_scale(transform);
    std::vector<float> out(static_cast<std::size_t>(g.channels) * g.H * g.W, 0.0f);
    adjoint_kernel(coef.data().data(), out.data(), g, bank, s);
    return detail::make_result(Shape{g.channels, g.H, g.W}, std::move(out), "wavelet_synthesize", {coef},
                               [coef, bank, g, s](const detail::TensorImpl& o) {
                                   auto grad = detail::grad_sink(coef);
                                   if (grad.empty()) return;
                                   std::vector<float> tmp(grad.size());
                                   analysis_kernel(o.grad.data(), tmp.data(), g, bank);
                                   for (std::size_t i = 0; i < grad.size(); ++i)
                                       grad[i] += static_cast<float>(s * tmp[i]);
                               });
}

const FilterBank& cached_bank(Basis basis) {
    static const std::array<FilterBank, 3> banks{make_filter_bank(Basis::haar), make_filter_bank(Basis::db4),
                                                 make_filter_bank(Basis::sym4)};
    return banks[static_cast<std::size_t>(basis)];
}

void check_spec(const WaveletSpec& spec) {
    if (spec.levels != 1) throw ConfigError("only single-level wavelet decomposition is supported");
}

}  // namespace

Tensor analyze(const Tensor& image, const FilterBank& bank, Transform transform) {
    check_image_for_analysis(image, bank, transform);
    Geometry g{};
    g.channels = image.dim(0);
    g.H = image.dim(1);
    g.W = image.dim(2);
    g.step = transform == Transform::dwt ? 2 : 1;
    g.coef = {g.H / g.step, g.W / g.step, false};
    std::vector<float> out(static_cast<std::size_t>(4) * g.channels * g.coef.h * g.coef.w);
    analysis_kernel(image.data().data(), out.data(), g, bank);
    return detail::make_result(Shape{4 * g.channels, g.coef.h, g.coef.w}, std::move(out), "wavelet_analyze", {image},
                               [image, bank, g](const detail::TensorImpl& o) {
                                   auto grad = detail::grad_sink(image);
                                   if (!grad.empty()) adjoint_kernel(o.grad.data(), grad.data(), g, bank, 1.0);
                               });
}

Tensor analyze(const Tensor& image, const WaveletSpec& spec) {
    check_spec(spec);
    return analyze(image, cached_bank(spec.basis), spec.transform);
}

Tensor synthesize(const Tensor& packed, const FilterBank& bank, Transform transform) {
    return synthesize_impl(packed, bank, transform, false);
}

Tensor synthesize(const Tensor& packed, const WaveletSpec& spec) {
    check_spec(spec);
    return synthesize(packed, cached_bank(spec.basis), spec.transform);
}

Tensor dwt_synthesize_interleaved(const Tensor& interleaved, const FilterBank& bank) {
    return synthesize_impl(interleaved, bank, Transform::dwt, true);
}

SubbandSet unpack_subbands(const Tensor& packed, SubbandLayout layout, const WaveletSpec& spec) {
    if (packed.ndim() != 3 || packed.dim(0) % 4 != 0) {
        throw ShapeError("unpack: expected 4C x H x W coefficients, got " + shape_str(packed.shape()));
    }
    const int C = packed.dim(0) / 4;
    SubbandSet sub;
    sub.layout = layout;
    sub.spec = spec;
    Tensor* bands[4] = {&sub.ll, &sub.lh, &sub.hl, &sub.hh};
    for (int b = 0; b < 4; ++b) {
        std::vector<int> idx(static_cast<std::size_t>(C));
        for (int c = 0; c < C; ++c) idx[static_cast<std::size_t>(c)] = c * 4 + b;
        *bands[b] = gather_channels(packed, idx);
    }
    return sub;
}

Tensor pack_subbands(const SubbandSet& sub) {
    const Shape& s = sub.ll.shape();
    for (const Tensor* t : {&sub.lh, &sub.hl, &sub.hh}) {
        if (t->shape() != s) {
            throw ShapeError("subbands have mixed shapes: " + shape_str(s) + " vs " + shape_str(t->shape()));
        }
    }
    const int C = s[0];
    Tensor stacked = concat_channels({sub.ll, sub.lh, sub.hl, sub.hh});
    std::vector<int> idx(static_cast<std::size_t>(4 * C));
    for (int c = 0; c < C; ++c)
        for (int b = 0; b < 4; ++b) idx[static_cast<std::size_t>(c * 4 + b)] = b * C + c;
    return gather_channels(stacked, idx);
}

Tensor pack_dwt_channels(const SubbandSet& sub) {
    if (sub.layout != SubbandLayout::decimated) throw ShapeError("pack_dwt_channels needs decimated subbands");
    return pack_subbands(sub);
}

SubbandSet unpack_dwt_channels(const Tensor& packed, const WaveletSpec& spec) {
    if (packed.ndim() != 3 || packed.dim(0) != 12) {
        throw ShapeError("unpack_dwt_channels: expected 12 channels, got " + shape_str(packed.shape()));
    }
    return unpack_subbands(packed, SubbandLayout::decimated, spec);
}

SubbandSet dwt_forward(const Tensor& image, const FilterBank& bank) {
    return unpack_subbands(analyze(image, bank, Transform::dwt), SubbandLayout::decimated,
                           WaveletSpec{Transform::dwt, bank.basis, 1});
}

Tensor dwt_inverse(const SubbandSet& sub, const FilterBank& bank) {
    if (sub.layout != SubbandLayout::decimated) throw ShapeError("dwt_inverse needs decimated subbands");
    return synthesize(pack_subbands(sub), bank, Transform::dwt);
}

SubbandSet swt_forward(const Tensor& image, const FilterBank& bank) {
    return unpack_subbands(analyze(image, bank, Transform::swt), SubbandLayout::full_resolution,
                           WaveletSpec{Transform::swt, bank.basis, 1});
}

Tensor swt_inverse(const SubbandSet& sub, const FilterBank& bank) {
    if (sub.layout != SubbandLayout::full_resolution) throw ShapeError("swt_inverse needs full-resolution subbands");
    return synthesize(pack_subbands(sub), bank, Transform::swt);
}

SubbandSet decompose(const Tensor& image, const WaveletSpec& spec) {
    check_spec(spec);
    const FilterBank& bank = cached_bank(spec.basis);
    return spec.transform == Transform::dwt ? dwt_forward(image, bank) : swt_forward(image, bank);
}

Tensor reconstruct_subbands(const SubbandSet& sub) {
    check_spec(sub.spec);
    const FilterBank& bank = cached_bank(sub.spec.basis);
    return sub.spec.transform == Transform::dwt ? dwt_inverse(sub, bank) : swt_inverse(sub, bank);
}

WaveletSpec parse_wavelet_spec(const std::string& v) {
    const auto dash = v.find('-');
    if (dash == std::string::npos) throw ConfigError("wavelet must look like 'swt-haar' or be 'none', got '" + v + "'");
    return WaveletSpec{parse_transform(v.substr(0, dash)), parse_basis(v.substr(dash + 1)), 1};
}

}  // namespace wsr
