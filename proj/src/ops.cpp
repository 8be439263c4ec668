#include "wavesr/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "wavesr/error.hpp"

namespace wsr {

namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using detail::TensorImpl;

// C (m x n) = or += op(A) * op(B), all row-major; op(A) is m x k, op(B) is k x n.
// Eigen routes vector-shaped products to matrix-vector kernels that peel to
// the operands' alignment, so their summation order follows heap addresses.
// Those shapes take a fixed-order loop instead, which keeps training runs
// bitwise reproducible.
void gemm(float* C, const float* A, bool trans_a, const float* B, bool trans_b, int m, int n, int k,
          bool accumulate) {
    if (m > 1 && n > 1) {
        using CMap = Eigen::Map<const RowMat>;
        Eigen::Map<RowMat> c(C, m, n);
        auto run = [&](const auto& a, const auto& b) {
            if (accumulate) c.noalias() += a * b;
            else c.noalias() = a * b;
        };
        const CMap a(A, trans_a ? k : m, trans_a ? m : k), b(B, trans_b ? n : k, trans_b ? k : n);
        if (trans_a && trans_b) run(a.transpose(), b.transpose());
        else if (trans_a) run(a.transpose(), b);
        else if (trans_b) run(a, b.transpose());
        else run(a, b);
        return;
    }
    auto a_at = [&](int i, int p) { return trans_a ? A[static_cast<std::size_t>(p) * m + i] : A[static_cast<std::size_t>(i) * k + p]; };
    if (!accumulate) std::fill_n(C, static_cast<std::size_t>(m) * n, 0.0f);
    for (int i = 0; i < m; ++i) {
        float* c = C + static_cast<std::size_t>(i) * n;
        if (trans_b) {
            // B is stored n x k: each output is a dot product over a contiguous row.
            for (int j = 0; j < n; ++j) {
                const float* b = B + static_cast<std::size_t>(j) * k;
                float lanes[8] = {};
                int p = 0;
                for (; p + 8 <= k; p += 8)
                    for (int l = 0; l < 8; ++l) lanes[l] += a_at(i, p + l) * b[p + l];
                float acc = 0.0f;
                for (; p < k; ++p) acc += a_at(i, p) * b[p];
                for (float v : lanes) acc += v;
                c[j] += acc;
            }
        } else {
            for (int p = 0; p < k; ++p) {
                const float av = a_at(i, p);
                const float* b = B + static_cast<std::size_t>(p) * n;
                for (int j = 0; j < n; ++j) c[j] += av * b[j];
            }
        }
    }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    }
}

void require_image(const Tensor& a, const char* op) {
    if (a.ndim() != 3) {
        throw ShapeError(std::string(op) + ": expected C x H x W tensor, got " + shape_str(a.shape()));
    }
}

template <class Fwd, class Bwd>
Tensor unary(const Tensor& a, const char* op, Fwd fwd, Bwd dfdx) {
    auto x = a.data();
    std::vector<float> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = fwd(x[i]);
    return detail::make_result(a.shape(), std::move(out), op, {a}, [a, dfdx](const TensorImpl& o) {
        auto g = detail::grad_sink(a);
        if (g.empty()) return;
        auto x = a.data();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * dfdx(x[i], o.data[i]);
    });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    auto x = a.data(), y = b.data();
    std::vector<float> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + y[i];
    return detail::make_result(a.shape(), std::move(out), "add", {a, b}, [a, b](const TensorImpl& o) {
        detail::accumulate(a, o.grad);
        detail::accumulate(b, o.grad);
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    auto x = a.data(), y = b.data();
    std::vector<float> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - y[i];
    return detail::make_result(a.shape(), std::move(out), "sub", {a, b}, [a, b](const TensorImpl& o) {
        detail::accumulate(a, o.grad);
        if (auto g = detail::grad_sink(b); !g.empty()) {
            for (std::size_t i = 0; i < g.size(); ++i) g[i] -= o.grad[i];
        }
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    auto x = a.data(), y = b.data();
    std::vector<float> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * y[i];
    return detail::make_result(a.shape(), std::move(out), "mul", {a, b}, [a, b](const TensorImpl& o) {
        if (auto g = detail::grad_sink(a); !g.empty()) {
            auto y = b.data();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * y[i];
        }
        if (auto g = detail::grad_sink(b); !g.empty()) {
            auto x = a.data();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * x[i];
        }
    });
}

Tensor div(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "div");
    auto x = a.data(), y = b.data();
    std::vector<float> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] / y[i];
    return detail::make_result(a.shape(), std::move(out), "div", {a, b}, [a, b](const TensorImpl& o) {
        auto y = b.data();
        if (auto g = detail::grad_sink(a); !g.empty()) {
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] / y[i];
        }
        if (auto g = detail::grad_sink(b); !g.empty()) {
            for (std::size_t i = 0; i < g.size(); ++i) g[i] -= o.grad[i] * o.data[i] / y[i];
        }
    });
}

Tensor mul_channels(const Tensor& a, const Tensor& m) {
    require_image(a, "mul_channels");
    if (m.ndim() != 3 || m.dim(0) != 1 || m.dim(1) != a.dim(1) || m.dim(2) != a.dim(2)) {
        throw ShapeError("mul_channels: mask " + shape_str(m.shape()) + " does not broadcast over " +
                         shape_str(a.shape()));
    }
    const std::size_t plane = static_cast<std::size_t>(a.dim(1)) * a.dim(2);
    const int channels = a.dim(0);
    auto x = a.data(), w = m.data();
    std::vector<float> out(x.size());
    for (int c = 0; c < channels; ++c) {
        for (std::size_t i = 0; i < plane; ++i) out[c * plane + i] = x[c * plane + i] * w[i];
    }
    return detail::make_result(a.shape(), std::move(out), "mul_channels", {a, m},
                               [a, m, plane, channels](const TensorImpl& o) {
                                   if (auto g = detail::grad_sink(a); !g.empty()) {
                                       auto w = m.data();
                                       for (int c = 0; c < channels; ++c)
                                           for (std::size_t i = 0; i < plane; ++i)
                                               g[c * plane + i] += o.grad[c * plane + i] * w[i];
                                   }
                                   if (auto g = detail::grad_sink(m); !g.empty()) {
                                       auto x = a.data();
                                       for (int c = 0; c < channels; ++c)
                                           for (std::size_t i = 0; i < plane; ++i)
                                               g[i] += o.grad[c * plane + i] * x[c * plane + i];
                                   }
                               });
}

Tensor scale(const Tensor& a, float s) {
    return unary(a, "scale", [s](float x) { return s * x; }, [s](float, float) { return s; });
}

Tensor add_scalar(const Tensor& a, float s) {
    return unary(a, "add_scalar", [s](float x) { return x + s; }, [](float, float) { return 1.0f; });
}

Tensor abs(const Tensor& a) {
    return unary(a, "abs", [](float x) { return std::fabs(x); },
                 [](float x, float) { return x > 0.0f ? 1.0f : (x < 0.0f ? -1.0f : 0.0f); });
}

Tensor sigmoid(const Tensor& a) {
    return unary(a, "sigmoid", [](float x) { return 1.0f / (1.0f + std::exp(-x)); },
                 [](float, float y) { return y * (1.0f - y); });
}

Tensor relu(const Tensor& a) {
    return unary(a, "relu", [](float x) { return x > 0.0f ? x : 0.0f; },
                 [](float x, float) { return x > 0.0f ? 1.0f : 0.0f; });
}

Tensor leaky_relu(const Tensor& a, float slope) {
    return unary(a, "leaky_relu", [slope](float x) { return x > 0.0f ? x : slope * x; },
                 [slope](float x, float) { return x > 0.0f ? 1.0f : slope; });
}

Tensor sum(const Tensor& a, double* exact) {
    auto x = a.data();
    double acc = 0.0;
    for (float v : x) acc += v;
    if (exact) *exact = acc;
    return detail::make_result(Shape{1}, {static_cast<float>(acc)}, "sum", {a}, [a](const TensorImpl& o) {
        if (auto g = detail::grad_sink(a); !g.empty()) {
            for (float& v : g) v += o.grad[0];
        }
    });
}

Tensor mean(const Tensor& a, double* exact) {
    auto x = a.data();
    if (x.empty()) throw ShapeError("mean of empty tensor");
    double acc = 0.0;
    for (float v : x) acc += v;
    if (exact) *exact = acc / static_cast<double>(x.size());
    const float inv = 1.0f / static_cast<float>(x.size());
    return detail::make_result(Shape{1}, {static_cast<float>(acc / static_cast<double>(x.size()))}, "mean", {a},
                               [a, inv](const TensorImpl& o) {
                                   if (auto g = detail::grad_sink(a); !g.empty()) {
                                       const float d = o.grad[0] * inv;
                                       for (float& v : g) v += d;
                                   }
                               });
}

Tensor concat_channels(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ShapeError("concat_channels: no inputs");
    int channels = 0;
    for (const Tensor& p : parts) {
        require_image(p, "concat_channels");
        if (p.dim(1) != parts[0].dim(1) || p.dim(2) != parts[0].dim(2)) {
            throw ShapeError("concat_channels: spatial mismatch " + shape_str(p.shape()) + " vs " +
                             shape_str(parts[0].shape()));
        }
        channels += p.dim(0);
    }
    const int h = parts[0].dim(1), w = parts[0].dim(2);
    std::vector<float> out;
    out.reserve(static_cast<std::size_t>(channels) * h * w);
    for (const Tensor& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
    return detail::make_result(Shape{channels, h, w}, std::move(out), "concat_channels", parts,
                               [parts](const TensorImpl& o) {
                                   std::size_t offset = 0;
                                   for (const Tensor& p : parts) {
                                       detail::accumulate(p, std::span<const float>(o.grad).subspan(offset, p.numel()));
                                       offset += p.numel();
                                   }
                               });
}

Tensor slice_channels(const Tensor& a, int begin, int count) {
    require_image(a, "slice_channels");
    if (begin < 0 || count <= 0 || begin + count > a.dim(0)) {
        throw ShapeError("slice_channels: range [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                         ") outside " + std::to_string(a.dim(0)) + " channels");
    }
    std::vector<int> index(static_cast<std::size_t>(count));
    std::iota(index.begin(), index.end(), begin);
    return gather_channels(a, index);
}

Tensor gather_channels(const Tensor& a, std::span<const int> index) {
    require_image(a, "gather_channels");
    const std::size_t plane = static_cast<std::size_t>(a.dim(1)) * a.dim(2);
    std::vector<int> idx(index.begin(), index.end());
    for (int c : idx) {
        if (c < 0 || c >= a.dim(0)) throw ShapeError("gather_channels: channel " + std::to_string(c) + " out of range");
    }
    auto x = a.data();
    std::vector<float> out(idx.size() * plane);
    for (std::size_t j = 0; j < idx.size(); ++j) {
        std::copy_n(x.begin() + static_cast<std::ptrdiff_t>(idx[j] * plane), plane,
                    out.begin() + static_cast<std::ptrdiff_t>(j * plane));
    }
    return detail::make_result(Shape{static_cast<int>(idx.size()), a.dim(1), a.dim(2)}, std::move(out),
                               "gather_channels", {a}, [a, idx, plane](const TensorImpl& o) {
                                   auto g = detail::grad_sink(a);
                                   if (g.empty()) return;
                                   for (std::size_t j = 0; j < idx.size(); ++j)
                                       for (std::size_t i = 0; i < plane; ++i)
                                           g[idx[j] * plane + i] += o.grad[j * plane + i];
                               });
}

namespace {

Tensor crop_window(const Tensor& a, int y0, int x0, int h, int w, const char* op) {
    require_image(a, op);
    const int C = a.dim(0), H = a.dim(1), W = a.dim(2);
    if (h <= 0 || w <= 0 || y0 < 0 || x0 < 0 || y0 + h > H || x0 + w > W) {
        throw ShapeError(std::string(op) + ": window does not fit " + shape_str(a.shape()));
    }
    auto x = a.data();
    std::vector<float> out(static_cast<std::size_t>(C) * h * w);
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < h; ++y)
            std::copy_n(x.begin() + ((static_cast<std::ptrdiff_t>(c) * H + y0 + y) * W + x0), w,
                        out.begin() + (static_cast<std::ptrdiff_t>(c) * h + y) * w);
    return detail::make_result(Shape{C, h, w}, std::move(out), op, {a},
                               [a, y0, x0, h, w, C, H, W](const TensorImpl& o) {
                                   auto g = detail::grad_sink(a);
                                   if (g.empty()) return;
                                   for (int c = 0; c < C; ++c)
                                       for (int y = 0; y < h; ++y)
                                           for (int xx = 0; xx < w; ++xx)
                                               g[(static_cast<std::size_t>(c) * H + y0 + y) * W + x0 + xx] +=
                                                   o.grad[(static_cast<std::size_t>(c) * h + y) * w + xx];
                               });
}

}  // namespace

Tensor crop_border(const Tensor& a, int border) {
    if (border < 0) throw ParamError("crop_border: negative border");
    if (border == 0) return a;
    require_image(a, "crop_border");
    return crop_window(a, border, border, a.dim(1) - 2 * border, a.dim(2) - 2 * border, "crop_border");
}

Tensor crop_to(const Tensor& a, int height, int width) {
    require_image(a, "crop_to");
    if (height == a.dim(1) && width == a.dim(2)) return a;
    return crop_window(a, 0, 0, height, width, "crop_to");
}

// ---------------------------------------------------------------------------
// conv2d via im2col + GEMM

namespace {

struct ConvGeometry {
    int in_ch, h, w, k, stride, pad, out_h, out_w;
    int rows() const { return in_ch * k * k; }
    int cols() const { return out_h * out_w; }
    bool pointwise() const { return k == 1 && stride == 1 && pad == 0; }
};

void im2col(const float* in, const ConvGeometry& g, float* cols) {
    const int P = g.cols();
    for (int c = 0; c < g.in_ch; ++c) {
        for (int ky = 0; ky < g.k; ++ky) {
            for (int kx = 0; kx < g.k; ++kx) {
                float* row = cols + static_cast<std::size_t>((c * g.k + ky) * g.k + kx) * P;
                for (int oy = 0; oy < g.out_h; ++oy) {
                    const int iy = oy * g.stride - g.pad + ky;
                    float* dst = row + static_cast<std::size_t>(oy) * g.out_w;
                    if (iy < 0 || iy >= g.h) {
                        std::fill_n(dst, g.out_w, 0.0f);
                        continue;
                    }
                    const float* src = in + (static_cast<std::size_t>(c) * g.h + iy) * g.w;
                    if (g.stride == 1) {
                        // Valid columns form one contiguous run.
                        const int lo = std::clamp(g.pad - kx, 0, g.out_w);
                        const int hi = std::clamp(g.w + g.pad - kx, lo, g.out_w);
                        std::fill(dst, dst + lo, 0.0f);
                        std::copy(src + lo - g.pad + kx, src + hi - g.pad + kx, dst + lo);
                        std::fill(dst + hi, dst + g.out_w, 0.0f);
                        continue;
                    }
                    for (int ox = 0; ox < g.out_w; ++ox) {
                        const int ix = ox * g.stride - g.pad + kx;
                        dst[ox] = (ix >= 0 && ix < g.w) ? src[ix] : 0.0f;
                    }
                }
            }
        }
    }
}

void col2im(const float* cols, const ConvGeometry& g, float* in_grad) {
    const int P = g.cols();
    for (int c = 0; c < g.in_ch; ++c) {
        for (int ky = 0; ky < g.k; ++ky) {
            for (int kx = 0; kx < g.k; ++kx) {
                const float* row = cols + static_cast<std::size_t>((c * g.k + ky) * g.k + kx) * P;
                for (int oy = 0; oy < g.out_h; ++oy) {
                    const int iy = oy * g.stride - g.pad + ky;
                    if (iy < 0 || iy >= g.h) continue;
                    const float* src = row + static_cast<std::size_t>(oy) * g.out_w;
                    float* dst = in_grad + (static_cast<std::size_t>(c) * g.h + iy) * g.w;
                    if (g.stride == 1) {
                        const int lo = std::clamp(g.pad - kx, 0, g.out_w);
                        const int hi = std::clamp(g.w + g.pad - kx, lo, g.out_w);
                        float* d = dst - g.pad + kx;
                        for (int ox = lo; ox < hi; ++ox) d[ox] += src[ox];
                        continue;
                    }
                    for (int ox = 0; ox < g.out_w; ++ox) {
                        const int ix = ox * g.stride - g.pad + kx;
                        if (ix >= 0 && ix < g.w) dst[ix] += src[ox];
                    }
                }
            }
        }
    }
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& weights, const Tensor& bias, int stride, int padding) {
    if (stride <= 0) throw ParamError("conv2d: stride must be positive, got " + std::to_string(stride));
    if (padding < 0) throw ParamError("conv2d: padding must be non-negative, got " + std::to_string(padding));
    if (weights.ndim() != 4 || weights.dim(2) != weights.dim(3)) {
        throw ShapeError("conv2d: weights must be out x in x k x k, got " + shape_str(weights.shape()));
    }
    const bool batched = input.ndim() == 4;
    if (input.ndim() != 3 && !batched) {
        throw ShapeError("conv2d: input must be C x H x W or N x C x H x W, got " + shape_str(input.shape()));
    }
    const int n = batched ? input.dim(0) : 1;
    const int off = batched ? 1 : 0;
    ConvGeometry g{input.dim(off), input.dim(off + 1), input.dim(off + 2), weights.dim(2), stride, padding, 0, 0};
    const int out_ch = weights.dim(0);
    if (weights.dim(1) != g.in_ch) {
        throw ShapeError("conv2d: input has " + std::to_string(g.in_ch) + " channels but weights expect " +
                         std::to_string(weights.dim(1)));
    }
    if (bias.defined() && (bias.ndim() != 1 || bias.dim(0) != out_ch)) {
        throw ShapeError("conv2d: bias shape " + shape_str(bias.shape()) + " does not match " +
                         std::to_string(out_ch) + " output channels");
    }
    if (g.h + 2 * padding < g.k || g.w + 2 * padding < g.k) {
        throw ShapeError("conv2d: input " + shape_str(input.shape()) + " smaller than kernel " +
                         std::to_string(g.k));
    }
    g.out_h = (g.h + 2 * padding - g.k) / stride + 1;
    g.out_w = (g.w + 2 * padding - g.k) / stride + 1;

    const std::size_t in_size = static_cast<std::size_t>(g.in_ch) * g.h * g.w;
    const std::size_t out_size = static_cast<std::size_t>(out_ch) * g.cols();
    std::vector<float> out(static_cast<std::size_t>(n) * out_size);
    std::vector<float> cols(g.pointwise() ? 0 : static_cast<std::size_t>(g.rows()) * g.cols());
    for (int b = 0; b < n; ++b) {
        const float* in = input.data().data() + b * in_size;
        const float* colp = in;
        if (!g.pointwise()) {
            im2col(in, g, cols.data());
            colp = cols.data();
        }
        float* o = out.data() + b * out_size;
        gemm(o, weights.data().data(), false, colp, false, out_ch, g.cols(), g.rows(), false);
        if (bias.defined()) {
            auto bv = bias.data();
            for (int oc = 0; oc < out_ch; ++oc) {
                float* row = o + static_cast<std::size_t>(oc) * g.cols();
                for (int j = 0; j < g.cols(); ++j) row[j] += bv[oc];
            }
        }
    }

    Shape shape = batched ? Shape{n, out_ch, g.out_h, g.out_w} : Shape{out_ch, g.out_h, g.out_w};
    std::vector<Tensor> inputs{input, weights};
    if (bias.defined()) inputs.push_back(bias);
    return detail::make_result(
        std::move(shape), std::move(out), "conv2d", std::move(inputs),
        [input, weights, bias, g, n, out_ch, in_size, out_size](const TensorImpl& o) {
            auto gin = detail::grad_sink(input);
            auto gw = detail::grad_sink(weights);
            auto gb = bias.defined() ? detail::grad_sink(bias) : std::span<float>{};
            std::vector<float> cols(g.pointwise() ? 0 : static_cast<std::size_t>(g.rows()) * g.cols());
            std::vector<float> dcols(gin.empty() || g.pointwise() ? 0 : cols.size());
            const float* w = weights.data().data();
            for (int b = 0; b < n; ++b) {
                const float* dy = o.grad.data() + b * out_size;
                if (!gb.empty()) {
                    for (int oc = 0; oc < out_ch; ++oc) {
                        const float* row = dy + static_cast<std::size_t>(oc) * g.cols();
                        gb[oc] += std::accumulate(row, row + g.cols(), 0.0f);
                    }
                }
                const float* in = input.data().data() + b * in_size;
                if (!gw.empty()) {
                    const float* colp = in;
                    if (!g.pointwise()) {
                        im2col(in, g, cols.data());
                        colp = cols.data();
                    }
                    gemm(gw.data(), dy, false, colp, true, out_ch, g.rows(), g.cols(), true);
                }
                if (!gin.empty()) {
                    if (g.pointwise()) {
                        gemm(gin.data() + b * in_size, w, true, dy, false, g.rows(), g.cols(), out_ch, true);
                    } else {
                        gemm(dcols.data(), w, true, dy, false, g.rows(), g.cols(), out_ch, false);
                        col2im(dcols.data(), g, gin.data() + b * in_size);
                    }
                }
            }
        });
}

// ---------------------------------------------------------------------------
// pixel shuffle

Tensor pixel_shuffle(const Tensor& input, int r) {
    require_image(input, "pixel_shuffle");
    if (r <= 0) throw ParamError("pixel_shuffle: factor must be positive");
    const int Cin = input.dim(0), H = input.dim(1), W = input.dim(2);
    if (Cin % (r * r) != 0) {
        throw ShapeError("pixel_shuffle: " + std::to_string(Cin) + " channels not divisible by r^2 = " +
                         std::to_string(r * r));
    }
    const int C = Cin / (r * r), Ho = H * r, Wo = W * r;
    // Precomputed gather map: out[i] = in[src[i]].
    std::vector<std::size_t> src(static_cast<std::size_t>(C) * Ho * Wo);
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < Ho; ++y)
            for (int x = 0; x < Wo; ++x) {
                const int ic = c * r * r + (y % r) * r + (x % r);
                src[(static_cast<std::size_t>(c) * Ho + y) * Wo + x] =
                    (static_cast<std::size_t>(ic) * H + y / r) * W + x / r;
            }
    auto in = input.data();
    std::vector<float> out(src.size());
    for (std::size_t i = 0; i < src.size(); ++i) out[i] = in[src[i]];
    return detail::make_result(Shape{C, Ho, Wo}, std::move(out), "pixel_shuffle", {input},
                               [input, src = std::move(src)](const TensorImpl& o) {
                                   auto g = detail::grad_sink(input);
                                   if (g.empty()) return;
                                   for (std::size_t i = 0; i < src.size(); ++i) g[src[i]] += o.grad[i];
                               });
}

Tensor pixel_unshuffle(const Tensor& input, int r) {
    require_image(input, "pixel_unshuffle");
    if (r <= 0) throw ParamError("pixel_unshuffle: factor must be positive");
    const int C = input.dim(0), H = input.dim(1), W = input.dim(2);
    if (H % r != 0 || W % r != 0) {
        throw ShapeError("pixel_unshuffle: spatial size " + std::to_string(H) + "x" + std::to_string(W) +
                         " not divisible by " + std::to_string(r));
    }
    const int Ho = H / r, Wo = W / r, Co = C * r * r;
    std::vector<std::size_t> src(static_cast<std::size_t>(Co) * Ho * Wo);
    for (int oc = 0; oc < Co; ++oc) {
        const int c = oc / (r * r), dy = (oc / r) % r, dx = oc % r;
        for (int y = 0; y < Ho; ++y)
            for (int x = 0; x < Wo; ++x)
                src[(static_cast<std::size_t>(oc) * Ho + y) * Wo + x] =
                    (static_cast<std::size_t>(c) * H + y * r + dy) * W + x * r + dx;
    }
    auto in = input.data();
    std::vector<float> out(src.size());
    for (std::size_t i = 0; i < src.size(); ++i) out[i] = in[src[i]];
    return detail::make_result(Shape{Co, Ho, Wo}, std::move(out), "pixel_unshuffle", {input},
                               [input, src = std::move(src)](const TensorImpl& o) {
                                   auto g = detail::grad_sink(input);
                                   if (g.empty()) return;
                                   for (std::size_t i = 0; i < src.size(); ++i) g[src[i]] += o.grad[i];
                               });
}

// ---------------------------------------------------------------------------
// bilinear sampling

namespace {

struct Tap {
    std::size_t i00, i01, i10, i11;
    float w00, w01, w10, w11;
};

Tap bilinear_tap(float y, float x, int H, int W) {
    y = std::clamp(y, 0.0f, static_cast<float>(H - 1));
    x = std::clamp(x, 0.0f, static_cast<float>(W - 1));
    const int y0 = std::min(static_cast<int>(std::floor(y)), H - 1);
    const int x0 = std::min(static_cast<int>(std::floor(x)), W - 1);
    const int y1 = std::min(y0 + 1, H - 1), x1 = std::min(x0 + 1, W - 1);
    const float fy = y - static_cast<float>(y0), fx = x - static_cast<float>(x0);
    return {static_cast<std::size_t>(y0) * W + x0,
            static_cast<std::size_t>(y0) * W + x1,
            static_cast<std::size_t>(y1) * W + x0,
            static_cast<std::size_t>(y1) * W + x1,
            (1 - fy) * (1 - fx),
            (1 - fy) * fx,
            fy * (1 - fx),
            fy * fx};
}

}  // namespace

Tensor bilinear_sample(const Tensor& input, const Tensor& coords) {
    require_image(input, "bilinear_sample");
    if (coords.ndim() != 3 || coords.dim(0) != 2) {
        throw ShapeError("bilinear_sample: coords must be 2 x H' x W', got " + shape_str(coords.shape()));
    }
    const int C = input.dim(0), H = input.dim(1), W = input.dim(2);
    const int Ho = coords.dim(1), Wo = coords.dim(2);
    const std::size_t P = static_cast<std::size_t>(Ho) * Wo;
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    auto cd = coords.data();
    std::vector<Tap> taps(P);
    for (std::size_t p = 0; p < P; ++p) taps[p] = bilinear_tap(cd[p], cd[P + p], H, W);
    auto in = input.data();
    std::vector<float> out(static_cast<std::size_t>(C) * P);
    for (int c = 0; c < C; ++c) {
        const float* src = in.data() + c * plane;
        float* dst = out.data() + c * P;
        for (std::size_t p = 0; p < P; ++p) {
            const Tap& t = taps[p];
            dst[p] = t.w00 * src[t.i00] + t.w01 * src[t.i01] + t.w10 * src[t.i10] + t.w11 * src[t.i11];
        }
    }
    return detail::make_result(Shape{C, Ho, Wo}, std::move(out), "bilinear_sample", {input},
                               [input, taps = std::move(taps), C, P, plane](const TensorImpl& o) {
                                   auto g = detail::grad_sink(input);
                                   if (g.empty()) return;
                                   for (int c = 0; c < C; ++c) {
                                       float* dst = g.data() + c * plane;
                                       const float* dy = o.grad.data() + c * P;
                                       for (std::size_t p = 0; p < P; ++p) {
                                           const Tap& t = taps[p];
                                           dst[t.i00] += t.w00 * dy[p];
                                           dst[t.i01] += t.w01 * dy[p];
                                           dst[t.i10] += t.w10 * dy[p];
                                           dst[t.i11] += t.w11 * dy[p];
                                       }
                                   }
                               });
}

Tensor resize_grid(int in_h, int in_w, int out_h, int out_w) {
    Tensor grid(Shape{2, out_h, out_w});
    auto d = grid.mutable_data();
    const float sy = static_cast<float>(in_h) / static_cast<float>(out_h);
    const float sx = static_cast<float>(in_w) / static_cast<float>(out_w);
    const std::size_t P = static_cast<std::size_t>(out_h) * out_w;
    for (int y = 0; y < out_h; ++y)
        for (int x = 0; x < out_w; ++x) {
            d[static_cast<std::size_t>(y) * out_w + x] = (static_cast<float>(y) + 0.5f) * sy - 0.5f;
            d[P + static_cast<std::size_t>(y) * out_w + x] = (static_cast<float>(x) + 0.5f) * sx - 0.5f;
        }
    return grid;
}

Tensor upsample_bilinear(const Tensor& input, int out_h, int out_w) {
    require_image(input, "upsample_bilinear");
    return bilinear_sample(input, resize_grid(input.dim(1), input.dim(2), out_h, out_w));
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0)) {
        throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
    }
    const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
    std::vector<float> out(static_cast<std::size_t>(m) * n);
    gemm(out.data(), a.data().data(), false, b.data().data(), false, m, n, k, false);
    return detail::make_result(Shape{m, n}, std::move(out), "matmul", {a, b}, [a, b, m, k, n](const TensorImpl& o) {
        if (auto g = detail::grad_sink(a); !g.empty()) {
            gemm(g.data(), o.grad.data(), false, b.data().data(), true, m, k, n, true);
        }
        if (auto g = detail::grad_sink(b); !g.empty()) {
            gemm(g.data(), a.data().data(), true, o.grad.data(), false, k, n, m, true);
        }
    });
}

Tensor separable_filter_valid(const Tensor& input, std::span<const float> kernel) {
    require_image(input, "separable_filter_valid");
    const int C = input.dim(0), H = input.dim(1), W = input.dim(2);
    const int k = static_cast<int>(kernel.size());
    if (k == 0 || H < k || W < k) {
        throw ShapeError("separable_filter_valid: image " + shape_str(input.shape()) + " smaller than window " +
                         std::to_string(k));
    }
    const int Ho = H - k + 1, Wo = W - k + 1;
    std::vector<float> kv(kernel.begin(), kernel.end());
    auto in = input.data();
    std::vector<float> tmp(static_cast<std::size_t>(C) * H * Wo);
    std::vector<float> out(static_cast<std::size_t>(C) * Ho * Wo);
    for (int c = 0; c < C; ++c) {
        for (int y = 0; y < H; ++y) {
            const float* src = in.data() + (static_cast<std::size_t>(c) * H + y) * W;
            float* dst = tmp.data() + (static_cast<std::size_t>(c) * H + y) * Wo;
            for (int x = 0; x < Wo; ++x) {
                float acc = 0.0f;
                for (int t = 0; t < k; ++t) acc += kv[t] * src[x + t];
                dst[x] = acc;
            }
        }
        for (int y = 0; y < Ho; ++y) {
            float* dst = out.data() + (static_cast<std::size_t>(c) * Ho + y) * Wo;
            for (int x = 0; x < Wo; ++x) {
                float acc = 0.0f;
                for (int t = 0; t < k; ++t) acc += kv[t] * tmp[(static_cast<std::size_t>(c) * H + y + t) * Wo + x];
                dst[x] = acc;
            }
        }
    }
    return detail::make_result(Shape{C, Ho, Wo}, std::move(out), "separable_filter_valid", {input},
                               [input, kv, C, H, W, Ho, Wo, k](const TensorImpl& o) {
                                   auto g = detail::grad_sink(input);
                                   if (g.empty()) return;
                                   std::vector<float> dtmp(static_cast<std::size_t>(H) * Wo);
                                   for (int c = 0; c < C; ++c) {
                                       std::fill(dtmp.begin(), dtmp.end(), 0.0f);
                                       for (int y = 0; y < Ho; ++y)
                                           for (int x = 0; x < Wo; ++x) {
                                               const float d = o.grad[(static_cast<std::size_t>(c) * Ho + y) * Wo + x];
                                               for (int t = 0; t < k; ++t)
                                                   dtmp[static_cast<std::size_t>(y + t) * Wo + x] += kv[t] * d;
                                           }
                                       for (int y = 0; y < H; ++y) {
                                           float* dst = g.data() + (static_cast<std::size_t>(c) * H + y) * W;
                                           for (int x = 0; x < Wo; ++x) {
                                               const float d = dtmp[static_cast<std::size_t>(y) * Wo + x];
                                               for (int t = 0; t < k; ++t) dst[x + t] += kv[t] * d;
                                           }
                                       }
                                   }
                               });
}

}  // namespace wsr
