#include "wavesr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "wavesr/error.hpp"

namespace wsr {

namespace {

constexpr float kInvGamma = 1.0f / kDisplayGamma;
// The gamma curve's slope is unbounded at 0; evaluate it no lower than this.
constexpr float kGammaSlopeFloor = 1e-3f;

// Valid-extent correlation of one H x W plane with taps (x) taps.
void filter_valid(const double* in, int H, int W, const std::vector<double>& k, double* tmp, double* out) {
    const int K = static_cast<int>(k.size());
    const int Ho = H - K + 1, Wo = W - K + 1;
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < Wo; ++x) {
            double acc = 0.0;
            for (int i = 0; i < K; ++i) acc += k[i] * in[y * W + x + i];
            tmp[y * Wo + x] = acc;
        }
    for (int y = 0; y < Ho; ++y)
        for (int x = 0; x < Wo; ++x) {
            double acc = 0.0;
            for (int i = 0; i < K; ++i) acc += k[i] * tmp[(y + i) * Wo + x];
            out[y * Wo + x] = acc;
        }
}

// Adjoint of filter_valid: scatters an Ho x Wo map back onto H x W.
void filter_valid_adjoint(const double* g, int H, int W, const std::vector<double>& k, double* tmp, double* out) {
    const int K = static_cast<int>(k.size());
    const int Ho = H - K + 1, Wo = W - K + 1;
    std::fill(tmp, tmp + static_cast<std::size_t>(H) * Wo, 0.0);
    for (int y = 0; y < Ho; ++y)
        for (int i = 0; i < K; ++i)
            for (int x = 0; x < Wo; ++x) tmp[(y + i) * Wo + x] += k[i] * g[y * Wo + x];
    std::fill(out, out + static_cast<std::size_t>(H) * W, 0.0);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < Wo; ++x)
            for (int i = 0; i < K; ++i) out[y * W + x + i] += k[i] * tmp[y * Wo + x];
}

}  // namespace

Tensor normalize_for_metrics(const Tensor& hdr) {
    auto x = hdr.data();
    std::vector<float> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::pow(std::clamp(x[i], 0.0f, 1.0f), kInvGamma);
    return detail::make_result(hdr.shape(), std::move(out), "normalize_for_metrics", {hdr},
                               [hdr](const detail::TensorImpl& o) {
                                   auto g = detail::grad_sink(hdr);
                                   if (g.empty()) return;
                                   auto x = hdr.data();
                                   for (std::size_t i = 0; i < x.size(); ++i) {
                                       if (x[i] <= 0.0f || x[i] >= 1.0f) continue;
                                       const float v = std::max(x[i], kGammaSlopeFloor);
                                       g[i] += o.grad[i] * kInvGamma * std::pow(v, kInvGamma - 1.0f);
                                   }
                               });
}

Tensor tonemap_display(const Tensor& hdr) {
    Tensor out(hdr.shape());
    auto x = hdr.data();
    auto y = out.mutable_data();
    for (std::size_t i = 0; i < x.size(); ++i) {
        const float v = std::max(x[i], 0.0f);
        y[i] = std::pow(v / (1.0f + v), kInvGamma);
    }
    return out;
}

std::vector<double> ssim_window() {
    std::vector<double> w(kSsimWindow);
    const int half = kSsimWindow / 2;
    double total = 0.0;
    for (int i = 0; i < kSsimWindow; ++i) {
        const double d = i - half;
        w[i] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
        total += w[i];
    }
    for (double& v : w) v /= total;
    return w;
}

Tensor ssim(const Tensor& pred, const Tensor& target, double* exact) {
    if (pred.shape() != target.shape() || pred.ndim() != 3) {
        throw ShapeError("ssim: shapes " + shape_str(pred.shape()) + " and " + shape_str(target.shape()));
    }
    const int C = pred.dim(0), H = pred.dim(1), W = pred.dim(2);
    if (H < kSsimWindow || W < kSsimWindow) {
        throw ShapeError("ssim: image " + std::to_string(H) + "x" + std::to_string(W) + " is smaller than the " +
                         std::to_string(kSsimWindow) + "x" + std::to_string(kSsimWindow) + " window");
    }
    const std::vector<double> k = ssim_window();
    const int Ho = H - kSsimWindow + 1, Wo = W - kSsimWindow + 1;
    const std::size_t plane = static_cast<std::size_t>(H) * W, oplane = static_cast<std::size_t>(Ho) * Wo;
    const std::size_t count = static_cast<std::size_t>(C) * oplane;

    // Per output position: dS/d(mu_x, mu_y, E[xx], E[yy], E[xy]).
    auto partials = std::make_shared<std::vector<double>>(5 * count);
    std::vector<double> xs(plane), ys(plane), prod(plane), tmp(static_cast<std::size_t>(H) * Wo);
    std::vector<double> mx(oplane), my(oplane), exx(oplane), eyy(oplane), exy(oplane);
    auto xd = pred.data(), yd = target.data();
    double acc = 0.0;
    for (int c = 0; c < C; ++c) {
        for (std::size_t i = 0; i < plane; ++i) {
            xs[i] = xd[c * plane + i];
            ys[i] = yd[c * plane + i];
        }
        filter_valid(xs.data(), H, W, k, tmp.data(), mx.data());
        filter_valid(ys.data(), H, W, k, tmp.data(), my.data());
        for (std::size_t i = 0; i < plane; ++i) prod[i] = xs[i] * xs[i];
        filter_valid(prod.data(), H, W, k, tmp.data(), exx.data());
        for (std::size_t i = 0; i < plane; ++i) prod[i] = ys[i] * ys[i];
        filter_valid(prod.data(), H, W, k, tmp.data(), eyy.data());
        for (std::size_t i = 0; i < plane; ++i) prod[i] = xs[i] * ys[i];
        filter_valid(prod.data(), H, W, k, tmp.data(), exy.data());
        for (std::size_t p = 0; p < oplane; ++p) {
            const double u = mx[p], v = my[p];
            const double a1 = 2.0 * u * v + kSsimC1;
            const double a2 = 2.0 * (exy[p] - u * v) + kSsimC2;
            const double b1 = u * u + v * v + kSsimC1;
            const double b2 = (exx[p] - u * u) + (eyy[p] - v * v) + kSsimC2;
            const double d = b1 * b2;
            const double s = a1 * a2 / d;
            acc += s;
            double* q = partials->data() + 5 * (c * oplane + p);
            q[0] = (2.0 * v * (a2 - a1) - s * 2.0 * u * (b2 - b1)) / d;
            q[1] = (2.0 * u * (a2 - a1) - s * 2.0 * v * (b2 - b1)) / d;
            q[2] = -s / b2;
            q[3] = -s / b2;
            q[4] = 2.0 * a1 / d;
        }
    }
    const double value = acc / static_cast<double>(count);
    if (exact) *exact = value;
    return detail::make_result(
        Shape{1}, {static_cast<float>(value)}, "ssim", {pred, target},
        [pred, target, partials, k, C, H, W, Ho, Wo, count](const detail::TensorImpl& o) {
            auto gx = detail::grad_sink(pred);
            auto gy = detail::grad_sink(target);
            if (gx.empty() && gy.empty()) return;
            const std::size_t plane = static_cast<std::size_t>(H) * W, oplane = static_cast<std::size_t>(Ho) * Wo;
            const double g = o.grad[0] / static_cast<double>(count);
            std::vector<double> m(oplane), tmp(static_cast<std::size_t>(H) * Wo);
            std::vector<std::vector<double>> back(5, std::vector<double>(plane));
            auto xd = pred.data(), yd = target.data();
            for (int c = 0; c < C; ++c) {
                for (int j = 0; j < 5; ++j) {
                    for (std::size_t p = 0; p < oplane; ++p) m[p] = g * (*partials)[5 * (c * oplane + p) + j];
                    filter_valid_adjoint(m.data(), H, W, k, tmp.data(), back[j].data());
                }
                for (std::size_t i = 0; i < plane; ++i) {
                    const double x = xd[c * plane + i], y = yd[c * plane + i];
                    if (!gx.empty()) gx[c * plane + i] += static_cast<float>(back[0][i] + 2.0 * x * back[2][i] + y * back[4][i]);
                    if (!gy.empty()) gy[c * plane + i] += static_cast<float>(back[1][i] + 2.0 * y * back[3][i] + x * back[4][i]);
                }
            }
        });
}

double ssim_value(const Tensor& pred, const Tensor& target) {
    NoGradGuard guard;
    double v = 0.0;
    ssim(pred, target, &v);
    return v;
}

double psnr(const Tensor& pred, const Tensor& target) {
    if (pred.shape() != target.shape()) {
        throw ShapeError("psnr: shapes " + shape_str(pred.shape()) + " and " + shape_str(target.shape()));
    }
    auto a = pred.data(), b = target.data();
    double se = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        se += d * d;
    }
    const double mse = se / static_cast<double>(a.size());
    if (mse <= 0.0) return kPsnrCapDb;
    return std::min(kPsnrCapDb, 10.0 * std::log10(1.0 / mse));
}

double MetricReport::mean_psnr() const {
    double acc = 0.0;
    for (const FrameMetric& f : frames) acc += f.psnr;
    return frames.empty() ? 0.0 : acc / static_cast<double>(frames.size());
}

double MetricReport::mean_ssim() const {
    double acc = 0.0;
    for (const FrameMetric& f : frames) acc += f.ssim;
    return frames.empty() ? 0.0 : acc / static_cast<double>(frames.size());
}

FrameMetric evaluate_frame(const std::string& id, const Tensor& pred_hdr, const Tensor& target_hdr) {
    NoGradGuard guard;
    const Tensor p = normalize_for_metrics(pred_hdr), t = normalize_for_metrics(target_hdr);
    return {id, psnr(p, t), ssim_value(p, t)};
}

void write_metric_report(std::ostream& os, const MetricReport& report) {
    char line[256];
    for (const FrameMetric& f : report.frames) {
        std::snprintf(line, sizeof line, " %.6f %.6f\n", f.psnr, f.ssim);
        os << f.frame_id << line;
    }
    std::snprintf(line, sizeof line, "mean %.6f %.6f\n", report.mean_psnr(), report.mean_ssim());
    os << line;
}

}  // namespace wsr
