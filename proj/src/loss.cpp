#include "wavesr/loss.hpp"

#include <cmath>
#include <string>

#include "wavesr/error.hpp"
#include "wavesr/metrics.hpp"
#include "wavesr/ops.hpp"

namespace wsr {

namespace {

void require_same(const Tensor& a, const Tensor& b, const char* what) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(what) + ": shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
    }
}

// Numerically stable log(1 + e^z).
double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double entropy(double q) {
    double h = 0.0;
    if (q > 0.0) h -= q * std::log(q);
    if (q < 1.0) h -= (1.0 - q) * std::log1p(-q);
    return h;
}

}  // namespace

void LossWeights::validate() const {
    const std::pair<const char*, float> items[] = {{"wavelet", wavelet}, {"image", image},  {"ssim", ssim},
                                                   {"perceptual", perceptual}, {"mask", mask}, {"temporal", temporal}};
    for (const auto& [name, v] : items) {
        if (!std::isfinite(v) || v < 0.0f) {
            throw ConfigError(std::string("loss weight '") + name + "' must be a non-negative number, got " +
                              std::to_string(v));
        }
    }
    if (perceptual != 0.0f) throw ConfigError("loss weight 'perceptual' is unsupported and must be 0");
}

Tensor wavelet_l1(const Tensor& pred_packed, const Tensor& target_packed, const WaveletSpec& spec, double* exact) {
    require_same(pred_packed, target_packed, "wavelet_l1");
    Tensor diff = abs(sub(pred_packed, target_packed));
    if (spec.transform == Transform::swt) diff = crop_border(diff, 1);
    return mean(diff, exact);
}

Tensor wavelet_l1(const SubbandSet& pred, const SubbandSet& target, double* exact) {
    if (pred.layout != target.layout) throw ShapeError("wavelet_l1: subband layouts differ");
    return wavelet_l1(pack_subbands(pred), pack_subbands(target), pred.spec, exact);
}

Tensor image_l1(const Tensor& pred, const Tensor& target, int crop, double* exact) {
    require_same(pred, target, "image_l1");
    if (crop < 0) throw ParamError("image_l1: negative crop");
    Tensor diff = abs(sub(pred, target));
    if (crop > 0) diff = crop_border(diff, crop);
    return mean(diff, exact);
}

Tensor mask_loss(const Tensor& logits, const Tensor& target, double* exact) {
    require_same(logits, target, "mask_loss");
    auto z = logits.data(), q = target.data();
    double acc = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double qi = q[i];
        acc += softplus(z[i]) - qi * z[i] - entropy(qi);
    }
    const double value = acc / static_cast<double>(z.size());
    if (exact) *exact = value;
    return detail::make_result(Shape{1}, {static_cast<float>(value)}, "mask_loss", {logits},
                               [logits, target](const detail::TensorImpl& o) {
                                   auto g = detail::grad_sink(logits);
                                   if (g.empty()) return;
                                   auto z = logits.data(), q = target.data();
                                   const float scale = o.grad[0] / static_cast<float>(z.size());
                                   for (std::size_t i = 0; i < z.size(); ++i) {
                                       const float p = 1.0f / (1.0f + std::exp(-z[i]));
                                       g[i] += scale * (p - q[i]);
                                   }
                               });
}

Tensor temporal_loss(const Tensor& pred, const Tensor& prev_warped, const Tensor& phi_temporal, double* exact) {
    require_same(pred, prev_warped, "temporal_loss");
    if (phi_temporal.ndim() != 3 || phi_temporal.dim(0) != 1 || phi_temporal.dim(1) != pred.dim(1) ||
        phi_temporal.dim(2) != pred.dim(2)) {
        throw ShapeError("temporal_loss: mask " + shape_str(phi_temporal.shape()) + " vs frame " +
                         shape_str(pred.shape()));
    }
    return mean(mul_channels(abs(sub(pred, prev_warped.detach())), phi_temporal.detach()), exact);
}

Tensor total_loss(const LossInputs& in, const LossWeights& w, LossReport* report) {
    w.validate();
    LossReport r;
    std::vector<Tensor> terms;
    auto add_term = [&](const Tensor& component, float weight) {
        if (weight != 0.0f) terms.push_back(scale(component, weight));
    };

    if (in.pred_coeffs.defined()) {
        add_term(wavelet_l1(in.pred_coeffs, in.target_coeffs, in.spec, &r.wavelet), w.wavelet);
    }
    if (in.pred_image.defined()) {
        add_term(image_l1(in.pred_image, in.target_image, in.crop, &r.image), w.image);
        if (w.ssim != 0.0f) {
            Tensor p = normalize_for_metrics(in.pred_image), t = normalize_for_metrics(in.target_image);
            if (in.crop > 0) {
                p = crop_border(p, in.crop);
                t = crop_border(t, in.crop);
            }
            double s = 0.0;
            const Tensor sim = ssim(p, t.detach(), &s);
            r.ssim = 1.0 - s;
            terms.push_back(scale(add_scalar(scale(sim, -1.0f), 1.0f), w.ssim));
        }
    }
    if (in.mask_logits.defined()) add_term(mask_loss(in.mask_logits, in.mask_target, &r.mask), w.mask);
    if (in.prev_warped.defined()) {
        add_term(temporal_loss(in.pred_image, in.prev_warped, in.phi_temporal, &r.temporal), w.temporal);
    }

    r.total = w.wavelet * r.wavelet + w.image * r.image + w.ssim * r.ssim + w.mask * r.mask + w.temporal * r.temporal;
    if (report) *report = r;
    if (terms.empty()) return Tensor::scalar(0.0f);
    Tensor total = terms[0];
    for (std::size_t i = 1; i < terms.size(); ++i) total = add(total, terms[i]);
    return total;
}

}  // namespace wsr
