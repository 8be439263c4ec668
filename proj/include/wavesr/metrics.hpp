#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "wavesr/tensor.hpp"

namespace wsr {

inline constexpr double kPsnrCapDb = 100.0;
inline constexpr float kDisplayGamma = 2.2f;
inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

/// clip(x, 0, 1)^(1/2.2). Differentiable; the gradient is zero where the
/// clip is active.
Tensor normalize_for_metrics(const Tensor& hdr);

/// Reinhard x / (1 + x) then gamma 1/2.2. Not recorded for autodiff.
Tensor tonemap_display(const Tensor& hdr);

/// Normalised 1-D Gaussian taps of the SSIM window.
std::vector<double> ssim_window();

/// Mean local SSIM over all channels and valid window positions. Returns a
/// differentiable scalar. `exact` receives the double-precision mean.
Tensor ssim(const Tensor& pred, const Tensor& target, double* exact = nullptr);

/// Evaluation-only helpers on normalised inputs.
double ssim_value(const Tensor& pred, const Tensor& target);
double psnr(const Tensor& pred, const Tensor& target);

struct FrameMetric {
    std::string frame_id;
    double psnr = 0.0;
    double ssim = 0.0;
};

struct MetricReport {
    std::vector<FrameMetric> frames;
    double mean_psnr() const;
    double mean_ssim() const;
};

/// Per-frame metrics on HDR irradiance-space frames after normalisation.
FrameMetric evaluate_frame(const std::string& id, const Tensor& pred_hdr, const Tensor& target_hdr);

/// "<id> <psnr> <ssim>" per frame, then "mean <psnr> <ssim>"; six decimals.
void write_metric_report(std::ostream& os, const MetricReport& report);

}  // namespace wsr
