#pragma once

#include "wavesr/tensor.hpp"
#include "wavesr/wavelet.hpp"

namespace wsr {

struct LossWeights {
    float wavelet = 1.0f;
    float image = 1.0f;
    float ssim = 0.1f;
    float perceptual = 0.0f;  // no perceptual feature provider; must stay 0
    float mask = 0.05f;
    float temporal = 0.1f;

    /// Throws ConfigError on negative or non-finite weights, or perceptual != 0.
    void validate() const;
};

/// Mean |pred - target| over all packed coefficient maps. SWT drops the
/// outermost pixel ring of every map.
Tensor wavelet_l1(const Tensor& pred_packed, const Tensor& target_packed, const WaveletSpec& spec,
                  double* exact = nullptr);
Tensor wavelet_l1(const SubbandSet& pred, const SubbandSet& target, double* exact = nullptr);

/// Mean |pred - target| after removing a `crop`-pixel ring.
Tensor image_l1(const Tensor& pred, const Tensor& target, int crop, double* exact = nullptr);

/// Bernoulli KL(target || sigmoid(logits)), i.e. BCE minus target entropy,
/// averaged over pixels. Zero when the prediction equals the target.
Tensor mask_loss(const Tensor& logits, const Tensor& target, double* exact = nullptr);

/// mean(phi ⊙ |pred - prev_warped|). prev_warped is treated as a constant.
Tensor temporal_loss(const Tensor& pred, const Tensor& prev_warped, const Tensor& phi_temporal,
                     double* exact = nullptr);

/// Everything the composite objective may consume. Undefined tensors
/// disable the matching term (its report entry stays 0).
struct LossInputs {
    Tensor pred_coeffs;    // packed subbands, wavelet configs only
    Tensor target_coeffs;
    WaveletSpec spec;
    Tensor pred_image;     // HR irradiance
    Tensor target_image;
    int crop = 0;          // 1 for SWT configs
    Tensor mask_logits;    // 1 x H x W
    Tensor mask_target;    // spatial mask
    Tensor prev_warped;    // previous prediction warped to t, detached
    Tensor phi_temporal;   // 1 x H x W
};

struct LossReport {
    double wavelet = 0.0;
    double image = 0.0;
    double ssim = 0.0;  // 1 - SSIM on normalised images
    double mask = 0.0;
    double temporal = 0.0;
    double total = 0.0;  // sum of weight * component
};

Tensor total_loss(const LossInputs& in, const LossWeights& w, LossReport* report = nullptr);

}  // namespace wsr
