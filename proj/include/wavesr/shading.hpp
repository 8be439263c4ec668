#pragma once

#include "wavesr/tensor.hpp"

namespace wsr {

/// Lower clamp on the BRDF factor, keeps demodulation finite on black metals.
inline constexpr float kBrdfEpsilon = 1e-3f;
/// Dielectric specular reflectance at normal incidence.
inline constexpr float kDielectricF0 = 0.04f;

/// Deferred-rendering material and geometry planes at one resolution.
struct GBuffer {
    Tensor albedo;     // 3 x H x W, [0,1]
    Tensor normal;     // 3 x H x W, unit length
    Tensor depth;      // 1 x H x W, >= 0
    Tensor roughness;  // 1 x H x W, [0,1]
    Tensor metallic;   // 1 x H x W, [0,1]

    int height() const { return albedo.dim(1); }
    int width() const { return albedo.dim(2); }

    /// 9 x H x W: albedo, normal, depth, roughness, metallic.
    Tensor stacked() const;
    /// Checks plane shapes and value ranges; throws ShapeError / ParamError.
    void validate() const;
};

struct BrdfFactor {
    Tensor f;  // 3 x H x W, every element >= kBrdfEpsilon
};

/// F = albedo (1 - metallic) + mix(0.04, albedo, metallic), clamped below.
BrdfFactor compute_brdf_factor(const GBuffer& g);

/// Irradiance L = I / F.
Tensor demodulate(const Tensor& frame, const BrdfFactor& f);
/// Shaded frame I = F * L. Differentiable w.r.t. `irradiance`.
Tensor remodulate(const Tensor& irradiance, const BrdfFactor& f);

}  // namespace wsr
