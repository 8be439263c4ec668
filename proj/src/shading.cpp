#include "wavesr/shading.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "wavesr/error.hpp"
#include "wavesr/ops.hpp"

namespace wsr {

Tensor GBuffer::stacked() const {
    NoGradGuard guard;
    return concat_channels({albedo, normal, depth, roughness, metallic});
}

void GBuffer::validate() const {
    auto check_plane = [&](const Tensor& t, int channels, const char* name) {
        if (!t.defined() || t.ndim() != 3 || t.dim(0) != channels || t.dim(1) != albedo.dim(1) ||
            t.dim(2) != albedo.dim(2)) {
            throw ShapeError(std::string("g-buffer plane '") + name + "' has shape " +
                             (t.defined() ? shape_str(t.shape()) : std::string("<undefined>")));
        }
    };
    if (!albedo.defined() || albedo.ndim() != 3) throw ShapeError("g-buffer albedo must be 3 x H x W");
    check_plane(albedo, 3, "albedo");
    check_plane(normal, 3, "normal");
    check_plane(depth, 1, "depth");
    check_plane(roughness, 1, "roughness");
    check_plane(metallic, 1, "metallic");

    auto in_unit = [](const Tensor& t, const char* name) {
        for (float v : t.data()) {
            if (!(v >= 0.0f && v <= 1.0f)) throw ParamError(std::string("g-buffer ") + name + " outside [0,1]");
        }
    };
    in_unit(albedo, "albedo");
    in_unit(roughness, "roughness");
    in_unit(metallic, "metallic");
    for (float v : depth.data()) {
        if (!(v >= 0.0f)) throw ParamError("g-buffer depth must be non-negative");
    }
    const std::size_t plane = static_cast<std::size_t>(height()) * width();
    auto n = normal.data();
    for (std::size_t i = 0; i < plane; ++i) {
        const float len = std::sqrt(n[i] * n[i] + n[plane + i] * n[plane + i] + n[2 * plane + i] * n[2 * plane + i]);
        if (std::fabs(len - 1.0f) > 1e-3f) throw ParamError("g-buffer normal is not unit length");
    }
}

BrdfFactor compute_brdf_factor(const GBuffer& g) {
    const int H = g.height(), W = g.width();
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    Tensor f(Shape{3, H, W});
    auto out = f.mutable_data();
    auto a = g.albedo.data();
    auto m = g.metallic.data();
    for (int c = 0; c < 3; ++c) {
        for (std::size_t i = 0; i < plane; ++i) {
            const float albedo = a[c * plane + i];
            const float metal = m[i];
            const float diffuse = albedo * (1.0f - metal);
            const float specular = kDielectricF0 * (1.0f - metal) + albedo * metal;
            out[c * plane + i] = std::max(diffuse + specular, kBrdfEpsilon);
        }
    }
    return {f};
}

Tensor demodulate(const Tensor& frame, const BrdfFactor& f) {
    if (frame.shape() != f.f.shape()) {
        throw ShapeError("demodulate: frame " + shape_str(frame.shape()) + " vs BRDF " + shape_str(f.f.shape()));
    }
    return div(frame, f.f);
}

Tensor remodulate(const Tensor& irradiance, const BrdfFactor& f) {
    if (irradiance.shape() != f.f.shape()) {
        throw ShapeError("remodulate: irradiance " + shape_str(irradiance.shape()) + " vs BRDF " +
                         shape_str(f.f.shape()));
    }
    return mul(irradiance, f.f);
}

}  // namespace wsr
