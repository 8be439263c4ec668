#include "wavesr/temporal.hpp"

#include <algorithm>
#include <cmath>

#include "wavesr/error.hpp"
#include "wavesr/ops.hpp"

namespace wsr {

Tensor warp(const Tensor& prev, const MotionField& mv) {
    if (prev.ndim() != 3 || mv.mv.ndim() != 3 || mv.mv.dim(0) != 2 || mv.mv.dim(1) != prev.dim(1) ||
        mv.mv.dim(2) != prev.dim(2)) {
        throw ShapeError("warp: frame " + shape_str(prev.shape()) + " and motion " + shape_str(mv.mv.shape()) +
                         " disagree spatially");
    }
    const int H = prev.dim(1), W = prev.dim(2);
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    Tensor coords(Shape{2, H, W});
    auto c = coords.mutable_data();
    auto m = mv.mv.data();
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * W + x;
            c[i] = static_cast<float>(y) + m[i];
            c[plane + i] = static_cast<float>(x) + m[plane + i];
        }
    return bilinear_sample(prev, coords);
}

GBuffer warp(const GBuffer& prev, const MotionField& mv) {
    NoGradGuard guard;
    return {warp(prev.albedo, mv), warp(prev.normal, mv), warp(prev.depth, mv), warp(prev.roughness, mv),
            warp(prev.metallic, mv)};
}

MaskPair compute_masks(const GBuffer& g_cur, const GBuffer& g_prev_warped, const Tensor& l_prev_warped,
                       const Tensor& l_lr_up, const MaskParams& params) {
    const int H = g_cur.height(), W = g_cur.width();
    auto same_grid = [&](const Tensor& t) { return t.ndim() == 3 && t.dim(1) == H && t.dim(2) == W; };
    if (!same_grid(g_prev_warped.depth) || !same_grid(g_prev_warped.normal) || !same_grid(l_prev_warped) ||
        !same_grid(l_lr_up) || l_prev_warped.shape() != l_lr_up.shape()) {
        throw ShapeError("compute_masks: inputs must share the HR resolution " + std::to_string(H) + "x" +
                         std::to_string(W));
    }
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    MaskPair masks{Tensor(Shape{1, H, W}), Tensor(Shape{1, H, W})};
    auto temporal = masks.temporal.mutable_data();
    auto spatial = masks.spatial.mutable_data();
    auto d_cur = g_cur.depth.data(), d_prev = g_prev_warped.depth.data();
    auto n_cur = g_cur.normal.data(), n_prev = g_prev_warped.normal.data();
    auto l_prev = l_prev_warped.data(), l_up = l_lr_up.data();
    const int channels = l_prev_warped.dim(0);
    for (std::size_t i = 0; i < plane; ++i) {
        const float dd = std::fabs(d_cur[i] - d_prev[i]);
        float dot = 0.0f;
        for (int c = 0; c < 3; ++c) dot += n_cur[c * plane + i] * n_prev[c * plane + i];
        const float normal_term = std::max(0.0f, 1.0f - dot);
        temporal[i] = std::clamp(std::exp(-(params.alpha_depth * dd + params.alpha_normal * normal_term)), 0.0f, 1.0f);

        float l1 = 0.0f;
        for (int c = 0; c < channels; ++c) l1 += std::fabs(l_prev[c * plane + i] - l_up[c * plane + i]);
        spatial[i] = std::clamp(std::exp(-params.alpha_spatial * l1), 0.0f, 1.0f);
    }
    return masks;
}

}  // namespace wsr
