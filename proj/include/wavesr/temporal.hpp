#pragma once

#include "wavesr/shading.hpp"
#include "wavesr/tensor.hpp"

namespace wsr {

/// Per-pixel (dy, dx) offsets in pixels from the current frame to where the
/// same surface point was in the previous frame.
struct MotionField {
    Tensor mv;  // 2 x H x W
};

struct MaskPair {
    Tensor spatial;   // 1 x H x W, 1 where history shading agrees with the LR frame
    Tensor temporal;  // 1 x H x W, ~0 at disocclusions
};

/// Sharpness of the exponential similarity kernels.
struct MaskParams {
    float alpha_depth = 1.0f;
    float alpha_normal = 10.0f;
    float alpha_spatial = 5.0f;
};

/// Gather-style reprojection: out(y,x) = prev(y+dy, x+dx), bilinear with
/// border clamp. Differentiable w.r.t. prev.
Tensor warp(const Tensor& prev, const MotionField& mv);

/// Warps every G-buffer plane (normals are not renormalised).
GBuffer warp(const GBuffer& prev, const MotionField& mv);

/// temporal = exp(-(a_d |depth_cur - depth_prev| + a_n (1 - <n_cur, n_prev>)))
/// spatial  = exp(-a_s sum_c |l_prev_warped - l_lr_up|)
/// Not recorded in the autodiff graph.
MaskPair compute_masks(const GBuffer& g_cur, const GBuffer& g_prev_warped, const Tensor& l_prev_warped,
                       const Tensor& l_lr_up, const MaskParams& params = {});

}  // namespace wsr
