#pragma once

#include <span>
#include <vector>

#include "wavesr/tensor.hpp"

// Differentiable primitives. Image arguments are C x H x W unless noted;
// conv2d additionally accepts a leading batch dimension.
namespace wsr {

// Elementwise, identical shapes required.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

// `m` is 1 x H x W and is broadcast over the channels of `a` (C x H x W).
Tensor mul_channels(const Tensor& a, const Tensor& m);

Tensor scale(const Tensor& a, float s);
Tensor add_scalar(const Tensor& a, float s);
Tensor abs(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor leaky_relu(const Tensor& a, float slope = 0.01f);

// Reductions accumulate in double. `exact`, when given, receives that
// accumulator before it is rounded to the float result.
Tensor sum(const Tensor& a, double* exact = nullptr);
Tensor mean(const Tensor& a, double* exact = nullptr);

// Channel-axis layout helpers.
Tensor concat_channels(const std::vector<Tensor>& parts);
Tensor slice_channels(const Tensor& a, int begin, int count);
Tensor gather_channels(const Tensor& a, std::span<const int> index);
// Drops a `border`-pixel ring from every channel.
Tensor crop_border(const Tensor& a, int border);
// Top-left crop to height x width.
Tensor crop_to(const Tensor& a, int height, int width);

/// Cross-correlation plus bias. weights: out x in x k x k, bias: out (may be
/// undefined for no bias). Output size (H + 2 pad - k) / stride + 1.
Tensor conv2d(const Tensor& input, const Tensor& weights, const Tensor& bias, int stride = 1,
              int padding = 0);

/// (C r^2) x H x W -> C x rH x rW. Channel c*r*r + dy*r + dx lands on
/// pixel (y*r + dy, x*r + dx).
Tensor pixel_shuffle(const Tensor& input, int r);
/// Inverse of pixel_shuffle.
Tensor pixel_unshuffle(const Tensor& input, int r);

/// Bilinear gather. coords is 2 x H' x W' holding (y, x) in input pixel
/// units; positions outside the image clamp to the border. Differentiable
/// w.r.t. input only.
Tensor bilinear_sample(const Tensor& input, const Tensor& coords);

/// Sampling grid mapping an out_h x out_w pixel-centre lattice onto an
/// in_h x in_w image (align-corners false).
Tensor resize_grid(int in_h, int in_w, int out_h, int out_w);
Tensor upsample_bilinear(const Tensor& input, int out_h, int out_w);

/// 2-D matrix product.
Tensor matmul(const Tensor& a, const Tensor& b);

/// Depthwise separable filter, "valid" extent: each channel is correlated
/// with kernel (x) kernel. Output (H - k + 1) x (W - k + 1).
Tensor separable_filter_valid(const Tensor& input, std::span<const float> kernel);

}  // namespace wsr
