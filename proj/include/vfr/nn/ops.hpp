#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "vfr/nn/autograd.hpp"

namespace vfr::nn {

// Elementwise (identical shapes).
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);

/// Multiplies every channel of `x` by a 1-channel `mask` of the same N/H/W.
Var mul_mask(const Var& x, const Var& mask);
/// Multiplies channel c by factors[c].
Var scale_channels(const Var& x, std::vector<double> factors);

Var leaky_relu(const Var& x, double slope = 0.2);
Var relu(const Var& x);
Var tanh(const Var& x);
Var sigmoid(const Var& x);

/// Convolution with zero padding. weight: (Cout, Cin, k, k); bias: (1, Cout, 1, 1) or undefined.
Var conv2d(const Var& x, const Var& weight, const Var& bias, int stride = 1, int pad = 0);

/// Channel concatenation; all inputs share N, H, W.
Var concat(const std::vector<Var>& parts);
Var slice_channels(const Var& x, int start, int count);

/// Bilinear resize with half-pixel centres and edge clamping.
Var resize_bilinear(const Var& x, int height, int width);

/// 2x2 mean pool; a dimension of extent 1 is left as is.
Var avg_pool2(const Var& x);

/// Backward warp: output(x, y) = bilinear sample of `x` at (x + flow0, y + flow1),
/// zero outside the frame. flow: (N, 2, H, W) in pixel units.
Var warp(const Var& x, const Var& flow);

/// Per-(sample, channel) normalization to zero mean / unit population variance.
Var instance_norm(const Var& x, double eps = 1e-5);

/// Softmax across channels at every pixel.
Var softmax_channels(const Var& x);

// Reductions to scalars.
Var sum(const Var& x);
Var mean(const Var& x);
/// Mean over pixels of -log softmax(logits)[label]. labels: N*H*W class indices.
Var cross_entropy(const Var& logits, std::span<const std::uint8_t> labels);
/// mean |a - b|
Var l1(const Var& a, const Var& b);
/// sum(mask * |a - b|) / max(1, C * sum(mask)); mask is 1-channel.
Var masked_l1(const Var& a, const Var& b, const Var& mask);
/// mean (x - target)^2
Var mean_squared_to(const Var& x, double target);

/// Constant (non-differentiable) input.
inline Var constant(Tensor t) { return Var(std::move(t), false); }

}  // namespace vfr::nn
