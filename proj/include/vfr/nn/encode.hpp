#pragma once

#include <cstdint>
#include <vector>

#include "vfr/nn/tensor.hpp"
#include "vfr/preprocess/types.hpp"

namespace vfr::nn {

/// One-hot surface part (25) followed by u and v.
inline constexpr int kDenseChannels = kNumDenseParts + 2;

/// (1, C, H, W) in [-1, 1], whatever the source range.
Tensor image_tensor(const RasterImage& img);
/// Sample `n` of an NCHW tensor as a signed-unit raster (1 or 3 channels).
RasterImage tensor_image(const Tensor& t, int n = 0);

Tensor one_hot(const ParseMap& parse);
Tensor densepose_tensor(const DenseposeMap& dp);
Tensor mask_tensor(const ClothMask& mask);
FlowField tensor_flow(const Tensor& flow, int n = 0);

/// Concatenates along N; all parts share C, H, W.
Tensor stack(const std::vector<Tensor>& parts);
/// Concatenates along C; all parts share N, H, W.
Tensor concat_channels(const std::vector<Tensor>& parts);
Tensor sample_of(const Tensor& t, int n);

/// Per-pixel argmax over channels of sample `n`.
ParseMap argmax_parse(const Tensor& logits, int n = 0);

}  // namespace vfr::nn
