#pragma once

#include <functional>
#include <vector>

#include "vfr/nn/ops.hpp"

namespace vfr {

/// Least-squares GAN objectives. Each score list holds one patch map per
/// scale; a list's value is the average over scales of the per-scale patch mean.
struct LsganLosses {
    nn::Var d;  // 1/2 mean (real - 1)^2 + 1/2 mean fake^2
    nn::Var g;  // 1/2 mean (fake - 1)^2
};

LsganLosses lsgan_losses(const std::vector<nn::Var>& d_real, const std::vector<nn::Var>& d_fake);
nn::Var lsgan_generator_loss(const std::vector<nn::Var>& d_fake);
nn::Var lsgan_discriminator_loss(const std::vector<nn::Var>& d_real, const std::vector<nn::Var>& d_fake);

/// Produces the feature maps compared by the perceptual loss.
using FeatureExtractor = std::function<std::vector<nn::Var>(const nn::Var&)>;

/// The image itself plus `levels - 1` successive 2x2 mean pools.
FeatureExtractor pyramid_extractor(int levels = 3);
FeatureExtractor identity_extractor();

/// Sum over layers of mean |F(a) - F(b)|.
nn::Var perceptual_loss(const nn::Var& a, const nn::Var& b, const FeatureExtractor& extractor = pyramid_extractor());

}  // namespace vfr
