#pragma once

#include <cstdint>
#include <vector>

#include "vfr/data/sample.hpp"

namespace vfr {

/// Knobs of the procedural doll generator. Probabilities are per sample.
struct SynthOptions {
    double female_ratio = 0.5;        // drives hair length, dress/skirt odds and beards
    double decoration_prob = 0.25;    // caps, sunglasses, scarves, gloves, tattoos, birth marks, beards
    double occluded_arm_prob = 0.1;   // one forearm passes behind the torso
    double white_garment_prob = 0.1;  // flat garment is near-white on the white backdrop
    bool force_occluded_arm = false;
};

/// Draws a fully annotated synthetic person (height x width >= 32 x 24):
/// exact parse, pose, IUV map, a flat garment with its mask, and the dressed
/// composite of the person wearing that garment on a white backdrop.
/// Deterministic per seed.
TryOnSample synth_sample(std::uint64_t seed, int width, int height, const SynthOptions& options = {});

std::vector<TryOnSample> synth_dataset(std::uint64_t first_seed, int count, int width, int height,
                                       const SynthOptions& options = {});

}  // namespace vfr
