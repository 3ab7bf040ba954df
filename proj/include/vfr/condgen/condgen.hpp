#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "vfr/nn/encode.hpp"
#include "vfr/nn/module.hpp"
#include "vfr/train/losses.hpp"

namespace vfr {

/// Channels of the segmentation-encoder input: one-hot agnostic parse + IUV.
inline constexpr int kSegInputChannels = kNumParseClasses + nn::kDenseChannels;
/// Initial logit bonus for keeping each non-background agnostic label.
inline constexpr double kParsePriorGain = 4.0;
/// Channels of the cloth-encoder input: RGB + mask.
inline constexpr int kClothInputChannels = 4;

struct CondGenConfig {
    std::array<int, 5> widths{64, 128, 256, 512, 512};  // encoder level widths, coarse levels last
    int width = 192;                                    // working resolution
    int height = 256;
    std::uint64_t seed = 7;

    nlohmann::json to_json() const;
    static CondGenConfig from_json(const nlohmann::json& j);
    friend bool operator==(const CondGenConfig&, const CondGenConfig&) = default;
};

/// Differentiable outputs for a batch.
struct CondGenVars {
    nn::Var flow;          // (N, 2, H, W) pixel offsets
    nn::Var seg_logits;    // (N, 20, H, W)
    nn::Var warped_cloth;  // (N, 3, H, W) in [-1, 1]
    nn::Var warped_mask;   // (N, 1, H, W) soft, warped cloth mask
    /// Flow refinement added by each fusion stage, coarse to fine, at that
    /// stage's resolution.
    std::vector<nn::Var> refinements;
};

/// Two residual encoders (cloth, segmentation) with five stride-2 blocks each,
/// and a five-stage fusion decoder refining the appearance flow coarse to
/// fine while exchanging warped cloth features with the segmentation pathway.
class CondGenModel {
  public:
    explicit CondGenModel(const CondGenConfig& config);

    /// cloth: (N,3,H,W) in [-1,1]; mask: (N,1,H,W) in {0,1}; seg: (N,47,H,W).
    CondGenVars forward(const nn::Var& cloth, const nn::Var& mask, const nn::Var& seg) const;

    nn::ParamStore& params() noexcept { return params_; }
    const nn::ParamStore& params() const noexcept { return params_; }
    const CondGenConfig& config() const noexcept { return config_; }

    /// Names of the flow-head parameters (zero at initialization).
    std::vector<std::string> flow_head_names() const;

  private:
    struct ResDown {
        nn::Conv2d conv1, conv2, skip;
        nn::Var operator()(const nn::Var& x) const;
    };
    struct Stage {
        nn::Conv2d flow_conv, flow_head, seg_conv;
    };

    CondGenConfig config_;
    nn::ParamStore params_;
    std::array<ResDown, 5> cloth_encoder_, seg_encoder_;
    std::array<Stage, 5> stages_;  // stages_[i] decodes to level 4 - i
    nn::Conv2d logits_;
    nn::Conv2d parse_prior_;
};

/// Inference-side result for one image.
struct CondGenOutput {
    FlowField flow;
    nn::Tensor seg_logits;  // (1, 20, H, W)
    RasterImage warped_cloth;  // signed unit
    ClothMask warped_mask;

    friend bool operator==(const CondGenOutput&, const CondGenOutput&) = default;
};

/// Builds the segmentation-encoder input for one sample.
nn::Tensor seg_input(const ParseMap& agnostic_parse, const DenseposeMap& densepose);
nn::Tensor cloth_input(const RasterImage& cloth);

CondGenOutput condgen_forward(const CondGenModel& model, const RasterImage& cloth, const ClothMask& cloth_mask,
                              const ParseMap& agnostic_parse, const DenseposeMap& densepose);

/// Keeps the warped mask only where the predicted class is upper-clothes and
/// clears the warped cloth outside it.
CondGenOutput conditional_align(const CondGenOutput& out);

struct LossWeights {
    double ce = 1.0;
    double l1 = 1.0;
    double perceptual = 1.0;
    double adversarial = 0.1;

    nlohmann::json to_json() const;
    static LossWeights from_json(const nlohmann::json& j);
    friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

/// Supervision for a batch of condition-generator outputs.
struct CondGenTruth {
    std::vector<std::uint8_t> labels;  // dressed parse, N*H*W
    nn::Tensor cloth_on_person;        // (N,3,H,W): dressed image inside the garment, 0 elsewhere
    nn::Tensor mask;                   // (N,1,H,W): garment region of the dressed parse
};

struct LossTerms {
    nn::Var total;
    std::map<std::string, double> components;  // includes "total"
};

/// total = ce*CE + l1*L1(in mask) + perceptual*Perc(masked) + adversarial*LSGAN_G.
/// An empty score list drops the adversarial term.
LossTerms condgen_loss(const CondGenVars& out, const CondGenTruth& truth, const std::vector<nn::Var>& d_scores,
                       const LossWeights& weights = {}, const FeatureExtractor& extractor = pyramid_extractor());

}  // namespace vfr
