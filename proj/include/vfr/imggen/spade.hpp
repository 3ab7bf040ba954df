#pragma once

#include <vector>

#include <json.hpp>

#include "vfr/nn/encode.hpp"
#include "vfr/nn/module.hpp"

namespace vfr {

/// Conditioning channels: agnostic (gray or RGB), one-hot parse, IUV, warped cloth RGB.
constexpr int imggen_cond_channels(int agnostic_channels) {
    return agnostic_channels + kNumParseClasses + nn::kDenseChannels + 3;
}
inline constexpr int kImgGenCondChannels = imggen_cond_channels(1);

/// Shared 3x3 ReLU trunk on the conditioning map with a gamma and a beta head.
struct SpadeLayer {
    nn::Conv2d trunk, gamma, beta;

    SpadeLayer() = default;
    /// The gamma head's bias starts at 1 so the layer starts as plain IN.
    SpadeLayer(nn::ParamStore& store, const std::string& name, int channels, int cond_channels, int hidden,
               nn::Rng& rng);
};

/// Instance-normalizes x per channel (eps 1e-5) and applies the per-pixel
/// affine y = gamma(cond) * x_hat + beta(cond). cond must match x's N, H, W.
nn::Var spade_normalize(const nn::Var& x, const nn::Var& cond, const SpadeLayer& layer);

struct SpadeGenConfig {
    std::vector<int> channels{256, 128, 64, 32};  // one residual block per entry, coarse to fine
    int hidden = 64;                              // SPADE trunk width
    int agnostic_channels = 1;                    // 3 for the color agnostic
    int width = 192;
    int height = 256;
    std::uint64_t seed = 7;

    int block_count() const noexcept { return static_cast<int>(channels.size()); }
    int cond_channels() const noexcept { return imggen_cond_channels(agnostic_channels); }
    nlohmann::json to_json() const;
    static SpadeGenConfig from_json(const nlohmann::json& j);
    friend bool operator==(const SpadeGenConfig&, const SpadeGenConfig&) = default;
};

/// Residual SPADE blocks separated by 2x upsampling; the first block runs at
/// the working resolution divided by 2^(blocks-1).
class SpadeGenModel {
  public:
    explicit SpadeGenModel(const SpadeGenConfig& config);

    /// cond: (N, cond_channels, H, W) at working resolution. Returns (N, 3, H, W) in [-1, 1].
    nn::Var forward(const nn::Var& cond) const;

    nn::ParamStore& params() noexcept { return params_; }
    const nn::ParamStore& params() const noexcept { return params_; }
    const SpadeGenConfig& config() const noexcept { return config_; }

  private:
    struct Block {
        SpadeLayer norm1, norm2;
        nn::Conv2d conv1, conv2, skip;
        bool learned_skip = false;
    };

    SpadeGenConfig config_;
    nn::ParamStore params_;
    nn::Conv2d head_;
    std::vector<Block> blocks_;
    nn::Conv2d out_;
};

nn::Tensor imggen_condition(const RasterImage& agnostic, const ParseMap& parse, const DenseposeMap& densepose,
                            const RasterImage& warped_cloth);

/// Deterministic synthesis of the try-on image (signed unit range).
RasterImage imggen_forward(const SpadeGenModel& model, const RasterImage& agnostic, const ParseMap& parse,
                           const DenseposeMap& densepose, const RasterImage& warped_cloth);

struct DiscriminatorConfig {
    int scales = 2;
    std::array<int, 2> widths{64, 128};
    int image_channels = 3;
    int cond_channels = kImgGenCondChannels;
    std::uint64_t seed = 11;

    nlohmann::json to_json() const;
    static DiscriminatorConfig from_json(const nlohmann::json& j);
    friend bool operator==(const DiscriminatorConfig&, const DiscriminatorConfig&) = default;
};

/// N patch discriminators of identical shape on successive 2x mean-pooled
/// levels. Each sees (level ++ cond resized to the level) through
/// conv4x4/2, lrelu, conv4x4/2, lrelu, conv3x3/1, so a level of height h
/// gives a score map of height floor((floor(h/2) - 1) / 2) + 1 (h/4 when 4 | h).
class MultiScaleDiscriminator {
  public:
    explicit MultiScaleDiscriminator(const DiscriminatorConfig& config);

    std::vector<nn::Var> forward(const nn::Var& image, const nn::Var& cond) const;

    nn::ParamStore& params() noexcept { return params_; }
    const nn::ParamStore& params() const noexcept { return params_; }
    const DiscriminatorConfig& config() const noexcept { return config_; }

    static int score_extent(int level_extent);

  private:
    struct Patch {
        nn::Conv2d c1, c2, c3;
    };
    DiscriminatorConfig config_;
    nn::ParamStore params_;
    std::vector<Patch> patches_;
};

std::vector<nn::Tensor> multiscale_discriminate(const MultiScaleDiscriminator& d, const RasterImage& image,
                                                const nn::Tensor& cond);

/// Mean over scales and patches of the logistic of each raw score.
double realism_score(const std::vector<nn::Tensor>& scores);

struct RejectionResult {
    bool accepted = false;
    double score = 0.0;
};

/// Accepts iff the realism score reaches tau (tau in [0, 1]).
RejectionResult rejection_decision(double score, double tau);
RejectionResult rejection_filter(const MultiScaleDiscriminator& d, const RasterImage& image, const nn::Tensor& cond,
                                 double tau = 0.3);

}  // namespace vfr
