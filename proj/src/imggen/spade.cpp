#include "vfr/imggen/spade.hpp"

#include <cmath>

#include "vfr/error.hpp"

namespace vfr {

using nlohmann::json;
using namespace nn;

SpadeLayer::SpadeLayer(ParamStore& store, const std::string& name, int channels, int cond_channels, int hidden,
                       Rng& rng)
    : trunk(store, name + ".trunk", cond_channels, hidden, 3, 1, 1, rng),
      gamma(store, name + ".gamma", hidden, channels, 3, 1, 1, rng, Init::he_uniform, 1.0),
      beta(store, name + ".beta", hidden, channels, 3, 1, 1, rng) {}

Var spade_normalize(const Var& x, const Var& cond, const SpadeLayer& layer) {
    const Shape xs = x.shape();
    const Shape cs = cond.shape();
    require(cs.n == xs.n && cs.h == xs.h && cs.w == xs.w, ErrorCode::invalid_input,
            "SPADE conditioning " + cs.str() + " does not match activation " + xs.str());
    require(cs.c == layer.trunk.in_channels() && xs.c == layer.gamma.out_channels(), ErrorCode::invalid_input,
            "SPADE channel counts do not match the layer");
    const Var features = relu(layer.trunk(cond));
    return add(mul(layer.gamma(features), instance_norm(x)), layer.beta(features));
}

json SpadeGenConfig::to_json() const {
    return {{"channels", channels}, {"hidden", hidden}, {"agnostic_channels", agnostic_channels}, {"width", width}, {"height", height}, {"seed", seed}};
}

SpadeGenConfig SpadeGenConfig::from_json(const json& j) {
    SpadeGenConfig c;
    try {
        if (j.contains("channels")) c.channels = j.at("channels").get<std::vector<int>>();
        c.hidden = j.value("hidden", c.hidden);
        c.agnostic_channels = j.value("agnostic_channels", c.agnostic_channels);
        c.width = j.value("width", c.width);
        c.height = j.value("height", c.height);
        c.seed = j.value("seed", c.seed);
    } catch (const json::exception& e) {
        fail(ErrorCode::configuration, std::string("image generator config: ") + e.what());
    }
    require(c.block_count() >= 3, ErrorCode::configuration, "image generator needs at least 3 blocks");
    for (int ch : c.channels) require(ch > 0, ErrorCode::configuration, "image generator channels must be positive");
    require(c.agnostic_channels == 1 || c.agnostic_channels == 3, ErrorCode::configuration,
            "agnostic image has 1 or 3 channels");
    require(c.hidden > 0, ErrorCode::configuration, "SPADE hidden width must be positive");
    const int factor = 1 << (c.block_count() - 1);
    require(c.width % factor == 0 && c.height % factor == 0, ErrorCode::configuration,
            "working resolution must be divisible by 2^(blocks-1)");
    return c;
}

SpadeGenModel::SpadeGenModel(const SpadeGenConfig& config) : config_(SpadeGenConfig::from_json(config.to_json())) {
    Rng rng(config_.seed);
    const auto& ch = config_.channels;
    head_ = Conv2d(params_, "gen.head", config_.cond_channels(), ch[0], 3, 1, 1, rng);
    for (int i = 0; i < config_.block_count(); ++i) {
        const int in = ch[std::max(0, i - 1)];
        const int out = ch[i];
        const std::string p = "gen.block" + std::to_string(i);
        Block b;
        b.norm1 = SpadeLayer(params_, p + ".norm1", in, config_.cond_channels(), config_.hidden, rng);
        b.conv1 = Conv2d(params_, p + ".conv1", in, out, 3, 1, 1, rng);
        b.norm2 = SpadeLayer(params_, p + ".norm2", out, config_.cond_channels(), config_.hidden, rng);
        b.conv2 = Conv2d(params_, p + ".conv2", out, out, 3, 1, 1, rng);
        b.learned_skip = in != out;
        if (b.learned_skip) b.skip = Conv2d(params_, p + ".skip", in, out, 1, 1, 0, rng);
        blocks_.push_back(std::move(b));
    }
    out_ = Conv2d(params_, "gen.out", ch.back(), 3, 3, 1, 1, rng);
}

Var SpadeGenModel::forward(const Var& cond) const {
    const Shape cs = cond.shape();
    require(cs.c == config_.cond_channels() && cs.h == config_.height && cs.w == config_.width, ErrorCode::invalid_input,
            "image generator conditioning must be (N, " + std::to_string(config_.cond_channels()) + ", " + std::to_string(config_.height) + ", " +
                std::to_string(config_.width) + "), got " + cs.str());
    const int factor = 1 << (config_.block_count() - 1);
    int h = config_.height / factor;
    int w = config_.width / factor;
    Var x = head_(resize_bilinear(cond, h, w));
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
        if (i > 0) {
            h *= 2;
            w *= 2;
            x = resize_bilinear(x, h, w);
        }
        const Var c = (h == cs.h && w == cs.w) ? cond : resize_bilinear(cond, h, w);
        const Block& b = blocks_[i];
        Var y = b.conv1(leaky_relu(spade_normalize(x, c, b.norm1)));
        y = b.conv2(leaky_relu(spade_normalize(y, c, b.norm2)));
        x = add(y, b.learned_skip ? b.skip(x) : x);
    }
    return tanh(out_(leaky_relu(x)));
}

Tensor imggen_condition(const RasterImage& agnostic, const ParseMap& parse, const DenseposeMap& densepose,
                        const RasterImage& warped_cloth) {
    require(agnostic.channels() == 1 || agnostic.channels() == 3, ErrorCode::invalid_input,
            "agnostic image must be gray or RGB");
    require(warped_cloth.channels() == 3, ErrorCode::invalid_input, "warped cloth must be RGB");
    const int w = agnostic.width(), h = agnostic.height();
    require(warped_cloth.width() == w && warped_cloth.height() == h && parse.width() == w && parse.height() == h &&
                densepose.width() == w && densepose.height() == h,
            ErrorCode::invalid_input, "image generator inputs disagree in size");
    return concat_channels({image_tensor(agnostic), one_hot(parse), densepose_tensor(densepose),
                            image_tensor(warped_cloth)});
}

RasterImage imggen_forward(const SpadeGenModel& model, const RasterImage& agnostic, const ParseMap& parse,
                           const DenseposeMap& densepose, const RasterImage& warped_cloth) {
    require(agnostic.channels() == model.config().agnostic_channels, ErrorCode::invalid_input,
            "image generator expects a " + std::to_string(model.config().agnostic_channels) + "-channel agnostic");
    require(agnostic.width() == model.config().width && agnostic.height() == model.config().height,
            ErrorCode::invalid_input,
            "image generator inputs must be " + std::to_string(model.config().height) + "x" +
                std::to_string(model.config().width));
    NoGradGuard guard;
    const Var out = model.forward(constant(imggen_condition(agnostic, parse, densepose, warped_cloth)));
    require(out.value().all_finite(), ErrorCode::numeric_failure, "image generator produced non-finite values");
    return tensor_image(out.value());
}

json DiscriminatorConfig::to_json() const {
    return {{"scales", scales}, {"widths", widths}, {"image_channels", image_channels},
            {"cond_channels", cond_channels}, {"seed", seed}};
}

DiscriminatorConfig DiscriminatorConfig::from_json(const json& j) {
    DiscriminatorConfig c;
    try {
        c.scales = j.value("scales", c.scales);
        if (j.contains("widths")) c.widths = j.at("widths").get<std::array<int, 2>>();
        c.image_channels = j.value("image_channels", c.image_channels);
        c.cond_channels = j.value("cond_channels", c.cond_channels);
        c.seed = j.value("seed", c.seed);
    } catch (const json::exception& e) {
        fail(ErrorCode::configuration, std::string("discriminator config: ") + e.what());
    }
    require(c.scales >= 1, ErrorCode::configuration, "discriminator needs at least one scale");
    require(c.widths[0] > 0 && c.widths[1] > 0 && c.image_channels > 0 && c.cond_channels >= 0,
            ErrorCode::configuration, "discriminator widths must be positive");
    return c;
}

MultiScaleDiscriminator::MultiScaleDiscriminator(const DiscriminatorConfig& config)
    : config_(DiscriminatorConfig::from_json(config.to_json())) {
    Rng rng(config_.seed);
    const int in = config_.image_channels + config_.cond_channels;
    for (int s = 0; s < config_.scales; ++s) {
        const std::string p = "disc.s" + std::to_string(s);
        patches_.push_back({Conv2d(params_, p + ".c1", in, config_.widths[0], 4, 2, 1, rng),
                            Conv2d(params_, p + ".c2", config_.widths[0], config_.widths[1], 4, 2, 1, rng),
                            Conv2d(params_, p + ".c3", config_.widths[1], 1, 3, 1, 1, rng)});
    }
}

int MultiScaleDiscriminator::score_extent(int level_extent) {
    const int first = (level_extent + 2 - 4) / 2 + 1;
    return (first + 2 - 4) / 2 + 1;
}

std::vector<Var> MultiScaleDiscriminator::forward(const Var& image, const Var& cond) const {
    const Shape is = image.shape();
    require(is.c == config_.image_channels, ErrorCode::invalid_input, "discriminator image channel count mismatch");
    if (config_.cond_channels > 0) {
        const Shape cs = cond.shape();
        require(cs.c == config_.cond_channels && cs.n == is.n && cs.h == is.h && cs.w == is.w,
                ErrorCode::invalid_input, "discriminator conditioning " + cs.str() + " does not match image " + is.str());
    }
    std::vector<Var> scores;
    Var level = image;
    for (int s = 0; s < config_.scales; ++s) {
        if (s > 0) level = avg_pool2(level);
        const Shape ls = level.shape();
        require(score_extent(ls.h) >= 1 && score_extent(ls.w) >= 1, ErrorCode::invalid_input,
                "image too small for " + std::to_string(config_.scales) + " discriminator scales");
        Var input = level;
        if (config_.cond_channels > 0) {
            const Var c = (ls.h == is.h && ls.w == is.w) ? cond : resize_bilinear(cond, ls.h, ls.w);
            input = concat({level, c});
        }
        const Patch& p = patches_[s];
        scores.push_back(p.c3(leaky_relu(p.c2(leaky_relu(p.c1(input))))));
    }
    return scores;
}

std::vector<Tensor> multiscale_discriminate(const MultiScaleDiscriminator& d, const RasterImage& image,
                                            const Tensor& cond) {
    NoGradGuard guard;
    std::vector<Tensor> out;
    for (const Var& v : d.forward(constant(image_tensor(image)), constant(cond))) out.push_back(v.value());
    return out;
}

double realism_score(const std::vector<Tensor>& scores) {
    require(!scores.empty(), ErrorCode::invalid_input, "no discriminator scores");
    double total = 0.0;
    for (const Tensor& t : scores) {
        require(t.numel() > 0, ErrorCode::invalid_input, "empty score map");
        double acc = 0.0;
        for (double v : t.data()) acc += 1.0 / (1.0 + std::exp(-v));
        total += acc / static_cast<double>(t.numel());
    }
    return total / static_cast<double>(scores.size());
}

RejectionResult rejection_decision(double score, double tau) {
    require(tau >= 0.0 && tau <= 1.0, ErrorCode::invalid_input, "rejection threshold must lie in [0, 1]");
    return {score >= tau, score};
}

RejectionResult rejection_filter(const MultiScaleDiscriminator& d, const RasterImage& image, const Tensor& cond,
                                 double tau) {
    require(tau >= 0.0 && tau <= 1.0, ErrorCode::invalid_input, "rejection threshold must lie in [0, 1]");
    return rejection_decision(realism_score(multiscale_discriminate(d, image, cond)), tau);
}

}  // namespace vfr
