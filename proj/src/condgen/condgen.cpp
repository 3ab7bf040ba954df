#include "vfr/condgen/condgen.hpp"

#include <cmath>

#include "vfr/error.hpp"

namespace vfr {

using nlohmann::json;
using namespace nn;

json CondGenConfig::to_json() const {
    return {{"widths", widths}, {"width", width}, {"height", height}, {"seed", seed}};
}

CondGenConfig CondGenConfig::from_json(const json& j) {
    CondGenConfig c;
    try {
        if (j.contains("widths")) c.widths = j.at("widths").get<std::array<int, 5>>();
        c.width = j.value("width", c.width);
        c.height = j.value("height", c.height);
        c.seed = j.value("seed", c.seed);
    } catch (const json::exception& e) {
        fail(ErrorCode::configuration, std::string("condgen config: ") + e.what());
    }
    for (int w : c.widths) require(w > 0, ErrorCode::configuration, "condgen widths must be positive");
    require(c.width >= 8 && c.height >= 8, ErrorCode::configuration, "condgen resolution must be at least 8x8");
    return c;
}

json LossWeights::to_json() const {
    return {{"ce", ce}, {"l1", l1}, {"perceptual", perceptual}, {"adversarial", adversarial}};
}

LossWeights LossWeights::from_json(const json& j) {
    LossWeights w;
    try {
        w.ce = j.value("ce", w.ce);
        w.l1 = j.value("l1", w.l1);
        w.perceptual = j.value("perceptual", w.perceptual);
        w.adversarial = j.value("adversarial", w.adversarial);
    } catch (const json::exception& e) {
        fail(ErrorCode::configuration, std::string("loss weights: ") + e.what());
    }
    return w;
}

Var CondGenModel::ResDown::operator()(const Var& x) const {
    const Var h = conv2(leaky_relu(conv1(x)));
    return leaky_relu(add(h, skip(x)));
}

CondGenModel::CondGenModel(const CondGenConfig& config) : config_(config) {
    Rng rng(config.seed);
    const auto& w = config.widths;
    auto encoder = [&](std::array<ResDown, 5>& enc, const std::string& name, int in) {
        for (int i = 0; i < 5; ++i) {
            const std::string p = name + "." + std::to_string(i);
            enc[i] = {Conv2d(params_, p + ".conv1", in, w[i], 3, 2, 1, rng),
                      Conv2d(params_, p + ".conv2", w[i], w[i], 3, 1, 1, rng),
                      Conv2d(params_, p + ".skip", in, w[i], 1, 2, 0, rng)};
            in = w[i];
        }
    };
    encoder(cloth_encoder_, "cloth_enc", kClothInputChannels);
    encoder(seg_encoder_, "seg_enc", kSegInputChannels);

    int flow_feat = w[4];
    int seg_feat = w[4];
    for (int i = 0; i < 5; ++i) {
        const int level = 4 - i;
        const int cloth_skip = level == 0 ? kClothInputChannels : w[level - 1];
        const int seg_skip = level == 0 ? kSegInputChannels : w[level - 1];
        const int out = level == 0 ? w[0] : w[level - 1];
        const std::string p = "dec." + std::to_string(i);
        stages_[i] = {Conv2d(params_, p + ".flow_conv", flow_feat + seg_feat + cloth_skip + seg_skip, out, 3, 1, 1, rng),
                      Conv2d(params_, p + ".flow_head", out, 2, 3, 1, 1, rng, Init::zeros),
                      Conv2d(params_, p + ".seg_conv", seg_feat + cloth_skip + seg_skip + out, out, 3, 1, 1, rng)};
        flow_feat = out;
        seg_feat = out;
    }
    logits_ = Conv2d(params_, "dec.logits", w[0], kNumParseClasses, 3, 1, 1, rng);
    // Labels the agnostic parse keeps mostly survive into the dressed parse, so
    // a 1x1 path from the input one-hot starts as a copy of every label but
    // background (erased regions read as background there).
    parse_prior_ = Conv2d(params_, "dec.parse_prior", kSegInputChannels, kNumParseClasses, 1, 1, 0, rng, Init::zeros);
    Tensor& prior = params_.get("dec.parse_prior.weight").mutable_value();
    for (int c = 1; c < kNumParseClasses; ++c) prior(c, c, 0, 0) = kParsePriorGain;
}

std::vector<std::string> CondGenModel::flow_head_names() const {
    std::vector<std::string> names;
    for (int i = 0; i < 5; ++i) {
        names.push_back("dec." + std::to_string(i) + ".flow_head.weight");
        names.push_back("dec." + std::to_string(i) + ".flow_head.bias");
    }
    return names;
}

namespace {

Var upsample_flow(const Var& flow, int h, int w) {
    const Shape s = flow.shape();
    if (s.h == h && s.w == w) return flow;
    const Var up = resize_bilinear(flow, h, w);
    return scale_channels(up, {static_cast<double>(w) / s.w, static_cast<double>(h) / s.h});
}

}  // namespace

CondGenVars CondGenModel::forward(const Var& cloth, const Var& mask, const Var& seg) const {
    const Shape cs = cloth.shape();
    require(cs.c == 3 && mask.shape().c == 1 && seg.shape().c == kSegInputChannels, ErrorCode::invalid_input,
            "condition generator inputs need 3 + 1 + 47 channels");
    require(mask.shape() == Shape{cs.n, 1, cs.h, cs.w} && seg.shape() == Shape{cs.n, kSegInputChannels, cs.h, cs.w},
            ErrorCode::invalid_input, "condition generator inputs disagree in size");

    std::array<Var, 6> c_levels, s_levels;
    c_levels[0] = concat({cloth, mask});
    s_levels[0] = seg;
    for (int i = 0; i < 5; ++i) {
        c_levels[i + 1] = cloth_encoder_[i](c_levels[i]);
        s_levels[i + 1] = seg_encoder_[i](s_levels[i]);
    }

    CondGenVars out;
    Var flow_feat = c_levels[5];
    Var seg_feat = s_levels[5];
    const Shape coarse = flow_feat.shape();
    Var flow = constant(Tensor({cs.n, 2, coarse.h, coarse.w}));
    for (int i = 0; i < 5; ++i) {
        const int level = 4 - i;
        const Shape ls = c_levels[level].shape();
        const Var fu = resize_bilinear(flow_feat, ls.h, ls.w);
        const Var su = resize_bilinear(seg_feat, ls.h, ls.w);
        flow = upsample_flow(flow, ls.h, ls.w);

        const Stage& st = stages_[i];
        const Var h = leaky_relu(st.flow_conv(concat({fu, su, warp(c_levels[level], flow), s_levels[level]})));
        const Var refinement = st.flow_head(h);
        out.refinements.push_back(refinement);
        flow = add(flow, refinement);
        const Var g = leaky_relu(st.seg_conv(concat({su, warp(c_levels[level], flow), s_levels[level], h})));
        flow_feat = h;
        seg_feat = g;
    }
    out.flow = flow;
    out.seg_logits = add(logits_(seg_feat), parse_prior_(seg));
    out.warped_cloth = warp(cloth, flow);
    out.warped_mask = warp(mask, flow);
    return out;
}

Tensor seg_input(const ParseMap& agnostic_parse, const DenseposeMap& densepose) {
    require(agnostic_parse.width() == densepose.width() && agnostic_parse.height() == densepose.height(),
            ErrorCode::invalid_input, "parse and densepose disagree in size");
    return concat_channels({one_hot(agnostic_parse), densepose_tensor(densepose)});
}

Tensor cloth_input(const RasterImage& cloth) {
    require(cloth.channels() == 3, ErrorCode::invalid_input, "cloth image must be RGB");
    return image_tensor(cloth);
}

CondGenOutput condgen_forward(const CondGenModel& model, const RasterImage& cloth, const ClothMask& cloth_mask,
                              const ParseMap& agnostic_parse, const DenseposeMap& densepose) {
    const CondGenConfig& cfg = model.config();
    const auto at_working = [&](int w, int h) { return w == cfg.width && h == cfg.height; };
    require(at_working(cloth.width(), cloth.height()) && at_working(cloth_mask.width(), cloth_mask.height()) &&
                at_working(agnostic_parse.width(), agnostic_parse.height()) &&
                at_working(densepose.width(), densepose.height()),
            ErrorCode::invalid_input,
            "condition generator inputs must be " + std::to_string(cfg.height) + "x" + std::to_string(cfg.width));
    require(cloth_mask.is_binary(), ErrorCode::invalid_input, "cloth mask must be binary");

    NoGradGuard guard;
    const CondGenVars v = model.forward(constant(cloth_input(cloth)), constant(mask_tensor(cloth_mask)),
                                        constant(seg_input(agnostic_parse, densepose)));
    require(v.flow.value().all_finite() && v.seg_logits.value().all_finite(), ErrorCode::numeric_failure,
            "condition generator produced non-finite values");

    CondGenOutput out;
    out.flow = tensor_flow(v.flow.value());
    out.seg_logits = v.seg_logits.value();
    out.warped_cloth = tensor_image(v.warped_cloth.value());
    out.warped_mask = ClothMask(cfg.width, cfg.height);
    const Tensor& m = v.warped_mask.value();
    for (int y = 0; y < cfg.height; ++y)
        for (int x = 0; x < cfg.width; ++x) out.warped_mask.at(x, y) = m(0, 0, y, x) > 0.5 ? 1 : 0;
    return out;
}

CondGenOutput conditional_align(const CondGenOutput& out) {
    const ParseMap predicted = argmax_parse(out.seg_logits);
    require(predicted.width() == out.warped_mask.width() && predicted.height() == out.warped_mask.height() &&
                out.warped_cloth.width() == predicted.width() && out.warped_cloth.height() == predicted.height(),
            ErrorCode::invalid_input, "segmentation and warped cloth disagree in size");
    CondGenOutput aligned = out;
    for (int y = 0; y < predicted.height(); ++y)
        for (int x = 0; x < predicted.width(); ++x) {
            const bool keep = out.warped_mask.at(x, y) != 0 && predicted.at(x, y) == label(BodyPart::upper_clothes);
            aligned.warped_mask.at(x, y) = keep ? 1 : 0;
            if (!keep)
                for (int c = 0; c < aligned.warped_cloth.channels(); ++c) aligned.warped_cloth.at(x, y, c) = 0.0f;
        }
    return aligned;
}

LossTerms condgen_loss(const CondGenVars& out, const CondGenTruth& truth, const std::vector<Var>& d_scores,
                       const LossWeights& weights, const FeatureExtractor& extractor) {
    const Shape s = out.warped_cloth.shape();
    require(truth.cloth_on_person.shape() == s && truth.mask.shape() == Shape{s.n, 1, s.h, s.w} &&
                truth.labels.size() == static_cast<std::size_t>(s.n) * s.h * s.w,
            ErrorCode::invalid_input, "condition generator truth disagrees with output size");
    const Var target = constant(truth.cloth_on_person);
    const Var mask = constant(truth.mask);

    LossTerms terms;
    const Var ce = cross_entropy(out.seg_logits, truth.labels);
    const Var l1_term = masked_l1(out.warped_cloth, target, mask);
    const Var perc = perceptual_loss(mul_mask(out.warped_cloth, mask), mul_mask(target, mask), extractor);
    Var total = add(add(scale(ce, weights.ce), scale(l1_term, weights.l1)), scale(perc, weights.perceptual));
    terms.components["ce"] = ce.value().item();
    terms.components["l1"] = l1_term.value().item();
    terms.components["perceptual"] = perc.value().item();
    if (!d_scores.empty()) {
        const Var adv = lsgan_generator_loss(d_scores);
        total = add(total, scale(adv, weights.adversarial));
        terms.components["adversarial"] = adv.value().item();
    }
    terms.total = total;
    terms.components["total"] = total.value().item();
    for (const auto& [name, value] : terms.components)
        require(std::isfinite(value), ErrorCode::numeric_failure, "non-finite condition generator loss: " + name);
    return terms;
}

}  // namespace vfr
