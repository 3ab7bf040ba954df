#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "vfr/condgen/condgen.hpp"
#include "vfr/data/synth.hpp"
#include "vfr/error.hpp"
#include "vfr/preprocess/ops.hpp"

using namespace vfr;
using namespace vfr::nn;

namespace {

CondGenConfig tiny(int w = 48, int h = 64) {
    CondGenConfig c;
    c.widths = {4, 4, 6, 6, 8};
    c.width = w;
    c.height = h;
    c.seed = 3;
    return c;
}

Tensor random_tensor(Shape s, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Tensor t(s);
    for (double& v : t.data()) v = u(rng);
    return t;
}

void randomize_flow_heads(CondGenModel& model, double amplitude, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (const auto& name : model.flow_head_names()) {
        Var& v = model.params().get(name);
        v.mutable_value() = random_tensor(v.shape(), rng, -amplitude, amplitude);
    }
}

struct Inputs {
    TryOnSample sample;
    ParseMap agnostic_parse;
};

Inputs synth_inputs(std::uint64_t seed) {
    Inputs in;
    in.sample = synth_sample(seed, 48, 64);
    in.agnostic_parse = generate_agnostic(in.sample.person, in.sample.parse, in.sample.pose).parse;
    return in;
}

}  // namespace

TEST(CondGen, OutputShapesAndRanges) {
    const CondGenModel model(tiny());
    const Inputs in = synth_inputs(11);
    const CondGenOutput out =
        condgen_forward(model, in.sample.cloth, in.sample.cloth_mask, in.agnostic_parse, in.sample.densepose);
    EXPECT_EQ(out.flow.width, 48);
    EXPECT_EQ(out.flow.height, 64);
    EXPECT_EQ(out.seg_logits.shape(), (Shape{1, 20, 64, 48}));
    EXPECT_EQ(out.warped_cloth.width(), 48);
    EXPECT_EQ(out.warped_cloth.channels(), 3);
    EXPECT_EQ(out.warped_cloth.range(), PixelRange::signed_unit);
    EXPECT_TRUE(out.warped_mask.is_binary());
    for (float v : out.warped_cloth.data()) {
        EXPECT_GE(v, -1.0f);
        EXPECT_LE(v, 1.0f);
    }
}

TEST(CondGen, ZeroFlowHeadsGiveIdentityWarp) {
    const CondGenModel model(tiny());
    const Inputs in = synth_inputs(12);
    const CondGenOutput out =
        condgen_forward(model, in.sample.cloth, in.sample.cloth_mask, in.agnostic_parse, in.sample.densepose);
    for (std::size_t i = 0; i < out.flow.dx.size(); ++i) {
        ASSERT_EQ(out.flow.dx[i], 0.0);
        ASSERT_EQ(out.flow.dy[i], 0.0);
    }
    EXPECT_EQ(out.warped_cloth, tensor_image(image_tensor(in.sample.cloth)));
    EXPECT_EQ(out.warped_mask, in.sample.cloth_mask);
}

TEST(CondGen, FinalFlowIsUpsampledSumOfRefinements) {
    CondGenModel model(tiny());
    randomize_flow_heads(model, 0.05, 5);
    std::mt19937_64 rng(9);
    NoGradGuard guard;
    const CondGenVars v = model.forward(constant(random_tensor({1, 3, 64, 48}, rng)),
                                        constant(random_tensor({1, 1, 64, 48}, rng, 0.0, 1.0)),
                                        constant(random_tensor({1, kSegInputChannels, 64, 48}, rng)));
    ASSERT_EQ(v.refinements.size(), 5u);
    // Independent coarse-to-fine replay: bilinear upsample, rescale offsets, add.
    Var flow = constant(Tensor({1, 2, 2, 2}));
    for (const Var& r : v.refinements) {
        const Shape rs = r.shape();
        const Shape fs = flow.shape();
        Tensor up(rs);
        const Tensor& f = flow.value();
        for (int c = 0; c < 2; ++c)
            for (int y = 0; y < rs.h; ++y)
                for (int x = 0; x < rs.w; ++x) {
                    const double sy = std::clamp((y + 0.5) * fs.h / rs.h - 0.5, 0.0, fs.h - 1.0);
                    const double sx = std::clamp((x + 0.5) * fs.w / rs.w - 0.5, 0.0, fs.w - 1.0);
                    const int y0 = static_cast<int>(sy), x0 = static_cast<int>(sx);
                    const int y1 = std::min(y0 + 1, fs.h - 1), x1 = std::min(x0 + 1, fs.w - 1);
                    const double ty = sy - y0, tx = sx - x0;
                    const double value = f(0, c, y0, x0) * (1 - tx) * (1 - ty) + f(0, c, y0, x1) * tx * (1 - ty) +
                                         f(0, c, y1, x0) * (1 - tx) * ty + f(0, c, y1, x1) * tx * ty;
                    const double ratio = c == 0 ? static_cast<double>(rs.w) / fs.w : static_cast<double>(rs.h) / fs.h;
                    up(0, c, y, x) = value * ratio + r.value()(0, c, y, x);
                }
        flow = constant(up);
    }
    const Tensor& got = v.flow.value();
    ASSERT_EQ(got.shape(), flow.shape());
    for (std::size_t i = 0; i < got.numel(); ++i) ASSERT_NEAR(got[i], flow.value()[i], 1e-9);
}

TEST(CondGen, DeterministicForSeed) {
    CondGenModel a(tiny()), b(tiny());
    randomize_flow_heads(a, 0.1, 1);
    randomize_flow_heads(b, 0.1, 1);
    const Inputs in = synth_inputs(13);
    const auto run = [&](const CondGenModel& m) {
        return condgen_forward(m, in.sample.cloth, in.sample.cloth_mask, in.agnostic_parse, in.sample.densepose);
    };
    EXPECT_EQ(run(a), run(b));
}

TEST(CondGen, RejectsMismatchedResolution) {
    const CondGenModel model(tiny());
    const Inputs in = synth_inputs(14);
    const TryOnSample small = synth_sample(14, 24, 32);
    try {
        condgen_forward(model, small.cloth, in.sample.cloth_mask, in.agnostic_parse, in.sample.densepose);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::invalid_input);
    }
}

TEST(CondGen, ConfigJsonRoundTrip) {
    const CondGenConfig c = tiny();
    EXPECT_EQ(CondGenConfig::from_json(c.to_json()), c);
    EXPECT_THROW(CondGenConfig::from_json({{"widths", {1, 2}}}), Error);
}

namespace {

CondGenOutput random_output(std::mt19937_64& rng, int w, int h) {
    CondGenOutput out;
    out.flow = FlowField(w, h);
    out.seg_logits = random_tensor({1, 20, h, w}, rng, -2.0, 2.0);
    std::uniform_int_distribution<int> cls(0, 19);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (rng() % 3 == 0) out.seg_logits(0, 5, y, x) = 10.0;
    out.warped_cloth = RasterImage(w, h, 3, PixelRange::signed_unit);
    for (float& v : out.warped_cloth.data()) v = static_cast<float>(random_tensor({1, 1, 1, 1}, rng)[0]);
    out.warped_mask = ClothMask(w, h);
    for (auto& b : out.warped_mask.bits()) b = rng() % 2;
    return out;
}

}  // namespace

TEST(ConditionalAlign, ExamplePixels) {
    CondGenOutput out;
    out.flow = FlowField(2, 1);
    out.seg_logits = Tensor({1, 20, 1, 2});
    out.seg_logits(0, 5, 0, 0) = 3.0;   // upper clothes
    out.seg_logits(0, 14, 0, 1) = 3.0;  // arm
    out.warped_cloth = RasterImage(2, 1, 3, PixelRange::signed_unit, 0.5f);
    out.warped_mask = ClothMask(2, 1, 1);
    const CondGenOutput a = conditional_align(out);
    EXPECT_EQ(a.warped_mask.at(0, 0), 1);
    EXPECT_EQ(a.warped_mask.at(1, 0), 0);
    EXPECT_EQ(a.warped_cloth.at(0, 0, 1), 0.5f);
    EXPECT_EQ(a.warped_cloth.at(1, 0, 1), 0.0f);
}

TEST(ConditionalAlign, MatchesPerPixelRuleOnRandomOutputs) {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 50; ++trial) {
        const CondGenOutput out = random_output(rng, 12, 16);
        const CondGenOutput a = conditional_align(out);
        EXPECT_LE(a.warped_mask.count(), out.warped_mask.count());
        for (int y = 0; y < 16; ++y)
            for (int x = 0; x < 12; ++x) {
                int best = 0;
                for (int c = 1; c < 20; ++c)
                    if (out.seg_logits(0, c, y, x) > out.seg_logits(0, best, y, x)) best = c;
                const bool keep = out.warped_mask.at(x, y) && best == 5;
                ASSERT_EQ(a.warped_mask.at(x, y), keep ? 1 : 0);
                for (int c = 0; c < 3; ++c)
                    ASSERT_EQ(a.warped_cloth.at(x, y, c), keep ? out.warped_cloth.at(x, y, c) : 0.0f);
            }
        EXPECT_EQ(conditional_align(a), a);
    }
}

namespace {

CondGenVars vars_from(const Tensor& logits, const Tensor& cloth, bool grad = false) {
    CondGenVars v;
    v.seg_logits = Var(logits, grad);
    v.warped_cloth = Var(cloth, grad);
    return v;
}

CondGenTruth truth_for(const std::vector<std::uint8_t>& labels, const Tensor& cloth, const Tensor& mask) {
    return {labels, cloth, mask};
}

}  // namespace

TEST(CondGenLoss, PerfectPredictionIsZero) {
    std::mt19937_64 rng(4);
    const int h = 8, w = 6;
    std::vector<std::uint8_t> labels(h * w);
    Tensor logits({1, 20, h, w});
    for (int i = 0; i < h * w; ++i) {
        labels[i] = static_cast<std::uint8_t>(rng() % 20);
        logits(0, labels[i], i / w, i % w) = 100.0;
    }
    const Tensor cloth = random_tensor({1, 3, h, w}, rng);
    const Tensor mask = random_tensor({1, 1, h, w}, rng, 0.0, 1.0);
    const LossTerms t = condgen_loss(vars_from(logits, cloth), truth_for(labels, cloth, mask), {});
    EXPECT_NEAR(t.components.at("ce"), 0.0, 1e-6);
    EXPECT_EQ(t.components.at("l1"), 0.0);
    EXPECT_EQ(t.components.at("perceptual"), 0.0);
    EXPECT_NEAR(t.components.at("total"), 0.0, 1e-6);
}

TEST(CondGenLoss, UniformLogitsGiveLogTwentyCrossEntropy) {
    const int h = 4, w = 3;
    std::vector<std::uint8_t> labels(h * w, 7);
    const Tensor cloth({1, 3, h, w});
    const LossTerms t =
        condgen_loss(vars_from(Tensor({1, 20, h, w}), cloth), truth_for(labels, cloth, Tensor({1, 1, h, w})), {});
    EXPECT_NEAR(t.components.at("ce"), std::log(20.0), 1e-9);
}

TEST(CondGenLoss, ZeroWeightsGiveZeroTotal) {
    std::mt19937_64 rng(5);
    const int h = 4, w = 3;
    std::vector<std::uint8_t> labels(h * w, 2);
    const LossTerms t = condgen_loss(
        vars_from(random_tensor({1, 20, h, w}, rng), random_tensor({1, 3, h, w}, rng)),
        truth_for(labels, random_tensor({1, 3, h, w}, rng), Tensor({1, 1, h, w}, 1.0)),
        {Var(random_tensor({1, 1, 2, 2}, rng))}, LossWeights{0.0, 0.0, 0.0, 0.0});
    EXPECT_EQ(t.components.at("total"), 0.0);
    EXPECT_GT(t.components.at("ce"), 0.0);
    EXPECT_GT(t.components.at("adversarial"), 0.0);
}

TEST(CondGenLoss, NonFiniteLossIsNumericFailure) {
    const int h = 2, w = 2;
    std::vector<std::uint8_t> labels(h * w, 0);
    Tensor cloth({1, 3, h, w});
    cloth[0] = std::nan("");
    try {
        condgen_loss(vars_from(Tensor({1, 20, h, w}), cloth), truth_for(labels, Tensor({1, 3, h, w}),
                                                                         Tensor({1, 1, h, w}, 1.0)),
                     {});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::numeric_failure);
    }
}

TEST(CondGenLoss, GradientsMatchFiniteDifferences) {
    std::mt19937_64 rng(6);
    const int h = 8, w = 6;
    std::vector<std::uint8_t> labels(h * w);
    for (auto& l : labels) l = static_cast<std::uint8_t>(rng() % 20);
    const Var logits(random_tensor({1, 20, h, w}, rng), true);
    const Var cloth(random_tensor({1, 3, h, w}, rng), true);
    const Var score(random_tensor({1, 1, 2, 2}, rng), true);
    const CondGenTruth truth = truth_for(labels, random_tensor({1, 3, h, w}, rng),
                                         random_tensor({1, 1, h, w}, rng, 0.0, 1.0));
    const auto build = [&] {
        CondGenVars v;
        v.seg_logits = logits;
        v.warped_cloth = cloth;
        return condgen_loss(v, truth, {score}).total;
    };
    const std::vector<std::pair<std::string, Var>> leaves = {{"logits", logits}, {"cloth", cloth}, {"score", score}};
    const auto r = oracle::finite_difference_check(
        leaves, [&] { return build().value().item(); },
        [&] {
            for (auto& [n, v] : leaves) const_cast<Var&>(v).zero_grad();
            backward(build());
        });
    EXPECT_LT(r.max_rel_error, 1e-4) << r.worst;
}

TEST(CondGen, ModelGradientsMatchFiniteDifferences) {
    CondGenConfig cfg = tiny(6, 8);
    cfg.widths = {2, 2, 2, 2, 2};
    CondGenModel model(cfg);
    randomize_flow_heads(model, 0.3, 8);
    std::mt19937_64 rng(10);
    const Var cloth = constant(random_tensor({1, 3, 8, 6}, rng));
    const Var mask = constant(random_tensor({1, 1, 8, 6}, rng, 0.0, 1.0));
    const Var seg = constant(random_tensor({1, kSegInputChannels, 8, 6}, rng));
    std::vector<std::uint8_t> labels(48);
    for (auto& l : labels) l = static_cast<std::uint8_t>(rng() % 20);
    const CondGenTruth truth =
        truth_for(labels, random_tensor({1, 3, 8, 6}, rng), random_tensor({1, 1, 8, 6}, rng, 0.0, 1.0));
    const auto build = [&] { return condgen_loss(model.forward(cloth, mask, seg), truth, {}).total; };
    std::vector<std::pair<std::string, Var>> leaves;
    for (const auto& [name, v] : model.params().entries())
        if (name.rfind("dec.", 0) == 0) leaves.emplace_back(name, v);
    const auto r = oracle::finite_difference_check(
        leaves, [&] { return build().value().item(); },
        [&] {
            model.params().zero_grad();
            backward(build());
        });
    EXPECT_LT(r.max_rel_error, 1e-4) << r.worst;
}
