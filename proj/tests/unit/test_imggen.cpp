#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "vfr/data/synth.hpp"
#include "vfr/error.hpp"
#include "vfr/imggen/spade.hpp"
#include "vfr/preprocess/ops.hpp"

using namespace vfr;
using namespace vfr::nn;

namespace {

Tensor random_tensor(Shape s, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Tensor t(s);
    for (double& v : t.data()) v = u(rng);
    return t;
}

// A SPADE layer whose heads ignore the conditioning: gamma = g, beta = b.
SpadeLayer constant_layer(ParamStore& store, int channels, int cond_channels, double g, double b) {
    Rng rng(1);
    SpadeLayer layer(store, "spade", channels, cond_channels, 4, rng);
    store.get("spade.gamma.weight").mutable_value().fill(0.0);
    store.get("spade.beta.weight").mutable_value().fill(0.0);
    store.get("spade.gamma.bias").mutable_value().fill(g);
    store.get("spade.beta.bias").mutable_value().fill(b);
    return layer;
}

SpadeGenConfig tiny_gen() {
    SpadeGenConfig c;
    c.channels = {8, 8, 6, 4};
    c.hidden = 4;
    c.width = 48;
    c.height = 64;
    c.seed = 2;
    return c;
}

DiscriminatorConfig tiny_disc(int scales = 2) {
    DiscriminatorConfig c;
    c.scales = scales;
    c.widths = {4, 6};
    return c;
}

}  // namespace

TEST(Spade, IdentityAffineIsInstanceNorm) {
    ParamStore store;
    const SpadeLayer layer = constant_layer(store, 2, 3, 1.0, 0.0);
    std::mt19937_64 rng(1);
    const Var x(random_tensor({1, 2, 4, 3}, rng));
    const Var cond(random_tensor({1, 3, 4, 3}, rng));
    const Tensor got = spade_normalize(x, cond, layer).value();
    const Tensor want = instance_norm(x).value();
    for (std::size_t i = 0; i < got.numel(); ++i) EXPECT_NEAR(got[i], want[i], 1e-12);
}

TEST(Spade, HandComputedAffine) {
    ParamStore store;
    const SpadeLayer layer = constant_layer(store, 1, 2, 2.0, 1.0);
    const Var x(Tensor({1, 1, 1, 2}, {1.0, 3.0}));
    const Var cond(Tensor({1, 2, 1, 2}));
    const Tensor y = spade_normalize(x, cond, layer).value();
    // eps = 1e-5 against a unit variance.
    EXPECT_NEAR(y[0], -1.0, 1e-5);
    EXPECT_NEAR(y[1], 3.0, 1e-5);
}

TEST(Spade, ConstantInputGivesBeta) {
    ParamStore store;
    const SpadeLayer layer = constant_layer(store, 2, 1, 3.0, 0.7);
    const Var x(Tensor({1, 2, 3, 3}, 4.2));
    const Tensor y = spade_normalize(x, Var(Tensor({1, 1, 3, 3})), layer).value();
    for (double v : y.data()) EXPECT_NEAR(v, 0.7, 1e-2);
}

TEST(Spade, ShapeMismatchIsInvalidInput) {
    ParamStore store;
    const SpadeLayer layer = constant_layer(store, 2, 1, 1.0, 0.0);
    try {
        spade_normalize(Var(Tensor({1, 2, 4, 4})), Var(Tensor({1, 1, 2, 2})), layer);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::invalid_input);
    }
}

TEST(Spade, GradientsMatchFiniteDifferences) {
    ParamStore store;
    Rng rng(4);
    const SpadeLayer layer(store, "spade", 2, 3, 3, rng);
    std::mt19937_64 gen(5);
    const Var x(random_tensor({1, 2, 4, 3}, gen), true);
    const Var cond(random_tensor({1, 3, 4, 3}, gen), true);
    const Tensor probe = random_tensor({1, 2, 4, 3}, gen);
    const auto build = [&] { return sum(mul(spade_normalize(x, cond, layer), constant(probe))); };
    std::vector<std::pair<std::string, Var>> leaves = {{"x", x}, {"cond", cond}};
    for (const auto& e : store.entries()) leaves.push_back(e);
    const auto r = oracle::finite_difference_check(
        leaves, [&] { return build().value().item(); },
        [&] {
            for (auto& [n, v] : leaves) v.zero_grad();
            backward(build());
        });
    EXPECT_LT(r.max_rel_error, 1e-4) << r.worst;
}

TEST(ImgGen, OutputShapeRangeAndDeterminism) {
    const SpadeGenModel model(tiny_gen());
    const TryOnSample s = synth_sample(31, 48, 64);
    const Agnostic ag = generate_agnostic(s.person, s.parse, s.pose);
    const RasterImage a = imggen_forward(model, ag.image, s.parse, s.densepose, s.cloth);
    EXPECT_EQ(a.width(), 48);
    EXPECT_EQ(a.height(), 64);
    EXPECT_EQ(a.channels(), 3);
    for (float v : a.data()) {
        EXPECT_GE(v, -1.0f);
        EXPECT_LE(v, 1.0f);
    }
    const SpadeGenModel again(tiny_gen());
    EXPECT_EQ(imggen_forward(again, ag.image, s.parse, s.densepose, s.cloth), a);
}

TEST(ImgGen, RejectsFewerThanThreeBlocksAndBadResolution) {
    SpadeGenConfig c = tiny_gen();
    c.channels = {4, 4};
    EXPECT_THROW(SpadeGenModel{c}, Error);
    c = tiny_gen();
    c.width = 50;
    EXPECT_THROW(SpadeGenModel{c}, Error);
    const SpadeGenModel model(tiny_gen());
    const TryOnSample s = synth_sample(31, 24, 32);
    try {
        imggen_forward(model, s.person, s.parse, s.densepose, s.cloth);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::invalid_input);
    }
}

TEST(Discriminator, ScoreMapSizesFollowStrideArithmetic) {
    const MultiScaleDiscriminator d(tiny_disc(2));
    std::mt19937_64 rng(3);
    const Var img(random_tensor({1, 3, 64, 48}, rng));
    const Var cond(random_tensor({1, kImgGenCondChannels, 64, 48}, rng));
    const auto scores = d.forward(img, cond);
    ASSERT_EQ(scores.size(), 2u);
    // conv4/2/p1 twice: h -> h/2 -> h/4 for h divisible by 4.
    EXPECT_EQ(scores[0].shape(), (Shape{1, 1, 16, 12}));
    EXPECT_EQ(scores[1].shape(), (Shape{1, 1, 8, 6}));
    for (int h : {5, 7, 9, 10, 33}) {
        const int first = (h - 2) / 2 + 1;
        EXPECT_EQ(MultiScaleDiscriminator::score_extent(h), (first - 2) / 2 + 1);
    }
}

TEST(Discriminator, SingleScaleEqualsFirstScale) {
    const MultiScaleDiscriminator one(tiny_disc(1));
    const MultiScaleDiscriminator two(tiny_disc(2));
    std::mt19937_64 rng(3);
    const Var img(random_tensor({1, 3, 32, 24}, rng));
    const Var cond(random_tensor({1, kImgGenCondChannels, 32, 24}, rng));
    const auto a = one.forward(img, cond);
    const auto b = two.forward(img, cond);
    ASSERT_EQ(a.size(), 1u);
    EXPECT_EQ(a[0].value(), b[0].value());
}

TEST(Discriminator, ZeroWeightsGiveZeroScores) {
    MultiScaleDiscriminator d(tiny_disc(2));
    for (auto& [name, v] : d.params().entries()) v.mutable_value().fill(0.0);
    std::mt19937_64 rng(3);
    const auto scores = d.forward(Var(random_tensor({1, 3, 32, 24}, rng)),
                                  Var(random_tensor({1, kImgGenCondChannels, 32, 24}, rng)));
    for (const Var& s : scores)
        for (double v : s.value().data()) EXPECT_EQ(v, 0.0);
    EXPECT_DOUBLE_EQ(realism_score({scores[0].value(), scores[1].value()}), 0.5);
}

TEST(Rejection, ThresholdBoundaries) {
    const MultiScaleDiscriminator d(tiny_disc(2));
    const TryOnSample s = synth_sample(41, 48, 64);
    const Agnostic ag = generate_agnostic(s.person, s.parse, s.pose);
    const Tensor cond = imggen_condition(ag.image, s.parse, s.densepose, s.cloth);
    const RejectionResult always = rejection_filter(d, s.person, cond, 0.0);
    EXPECT_TRUE(always.accepted);
    const RejectionResult never = rejection_filter(d, s.person, cond, 1.0);
    EXPECT_FALSE(never.accepted);
    EXPECT_EQ(always.score, never.score);
    EXPECT_GT(always.score, 0.0);
    EXPECT_LT(always.score, 1.0);
    EXPECT_THROW(rejection_filter(d, s.person, cond, 1.5), Error);
}

TEST(Rejection, ScoreIsMeanLogisticAndThresholdMonotone) {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        const std::vector<Tensor> a = {random_tensor({1, 1, 4, 3}, rng, -4, 4), random_tensor({1, 1, 2, 2}, rng, -4, 4)};
        const std::vector<Tensor> b = {random_tensor({1, 1, 4, 3}, rng, -4, 4), random_tensor({1, 1, 2, 2}, rng, -4, 4)};
        double want = 0.0;
        for (const Tensor& t : a) {
            double acc = 0.0;
            for (std::size_t i = 0; i < t.numel(); ++i) acc += 1.0 / (1.0 + std::exp(-t[i]));
            want += acc / t.numel() / a.size();
        }
        const double sa = realism_score(a), sb = realism_score(b);
        ASSERT_NEAR(sa, want, 1e-12);
        const double tau = u(rng);
        const double lo = std::min(sa, sb), hi = std::max(sa, sb);
        if (!rejection_decision(hi, tau).accepted) ASSERT_FALSE(rejection_decision(lo, tau).accepted);
    }
}
