#include <gtest/gtest.h>

#include <random>

#include "vfr/error.hpp"
#include "vfr/train/losses.hpp"

using namespace vfr;
using namespace vfr::nn;

namespace {

Var filled(Shape s, double v) { return Var(Tensor(s, v)); }

Tensor random_tensor(Shape s, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    Tensor t(s);
    for (double& v : t.data()) v = u(rng);
    return t;
}

}  // namespace

TEST(Lsgan, OptimaAndHalfScores) {
    const Shape a{1, 1, 4, 3}, b{1, 1, 2, 2};
    EXPECT_EQ(lsgan_losses({filled(a, 1), filled(b, 1)}, {filled(a, 0), filled(b, 0)}).d.value().item(), 0.0);
    EXPECT_EQ(lsgan_generator_loss({filled(a, 1), filled(b, 1)}).value().item(), 0.0);
    const LsganLosses half = lsgan_losses({filled(a, 0.5), filled(b, 0.5)}, {filled(a, 0.5), filled(b, 0.5)});
    EXPECT_DOUBLE_EQ(half.d.value().item(), 0.25);
    EXPECT_DOUBLE_EQ(half.g.value().item(), 0.125);
}

TEST(Lsgan, MatchesBruteForceOverPatches) {
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 50; ++trial) {
        const std::vector<Shape> shapes = {{2, 1, 5, 4}, {2, 1, 3, 2}, {2, 1, 1, 1}};
        std::vector<Var> real, fake;
        double d = 0.0, g = 0.0;
        for (const Shape& s : shapes) {
            const Tensor r = random_tensor(s, rng), f = random_tensor(s, rng);
            double rr = 0.0, ff = 0.0, fg = 0.0;
            for (std::size_t i = 0; i < r.numel(); ++i) {
                rr += (r[i] - 1) * (r[i] - 1);
                ff += f[i] * f[i];
                fg += (f[i] - 1) * (f[i] - 1);
            }
            const double n = static_cast<double>(r.numel()) * shapes.size();
            d += 0.5 * rr / n + 0.5 * ff / n;
            g += 0.5 * fg / n;
            real.emplace_back(r);
            fake.emplace_back(f);
        }
        const LsganLosses l = lsgan_losses(real, fake);
        ASSERT_NEAR(l.d.value().item(), d, 1e-6);
        ASSERT_NEAR(l.g.value().item(), g, 1e-6);
    }
}

TEST(Lsgan, NonFiniteScoreIsNumericFailure) {
    Tensor t({1, 1, 2, 2});
    t[3] = std::numeric_limits<double>::infinity();
    try {
        lsgan_generator_loss({Var(t)});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::numeric_failure);
    }
}

TEST(Perceptual, Examples) {
    std::mt19937_64 rng(2);
    const Var a(random_tensor({1, 3, 2, 2}, rng));
    EXPECT_EQ(perceptual_loss(a, a).value().item(), 0.0);
    const Var b(random_tensor({1, 3, 2, 2}, rng));
    EXPECT_DOUBLE_EQ(perceptual_loss(a, b, identity_extractor()).value().item(), l1(a, b).value().item());
    Tensor shifted = a.value();
    for (double& v : shifted.data()) v += 0.4;
    EXPECT_NEAR(perceptual_loss(Var(shifted), a).value().item(), 1.2, 1e-12);
}
