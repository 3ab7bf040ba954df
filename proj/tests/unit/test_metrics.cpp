#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "vfr/data/synth.hpp"
#include "vfr/error.hpp"
#include "vfr/metrics/ablation.hpp"
#include "vfr/metrics/metrics.hpp"

using namespace vfr;
using oracle::random_matrix;
using oracle::random_psd;

namespace {

FeatureStats stats(double mu, double var) {
    FeatureStats s;
    s.mu = Eigen::VectorXd::Constant(1, mu);
    s.sigma = Eigen::MatrixXd::Constant(1, 1, var);
    s.n = 2;
    return s;
}

}  // namespace

TEST(FeatureStats, HandExamples) {
    Eigen::MatrixXd f(2, 1);
    f << 0, 2;
    const FeatureStats s = feature_stats(f);
    EXPECT_DOUBLE_EQ(s.mu[0], 1.0);
    EXPECT_DOUBLE_EQ(s.sigma(0, 0), 2.0);
    Eigen::MatrixXd same(4, 3);
    same.rowwise() = Eigen::RowVector3d(1, -2, 5);
    EXPECT_EQ(feature_stats(same).sigma, Eigen::MatrixXd::Zero(3, 3));
    try {
        feature_stats(Eigen::MatrixXd::Ones(1, 3));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::insufficient_samples);
    }
}

TEST(FeatureStats, MatchesLoopsAndIgnoresRowOrder) {
    std::mt19937_64 rng(3);
    const Eigen::MatrixXd f = random_matrix(9, 4, rng);
    const FeatureStats s = feature_stats(f);
    for (int a = 0; a < 4; ++a) {
        double mean_a = 0;
        for (int i = 0; i < 9; ++i) mean_a += f(i, a) / 9;
        EXPECT_NEAR(s.mu[a], mean_a, 1e-12);
        for (int b = 0; b < 4; ++b) {
            double mean_b = 0, cov = 0;
            for (int i = 0; i < 9; ++i) mean_b += f(i, b) / 9;
            for (int i = 0; i < 9; ++i) cov += (f(i, a) - mean_a) * (f(i, b) - mean_b) / 8;
            EXPECT_NEAR(s.sigma(a, b), cov, 1e-12);
        }
    }
    std::vector<int> order(9);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    Eigen::MatrixXd permuted(9, 4);
    for (int i = 0; i < 9; ++i) permuted.row(i) = f.row(order[i]);
    const FeatureStats p = feature_stats(permuted);
    EXPECT_TRUE(p.mu.isApprox(s.mu, 1e-12));
    EXPECT_TRUE(p.sigma.isApprox(s.sigma, 1e-12));
}

TEST(Sqrtm, FixedCases) {
    EXPECT_TRUE(sqrtm_psd(Eigen::MatrixXd::Identity(3, 3)).isApprox(Eigen::MatrixXd::Identity(3, 3), 1e-12));
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(2, 2);
    d(0, 0) = 4;
    d(1, 1) = 9;
    const Eigen::MatrixXd r = sqrtm_psd(d);
    EXPECT_NEAR(r(0, 0), 2.0, 1e-9);
    EXPECT_NEAR(r(1, 1), 3.0, 1e-9);
    EXPECT_NEAR(r(0, 1), 0.0, 1e-9);
    Eigen::MatrixXd m(2, 2);
    m << 2, 1, 1, 2;
    const Eigen::MatrixXd s = sqrtm_psd(m);
    EXPECT_NEAR(s(0, 0), 1.3660254, 1e-7);
    EXPECT_NEAR(s(0, 1), 0.3660254, 1e-7);
    EXPECT_NEAR(s(1, 1), 1.3660254, 1e-7);
}

TEST(Sqrtm, RandomPsdSquaresBack) {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 100; ++trial) {
        const int d = 1 + trial % 16;
        const Eigen::MatrixXd a = random_psd(d, rng, trial % 3 == 0 ? std::max(1, d / 2) : d);
        const Eigen::MatrixXd s = sqrtm_psd(a);
        EXPECT_LT((s * s - a).norm(), 1e-6) << "d=" << d;
        EXPECT_LT((s - s.transpose()).norm(), 1e-9);
    }
}

TEST(Sqrtm, RejectsIndefinite) {
    Eigen::MatrixXd m(2, 2);
    m << 1, 0, 0, -1;
    try {
        sqrtm_psd(m);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::invalid_input);
    }
    m(1, 1) = -1e-10;
    EXPECT_NO_THROW(sqrtm_psd(m));
}

TEST(Frechet, ScalarOracles) {
    EXPECT_NEAR(frechet_distance(stats(0, 1), stats(2, 1)), 4.0, 1e-9);
    EXPECT_NEAR(frechet_distance(stats(0, 4), stats(0, 1)), 1.0, 1e-9);
    std::mt19937_64 rng(5);
    FeatureStats a;
    a.mu = random_matrix(6, 1, rng);
    a.sigma = random_psd(6, rng);
    EXPECT_LE(frechet_distance(a, a), 1e-6);
    FeatureStats b = stats(0, 1);
    EXPECT_THROW(frechet_distance(a, b), Error);
}

TEST(Frechet, MatchesSymmetricRouteAndIsSymmetric) {
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 50; ++trial) {
        const int d = 2 + trial % 8;
        FeatureStats a, b;
        a.mu = random_matrix(d, 1, rng);
        b.mu = random_matrix(d, 1, rng);
        a.sigma = random_psd(d, rng) + 0.1 * Eigen::MatrixXd::Identity(d, d);
        b.sigma = random_psd(d, rng) + 0.1 * Eigen::MatrixXd::Identity(d, d);
        const double ab = frechet_distance(a, b);
        EXPECT_NEAR(ab, frechet_distance(b, a), 1e-9 * std::max(1.0, ab));
        EXPECT_NEAR(ab, oracle::fid(a, b), 1e-6 * std::max(1.0, ab));
        EXPECT_GE(ab, 0.0);
    }
}

TEST(MeanIou, Examples) {
    ParseMap truth(4, 1), pred(4, 1);
    truth.labels() = {0, 0, 1, 1};
    pred.labels() = {0, 1, 1, 1};
    const IouReport r = mean_iou(pred, truth);
    EXPECT_DOUBLE_EQ(r.per_class.at(0), 0.5);
    EXPECT_DOUBLE_EQ(r.per_class.at(1), 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(r.mean, 7.0 / 12.0);
    EXPECT_EQ(r.per_class.size(), 2u);
    EXPECT_DOUBLE_EQ(mean_iou(truth, truth).mean, 1.0);
    EXPECT_DOUBLE_EQ(mean_iou(ParseMap(3, 3, 2), ParseMap(3, 3, 5)).mean, 0.0);
    EXPECT_THROW(mean_iou(ParseMap(3, 3), ParseMap(2, 3)), Error);
}

TEST(MeanIou, BoundedAndInvariantUnderRelabeling) {
    std::mt19937_64 rng(2);
    std::vector<std::uint8_t> perm(20);
    std::iota(perm.begin(), perm.end(), 0);
    for (int trial = 0; trial < 50; ++trial) {
        ParseMap a(8, 6), b(8, 6);
        for (auto& l : a.labels()) l = rng() % 5;
        for (auto& l : b.labels()) l = rng() % 5;
        std::shuffle(perm.begin(), perm.end(), rng);
        ParseMap pa = a, pb = b;
        for (auto& l : pa.labels()) l = perm[l];
        for (auto& l : pb.labels()) l = perm[l];
        const double m = mean_iou(a, b).mean;
        EXPECT_GE(m, 0.0);
        EXPECT_LE(m, 1.0);
        EXPECT_NEAR(mean_iou(pa, pb).mean, m, 1e-12);
    }
}

TEST(MeanIou, SetLevelSumsCountsBeforeDividing) {
    ParseMap t1(2, 1), p1(2, 1), t2(2, 1), p2(2, 1);
    t1.labels() = {0, 1};
    p1.labels() = {0, 0};
    t2.labels() = {1, 1};
    p2.labels() = {1, 1};
    // class 0: 1 / 2; class 1: 2 / 3 once both images are pooled.
    const IouReport r = mean_iou(std::vector{p1, p2}, std::vector{t1, t2});
    EXPECT_DOUBLE_EQ(r.per_class.at(0), 0.5);
    EXPECT_DOUBLE_EQ(r.per_class.at(1), 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(mean_iou(std::vector{p1}, std::vector{t1}).mean, mean_iou(p1, t1).mean);
    EXPECT_THROW(mean_iou(std::vector{p1}, std::vector<ParseMap>{}), Error);
}

TEST(Embedder, DeterministicAndSixtyFourDimensional) {
    const auto images = std::vector<RasterImage>{synth_sample(1, 48, 64).person, synth_sample(2, 48, 64).person,
                                                 synth_sample(3, 48, 64).person};
    const auto e1 = random_conv_embedder();
    const auto e2 = random_conv_embedder();
    EXPECT_EQ(e1(images[0]).size(), 64);
    EXPECT_EQ(e1(images[1]), e2(images[1]));
    EXPECT_NEAR(fid(images, images, e1), 0.0, 1e-6);
    std::vector<RasterImage> other = {synth_sample(4, 48, 64).person, synth_sample(5, 48, 64).person,
                                      synth_sample(6, 48, 64).person};
    EXPECT_EQ(fid(images, other, e1), fid(images, other, e2));
    EXPECT_GT(fid(images, other, e1), 0.0);
}

TEST(Timing, Additivity) {
    EXPECT_TRUE(timing_report({}).stages.empty());
    EXPECT_EQ(timing_report({}).total_seconds, 0.0);
    const TimingReport r = timing_report({{"a", 1.0}, {"b", 2.0}});
    EXPECT_DOUBLE_EQ(r.total_seconds, 3.0);
    EXPECT_EQ(r.to_json()["reference"]["response_seconds_after"], 78.0);
    EXPECT_NE(r.csv().find("total,3"), std::string::npos);
    EXPECT_NE(r.table().find("reference"), std::string::npos);
}

TEST(Ablation, GridStructureAndZeroFidForRealSet) {
    const auto& grid = ablation_grid();
    ASSERT_EQ(grid.size(), 6u);
    const std::vector<AblationSwitches> want = {{0, 0, 0}, {0, 0, 1}, {0, 1, 0}, {0, 1, 1}, {1, 0, 0}, {1, 1, 1}};
    EXPECT_EQ(grid, want);
    std::vector<RasterImage> real;
    for (int i = 0; i < 4; ++i) real.push_back(synth_sample(50 + i, 48, 64).person);
    std::vector<BackendSelection> seen;
    const AblationReport r = run_ablation(
        grid, AblationBindings{}, BackendRegistry::with_defaults(), real,
        [&](const BackendSelection& s) {
            seen.push_back(s);
            return real;
        },
        random_conv_embedder());
    ASSERT_EQ(r.rows.size(), 6u);
    for (std::size_t i = 0; i < 6; ++i) {
        EXPECT_EQ(r.rows[i].experiment, "E" + std::to_string(i + 1));
        EXPECT_NEAR(r.rows[i].fid, 0.0, 1e-6);
        EXPECT_EQ(r.rows[i].reference_fid, ablation_reference_fids()[i]);
    }
    EXPECT_EQ(seen[0].segmenter, "toy-bayes");
    EXPECT_EQ(seen[5].segmenter, "toy");
    EXPECT_EQ(seen[1].densepose_estimator, "toy");
    EXPECT_EQ(seen[2].cloth_segmenter, "toy-floodfill");
    const std::string csv = r.csv();
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 7);
}

TEST(Ablation, MissingBackendIsConfigurationError) {
    AblationBindings b;
    b.densepose_new = "pretrained-densepose";
    std::vector<RasterImage> real = {synth_sample(1, 48, 64).person, synth_sample(2, 48, 64).person};
    bool ran = false;
    try {
        run_ablation(ablation_grid(), b, BackendRegistry::with_defaults(), real,
                     [&](const BackendSelection&) {
                         ran = true;
                         return real;
                     },
                     random_conv_embedder());
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::configuration);
        EXPECT_NE(std::string(e.what()).find("pretrained-densepose"), std::string::npos);
    }
    EXPECT_FALSE(ran);
}

TEST(Ablation, BindingsJson) {
    const AblationBindings b = AblationBindings::from_json(
        {{"segmentation", {{"original", "oracle"}}}, {"pose", "toy"}});
    EXPECT_EQ(b.segmentation_original, "oracle");
    EXPECT_EQ(b.segmentation_new, "toy");
    EXPECT_EQ(b.pose, "toy");
    EXPECT_THROW(AblationBindings::from_json({{"segmentation", "toy"}}), Error);
}
