#include <gtest/gtest.h>

#include <cmath>

#include "vfr/data/synth.hpp"
#include "vfr/error.hpp"
#include "vfr/preprocess/backend.hpp"
#include "vfr/preprocess/ops.hpp"
#include "vfr/preprocess/toy_backends.hpp"

using namespace vfr;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "expected an error";
    return ErrorCode::usage;
}

struct OracleFixture {
    std::vector<TryOnSample> samples;
    std::shared_ptr<OracleStore> store = std::make_shared<OracleStore>();
    BackendContext ctx;
    BackendRegistry registry = BackendRegistry::with_defaults();

    explicit OracleFixture(int n, std::uint64_t seed = 500, SynthOptions opts = {}) {
        for (int i = 0; i < n; ++i) samples.push_back(synth_sample(seed + i, 48, 64, opts));
        for (const auto& s : samples) store->add(s);
        ctx.oracle = store;
        ctx.fit_samples = 8;
        ctx.segnet_steps = 20;
    }
};

// Per-pixel reference for the background rule.
RasterImage whiten_reference(const RasterImage& img, const ParseMap& parse) {
    RasterImage out = img;
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x)
            if (parse.at(x, y) == 0) out.at(x, y, 0) = out.at(x, y, 1) = out.at(x, y, 2) = 255.0f;
    return out;
}

class ThrowingSegmenter final : public Segmenter {
  public:
    std::string name() const override { return "broken"; }
    ParseMap segment(const RasterImage&) const override { throw std::runtime_error("model exploded"); }
};

class WrongSizeSegmenter final : public Segmenter {
  public:
    std::string name() const override { return "shrinker"; }
    ParseMap segment(const RasterImage& img) const override { return ParseMap(img.width() / 2, img.height()); }
};

}  // namespace

TEST(Oracle, ReturnsStoredTruthExactly) {
    OracleFixture f(3);
    auto seg = f.registry.segmenter("oracle", f.ctx);
    auto pose = f.registry.pose_detector("oracle", f.ctx);
    auto dense = f.registry.densepose_estimator("oracle", f.ctx);
    auto cloth = f.registry.cloth_segmenter("oracle", f.ctx);
    for (const auto& s : f.samples) {
        EXPECT_EQ(segment_human(s.person, *seg).value, s.parse);
        EXPECT_EQ(detect_pose(s.person, *pose), s.pose);
        EXPECT_EQ(compute_densepose(s.person, *dense), s.densepose);
        EXPECT_EQ(make_cloth_mask(s.cloth, *cloth), s.cloth_mask);
        // The background-removed photo maps to the same truth.
        const RasterImage clean = remove_background(s.person, s.parse);
        EXPECT_EQ(detect_pose(clean, *pose), s.pose);
    }
}

TEST(Oracle, BlankImageIsAnEmptyScene) {
    OracleFixture f(1);
    const RasterImage white(48, 64, 3, PixelRange::byte, 255.0f);
    const ParseMap parse = segment_human(white, *f.registry.segmenter("oracle", f.ctx)).value;
    EXPECT_EQ(parse, ParseMap(48, 64));
    EXPECT_FALSE(detect_pose(white, *f.registry.pose_detector("oracle", f.ctx)).any_detected());
    const DenseposeMap dp = compute_densepose(white, *f.registry.densepose_estimator("oracle", f.ctx));
    EXPECT_EQ(dp, DenseposeMap(48, 64));
    EXPECT_EQ(make_cloth_mask(white, *f.registry.cloth_segmenter("oracle", f.ctx)).count(), 0u);
}

TEST(Oracle, UnknownImageIsBackendError) {
    OracleFixture f(1);
    const RasterImage other = synth_sample(9999, 48, 64).person;
    EXPECT_EQ(code_of([&] { segment_human(other, *f.registry.segmenter("oracle", f.ctx)); }),
              ErrorCode::backend_error);
}

TEST(Registry, UnknownNameIsConfigurationError) {
    const auto r = BackendRegistry::with_defaults();
    EXPECT_EQ(code_of([&] { r.segmenter("deeplab", BackendContext{}); }), ErrorCode::configuration);
    EXPECT_EQ(code_of([&] { r.segmenter("oracle", BackendContext{}); }), ErrorCode::configuration);
    EXPECT_TRUE(r.contains(BackendKind::cloth_segmenter, "toy-floodfill"));
    EXPECT_EQ(r.names(BackendKind::segmenter), (std::vector<std::string>{"oracle", "toy", "toy-bayes"}));
}

TEST(Registry, ExternalBackendsCanBeRegistered) {
    auto r = BackendRegistry::with_defaults();
    r.add(BackendKind::segmenter, "broken", [](const BackendContext&) { return std::make_shared<ThrowingSegmenter>(); });
    EXPECT_EQ(r.segmenter("broken", {})->name(), "broken");
}

TEST(SegmentHuman, BackendFailureNamesTheBackend) {
    const RasterImage img(8, 8, 3);
    try {
        segment_human(img, ThrowingSegmenter{});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::backend_error);
        EXPECT_NE(std::string(e.what()).find("broken"), std::string::npos);
    }
    EXPECT_EQ(code_of([&] { segment_human(img, WrongSizeSegmenter{}); }), ErrorCode::contract_violation);
}

TEST(SegmentHuman, RecordsDuration) {
    OracleFixture f(1);
    const auto r = segment_human(f.samples[0].person, *f.registry.segmenter("oracle", f.ctx));
    EXPECT_GE(r.seconds, 0.0);
    EXPECT_LT(r.seconds, 5.0);
}

TEST(RemoveBackground, PerPixelRule) {
    RasterImage img(2, 2, 3);
    for (float& v : img.data()) v = 40.0f;
    ParseMap parse(2, 2, 5);
    parse.at(1, 0) = 0;
    const RasterImage out = remove_background(img, parse);
    for (int y = 0; y < 2; ++y) {
        for (int x = 0; x < 2; ++x) {
            const float expect = (x == 1 && y == 0) ? 255.0f : 40.0f;
            for (int c = 0; c < 3; ++c) EXPECT_EQ(out.at(x, y, c), expect);
        }
    }
}

TEST(RemoveBackground, AllBackgroundAndNoBackgroundCases) {
    const TryOnSample s = synth_sample(3, 48, 64);
    const RasterImage white = remove_background(s.person, ParseMap(48, 64));
    for (float v : white.data()) EXPECT_EQ(v, 255.0f);
    EXPECT_EQ(remove_background(s.person, ParseMap(48, 64, 10)), s.person);
    EXPECT_EQ(code_of([&] { remove_background(s.person, ParseMap(47, 64)); }), ErrorCode::invalid_input);
}

TEST(GenerateAgnostic, RequiresNeckAndShoulders) {
    const TryOnSample s = synth_sample(3, 48, 64);
    for (Joint j : {Joint::neck, Joint::right_shoulder, Joint::left_shoulder}) {
        PoseKeypoints pose = s.pose;
        pose[j] = {};
        EXPECT_EQ(code_of([&] { generate_agnostic(s.person, s.parse, pose); }), ErrorCode::pose_incomplete);
    }
}

TEST(GenerateAgnostic, NothingToEraseGivesGrayWithBlackBackground) {
    RasterImage img(12, 10, 3);
    ParseMap parse(12, 10, 0);
    for (int y = 0; y < 10; ++y) {
        for (int x = 0; x < 12; ++x) {
            img.at(x, y, 0) = static_cast<float>(10 * x);
            img.at(x, y, 1) = static_cast<float>(5 * y);
            img.at(x, y, 2) = 90.0f;
            if (x >= 8) parse.at(x, y) = 13;
        }
    }
    // Shoulders far from the face block and no elbows: no capsules.
    PoseKeypoints pose;
    pose[Joint::neck] = {1.0, 1.0, 1.0};
    pose[Joint::right_shoulder] = {0.5, 1.0, 1.0};
    pose[Joint::left_shoulder] = {1.5, 1.0, 1.0};
    const Agnostic a = generate_agnostic(img, parse, pose);
    const RasterImage gray = rgb_to_gray(img);
    ASSERT_EQ(a.image.channels(), 1);
    for (int y = 0; y < 10; ++y)
        for (int x = 0; x < 12; ++x) EXPECT_EQ(a.image.at(x, y), x >= 8 ? gray.at(x, y) : 0.0f);
    EXPECT_EQ(a.parse, parse);
}

TEST(GenerateAgnostic, UpperClothesPixelBecomesFillAndBackgroundLabel) {
    RasterImage img(6, 6, 3, PixelRange::byte, 200.0f);
    ParseMap parse(6, 6, 13);
    parse.at(4, 4) = 5;
    PoseKeypoints pose;
    pose[Joint::neck] = {0.5, 0.5, 1.0};
    pose[Joint::right_shoulder] = {0.2, 0.5, 1.0};
    pose[Joint::left_shoulder] = {0.8, 0.5, 1.0};
    const Agnostic a = generate_agnostic(img, parse, pose);
    EXPECT_EQ(a.image.at(4, 4), 128.0f);
    EXPECT_EQ(a.parse.at(4, 4), 0);
    EXPECT_EQ(a.image.at(2, 2), 200.0f);
}

TEST(GenerateAgnostic, ColorSwitchKeepsThreeChannels) {
    const TryOnSample s = synth_sample(4, 48, 64);
    AgnosticOptions opts;
    opts.keep_color = true;
    const Agnostic a = generate_agnostic(s.person, s.parse, s.pose, opts);
    EXPECT_EQ(a.image.channels(), 3);
}

TEST(PreprocessProperties, HoldOverOneHundredSyntheticSamples) {
    SynthOptions opts;
    opts.decoration_prob = 0.4;
    opts.white_garment_prob = 0.2;
    const auto registry = BackendRegistry::with_defaults();
    const auto flood = registry.cloth_segmenter("toy-floodfill", {});
    const auto threshold = registry.cloth_segmenter("toy-threshold", {});
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const TryOnSample s = synth_sample(seed, 48, 64, opts);
        // remove_background: idempotent and matches the per-pixel reference.
        const RasterImage once = remove_background(s.person, s.parse);
        EXPECT_EQ(remove_background(once, s.parse), once);
        EXPECT_EQ(once, whiten_reference(s.person, s.parse));

        // generate_agnostic: no erased classes survive; the old garment is covered;
        // face and hair outside the arm capsules are only gray-converted.
        const Agnostic a = generate_agnostic(once, s.parse, s.pose);
        const auto arms = arm_capsule_mask(48, 64, s.pose);
        const RasterImage gray = rgb_to_gray(once);
        for (int y = 0; y < 64; ++y) {
            for (int x = 0; x < 48; ++x) {
                const auto l = a.parse.at(x, y);
                ASSERT_FALSE(l == 5 || l == 6 || l == 7 || l == 10);
                const auto truth = s.parse.at(x, y);
                if (truth == 5 || truth == 6 || truth == 7) ASSERT_EQ(a.image.at(x, y), 128.0f);
                if ((truth == 13 || truth == 2) && !arms[y * 48 + x]) {
                    ASSERT_EQ(a.image.at(x, y), gray.at(x, y));
                    ASSERT_EQ(l, truth);
                }
                if (truth == 0) ASSERT_EQ(a.image.at(x, y), 0.0f);
            }
        }

        // make_cloth_mask: binary for every backend; flood fill recovers the garment.
        const ClothMask m = make_cloth_mask(s.cloth, *flood);
        EXPECT_TRUE(m.is_binary());
        EXPECT_TRUE(make_cloth_mask(s.cloth, *threshold).is_binary());
        EXPECT_EQ(m, s.cloth_mask) << "seed " << seed;
    }
}

TEST(ClothMask, AllBackgroundIsAllZero) {
    const auto registry = BackendRegistry::with_defaults();
    const RasterImage blank(20, 30, 3, PixelRange::byte, 255.0f);
    for (const auto& name : registry.names(BackendKind::cloth_segmenter)) {
        if (name == "oracle") continue;
        EXPECT_EQ(make_cloth_mask(blank, *registry.cloth_segmenter(name, {})).count(), 0u) << name;
    }
}

TEST(ClothMask, RectangleOnPlainBackgroundViaOracleIsExact) {
    TryOnSample s = synth_sample(1, 24, 32);
    s.cloth = RasterImage(24, 32, 3, PixelRange::byte, 255.0f);
    s.cloth_mask = ClothMask(24, 32);
    for (int y = 5; y < 20; ++y) {
        for (int x = 6; x < 18; ++x) {
            s.cloth.at(x, y, 0) = 200.0f;
            s.cloth_mask.at(x, y) = 1;
        }
    }
    auto store = std::make_shared<OracleStore>();
    store->add(s);
    BackendContext ctx;
    ctx.oracle = store;
    const auto oracle = BackendRegistry::with_defaults().cloth_segmenter("oracle", ctx);
    EXPECT_EQ(make_cloth_mask(s.cloth, *oracle), s.cloth_mask);
    EXPECT_EQ(make_cloth_mask(s.cloth, FloodFillClothSegmenter{}), s.cloth_mask);
}

TEST(ClothMask, ThresholdBackendFailsOnWhiteOnWhiteWhileFloodFillSucceeds) {
    SynthOptions opts;
    opts.white_garment_prob = 1.0;
    const TryOnSample s = synth_sample(21, 48, 64, opts);
    const ClothMask thr = make_cloth_mask(s.cloth, ThresholdClothSegmenter{});
    const ClothMask flood = make_cloth_mask(s.cloth, FloodFillClothSegmenter{});
    EXPECT_LT(thr.count(), s.cloth_mask.count() / 2);
    EXPECT_EQ(flood, s.cloth_mask);
}

TEST(PoseDetection, OccludedWristIsTheOnlyUndetectedJoint) {
    SynthOptions opts;
    opts.force_occluded_arm = true;
    OracleFixture f(5, 800, opts);
    auto pose = f.registry.pose_detector("oracle", f.ctx);
    for (const auto& s : f.samples) {
        const PoseKeypoints k = detect_pose(s.person, *pose);
        int zero = 0;
        for (int j = 0; j < kNumJoints; ++j) {
            if (k.joints[j].confidence == 0) {
                ++zero;
                EXPECT_TRUE(Joint(j) == Joint::left_wrist || Joint(j) == Joint::right_wrist);
            } else {
                EXPECT_GT(k.joints[j].confidence, 0.0);
            }
        }
        EXPECT_EQ(zero, 1);
    }
}

TEST(PoseDetection, EmptySceneHasNoDetections) {
    const BackendContext ctx;
    const auto toy = BackendRegistry::with_defaults().pose_detector("toy-bayes", ctx);
    EXPECT_FALSE(detect_pose(RasterImage(48, 64, 3, PixelRange::byte, 255.0f), *toy).any_detected());
    EXPECT_FALSE(pose_from_parse(ParseMap(48, 64)).any_detected());
}

TEST(ToyBackends, BayesBaselineIsDeterministicAndRoughlyRight) {
    BackendContext ctx;
    const auto registry = BackendRegistry::with_defaults();
    const auto seg = registry.segmenter("toy-bayes", ctx);
    const auto pose = registry.pose_detector("toy-bayes", ctx);
    const auto dense = registry.densepose_estimator("toy-bayes", ctx);
    EXPECT_EQ(pose->name(), "toy-bayes");
    double correct = 0, total = 0, joint_err = 0;
    int joints = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const TryOnSample s = synth_sample(seed, 48, 64);
        const ParseMap p = segment_human(s.person, *seg).value;
        EXPECT_EQ(p, segment_human(s.person, *seg).value);
        for (std::size_t i = 0; i < p.labels().size(); ++i) correct += p.labels()[i] == s.parse.labels()[i];
        total += static_cast<double>(p.labels().size());
        const PoseKeypoints k = pose_from_parse(s.parse);
        for (int j = 0; j < kNumJoints; ++j) {
            if (k.joints[j].detected() && s.pose.joints[j].detected()) {
                joint_err += std::hypot(k.joints[j].x - s.pose.joints[j].x, k.joints[j].y - s.pose.joints[j].y);
                ++joints;
            }
        }
        const DenseposeMap d = compute_densepose(s.person, *dense);
        EXPECT_TRUE(d.satisfies_invariants());
        EXPECT_EQ(detect_pose(s.person, *pose), detect_pose(s.person, *pose));
    }
    EXPECT_GT(correct / total, 0.7);
    EXPECT_LT(joint_err / joints, 3.0);
    EXPECT_GT(joints, 150);
}

TEST(Densepose, InvariantHoldsForEveryBackendOutput) {
    OracleFixture f(5);
    for (const auto& name : f.registry.names(BackendKind::densepose_estimator)) {
        const auto est = f.registry.densepose_estimator(name, f.ctx);
        for (const auto& s : f.samples) EXPECT_TRUE(compute_densepose(s.person, *est).satisfies_invariants()) << name;
        const RasterImage empty(48, 64, 3, PixelRange::byte, 255.0f);
        const DenseposeMap none = compute_densepose(empty, *est);
        for (int y = 0; y < 64; ++y)
            for (int x = 0; x < 48; ++x) EXPECT_EQ(none.part(x, y), 0) << name;
    }
}
