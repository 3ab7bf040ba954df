#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "vfr/error.hpp"
#include "vfr/service/pipeline.hpp"

using namespace vfr;

namespace {

const fixture::Models& models() {
    static const fixture::Models m = fixture::tiny_models();
    return m;
}

std::shared_ptr<const Pipeline> pipeline_with(double tau) {
    PipelineConfig c = models().config;
    c.tau = tau;
    return Pipeline::load(c);
}

RasterImage upsample2(const RasterImage& img) {
    RasterImage out(img.width() * 2, img.height() * 2, img.channels(), img.range());
    for (int y = 0; y < out.height(); ++y)
        for (int x = 0; x < out.width(); ++x)
            for (int c = 0; c < img.channels(); ++c) out.at(x, y, c) = img.at(x / 2, y / 2, c);
    return out;
}

}  // namespace

TEST(Pipeline, RunsStagesInOrderAndTimingsAddUp) {
    const auto p = pipeline_with(0.0);
    const TryOnSample s = synth_sample(fixture::kOracleSeed, 48, 64);
    const TryOnResult r = tryon_pipeline(*p, s.person, s.cloth);
    EXPECT_TRUE(r.accepted);
    ASSERT_EQ(r.timings.size(), pipeline_stages().size());
    double sum = 0.0;
    for (std::size_t i = 0; i < r.timings.size(); ++i) {
        EXPECT_EQ(r.timings[i].stage, pipeline_stages()[i]);
        sum += r.timings[i].seconds;
    }
    EXPECT_LE(std::abs(sum - r.total_seconds), 0.05 * r.total_seconds);
    EXPECT_EQ(r.image.width(), 48);
    EXPECT_EQ(r.image.height(), 64);
    EXPECT_EQ(r.image.range(), PixelRange::byte);
}

TEST(Pipeline, DeterministicAndRescalesToPersonResolution) {
    const auto p = pipeline_with(0.0);
    const TryOnSample s = synth_sample(fixture::kOracleSeed + 1, 48, 64);
    const TryOnResult a = p->run(upsample2(s.person), s.cloth);
    const TryOnResult b = p->run(upsample2(s.person), s.cloth);
    EXPECT_EQ(a.image.width(), 96);
    EXPECT_EQ(a.image.height(), 128);
    EXPECT_EQ(encode_png(a.image), encode_png(b.image));
    EXPECT_EQ(a.score, b.score);
}

TEST(Pipeline, ThresholdBoundaries) {
    const TryOnSample s = synth_sample(fixture::kOracleSeed + 2, 48, 64);
    const TryOnResult accepted = pipeline_with(0.0)->run(s.person, s.cloth);
    EXPECT_TRUE(accepted.accepted);
    const TryOnResult rejected = pipeline_with(1.0)->run(s.person, s.cloth);
    EXPECT_FALSE(rejected.accepted);
    EXPECT_TRUE(rejected.image.empty());
    EXPECT_EQ(rejected.score, accepted.score);
    EXPECT_LT(rejected.score, 1.0);
}

TEST(Pipeline, ErrorsNameTheFailingStage) {
    const auto p = pipeline_with(0.0);
    const TryOnSample known = synth_sample(fixture::kOracleSeed, 48, 64);
    const TryOnSample stranger = synth_sample(9999, 48, 64);
    try {
        p->run(stranger.person, known.cloth);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.stage(), "segment_human");
        EXPECT_EQ(e.code(), ErrorCode::backend_error);
    }
    try {
        p->run(RasterImage(48, 64, 3, PixelRange::byte, 200.0f), known.cloth);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.stage(), "generate_agnostic");
        EXPECT_EQ(e.code(), ErrorCode::pose_incomplete);
    }
    try {
        p->run(known.person, stranger.cloth);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.stage(), "make_cloth_mask");
    }
}

TEST(Pipeline, ToyBackendsRunEndToEnd) {
    PipelineConfig c = models().config;
    c.backends = {"toy", "toy", "toy", "toy-floodfill"};
    c.toy_segnet_steps = 20;
    c.toy_fit_samples = 8;
    const auto p = Pipeline::load(c);
    const TryOnSample s = synth_sample(77, 48, 64);
    const TryOnResult r = p->run(s.person, s.cloth);
    EXPECT_TRUE(r.accepted);
    EXPECT_EQ(r.image.width(), 48);
}

TEST(PipelineConfig, JsonAndLoadErrors) {
    const auto& m = models();
    const PipelineConfig c = PipelineConfig::from_json(
        {{"condgen_checkpoint", "condgen.ckpt"}, {"imggen_checkpoint", "imggen.ckpt"}, {"width", 48}, {"height", 64},
         {"tau", 0.25}, {"backends", {{"cloth_segmenter", "toy-floodfill"}}}},
        m.dir);
    EXPECT_EQ(c.condgen_checkpoint, m.dir / "condgen.ckpt");
    EXPECT_EQ(c.backends.cloth_segmenter, "toy-floodfill");
    EXPECT_EQ(c.backends.segmenter, "oracle");
    EXPECT_EQ(PipelineConfig::from_json(c.to_json()).to_json(), c.to_json());
    EXPECT_THROW(PipelineConfig::from_json({{"tau", 1.5}}), Error);

    PipelineConfig missing = m.config;
    missing.imggen_checkpoint = m.dir / "nope.ckpt";
    try {
        Pipeline::load(missing);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::configuration);
    }
    PipelineConfig wrong_res = m.config;
    wrong_res.width = 96;
    wrong_res.height = 128;
    EXPECT_THROW(Pipeline::load(wrong_res), Error);
    PipelineConfig swapped = m.config;
    std::swap(swapped.condgen_checkpoint, swapped.imggen_checkpoint);
    EXPECT_THROW(Pipeline::load(swapped), Error);
    PipelineConfig bad_backend = m.config;
    bad_backend.backends.segmenter = "nonexistent";
    try {
        Pipeline::load(bad_backend);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::configuration);
    }
}
