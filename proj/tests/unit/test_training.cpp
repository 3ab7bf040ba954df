#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.hpp"
#include "vfr/error.hpp"

using namespace vfr;

namespace {

std::vector<TrainingExample> small_set() { return make_training_set(synth_dataset(1, 3, 48, 64)); }

}  // namespace

TEST(TrainingExample, CarriesGarmentTruth) {
    const TryOnSample s = synth_sample(4, 48, 64);
    const TrainingExample ex = make_training_example(s);
    EXPECT_EQ(ex.seg.shape(), (nn::Shape{1, kSegInputChannels, 64, 48}));
    EXPECT_EQ(ex.agnostic.shape().c, 1);
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 48; ++x) {
            const bool garment = s.dressed_parse->at(x, y) == label(BodyPart::upper_clothes);
            ASSERT_EQ(ex.garment_mask(0, 0, y, x), garment ? 1.0 : 0.0);
            if (!garment) ASSERT_EQ(ex.cloth_on_person(0, 1, y, x), 0.0);
            else ASSERT_EQ(ex.cloth_on_person(0, 1, y, x), ex.dressed(0, 1, y, x));
        }
    AgnosticOptions color;
    color.keep_color = true;
    EXPECT_EQ(make_training_example(s, color).agnostic.shape().c, 3);
    TryOnSample bare = s;
    bare.dressed.reset();
    EXPECT_THROW(make_training_example(bare), Error);
}

TEST(TrainConfig, JsonRoundTripAndValidation) {
    const TrainConfig c = fixture::tiny_train(5);
    EXPECT_EQ(TrainConfig::from_json(c.to_json()), c);
    EXPECT_EQ(TrainConfig::from_json({{"toy", true}}), TrainConfig::toy());
    EXPECT_THROW(TrainConfig::from_json({{"lr", -1.0}}), Error);
    EXPECT_THROW(TrainConfig::from_json({{"batch_size", 0}}), Error);
    EXPECT_THROW(TrainConfig::from_json({{"beta1", 1.5}}), Error);
    EXPECT_THROW(TrainConfig::from_json(nlohmann::json::array()), Error);
}

TEST(TrainCondgen, ZeroStepsReturnsInitialization) {
    const TrainResult r = train_condgen(fixture::tiny_train(0), small_set());
    EXPECT_TRUE(r.history.records.empty());
    EXPECT_EQ(r.checkpoint.step, 0);
    const CondGenModel fresh(fixture::tiny_train(0).condgen);
    const CondGenModel loaded = load_condgen(r.checkpoint);
    for (const auto& [name, v] : fresh.params().entries())
        EXPECT_EQ(loaded.params().get(name).value(), v.value()) << name;
}

TEST(TrainCondgen, DeterministicAndComponentsAddUp) {
    const auto data = small_set();
    const TrainConfig c = fixture::tiny_train(3);
    const TrainResult a = train_condgen(c, data);
    const TrainResult b = train_condgen(c, data);
    EXPECT_EQ(a.history, b.history);
    EXPECT_EQ(a.checkpoint.serialize(), b.checkpoint.serialize());
    EXPECT_EQ(a.checkpoint.step, 3);
    for (int step = 1; step <= 3; ++step) {
        std::map<std::string, double> comp;
        for (const LossRecord& r : a.history.records)
            if (r.step == step) comp[r.component] = r.value;
        for (const auto& [name, v] : comp) EXPECT_GE(v, 0.0) << name;
        const LossWeights& w = c.weights;
        const double total = w.ce * comp["ce"] + w.l1 * comp["l1"] + w.perceptual * comp["perceptual"] +
                             w.adversarial * comp["adversarial"];
        EXPECT_NEAR(total, comp["total"], 1e-6);
    }
    EXPECT_NE(a.history.csv().find("step,component,value\n1,"), std::string::npos);
}

TEST(TrainCondgen, NonFiniteLossAbortsWithLastCheckpoint) {
    auto data = small_set();
    for (auto& ex : data) ex.cloth[0] = std::nan("");
    try {
        train_condgen(fixture::tiny_train(2), data);
        FAIL();
    } catch (const TrainingAborted& e) {
        EXPECT_EQ(e.code(), ErrorCode::numeric_failure);
        EXPECT_EQ(e.partial().checkpoint.step, 0);
        const CondGenModel fresh(fixture::tiny_train(0).condgen);
        const CondGenModel loaded = load_condgen(e.partial().checkpoint);
        for (const auto& [name, v] : fresh.params().entries()) EXPECT_EQ(loaded.params().get(name).value(), v.value());
    }
}

TEST(TrainImggen, ZeroStepsDeterminismAndRoundTrip) {
    const auto data = small_set();
    const nn::Checkpoint cg = train_condgen(fixture::tiny_train(1), data).checkpoint;
    const TrainResult zero = train_imggen(fixture::tiny_train(0), data, cg);
    const SpadeGenModel fresh(fixture::tiny_train(0).imggen);
    const SpadeGenModel loaded = load_imggen(zero.checkpoint);
    for (const auto& [name, v] : fresh.params().entries()) EXPECT_EQ(loaded.params().get(name).value(), v.value());

    const TrainResult a = train_imggen(fixture::tiny_train(2), data, cg);
    const TrainResult b = train_imggen(fixture::tiny_train(2), data, cg);
    EXPECT_EQ(a.history, b.history);
    const auto bytes = a.checkpoint.serialize();
    EXPECT_EQ(nn::Checkpoint::deserialize(bytes).serialize(), bytes);
    EXPECT_EQ(a.history.series("l1").size(), 2u);
    EXPECT_THROW(train_imggen(fixture::tiny_train(1), data, a.checkpoint), Error);
}

TEST(Training, RejectsEmptyOrMismatchedData) {
    try {
        train_condgen(fixture::tiny_train(1), {});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::insufficient_samples);
    }
    const auto small = make_training_set(synth_dataset(1, 1, 24, 32));
    EXPECT_THROW(train_condgen(fixture::tiny_train(1), small), Error);
}

TEST(LossHistory, CsvFile) {
    LossHistory h;
    h.add(1, "ce", 0.5);
    h.add(2, "ce", 0.25);
    EXPECT_EQ(h.series("ce"), (std::vector<double>{0.5, 0.25}));
    const auto dir = fixture::temp_dir("history");
    h.write_csv(dir / "loss.csv");
    const Bytes b = read_file(dir / "loss.csv");
    EXPECT_EQ(std::string(b.begin(), b.end()), "step,component,value\n1,ce,0.5\n2,ce,0.25\n");
    EXPECT_THROW(h.write_csv(dir / "missing" / "loss.csv"), Error);
    std::filesystem::remove_all(dir);
}
