#pragma once

// Small models and datasets shared by the pipeline, service and CLI tests.

#include <filesystem>
#include <random>
#include <string>

#include "vfr/data/synth.hpp"
#include "vfr/service/pipeline.hpp"
#include "vfr/train/training.hpp"

namespace fixture {

namespace fs = std::filesystem;

inline fs::path temp_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("vfr_" + name + "_" + std::to_string(std::random_device{}()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

inline vfr::TrainConfig tiny_train(int steps) {
    vfr::TrainConfig c = vfr::TrainConfig::toy();
    c.steps = steps;
    c.condgen.widths = {4, 4, 6, 6, 8};
    c.imggen.channels = {8, 8, 6, 4};
    c.imggen.hidden = 4;
    c.disc_widths = {4, 6};
    c.checkpoint_every = 1;
    return c.synced();
}

/// First seed of the synthetic people registered with the oracle store.
inline constexpr std::uint64_t kOracleSeed = 500;
inline constexpr int kOracleCount = 4;

struct Models {
    fs::path dir;
    vfr::nn::Checkpoint condgen, imggen;
    vfr::PipelineConfig config;
};

/// Tiny checkpoints written under a fresh directory, plus a 64x48 pipeline
/// config on oracle backends over synthetic seeds 500..503.
inline Models tiny_models(int steps = 1) {
    Models m;
    m.dir = temp_dir("models");
    const auto data = vfr::make_training_set(vfr::synth_dataset(1, 2, 48, 64));
    const vfr::TrainConfig c = tiny_train(steps);
    m.condgen = vfr::train_condgen(c, data).checkpoint;
    m.imggen = vfr::train_imggen(c, data, m.condgen).checkpoint;
    m.condgen.save(m.dir / "condgen.ckpt");
    m.imggen.save(m.dir / "imggen.ckpt");
    m.config.condgen_checkpoint = m.dir / "condgen.ckpt";
    m.config.imggen_checkpoint = m.dir / "imggen.ckpt";
    m.config.width = 48;
    m.config.height = 64;
    m.config.tau = 0.0;
    m.config.oracle.synth_first_seed = kOracleSeed;
    m.config.oracle.synth_count = kOracleCount;
    return m;
}

}  // namespace fixture
