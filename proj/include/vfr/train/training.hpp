#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "vfr/condgen/condgen.hpp"
#include "vfr/data/sample.hpp"
#include "vfr/error.hpp"
#include "vfr/imggen/spade.hpp"
#include "vfr/nn/checkpoint.hpp"
#include "vfr/preprocess/ops.hpp"

namespace vfr {

struct TrainConfig {
    std::uint64_t seed = 7;
    int width = 192;
    int height = 256;
    int batch_size = 8;
    int steps = 1000;
    double lr = 2e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    LossWeights weights;
    int disc_scales = 2;
    std::array<int, 2> disc_widths{64, 128};
    int checkpoint_every = 100;  // 0 keeps only the initial snapshot
    CondGenConfig condgen;
    SpadeGenConfig imggen;

    /// 64x48, batch 2, 300 steps, narrow networks.
    static TrainConfig toy();

    /// Copies seed and working resolution into the model configs.
    TrainConfig synced() const;
    void validate() const;
    nlohmann::json to_json() const;
    static TrainConfig from_json(const nlohmann::json& j);
    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Network-ready tensors for one annotated, dressed sample.
struct TrainingExample {
    std::string id;
    nn::Tensor cloth;            // (1,3,H,W)
    nn::Tensor cloth_mask;       // (1,1,H,W)
    nn::Tensor seg;              // (1,47,H,W) one-hot agnostic parse + IUV
    nn::Tensor agnostic;         // (1,1 or 3,H,W)
    nn::Tensor densepose;        // (1,27,H,W)
    nn::Tensor dressed;          // (1,3,H,W) target image
    nn::Tensor cloth_on_person;  // (1,3,H,W) dressed image inside the garment region
    nn::Tensor garment_mask;     // (1,1,H,W) upper-clothes region of the dressed parse
    std::vector<std::uint8_t> dressed_labels;
};

/// Builds the example from the sample's own annotations. The agnostic is made
/// after background removal, as in the serving pipeline.
TrainingExample make_training_example(const TryOnSample& sample, const AgnosticOptions& options = {});
std::vector<TrainingExample> make_training_set(const std::vector<TryOnSample>& samples,
                                               const AgnosticOptions& options = {});

struct LossRecord {
    std::int64_t step = 0;
    std::string component;
    double value = 0.0;
    friend bool operator==(const LossRecord&, const LossRecord&) = default;
};

/// Append-only per-step loss components.
struct LossHistory {
    std::vector<LossRecord> records;

    void add(std::int64_t step, const std::string& component, double value);
    /// Values of one component in step order.
    std::vector<double> series(const std::string& component) const;
    std::string csv() const;
    void write_csv(const std::filesystem::path& path) const;
    friend bool operator==(const LossHistory&, const LossHistory&) = default;
};

struct TrainResult {
    nn::Checkpoint checkpoint;
    LossHistory history;
};

/// Thrown when a loss turns non-finite; carries the last snapshot taken.
class TrainingAborted : public Error {
  public:
    TrainingAborted(const std::string& message, TrainResult partial)
        : Error(ErrorCode::numeric_failure, message), partial_(std::move(partial)) {}
    const TrainResult& partial() const noexcept { return partial_; }

  private:
    TrainResult partial_;
};

/// Called after every step with the step number and that step's components.
using StepCallback = std::function<void(std::int64_t, const std::map<std::string, double>&)>;

/// Alternating discriminator / generator updates of the condition generator.
TrainResult train_condgen(const TrainConfig& config, const std::vector<TrainingExample>& data,
                          const StepCallback& on_step = {});

/// Trains the image generator against a frozen condition generator.
TrainResult train_imggen(const TrainConfig& config, const std::vector<TrainingExample>& data,
                         const nn::Checkpoint& condgen, const StepCallback& on_step = {});

CondGenModel load_condgen(const nn::Checkpoint& ckpt);
SpadeGenModel load_imggen(const nn::Checkpoint& ckpt);
/// The discriminator trained alongside the checkpoint's generator.
MultiScaleDiscriminator load_discriminator(const nn::Checkpoint& ckpt);

/// Frozen condition-generator products used to condition the image generator.
struct StageOneProducts {
    ParseMap parse;            // argmax of the predicted segmentation
    RasterImage warped_cloth;  // after conditional alignment
};
StageOneProducts stage_one(const CondGenModel& model, const TrainingExample& example);

}  // namespace vfr
