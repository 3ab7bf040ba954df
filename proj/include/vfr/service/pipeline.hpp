#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "vfr/condgen/condgen.hpp"
#include "vfr/data/sample.hpp"
#include "vfr/imggen/spade.hpp"
#include "vfr/metrics/metrics.hpp"
#include "vfr/nn/checkpoint.hpp"
#include "vfr/preprocess/backend.hpp"

namespace vfr {

/// Where the oracle backends get their ground truth from.
struct OracleSource {
    std::filesystem::path dataset;  // dataset root (load_manifest layout); empty = none
    std::string split = "test";
    std::uint64_t synth_first_seed = 0;  // synthetic samples registered when synth_count > 0
    int synth_count = 0;
};

struct PipelineConfig {
    BackendSelection backends;
    std::filesystem::path condgen_checkpoint;
    std::filesystem::path imggen_checkpoint;
    int width = 192;
    int height = 256;
    double tau = 0.3;
    bool timing = true;
    std::filesystem::path catalog_dir;
    OracleSource oracle;
    std::uint64_t seed = 7;       // toy backend fitting
    int toy_fit_samples = 512;
    int toy_segnet_steps = 1600;
    std::filesystem::path toy_segnet_checkpoint;  // pretrained toy segmenter; skips fitting when set

    /// Relative paths resolve against `base`.
    static PipelineConfig from_json(const nlohmann::json& j, const std::filesystem::path& base = {});
    static PipelineConfig load(const std::filesystem::path& path);
    nlohmann::json to_json() const;
    void validate() const;
};

struct TryOnResult {
    bool accepted = false;
    double score = 0.0;
    RasterImage image;  // byte range at the person photo's resolution; empty when rejected
    std::vector<StageTiming> timings;
    double total_seconds = 0.0;
};

/// Stage names in execution order.
const std::vector<std::string>& pipeline_stages();

/// Loaded models and backends; read-only after construction, so one instance
/// serves concurrent requests.
class Pipeline {
  public:
    Pipeline(PipelineConfig config, const nn::Checkpoint& condgen, const nn::Checkpoint& imggen,
             const BackendRegistry& registry, std::shared_ptr<const OracleStore> oracle);

    /// Loads both checkpoints and the oracle source named by the config.
    static std::shared_ptr<const Pipeline> load(const PipelineConfig& config,
                                                const BackendRegistry& registry = BackendRegistry::with_defaults());

    TryOnResult run(const RasterImage& person, const RasterImage& cloth) const;

    const PipelineConfig& config() const noexcept { return config_; }
    /// Checkpoint fingerprints keyed by model name.
    const std::map<std::string, std::string>& model_versions() const noexcept { return versions_; }

  private:
    PipelineConfig config_;
    std::shared_ptr<const CondGenModel> condgen_;
    std::shared_ptr<const SpadeGenModel> imggen_;
    std::shared_ptr<const MultiScaleDiscriminator> discriminator_;
    std::shared_ptr<const Segmenter> segmenter_;
    std::shared_ptr<const PoseDetector> pose_;
    std::shared_ptr<const DenseposeEstimator> densepose_;
    std::shared_ptr<const ClothSegmenter> cloth_segmenter_;
    std::map<std::string, std::string> versions_;
};

/// Runs segment_human -> remove_background -> detect_pose -> compute_densepose
/// -> generate_agnostic -> make_cloth_mask -> condgen_forward ->
/// conditional_align -> imggen_forward -> rejection_filter, with resizing to
/// the working resolution and back. Errors carry the failing stage.
TryOnResult tryon_pipeline(const Pipeline& pipeline, const RasterImage& person, const RasterImage& cloth);

/// Samples named by the source: the dataset split first, then the synthetic
/// ones drawn at width x height.
std::vector<TryOnSample> source_samples(const OracleSource& source, int width, int height);

/// Fills an oracle store from the configured source (null when none).
/// Synthetic samples are drawn at width x height.
std::shared_ptr<const OracleStore> load_oracle(const OracleSource& source, int width, int height);

}  // namespace vfr
