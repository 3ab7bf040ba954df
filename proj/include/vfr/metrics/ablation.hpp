#pragma once

#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "vfr/metrics/metrics.hpp"
#include "vfr/preprocess/backend.hpp"

namespace vfr {

/// One experiment of the grid: which of the three preprocessing stages use
/// the replacement ("new") backend instead of the baseline ("original").
struct AblationSwitches {
    bool new_segmentation = false;
    bool new_cloth_mask = false;
    bool new_densepose = false;
    friend bool operator==(const AblationSwitches&, const AblationSwitches&) = default;
};

/// The six experiments E1..E6: ooo, oon, ono, onn, noo, nnn.
const std::vector<AblationSwitches>& ablation_grid();
/// Published FID of each experiment, carried as a reference annotation.
const std::vector<double>& ablation_reference_fids();

/// Registered backend names bound to the two settings of each switch.
struct AblationBindings {
    std::string segmentation_original = "toy-bayes";
    std::string segmentation_new = "toy";
    std::string cloth_mask_original = "toy-threshold";
    std::string cloth_mask_new = "toy-floodfill";
    std::string densepose_original = "toy-bayes";
    std::string densepose_new = "toy";
    std::string pose = "toy";

    BackendSelection select(const AblationSwitches& s) const;
    nlohmann::json to_json() const;
    static AblationBindings from_json(const nlohmann::json& j);
};

struct AblationRow {
    std::string experiment;
    AblationSwitches switches;
    BackendSelection backends;
    double fid = 0.0;
    double reference_fid = 0.0;
    std::size_t generated = 0;
};

struct AblationReport {
    std::vector<AblationRow> rows;
    std::size_t real_count = 0;

    std::string csv() const;
    nlohmann::json to_json() const;
};

/// Produces the generated image set for one backend selection.
using AblationPipeline = std::function<std::vector<RasterImage>(const BackendSelection&)>;

/// Runs every experiment of `grid` and scores it against `real` by FID.
/// All bound backends must be registered (configuration error otherwise).
AblationReport run_ablation(const std::vector<AblationSwitches>& grid, const AblationBindings& bindings,
                            const BackendRegistry& registry, const std::vector<RasterImage>& real,
                            const AblationPipeline& pipeline, const ImageEmbedder& embedder);

}  // namespace vfr
