#include "vfr/metrics/ablation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "vfr/error.hpp"

namespace vfr {

using nlohmann::json;

const std::vector<AblationSwitches>& ablation_grid() {
    static const std::vector<AblationSwitches> grid = {
        {false, false, false}, {false, false, true}, {false, true, false},
        {false, true, true},   {true, false, false}, {true, true, true},
    };
    return grid;
}

const std::vector<double>& ablation_reference_fids() {
    static const std::vector<double> fids = {11.796, 12.243, 11.847, 11.743, 13.140, 11.753};
    return fids;
}

BackendSelection AblationBindings::select(const AblationSwitches& s) const {
    BackendSelection b;
    b.segmenter = s.new_segmentation ? segmentation_new : segmentation_original;
    b.cloth_segmenter = s.new_cloth_mask ? cloth_mask_new : cloth_mask_original;
    b.densepose_estimator = s.new_densepose ? densepose_new : densepose_original;
    b.pose_detector = pose;
    return b;
}

json AblationBindings::to_json() const {
    return {{"segmentation", {{"original", segmentation_original}, {"new", segmentation_new}}},
            {"cloth_mask", {{"original", cloth_mask_original}, {"new", cloth_mask_new}}},
            {"densepose", {{"original", densepose_original}, {"new", densepose_new}}},
            {"pose", pose}};
}

AblationBindings AblationBindings::from_json(const json& j) {
    AblationBindings b;
    require(j.is_object(), ErrorCode::configuration, "ablation bindings must be a JSON object");
    const auto pair = [&](const char* key, std::string& original, std::string& replacement) {
        if (!j.contains(key)) return;
        const json& v = j.at(key);
        require(v.is_object(), ErrorCode::configuration, std::string("ablation binding '") + key + "' must be an object");
        try {
            original = v.value("original", original);
            replacement = v.value("new", replacement);
        } catch (const json::exception& e) {
            fail(ErrorCode::configuration, std::string("ablation binding '") + key + "': " + e.what());
        }
    };
    pair("segmentation", b.segmentation_original, b.segmentation_new);
    pair("cloth_mask", b.cloth_mask_original, b.cloth_mask_new);
    pair("densepose", b.densepose_original, b.densepose_new);
    if (j.contains("pose")) {
        require(j.at("pose").is_string(), ErrorCode::configuration, "ablation binding 'pose' must be a string");
        b.pose = j.at("pose").get<std::string>();
    }
    return b;
}

namespace {

const char* setting(bool is_new) { return is_new ? "new" : "original"; }

}  // namespace

std::string AblationReport::csv() const {
    std::ostringstream os;
    os.precision(10);
    os << "experiment,segmentation,cloth_mask,densepose,segmenter,cloth_segmenter,densepose_estimator,fid,"
          "reference_fid\n";
    for (const AblationRow& r : rows)
        os << r.experiment << ',' << setting(r.switches.new_segmentation) << ','
           << setting(r.switches.new_cloth_mask) << ',' << setting(r.switches.new_densepose) << ','
           << r.backends.segmenter << ',' << r.backends.cloth_segmenter << ',' << r.backends.densepose_estimator
           << ',' << r.fid << ',' << r.reference_fid << '\n';
    return os.str();
}

json AblationReport::to_json() const {
    json out = json::array();
    for (const AblationRow& r : rows)
        out.push_back({{"experiment", r.experiment},
                       {"segmentation", setting(r.switches.new_segmentation)},
                       {"cloth_mask", setting(r.switches.new_cloth_mask)},
                       {"densepose", setting(r.switches.new_densepose)},
                       {"backends",
                        {{"segmenter", r.backends.segmenter},
                         {"pose_detector", r.backends.pose_detector},
                         {"densepose_estimator", r.backends.densepose_estimator},
                         {"cloth_segmenter", r.backends.cloth_segmenter}}},
                       {"fid", r.fid},
                       {"generated", r.generated},
                       {"reference_fid", r.reference_fid}});
    return {{"rows", out},
            {"real_count", real_count},
            {"reference_note",
             "reference_fid holds the published values, obtained with pretrained perception models on a "
             "large real corpus; they are not reproducible with the bundled toy backends"}};
}

AblationReport run_ablation(const std::vector<AblationSwitches>& grid, const AblationBindings& bindings,
                            const BackendRegistry& registry, const std::vector<RasterImage>& real,
                            const AblationPipeline& pipeline, const ImageEmbedder& embedder) {
    require(!grid.empty(), ErrorCode::configuration, "ablation grid is empty");
    require(!real.empty(), ErrorCode::insufficient_samples, "ablation evaluation set is empty");
    for (const AblationSwitches& s : grid) registry.require_registered(bindings.select(s));

    const FeatureStats real_stats = feature_stats(embed_all(real, embedder));
    const auto& standard = ablation_grid();
    AblationReport report;
    report.real_count = real.size();
    for (std::size_t i = 0; i < grid.size(); ++i) {
        AblationRow row;
        row.switches = grid[i];
        row.backends = bindings.select(grid[i]);
        const auto pos = std::find(standard.begin(), standard.end(), grid[i]);
        row.experiment = pos == standard.end() ? "X" + std::to_string(i + 1)
                                               : "E" + std::to_string(pos - standard.begin() + 1);
        row.reference_fid = pos == standard.end() ? std::nan("") : ablation_reference_fids()[pos - standard.begin()];
        const std::vector<RasterImage> generated = pipeline(row.backends);
        row.generated = generated.size();
        row.fid = frechet_distance(real_stats, feature_stats(embed_all(generated, embedder)));
        report.rows.push_back(row);
    }
    return report;
}

}  // namespace vfr
