#include "vfr/service/pipeline.hpp"

#include <chrono>

#include "vfr/data/dataset.hpp"
#include "vfr/data/synth.hpp"
#include "vfr/error.hpp"
#include "vfr/preprocess/ops.hpp"
#include "vfr/train/training.hpp"

namespace vfr {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
    if (p.empty()) return {};
    const fs::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace

PipelineConfig PipelineConfig::from_json(const json& j, const fs::path& base) {
    require(j.is_object(), ErrorCode::configuration, "pipeline config must be a JSON object");
    PipelineConfig c;
    try {
        if (j.contains("backends")) {
            const json& b = j.at("backends");
            c.backends.segmenter = b.value("segmenter", c.backends.segmenter);
            c.backends.pose_detector = b.value("pose_detector", c.backends.pose_detector);
            c.backends.densepose_estimator = b.value("densepose_estimator", c.backends.densepose_estimator);
            c.backends.cloth_segmenter = b.value("cloth_segmenter", c.backends.cloth_segmenter);
        }
        c.condgen_checkpoint = resolve(base, j.value("condgen_checkpoint", std::string{}));
        c.imggen_checkpoint = resolve(base, j.value("imggen_checkpoint", std::string{}));
        c.width = j.value("width", c.width);
        c.height = j.value("height", c.height);
        c.tau = j.value("tau", c.tau);
        c.timing = j.value("timing", c.timing);
        c.catalog_dir = resolve(base, j.value("catalog_dir", std::string{}));
        c.seed = j.value("seed", c.seed);
        c.toy_fit_samples = j.value("toy_fit_samples", c.toy_fit_samples);
        c.toy_segnet_steps = j.value("toy_segnet_steps", c.toy_segnet_steps);
        c.toy_segnet_checkpoint = resolve(base, j.value("toy_segnet_checkpoint", std::string{}));
        if (j.contains("oracle")) {
            const json& o = j.at("oracle");
            c.oracle.dataset = resolve(base, o.value("dataset", std::string{}));
            c.oracle.split = o.value("split", c.oracle.split);
            c.oracle.synth_first_seed = o.value("synth_first_seed", c.oracle.synth_first_seed);
            c.oracle.synth_count = o.value("synth_count", c.oracle.synth_count);
        }
    } catch (const json::exception& e) {
        fail(ErrorCode::configuration, std::string("pipeline config: ") + e.what());
    }
    c.validate();
    return c;
}

PipelineConfig PipelineConfig::load(const fs::path& path) {
    const Bytes bytes = read_file(path);
    json j;
    try {
        j = json::parse(bytes.begin(), bytes.end());
    } catch (const json::exception& e) {
        fail(ErrorCode::configuration, path.string() + ": " + e.what());
    }
    return from_json(j, path.parent_path());
}

json PipelineConfig::to_json() const {
    return {{"backends",
             {{"segmenter", backends.segmenter},
              {"pose_detector", backends.pose_detector},
              {"densepose_estimator", backends.densepose_estimator},
              {"cloth_segmenter", backends.cloth_segmenter}}},
            {"condgen_checkpoint", condgen_checkpoint.string()},
            {"imggen_checkpoint", imggen_checkpoint.string()},
            {"width", width},
            {"height", height},
            {"tau", tau},
            {"timing", timing},
            {"catalog_dir", catalog_dir.string()},
            {"seed", seed},
            {"toy_fit_samples", toy_fit_samples},
            {"toy_segnet_steps", toy_segnet_steps},
            {"toy_segnet_checkpoint", toy_segnet_checkpoint.string()},
            {"oracle",
             {{"dataset", oracle.dataset.string()},
              {"split", oracle.split},
              {"synth_first_seed", oracle.synth_first_seed},
              {"synth_count", oracle.synth_count}}}};
}

void PipelineConfig::validate() const {
    require(tau >= 0.0 && tau <= 1.0, ErrorCode::configuration, "rejection threshold tau must lie in [0, 1]");
    require(width >= 8 && height >= 8, ErrorCode::configuration, "working resolution must be at least 8x8");
    require(toy_fit_samples > 0, ErrorCode::configuration, "toy_fit_samples must be positive");
    require(toy_segnet_steps >= 0, ErrorCode::configuration, "toy_segnet_steps must be non-negative");
    require(oracle.synth_count >= 0, ErrorCode::configuration, "oracle synth_count must be non-negative");
}

const std::vector<std::string>& pipeline_stages() {
    static const std::vector<std::string> stages = {
        "resize_input",    "segment_human",     "remove_background", "detect_pose",
        "compute_densepose", "generate_agnostic", "make_cloth_mask",  "condgen_forward",
        "conditional_align", "imggen_forward",    "rejection_filter",  "resize_output"};
    return stages;
}

std::vector<TryOnSample> source_samples(const OracleSource& source, int width, int height) {
    std::vector<TryOnSample> out;
    if (!source.dataset.empty()) {
        const DatasetManifest m = load_manifest(source.dataset, source.split);
        for (std::size_t i = 0; i < m.pairs.size(); ++i) out.push_back(load_sample(m, i));
    }
    for (int i = 0; i < source.synth_count; ++i) out.push_back(synth_sample(source.synth_first_seed + i, width, height));
    return out;
}

std::shared_ptr<const OracleStore> load_oracle(const OracleSource& source, int width, int height) {
    if (source.dataset.empty() && source.synth_count == 0) return nullptr;
    auto store = std::make_shared<OracleStore>();
    for (const TryOnSample& s : source_samples(source, width, height)) store->add(s);
    return store;
}

Pipeline::Pipeline(PipelineConfig config, const nn::Checkpoint& condgen, const nn::Checkpoint& imggen,
                   const BackendRegistry& registry, std::shared_ptr<const OracleStore> oracle)
    : config_(std::move(config)) {
    config_.validate();
    registry.require_registered(config_.backends);
    condgen_ = std::make_shared<const CondGenModel>(load_condgen(condgen));
    imggen_ = std::make_shared<const SpadeGenModel>(load_imggen(imggen));
    discriminator_ = std::make_shared<const MultiScaleDiscriminator>(load_discriminator(imggen));
    const auto check_res = [&](int w, int h, const std::string& what) {
        require(w == config_.width && h == config_.height, ErrorCode::configuration,
                what + " checkpoint is " + std::to_string(h) + "x" + std::to_string(w) + " but the pipeline runs at " +
                    std::to_string(config_.height) + "x" + std::to_string(config_.width));
    };
    check_res(condgen_->config().width, condgen_->config().height, "condition generator");
    check_res(imggen_->config().width, imggen_->config().height, "image generator");
    require(discriminator_->config().cond_channels == imggen_->config().cond_channels(), ErrorCode::configuration,
            "image generator checkpoint holds a mismatched discriminator");

    BackendContext ctx;
    ctx.width = config_.width;
    ctx.height = config_.height;
    ctx.seed = config_.seed;
    ctx.fit_samples = config_.toy_fit_samples;
    ctx.segnet_steps = config_.toy_segnet_steps;
    ctx.segnet_checkpoint = config_.toy_segnet_checkpoint;
    ctx.oracle = std::move(oracle);
    segmenter_ = registry.segmenter(config_.backends.segmenter, ctx);
    pose_ = registry.pose_detector(config_.backends.pose_detector, ctx);
    densepose_ = registry.densepose_estimator(config_.backends.densepose_estimator, ctx);
    cloth_segmenter_ = registry.cloth_segmenter(config_.backends.cloth_segmenter, ctx);
    versions_["condgen"] = nn::fingerprint(condgen.serialize());
    versions_["imggen"] = nn::fingerprint(imggen.serialize());
}

std::shared_ptr<const Pipeline> Pipeline::load(const PipelineConfig& config, const BackendRegistry& registry) {
    require(!config.condgen_checkpoint.empty() && !config.imggen_checkpoint.empty(), ErrorCode::configuration,
            "pipeline config names no checkpoints");
    const auto read = [](const fs::path& p) {
        try {
            return nn::Checkpoint::load(p);
        } catch (const Error& e) {
            throw Error(e.code() == ErrorCode::not_found ? ErrorCode::configuration : e.code(),
                        "checkpoint " + p.string() + ": " + e.what());
        }
    };
    return std::make_shared<const Pipeline>(config, read(config.condgen_checkpoint), read(config.imggen_checkpoint),
                                            registry, load_oracle(config.oracle, config.width, config.height));
}

namespace {

using Clock = std::chrono::steady_clock;

class StageRunner {
  public:
    explicit StageRunner(bool timing) : timing_(timing) {}

    template <typename F>
    auto operator()(const std::string& name, F&& fn) {
        const auto start = Clock::now();
        try {
            if constexpr (std::is_void_v<decltype(fn())>) {
                fn();
                record(name, start);
            } else {
                auto result = fn();
                record(name, start);
                return result;
            }
        } catch (const Error& e) {
            throw e.with_stage(name);
        } catch (const std::exception& e) {
            throw Error(ErrorCode::backend_error, e.what(), name);
        }
    }

    std::vector<StageTiming> timings;

  private:
    void record(const std::string& name, Clock::time_point start) {
        if (timing_) timings.push_back({name, std::chrono::duration<double>(Clock::now() - start).count()});
    }
    bool timing_;
};

}  // namespace

TryOnResult Pipeline::run(const RasterImage& person_in, const RasterImage& cloth_in) const {
    require(!person_in.empty() && !cloth_in.empty(), ErrorCode::invalid_input, "person and cloth images are required");
    const auto start = Clock::now();
    const int w = config_.width, h = config_.height;
    StageRunner stage(config_.timing);

    const auto to_working = [&](const RasterImage& img) {
        const RasterImage rgb = img.channels() == 1 ? gray_to_rgb(img) : img;
        return resize_bilinear(rgb.converted(PixelRange::byte), w, h);
    };
    const auto [person, cloth] = stage("resize_input", [&] { return std::pair(to_working(person_in), to_working(cloth_in)); });
    const ParseMap parse = stage("segment_human", [&] { return segment_human(person, *segmenter_).value; });
    const RasterImage clean = stage("remove_background", [&] { return remove_background(person, parse); });
    // Pose and surface estimators see the photo itself, so swapping the
    // segmenter leaves their inputs unchanged.
    const PoseKeypoints pose = stage("detect_pose", [&] { return detect_pose(person, *pose_); });
    const DenseposeMap dense = stage("compute_densepose", [&] { return compute_densepose(person, *densepose_); });
    AgnosticOptions agnostic_options;
    agnostic_options.keep_color = imggen_->config().agnostic_channels == 3;
    const Agnostic agnostic =
        stage("generate_agnostic", [&] { return generate_agnostic(clean, parse, pose, agnostic_options); });
    const ClothMask mask = stage("make_cloth_mask", [&] { return make_cloth_mask(cloth, *cloth_segmenter_); });
    const CondGenOutput warped =
        stage("condgen_forward", [&] { return condgen_forward(*condgen_, cloth, mask, agnostic.parse, dense); });
    const auto [aligned, new_parse] = stage("conditional_align", [&] {
        CondGenOutput a = conditional_align(warped);
        ParseMap p = argmax_parse(a.seg_logits);
        return std::pair(std::move(a), std::move(p));
    });
    const RasterImage generated = stage("imggen_forward", [&] {
        return imggen_forward(*imggen_, agnostic.image, new_parse, dense, aligned.warped_cloth);
    });
    const RejectionResult verdict = stage("rejection_filter", [&] {
        return rejection_filter(*discriminator_, generated,
                                imggen_condition(agnostic.image, new_parse, dense, aligned.warped_cloth), config_.tau);
    });

    TryOnResult result;
    result.accepted = verdict.accepted;
    result.score = verdict.score;
    if (verdict.accepted)
        result.image = stage("resize_output", [&] {
            return resize_bilinear(generated.converted(PixelRange::byte), person_in.width(), person_in.height());
        });
    result.timings = std::move(stage.timings);
    if (config_.timing) result.total_seconds = std::chrono::duration<double>(Clock::now() - start).count();
    return result;
}

TryOnResult tryon_pipeline(const Pipeline& pipeline, const RasterImage& person, const RasterImage& cloth) {
    return pipeline.run(person, cloth);
}

}  // namespace vfr
