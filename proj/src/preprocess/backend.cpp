#include "vfr/preprocess/backend.hpp"

#include <cstring>
#include <mutex>

#include "vfr/data/sample.hpp"
#include "vfr/data/synth.hpp"
#include "vfr/error.hpp"
#include "vfr/preprocess/ops.hpp"
#include "vfr/preprocess/toy_backends.hpp"
#include "vfr/preprocess/toy_segnet.hpp"

namespace vfr {

std::string_view to_string(BackendKind kind) {
    switch (kind) {
        case BackendKind::segmenter: return "segmenter";
        case BackendKind::pose_detector: return "pose-detector";
        case BackendKind::densepose_estimator: return "densepose-estimator";
        case BackendKind::cloth_segmenter: return "cloth-segmenter";
    }
    return "unknown";
}

std::uint64_t content_hash(const RasterImage& img) {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](const void* data, std::size_t n) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= p[i];
            h *= 1099511628211ULL;
        }
    };
    const int dims[3] = {img.width(), img.height(), img.channels()};
    mix(dims, sizeof dims);
    mix(img.data().data(), img.data().size_bytes());
    return h;
}

bool is_uniform(const RasterImage& img) {
    const auto d = img.data();
    const int c = img.channels();
    for (std::size_t i = static_cast<std::size_t>(c); i < d.size(); ++i) {
        if (d[i] != d[i % c]) return false;
    }
    return true;
}

void OracleStore::add(const TryOnSample& sample) {
    auto truth = std::make_shared<const PersonTruth>(PersonTruth{sample.parse, sample.pose, sample.densepose});
    people_[content_hash(sample.person)] = truth;
    people_[content_hash(remove_background(sample.person, sample.parse))] = truth;
    cloths_[content_hash(sample.cloth)] = sample.cloth_mask;
}

const ParseMap* OracleStore::parse(const RasterImage& img) const {
    const auto it = people_.find(content_hash(img));
    return it == people_.end() ? nullptr : &it->second->parse;
}

const PoseKeypoints* OracleStore::pose(const RasterImage& img) const {
    const auto it = people_.find(content_hash(img));
    return it == people_.end() ? nullptr : &it->second->pose;
}

const DenseposeMap* OracleStore::densepose(const RasterImage& img) const {
    const auto it = people_.find(content_hash(img));
    return it == people_.end() ? nullptr : &it->second->densepose;
}

const ClothMask* OracleStore::cloth_mask(const RasterImage& img) const {
    const auto it = cloths_.find(content_hash(img));
    return it == cloths_.end() ? nullptr : &it->second;
}

namespace {

[[noreturn]] void unknown_image() {
    fail(ErrorCode::backend_error, "oracle: no stored truth for this image");
}

std::shared_ptr<const OracleStore> need_oracle(const BackendContext& ctx) {
    require(ctx.oracle != nullptr, ErrorCode::configuration, "oracle backend needs an oracle store of ground truth");
    return ctx.oracle;
}

class OracleSegmenter final : public Segmenter {
  public:
    explicit OracleSegmenter(std::shared_ptr<const OracleStore> store) : store_(std::move(store)) {}
    std::string name() const override { return "oracle"; }
    ParseMap segment(const RasterImage& img) const override {
        if (const ParseMap* p = store_->parse(img)) return *p;
        if (is_uniform(img)) return ParseMap(img.width(), img.height());
        unknown_image();
    }

  private:
    std::shared_ptr<const OracleStore> store_;
};

class OraclePoseDetector final : public PoseDetector {
  public:
    explicit OraclePoseDetector(std::shared_ptr<const OracleStore> store) : store_(std::move(store)) {}
    std::string name() const override { return "oracle"; }
    PoseKeypoints detect(const RasterImage& img) const override {
        if (const PoseKeypoints* p = store_->pose(img)) return *p;
        if (is_uniform(img)) return PoseKeypoints{};
        unknown_image();
    }

  private:
    std::shared_ptr<const OracleStore> store_;
};

class OracleDenseposeEstimator final : public DenseposeEstimator {
  public:
    explicit OracleDenseposeEstimator(std::shared_ptr<const OracleStore> store) : store_(std::move(store)) {}
    std::string name() const override { return "oracle"; }
    DenseposeMap estimate(const RasterImage& img) const override {
        if (const DenseposeMap* d = store_->densepose(img)) return *d;
        if (is_uniform(img)) return DenseposeMap(img.width(), img.height());
        unknown_image();
    }

  private:
    std::shared_ptr<const OracleStore> store_;
};

class OracleClothSegmenter final : public ClothSegmenter {
  public:
    explicit OracleClothSegmenter(std::shared_ptr<const OracleStore> store) : store_(std::move(store)) {}
    std::string name() const override { return "oracle"; }
    std::vector<double> confidence(const RasterImage& img) const override {
        if (const ClothMask* m = store_->cloth_mask(img)) return {m->bits().begin(), m->bits().end()};
        if (is_uniform(img)) return std::vector<double>(img.pixel_count(), 0.0);
        unknown_image();
    }

  private:
    std::shared_ptr<const OracleStore> store_;
};

// Fitting seeds sit far from the seeds used for datasets.
std::vector<TryOnSample> fitting_samples(const BackendContext& ctx) {
    require(ctx.fit_samples > 0, ErrorCode::configuration, "toy segmenters need at least one fitting sample");
    return synth_dataset(1'000'000'000ULL + ctx.seed * 1000, ctx.fit_samples, ctx.width, ctx.height);
}

// Toy segmenters are fitted once per process and configuration.
std::shared_ptr<const NaiveBayesSegmenter> fitted_bayes_segmenter(const BackendContext& ctx) {
    static std::mutex mutex;
    static std::map<std::tuple<int, int, std::uint64_t, int>, std::shared_ptr<const NaiveBayesSegmenter>> cache;
    const auto key = std::make_tuple(ctx.width, ctx.height, ctx.seed, ctx.fit_samples);
    std::lock_guard lock(mutex);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
    auto model = std::make_shared<NaiveBayesSegmenter>(ctx.width, ctx.height);
    model->fit(fitting_samples(ctx));
    cache[key] = model;
    return model;
}

std::shared_ptr<const ConvSegmenter> fitted_conv_segmenter(const BackendContext& ctx) {
    static std::mutex mutex;
    static std::map<std::tuple<int, int, std::uint64_t, int, int, std::string>, std::shared_ptr<const ConvSegmenter>>
        cache;
    const std::string path = ctx.segnet_checkpoint.string();
    const auto key = path.empty()
                         ? std::make_tuple(ctx.width, ctx.height, ctx.seed, ctx.fit_samples, ctx.segnet_steps, path)
                         : std::make_tuple(0, 0, std::uint64_t{0}, 0, 0, path);
    std::lock_guard lock(mutex);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
    std::shared_ptr<const ConvSegmenter> model;
    if (!path.empty()) {
        model = std::make_shared<ConvSegmenter>(ConvSegmenter::from_checkpoint(nn::Checkpoint::load(path)));
    } else {
        SegNetConfig config;
        config.width = ctx.width;
        config.height = ctx.height;
        config.steps = ctx.segnet_steps;
        config.seed = ctx.seed;
        auto fresh = std::make_shared<ConvSegmenter>(config);
        fresh->fit(fitting_samples(ctx));
        model = fresh;
    }
    cache[key] = model;
    return model;
}

}  // namespace

BackendRegistry BackendRegistry::with_defaults() {
    BackendRegistry r;
    r.add(BackendKind::segmenter, "oracle",
          [](const BackendContext& c) { return std::make_shared<OracleSegmenter>(need_oracle(c)); });
    r.add(BackendKind::pose_detector, "oracle",
          [](const BackendContext& c) { return std::make_shared<OraclePoseDetector>(need_oracle(c)); });
    r.add(BackendKind::densepose_estimator, "oracle",
          [](const BackendContext& c) { return std::make_shared<OracleDenseposeEstimator>(need_oracle(c)); });
    r.add(BackendKind::cloth_segmenter, "oracle",
          [](const BackendContext& c) { return std::make_shared<OracleClothSegmenter>(need_oracle(c)); });

    r.add(BackendKind::segmenter, "toy", [](const BackendContext& c) {
        return std::const_pointer_cast<ConvSegmenter>(fitted_conv_segmenter(c));
    });
    r.add(BackendKind::pose_detector, "toy",
          [](const BackendContext& c) { return std::make_shared<ParsePoseDetector>(fitted_conv_segmenter(c)); });
    r.add(BackendKind::densepose_estimator, "toy",
          [](const BackendContext& c) { return std::make_shared<ParseDenseposeEstimator>(fitted_conv_segmenter(c)); });
    r.add(BackendKind::segmenter, "toy-bayes", [](const BackendContext& c) {
        return std::const_pointer_cast<NaiveBayesSegmenter>(fitted_bayes_segmenter(c));
    });
    r.add(BackendKind::pose_detector, "toy-bayes",
          [](const BackendContext& c) { return std::make_shared<ParsePoseDetector>(fitted_bayes_segmenter(c)); });
    r.add(BackendKind::densepose_estimator, "toy-bayes",
          [](const BackendContext& c) { return std::make_shared<ParseDenseposeEstimator>(fitted_bayes_segmenter(c)); });
    r.add(BackendKind::cloth_segmenter, "toy-threshold",
          [](const BackendContext&) { return std::make_shared<ThresholdClothSegmenter>(); });
    r.add(BackendKind::cloth_segmenter, "toy-floodfill",
          [](const BackendContext&) { return std::make_shared<FloodFillClothSegmenter>(); });
    return r;
}

void BackendRegistry::require_registered(const BackendSelection& sel) const {
    const std::pair<BackendKind, const std::string*> wanted[] = {{BackendKind::segmenter, &sel.segmenter},
                                                                 {BackendKind::pose_detector, &sel.pose_detector},
                                                                 {BackendKind::densepose_estimator, &sel.densepose_estimator},
                                                                 {BackendKind::cloth_segmenter, &sel.cloth_segmenter}};
    for (const auto& [kind, name] : wanted)
        require(contains(kind, *name), ErrorCode::configuration,
                "no " + std::string(to_string(kind)) + " backend named '" + *name + "'");
}

void BackendRegistry::add(BackendKind kind, const std::string& name, Factory factory) {
    require(!name.empty(), ErrorCode::configuration, "backend name must not be empty");
    factories_[{kind, name}] = std::move(factory);
}

bool BackendRegistry::contains(BackendKind kind, const std::string& name) const {
    return factories_.contains({kind, name});
}

std::vector<std::string> BackendRegistry::names(BackendKind kind) const {
    std::vector<std::string> out;
    for (const auto& [key, f] : factories_) {
        if (key.first == kind) out.push_back(key.second);
    }
    return out;
}

std::shared_ptr<PerceptionBackend> BackendRegistry::make(BackendKind kind, const std::string& name,
                                                         const BackendContext& ctx) const {
    const auto it = factories_.find({kind, name});
    if (it == factories_.end()) {
        fail(ErrorCode::configuration,
             "no " + std::string(to_string(kind)) + " backend named '" + name + "' is registered");
    }
    auto backend = it->second(ctx);
    require(backend && backend->kind() == kind, ErrorCode::configuration,
            "factory for '" + name + "' produced a backend of the wrong kind");
    return backend;
}

std::shared_ptr<const Segmenter> BackendRegistry::segmenter(const std::string& name, const BackendContext& ctx) const {
    return std::static_pointer_cast<const Segmenter>(make(BackendKind::segmenter, name, ctx));
}

std::shared_ptr<const PoseDetector> BackendRegistry::pose_detector(const std::string& name,
                                                                   const BackendContext& ctx) const {
    return std::static_pointer_cast<const PoseDetector>(make(BackendKind::pose_detector, name, ctx));
}

std::shared_ptr<const DenseposeEstimator> BackendRegistry::densepose_estimator(const std::string& name,
                                                                               const BackendContext& ctx) const {
    return std::static_pointer_cast<const DenseposeEstimator>(make(BackendKind::densepose_estimator, name, ctx));
}

std::shared_ptr<const ClothSegmenter> BackendRegistry::cloth_segmenter(const std::string& name,
                                                                       const BackendContext& ctx) const {
    return std::static_pointer_cast<const ClothSegmenter>(make(BackendKind::cloth_segmenter, name, ctx));
}

}  // namespace vfr
