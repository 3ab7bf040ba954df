#include "vfr/service/evaluation.hpp"

#include <chrono>
#include <cstdio>
#include <sstream>

#include "vfr/error.hpp"
#include "vfr/preprocess/ops.hpp"

namespace vfr {

namespace {

std::shared_ptr<const OracleStore> store_of(const std::vector<TryOnSample>& samples) {
    auto store = std::make_shared<OracleStore>();
    for (const TryOnSample& s : samples) store->add(s);
    return store;
}

double foreground_iou(const ClothMask& pred, const ClothMask& truth) {
    std::size_t inter = 0;
    std::size_t uni = 0;
    for (std::size_t i = 0; i < pred.bits().size(); ++i) {
        const bool p = pred.bits()[i] != 0;
        const bool t = truth.bits()[i] != 0;
        inter += p && t;
        uni += p || t;
    }
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace

AblationReport pipeline_ablation(const PipelineConfig& base, const AblationBindings& bindings,
                                 const std::vector<TryOnSample>& samples, const ImageEmbedder& embedder,
                                 const BackendRegistry& registry) {
    require(!samples.empty(), ErrorCode::insufficient_samples, "ablation needs evaluation samples");
    const nn::Checkpoint condgen = nn::Checkpoint::load(base.condgen_checkpoint);
    const nn::Checkpoint imggen = nn::Checkpoint::load(base.imggen_checkpoint);
    const auto oracle = store_of(samples);

    std::vector<RasterImage> real;
    for (const TryOnSample& s : samples) real.push_back(s.dressed ? *s.dressed : s.person);

    const AblationPipeline run = [&](const BackendSelection& selection) {
        PipelineConfig cfg = base;
        cfg.backends = selection;
        const Pipeline pipeline(cfg, condgen, imggen, registry, oracle);
        std::vector<RasterImage> out;
        // A stage failure on one photo drops that photo, as a rejection would;
        // the row's generated count shows how many survived.
        for (const TryOnSample& s : samples) {
            try {
                TryOnResult r = pipeline.run(s.person, s.cloth);
                if (r.accepted) out.push_back(std::move(r.image));
            } catch (const Error&) {
            }
        }
        return out;
    };
    return run_ablation(ablation_grid(), bindings, registry, real, run, embedder);
}

BackendBench bench_backends(const std::vector<TryOnSample>& samples, const BackendContext& context,
                            const BackendRegistry& registry) {
    require(!samples.empty(), ErrorCode::insufficient_samples, "benchmark needs samples");
    BackendContext ctx = context;
    ctx.oracle = store_of(samples);
    using Clock = std::chrono::steady_clock;
    const auto ms_since = [](Clock::time_point t0) {
        return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
    };

    BackendBench bench;
    for (const std::string& name : registry.names(BackendKind::segmenter)) {
        const auto seg = registry.segmenter(name, ctx);
        BackendBenchRow row{"segmenter", name, 0.0, 0.0, samples.size()};
        std::vector<ParseMap> pred, truth;
        for (const TryOnSample& s : samples) {
            const auto t0 = Clock::now();
            pred.push_back(segment_human(s.person, *seg).value);
            row.ms_per_image += ms_since(t0);
            truth.push_back(s.parse);
        }
        row.iou = mean_iou(pred, truth).mean;
        row.ms_per_image /= static_cast<double>(samples.size());
        bench.rows.push_back(row);
    }
    for (const std::string& name : registry.names(BackendKind::cloth_segmenter)) {
        const auto seg = registry.cloth_segmenter(name, ctx);
        BackendBenchRow row{"cloth_segmenter", name, 0.0, 0.0, samples.size()};
        for (const TryOnSample& s : samples) {
            const auto t0 = Clock::now();
            const ClothMask mask = make_cloth_mask(s.cloth, *seg);
            row.ms_per_image += ms_since(t0);
            row.iou += foreground_iou(mask, s.cloth_mask);
        }
        row.iou /= static_cast<double>(samples.size());
        row.ms_per_image /= static_cast<double>(samples.size());
        bench.rows.push_back(row);
    }
    return bench;
}

std::string BackendBench::csv() const {
    std::ostringstream out;
    out << "kind,backend,iou,ms_per_image,images\n";
    char buf[64];
    for (const BackendBenchRow& r : rows) {
        std::snprintf(buf, sizeof buf, "%.6f,%.3f", r.iou, r.ms_per_image);
        out << r.kind << ',' << r.name << ',' << buf << ',' << r.images << '\n';
    }
    return out.str();
}

std::string BackendBench::table() const {
    std::ostringstream out;
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-16s %-14s %8s %12s %7s\n", "kind", "backend", "IoU", "ms/image", "images");
    out << buf;
    for (const BackendBenchRow& r : rows) {
        std::snprintf(buf, sizeof buf, "%-16s %-14s %8.4f %12.3f %7zu\n", r.kind.c_str(), r.name.c_str(), r.iou,
                      r.ms_per_image, r.images);
        out << buf;
    }
    return out.str();
}

}  // namespace vfr
