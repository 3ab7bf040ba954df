#pragma once

#include <string>
#include <vector>

#include "vfr/data/sample.hpp"
#include "vfr/metrics/ablation.hpp"
#include "vfr/service/pipeline.hpp"

namespace vfr {

/// Runs the ablation grid through the full pipeline. Every sample is tried on
/// with its own garment; the generated set holds the accepted results and the
/// real set holds the ground-truth composites (the person photo when absent).
/// Oracle backends read their truth from `samples`.
AblationReport pipeline_ablation(const PipelineConfig& base, const AblationBindings& bindings,
                                 const std::vector<TryOnSample>& samples, const ImageEmbedder& embedder,
                                 const BackendRegistry& registry = BackendRegistry::with_defaults());

struct BackendBenchRow {
    std::string kind;  // "segmenter" or "cloth_segmenter"
    std::string name;
    double iou = 0.0;  // set-level mean IoU for parsers, mean foreground IoU for garment masks
    double ms_per_image = 0.0;
    std::size_t images = 0;
};

struct BackendBench {
    std::vector<BackendBenchRow> rows;

    std::string csv() const;
    /// Aligned text table.
    std::string table() const;
};

/// Scores every registered segmenter and cloth segmenter against the samples'
/// annotations. Oracle backends see the samples as ground truth.
BackendBench bench_backends(const std::vector<TryOnSample>& samples, const BackendContext& context,
                            const BackendRegistry& registry = BackendRegistry::with_defaults());

}  // namespace vfr
