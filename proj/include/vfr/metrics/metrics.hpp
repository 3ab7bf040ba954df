#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "vfr/preprocess/types.hpp"

namespace vfr {

struct FeatureStats {
    Eigen::VectorXd mu;
    Eigen::MatrixXd sigma;
    std::size_t n = 0;
};

/// Column mean and unbiased (n - 1) covariance of an n x d feature matrix.
FeatureStats feature_stats(const Eigen::MatrixXd& features);

/// Principal square root of a symmetric PSD matrix. The input is symmetrized;
/// eigenvalues in [-1e-8, 0) clamp to 0, anything lower is invalid_input.
Eigen::MatrixXd sqrtm_psd(const Eigen::MatrixXd& a);

/// |mu_a - mu_b|^2 + Tr(S_a + S_b - 2 (S_a S_b)^(1/2)), from the eigenvalues of
/// S_a S_b. Imaginary residue above 1e-6 is a numeric_failure.
double frechet_distance(const FeatureStats& a, const FeatureStats& b);

struct IouReport {
    double mean = 0.0;
    std::map<int, double> per_class;  // only classes present in either map
};

/// Classes absent from both maps are excluded; two empty maps score 1.
IouReport mean_iou(const ParseMap& pred, const ParseMap& truth);
/// Intersections and unions summed over the whole set before the per-class
/// ratios are taken.
IouReport mean_iou(const std::vector<ParseMap>& pred, const std::vector<ParseMap>& truth);

/// Maps an image to a fixed-length feature vector.
using ImageEmbedder = std::function<Eigen::VectorXd(const RasterImage&)>;

/// Fixed-seed random three-layer conv net with global average pooling on a
/// 64x48 resize of the image; 64-d output.
ImageEmbedder random_conv_embedder(std::uint64_t seed = 1234, int dim = 64);

Eigen::MatrixXd embed_all(const std::vector<RasterImage>& images, const ImageEmbedder& embedder);
double fid(const std::vector<RasterImage>& real, const std::vector<RasterImage>& fake, const ImageEmbedder& embedder);

struct StageTiming {
    std::string stage;
    double seconds = 0.0;
    friend bool operator==(const StageTiming&, const StageTiming&) = default;
};

struct TimingReport {
    std::vector<StageTiming> stages;
    double total_seconds = 0.0;

    nlohmann::json to_json() const;
    std::string csv() const;
    std::string table() const;
};

/// Per-stage and end-to-end wall clock. Runs with several entries for one
/// stage are summed. Carries the reference response times (4 min before,
/// 78 s after) as an annotation only.
TimingReport timing_report(const std::vector<StageTiming>& durations);

}  // namespace vfr
