#include "vfr/metrics/metrics.hpp"

#include <cmath>
#include <algorithm>
#include <complex>
#include <sstream>

#include "vfr/error.hpp"
#include "vfr/nn/encode.hpp"
#include "vfr/nn/module.hpp"

namespace vfr {

using nlohmann::json;

FeatureStats feature_stats(const Eigen::MatrixXd& features) {
    const auto n = features.rows();
    require(n >= 2, ErrorCode::insufficient_samples,
            "feature statistics need at least 2 samples, got " + std::to_string(n));
    require(features.allFinite(), ErrorCode::numeric_failure, "non-finite features");
    FeatureStats s;
    s.n = static_cast<std::size_t>(n);
    s.mu = features.colwise().mean().transpose();
    const Eigen::MatrixXd centered = features.rowwise() - s.mu.transpose();
    s.sigma = (centered.transpose() * centered) / static_cast<double>(n - 1);
    s.sigma = 0.5 * (s.sigma + s.sigma.transpose());
    return s;
}

Eigen::MatrixXd sqrtm_psd(const Eigen::MatrixXd& a) {
    require(a.rows() == a.cols(), ErrorCode::invalid_input, "square root needs a square matrix");
    require(a.allFinite(), ErrorCode::invalid_input, "square root of a non-finite matrix");
    const Eigen::MatrixXd sym = 0.5 * (a + a.transpose());
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
    require(eig.info() == Eigen::Success, ErrorCode::numeric_failure, "eigendecomposition failed");
    Eigen::VectorXd roots = eig.eigenvalues();
    for (Eigen::Index i = 0; i < roots.size(); ++i) {
        require(roots[i] >= -1e-8, ErrorCode::invalid_input,
                "matrix is not positive semidefinite (eigenvalue " + std::to_string(roots[i]) + ")");
        roots[i] = std::sqrt(std::max(0.0, roots[i]));
    }
    const Eigen::MatrixXd& v = eig.eigenvectors();
    return v * roots.asDiagonal() * v.transpose();
}

double frechet_distance(const FeatureStats& a, const FeatureStats& b) {
    require(a.mu.size() == b.mu.size() && a.sigma.rows() == b.sigma.rows() && a.sigma.rows() == a.mu.size(),
            ErrorCode::invalid_input, "feature statistics differ in dimension");
    const double mean_term = (a.mu - b.mu).squaredNorm();
    const Eigen::MatrixXd product = a.sigma * b.sigma;
    const Eigen::EigenSolver<Eigen::MatrixXd> eig(product, false);
    require(eig.info() == Eigen::Success, ErrorCode::numeric_failure, "eigendecomposition failed");
    // Eigenvalues of a product of PSD matrices are real and non-negative; round-off
    // at the zero end is clamped relative to the largest.
    const auto values = eig.eigenvalues();
    double largest = 0.0;
    for (Eigen::Index i = 0; i < values.size(); ++i) largest = std::max(largest, std::abs(values[i]));
    std::complex<double> root_trace = 0.0;
    for (Eigen::Index i = 0; i < values.size(); ++i) {
        if (std::abs(values[i]) <= 1e-12 * std::max(1.0, largest)) continue;
        root_trace += std::sqrt(values[i]);
    }
    require(std::abs(root_trace.imag()) < 1e-6 * std::max(1.0, std::abs(root_trace.real())),
            ErrorCode::numeric_failure, "matrix square root has an imaginary component");
    const double d = mean_term + a.sigma.trace() + b.sigma.trace() - 2.0 * root_trace.real();
    return std::max(0.0, d);
}

namespace {

using IouCounts = std::map<int, std::pair<std::size_t, std::size_t>>;  // class -> (intersection, union)

void accumulate(IouCounts& counts, const ParseMap& pred, const ParseMap& truth) {
    require(pred.width() == truth.width() && pred.height() == truth.height(), ErrorCode::invalid_input,
            "parse maps differ in size");
    for (std::size_t i = 0; i < pred.labels().size(); ++i) {
        const int p = pred.labels()[i], t = truth.labels()[i];
        ++counts[p].second;
        if (p == t) {
            ++counts[p].first;
        } else {
            ++counts[t].second;
        }
    }
}

IouReport report(const IouCounts& counts) {
    IouReport r;
    for (const auto& [cls, c] : counts) r.per_class[cls] = static_cast<double>(c.first) / static_cast<double>(c.second);
    double total = 0.0;
    for (const auto& [cls, v] : r.per_class) total += v;
    r.mean = r.per_class.empty() ? 1.0 : total / static_cast<double>(r.per_class.size());
    return r;
}

}  // namespace

IouReport mean_iou(const ParseMap& pred, const ParseMap& truth) {
    IouCounts counts;
    accumulate(counts, pred, truth);
    return report(counts);
}

IouReport mean_iou(const std::vector<ParseMap>& pred, const std::vector<ParseMap>& truth) {
    require(pred.size() == truth.size(), ErrorCode::invalid_input, "prediction and truth counts differ");
    IouCounts counts;
    for (std::size_t i = 0; i < pred.size(); ++i) accumulate(counts, pred[i], truth[i]);
    return report(counts);
}

ImageEmbedder random_conv_embedder(std::uint64_t seed, int dim) {
    require(dim > 0, ErrorCode::invalid_input, "embedding dimension must be positive");
    struct Net {
        nn::ParamStore store;
        nn::Conv2d c1, c2, c3;
    };
    auto net = std::make_shared<Net>();
    nn::Rng rng(seed);
    net->c1 = nn::Conv2d(net->store, "embed.c1", 3, 16, 3, 2, 1, rng);
    net->c2 = nn::Conv2d(net->store, "embed.c2", 16, 32, 3, 2, 1, rng);
    net->c3 = nn::Conv2d(net->store, "embed.c3", 32, dim, 3, 2, 1, rng);
    return [net, dim](const RasterImage& img) {
        require(!img.empty(), ErrorCode::invalid_input, "cannot embed an empty image");
        const RasterImage rgb = img.channels() == 1 ? gray_to_rgb(img) : img;
        nn::NoGradGuard guard;
        const nn::Var x = nn::resize_bilinear(nn::constant(nn::image_tensor(rgb)), 64, 48);
        const nn::Var h = nn::leaky_relu(net->c3(nn::leaky_relu(net->c2(nn::leaky_relu(net->c1(x))))));
        const nn::Tensor& t = h.value();
        Eigen::VectorXd out(dim);
        for (int c = 0; c < dim; ++c) {
            double acc = 0.0;
            const double* plane = t.plane(0, c);
            for (std::size_t i = 0; i < t.shape().plane(); ++i) acc += plane[i];
            out[c] = acc / static_cast<double>(t.shape().plane());
        }
        return out;
    };
}

Eigen::MatrixXd embed_all(const std::vector<RasterImage>& images, const ImageEmbedder& embedder) {
    require(!images.empty(), ErrorCode::insufficient_samples, "no images to embed");
    Eigen::MatrixXd out;
    for (std::size_t i = 0; i < images.size(); ++i) {
        const Eigen::VectorXd f = embedder(images[i]);
        if (i == 0) out.resize(static_cast<Eigen::Index>(images.size()), f.size());
        require(f.size() == out.cols(), ErrorCode::invalid_input, "embedder output length changed");
        out.row(static_cast<Eigen::Index>(i)) = f.transpose();
    }
    return out;
}

double fid(const std::vector<RasterImage>& real, const std::vector<RasterImage>& fake, const ImageEmbedder& embedder) {
    return frechet_distance(feature_stats(embed_all(real, embedder)), feature_stats(embed_all(fake, embedder)));
}

TimingReport timing_report(const std::vector<StageTiming>& durations) {
    TimingReport r;
    for (const StageTiming& d : durations) {
        require(d.seconds >= 0.0 && std::isfinite(d.seconds), ErrorCode::invalid_input,
                "stage " + d.stage + " has an invalid duration");
        auto it = std::find_if(r.stages.begin(), r.stages.end(), [&](const auto& s) { return s.stage == d.stage; });
        if (it == r.stages.end())
            r.stages.push_back(d);
        else
            it->seconds += d.seconds;
        r.total_seconds += d.seconds;
    }
    return r;
}

namespace {

constexpr double kReferenceBefore = 240.0;
constexpr double kReferenceAfter = 78.0;

}  // namespace

json TimingReport::to_json() const {
    json stages_json = json::array();
    for (const StageTiming& s : stages) stages_json.push_back({{"stage", s.stage}, {"seconds", s.seconds}});
    return {{"stages", stages_json},
            {"total_seconds", total_seconds},
            {"reference", {{"response_seconds_before", kReferenceBefore},
                           {"response_seconds_after", kReferenceAfter},
                           {"note", "published response times on the original deployment; annotation only"}}}};
}

std::string TimingReport::csv() const {
    std::ostringstream os;
    os.precision(9);
    os << "stage,seconds\n";
    for (const StageTiming& s : stages) os << s.stage << ',' << s.seconds << '\n';
    os << "total," << total_seconds << '\n';
    return os.str();
}

std::string TimingReport::table() const {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(4);
    std::size_t width = 5;
    for (const StageTiming& s : stages) width = std::max(width, s.stage.size());
    for (const StageTiming& s : stages)
        os << s.stage << std::string(width - s.stage.size() + 2, ' ') << s.seconds << " s\n";
    os << "total" << std::string(width - 3, ' ') << total_seconds << " s\n";
    os << "(reference deployment: " << kReferenceBefore << " s before, " << kReferenceAfter
       << " s after optimization; not comparable)\n";
    return os.str();
}

}  // namespace vfr
