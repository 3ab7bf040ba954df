#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "vfr/preprocess/types.hpp"

namespace vfr {

struct TryOnSample;

enum class BackendKind { segmenter, pose_detector, densepose_estimator, cloth_segmenter };

std::string_view to_string(BackendKind kind);

/// Swappable perception model. Implementations must be deterministic and hold
/// only read-only state once constructed.
class PerceptionBackend {
  public:
    virtual ~PerceptionBackend() = default;
    virtual std::string name() const = 0;
    virtual BackendKind kind() const = 0;
};

class Segmenter : public PerceptionBackend {
  public:
    BackendKind kind() const final { return BackendKind::segmenter; }
    virtual ParseMap segment(const RasterImage& img) const = 0;
};

class PoseDetector : public PerceptionBackend {
  public:
    BackendKind kind() const final { return BackendKind::pose_detector; }
    virtual PoseKeypoints detect(const RasterImage& img) const = 0;
};

class DenseposeEstimator : public PerceptionBackend {
  public:
    BackendKind kind() const final { return BackendKind::densepose_estimator; }
    virtual DenseposeMap estimate(const RasterImage& img) const = 0;
};

/// Foreground-vs-background segmentation of a flat garment photo.
class ClothSegmenter : public PerceptionBackend {
  public:
    BackendKind kind() const final { return BackendKind::cloth_segmenter; }
    /// Per-pixel garment confidence in [0, 1], row-major.
    virtual std::vector<double> confidence(const RasterImage& img) const = 0;
};

/// Hash of dimensions and pixel values; identifies an image across decode
/// round trips.
std::uint64_t content_hash(const RasterImage& img);

/// True when every pixel equals the first one (blank frame).
bool is_uniform(const RasterImage& img);

/// Ground truth keyed by image content. Filled from synthetic or imported
/// samples; read-only once handed to backends.
class OracleStore {
  public:
    /// Registers the person photo (and its background-removed variant) and
    /// the cloth photo of a sample.
    void add(const TryOnSample& sample);

    const ParseMap* parse(const RasterImage& img) const;
    const PoseKeypoints* pose(const RasterImage& img) const;
    const DenseposeMap* densepose(const RasterImage& img) const;
    const ClothMask* cloth_mask(const RasterImage& img) const;
    std::size_t size() const noexcept { return people_.size() + cloths_.size(); }

  private:
    struct PersonTruth {
        ParseMap parse;
        PoseKeypoints pose;
        DenseposeMap densepose;
    };
    std::map<std::uint64_t, std::shared_ptr<const PersonTruth>> people_;
    std::map<std::uint64_t, ClothMask> cloths_;
};

/// Everything a backend factory may need.
struct BackendContext {
    int width = 48;    // working resolution used to fit toy models
    int height = 64;
    std::uint64_t seed = 7;
    int fit_samples = 512;         // synthetic samples used to fit toy models
    int segnet_steps = 1600;       // optimizer steps for the toy segmentation network
    std::filesystem::path segnet_checkpoint;  // pretrained toy network; skips fitting when set
    std::shared_ptr<const OracleStore> oracle;
};

/// Backend names chosen for one pipeline run.
struct BackendSelection {
    std::string segmenter = "oracle";
    std::string pose_detector = "oracle";
    std::string densepose_estimator = "oracle";
    std::string cloth_segmenter = "oracle";

    friend bool operator==(const BackendSelection&, const BackendSelection&) = default;
};

/// Name -> factory table per backend kind.
class BackendRegistry {
  public:
    using Factory = std::function<std::shared_ptr<PerceptionBackend>(const BackendContext&)>;

    /// Registry pre-loaded with the shipped `oracle`, `toy` and `toy-bayes` backends.
    static BackendRegistry with_defaults();

    void add(BackendKind kind, const std::string& name, Factory factory);
    bool contains(BackendKind kind, const std::string& name) const;
    std::vector<std::string> names(BackendKind kind) const;
    /// Throws configuration naming the first unregistered backend.
    void require_registered(const BackendSelection& selection) const;

    /// Throws configuration when the name is not registered for the kind.
    std::shared_ptr<const Segmenter> segmenter(const std::string& name, const BackendContext& ctx) const;
    std::shared_ptr<const PoseDetector> pose_detector(const std::string& name, const BackendContext& ctx) const;
    std::shared_ptr<const DenseposeEstimator> densepose_estimator(const std::string& name,
                                                                  const BackendContext& ctx) const;
    std::shared_ptr<const ClothSegmenter> cloth_segmenter(const std::string& name, const BackendContext& ctx) const;

  private:
    std::shared_ptr<PerceptionBackend> make(BackendKind kind, const std::string& name,
                                            const BackendContext& ctx) const;
    std::map<std::pair<BackendKind, std::string>, Factory> factories_;
};

}  // namespace vfr
