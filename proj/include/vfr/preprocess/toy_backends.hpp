#pragma once

#include <array>
#include <memory>
#include <vector>

#include "vfr/data/sample.hpp"
#include "vfr/preprocess/backend.hpp"

namespace vfr {

/// Per-pixel naive Bayes over a position prior and a coarse color histogram,
/// fitted in closed form on annotated samples.
class NaiveBayesSegmenter final : public Segmenter {
  public:
    static constexpr int kBins = 8;

    NaiveBayesSegmenter(int width, int height);
    void fit(const std::vector<TryOnSample>& samples);

    std::string name() const override { return "toy-bayes"; }
    ParseMap segment(const RasterImage& img) const override;

  private:
    void observe(const RasterImage& img, const ParseMap& parse);
    void finalize();
    int width_, height_;
    std::vector<double> position_;  // [class][y][x] counts, then log-probabilities
    std::vector<double> color_;     // [class][bin] counts, then log-probabilities
};

/// Reads joints off a parse map: face for the head joints, the upper-body
/// silhouette for neck and shoulders, arm and leg regions for the limbs.
PoseKeypoints pose_from_parse(const ParseMap& parse);

/// Front-facing IUV estimate from a parse map (parts by label and side, u/v
/// from each part's bounding box).
DenseposeMap densepose_from_parse(const ParseMap& parse);

class ParsePoseDetector final : public PoseDetector {
  public:
    explicit ParsePoseDetector(std::shared_ptr<const Segmenter> segmenter) : segmenter_(std::move(segmenter)) {}
    std::string name() const override { return segmenter_->name(); }
    PoseKeypoints detect(const RasterImage& img) const override { return pose_from_parse(segmenter_->segment(img)); }

  private:
    std::shared_ptr<const Segmenter> segmenter_;
};

class ParseDenseposeEstimator final : public DenseposeEstimator {
  public:
    explicit ParseDenseposeEstimator(std::shared_ptr<const Segmenter> segmenter) : segmenter_(std::move(segmenter)) {}
    std::string name() const override { return segmenter_->name(); }
    DenseposeMap estimate(const RasterImage& img) const override {
        return densepose_from_parse(segmenter_->segment(img));
    }

  private:
    std::shared_ptr<const Segmenter> segmenter_;
};

/// Confidence grows with color distance from the border color. Fails on
/// garments that match the backdrop (white on white).
class ThresholdClothSegmenter final : public ClothSegmenter {
  public:
    explicit ThresholdClothSegmenter(double full_scale = 40.0) : full_scale_(full_scale) {}
    std::string name() const override { return "toy-threshold"; }
    std::vector<double> confidence(const RasterImage& img) const override;

  private:
    double full_scale_;
};

/// Flood fill of backdrop-colored pixels from the frame border; whatever the
/// fill cannot reach is garment. Any outline or seam stops the fill, so light
/// garments on light backdrops still separate.
class FloodFillClothSegmenter final : public ClothSegmenter {
  public:
    explicit FloodFillClothSegmenter(double tolerance = 6.0) : tolerance_(tolerance) {}
    std::string name() const override { return "toy-floodfill"; }
    std::vector<double> confidence(const RasterImage& img) const override;

  private:
    double tolerance_;
};

}  // namespace vfr
