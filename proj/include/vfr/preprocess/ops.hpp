#pragma once

#include "vfr/preprocess/backend.hpp"

namespace vfr {

template <typename T>
struct Timed {
    T value;
    double seconds = 0.0;
};

/// Runs the segmenter and checks its output size. Failures surface as
/// backend_error naming the backend; wrong sizes as contract_violation.
Timed<ParseMap> segment_human(const RasterImage& img, const Segmenter& backend);

/// Undetected joints have confidence 0; detected ones are checked to be in frame.
PoseKeypoints detect_pose(const RasterImage& img, const PoseDetector& backend);

/// Pixels labeled background become white; everything else is untouched.
RasterImage remove_background(const RasterImage& img, const ParseMap& parse);

struct AgnosticOptions {
    float fill = 128.0f;
    double arm_radius_factor = 0.45;  // capsule radius as a fraction of shoulder distance
    bool keep_color = false;          // 3-channel agnostic instead of gray
};

struct Agnostic {
    RasterImage image;
    ParseMap parse;
};

/// Erases the old upper garment and torso skin, masks both arms with
/// keypoint capsules and blackens the background. Requires neck and both
/// shoulders (pose_incomplete otherwise).
Agnostic generate_agnostic(const RasterImage& img, const ParseMap& parse, const PoseKeypoints& pose,
                           const AgnosticOptions& options = {});

/// Pixels inside the arm capsules of a pose (shoulder-elbow, elbow-wrist).
std::vector<std::uint8_t> arm_capsule_mask(int width, int height, const PoseKeypoints& pose,
                                           double radius_factor = 0.45);

/// Binarizes backend confidence at 0.5 (strictly greater is garment).
ClothMask make_cloth_mask(const RasterImage& cloth, const ClothSegmenter& backend);

DenseposeMap compute_densepose(const RasterImage& img, const DenseposeEstimator& backend);

}  // namespace vfr
