#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

#include "vfr/imaging/image_io.hpp"
#include "vfr/imaging/raster.hpp"

namespace vfr {

/// Human-parsing classes, in palette order.
enum class BodyPart : std::uint8_t {
    background = 0,
    hat = 1,
    hair = 2,
    gloves = 3,
    sunglasses = 4,
    upper_clothes = 5,
    dress = 6,
    coat = 7,
    socks = 8,
    pants = 9,
    torso_skin = 10,
    scarf = 11,
    skirt = 12,
    face = 13,
    left_arm = 14,
    right_arm = 15,
    left_leg = 16,
    right_leg = 17,
    left_shoe = 18,
    right_shoe = 19,
};

inline constexpr int kNumParseClasses = 20;

std::string_view part_name(int label);

/// Display colors for the indexed PNG palette (the usual CIHP/LIP colors).
const std::array<PaletteEntry, kNumParseClasses>& parse_palette();

constexpr std::uint8_t label(BodyPart p) { return static_cast<std::uint8_t>(p); }

class ParseMap {
  public:
    ParseMap() = default;
    ParseMap(int width, int height, std::uint8_t fill = 0);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::uint8_t& at(int x, int y) { return labels_[index(x, y)]; }
    std::uint8_t at(int x, int y) const { return labels_[index(x, y)]; }
    std::vector<std::uint8_t>& labels() noexcept { return labels_; }
    const std::vector<std::uint8_t>& labels() const noexcept { return labels_; }

    /// Throws contract_violation when any label is >= 20.
    void validate() const;

    friend bool operator==(const ParseMap&, const ParseMap&) = default;

  private:
    std::size_t index(int x, int y) const noexcept { return static_cast<std::size_t>(y) * width_ + x; }
    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> labels_;
};

/// OpenPose 18-joint (COCO) order.
enum class Joint : int {
    nose = 0,
    neck,
    right_shoulder,
    right_elbow,
    right_wrist,
    left_shoulder,
    left_elbow,
    left_wrist,
    right_hip,
    right_knee,
    right_ankle,
    left_hip,
    left_knee,
    left_ankle,
    right_eye,
    left_eye,
    right_ear,
    left_ear,
};

inline constexpr int kNumJoints = 18;

std::string_view joint_name(Joint j);

struct Keypoint {
    double x = 0.0;
    double y = 0.0;
    double confidence = 0.0;  // 0 = not detected

    bool detected() const noexcept { return confidence > 0.0; }
    friend bool operator==(const Keypoint&, const Keypoint&) = default;
};

struct PoseKeypoints {
    std::array<Keypoint, kNumJoints> joints{};

    Keypoint& operator[](Joint j) { return joints[static_cast<int>(j)]; }
    const Keypoint& operator[](Joint j) const { return joints[static_cast<int>(j)]; }

    bool any_detected() const;
    friend bool operator==(const PoseKeypoints&, const PoseKeypoints&) = default;
};

/// Body-surface parts 1..24 (0 = not body) with (u, v) in [0, 1].
inline constexpr int kNumDenseParts = 25;

// Front-facing subset of the 24-part surface index used by the generators and
// toy estimators. "left"/"right" are the subject's sides.
namespace dense_part {
inline constexpr std::uint8_t none = 0;
inline constexpr std::uint8_t torso = 2;
inline constexpr std::uint8_t right_hand = 3;
inline constexpr std::uint8_t left_hand = 4;
inline constexpr std::uint8_t left_foot = 5;
inline constexpr std::uint8_t right_foot = 6;
inline constexpr std::uint8_t right_upper_leg = 9;
inline constexpr std::uint8_t left_upper_leg = 10;
inline constexpr std::uint8_t right_lower_leg = 13;
inline constexpr std::uint8_t left_lower_leg = 14;
inline constexpr std::uint8_t left_upper_arm = 15;
inline constexpr std::uint8_t right_upper_arm = 16;
inline constexpr std::uint8_t left_lower_arm = 19;
inline constexpr std::uint8_t right_lower_arm = 20;
inline constexpr std::uint8_t head_right = 23;
inline constexpr std::uint8_t head_left = 24;
}  // namespace dense_part

class DenseposeMap {
  public:
    DenseposeMap() = default;
    DenseposeMap(int width, int height);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::uint8_t& part(int x, int y) { return part_[index(x, y)]; }
    std::uint8_t part(int x, int y) const { return part_[index(x, y)]; }
    float& u(int x, int y) { return u_[index(x, y)]; }
    float u(int x, int y) const { return u_[index(x, y)]; }
    float& v(int x, int y) { return v_[index(x, y)]; }
    float v(int x, int y) const { return v_[index(x, y)]; }

    /// part < 25, u/v in [0,1], and u = v = 0 wherever part = 0.
    bool satisfies_invariants() const;
    /// Zeroes u/v off-body and clamps u/v into [0, 1].
    void canonicalize();

    friend bool operator==(const DenseposeMap&, const DenseposeMap&) = default;

  private:
    std::size_t index(int x, int y) const noexcept { return static_cast<std::size_t>(y) * width_ + x; }
    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> part_;
    std::vector<float> u_;
    std::vector<float> v_;
};

class ClothMask {
  public:
    ClothMask() = default;
    ClothMask(int width, int height, std::uint8_t fill = 0);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::uint8_t& at(int x, int y) { return bits_[index(x, y)]; }
    std::uint8_t at(int x, int y) const { return bits_[index(x, y)]; }
    const std::vector<std::uint8_t>& bits() const noexcept { return bits_; }
    std::vector<std::uint8_t>& bits() noexcept { return bits_; }

    bool is_binary() const;
    std::size_t count() const;

    friend bool operator==(const ClothMask&, const ClothMask&) = default;

  private:
    std::size_t index(int x, int y) const noexcept { return static_cast<std::size_t>(y) * width_ + x; }
    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> bits_;
};

}  // namespace vfr
