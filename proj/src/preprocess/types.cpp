#include "vfr/preprocess/types.hpp"

#include <algorithm>
#include <string>

#include "vfr/error.hpp"

namespace vfr {

namespace {

constexpr std::array<std::string_view, kNumParseClasses> kPartNames = {
    "background", "hat",        "hair",      "gloves",   "sunglasses", "upper-clothes", "dress",
    "coat",       "socks",      "pants",     "torso-skin", "scarf",    "skirt",         "face",
    "left-arm",   "right-arm",  "left-leg",  "right-leg", "left-shoe", "right-shoe"};

constexpr std::array<std::string_view, kNumJoints> kJointNames = {
    "nose",      "neck",      "right_shoulder", "right_elbow", "right_wrist", "left_shoulder",
    "left_elbow", "left_wrist", "right_hip",     "right_knee",  "right_ankle", "left_hip",
    "left_knee", "left_ankle", "right_eye",      "left_eye",    "right_ear",   "left_ear"};

}  // namespace

std::string_view part_name(int label) {
    return (label >= 0 && label < kNumParseClasses) ? kPartNames[label] : std::string_view("invalid");
}

const std::array<PaletteEntry, kNumParseClasses>& parse_palette() {
    static const std::array<PaletteEntry, kNumParseClasses> palette = {{
        {0, 0, 0},       {128, 0, 0},   {255, 0, 0},   {0, 85, 0},     {170, 0, 51},
        {255, 85, 0},    {0, 0, 85},    {0, 119, 221}, {85, 85, 0},    {0, 85, 85},
        {85, 51, 0},     {52, 86, 128}, {0, 128, 0},   {0, 0, 255},    {51, 170, 221},
        {0, 255, 255},   {85, 255, 170}, {170, 255, 85}, {255, 255, 0}, {255, 170, 0},
    }};
    return palette;
}

ParseMap::ParseMap(int width, int height, std::uint8_t fill) : width_(width), height_(height) {
    require(width > 0 && height > 0, ErrorCode::invalid_input, "parse map dimensions must be positive");
    labels_.assign(static_cast<std::size_t>(width) * height, fill);
}

void ParseMap::validate() const {
    const auto bad = std::find_if(labels_.begin(), labels_.end(), [](auto l) { return l >= kNumParseClasses; });
    if (bad != labels_.end()) {
        fail(ErrorCode::contract_violation, "parse label " + std::to_string(*bad) + " outside 0..19");
    }
}

std::string_view joint_name(Joint j) { return kJointNames[static_cast<int>(j)]; }

bool PoseKeypoints::any_detected() const {
    return std::any_of(joints.begin(), joints.end(), [](const Keypoint& k) { return k.detected(); });
}

DenseposeMap::DenseposeMap(int width, int height) : width_(width), height_(height) {
    require(width > 0 && height > 0, ErrorCode::invalid_input, "densepose dimensions must be positive");
    const std::size_t n = static_cast<std::size_t>(width) * height;
    part_.assign(n, 0);
    u_.assign(n, 0.0f);
    v_.assign(n, 0.0f);
}

bool DenseposeMap::satisfies_invariants() const {
    for (std::size_t i = 0; i < part_.size(); ++i) {
        if (part_[i] >= kNumDenseParts) return false;
        if (!(u_[i] >= 0.0f && u_[i] <= 1.0f && v_[i] >= 0.0f && v_[i] <= 1.0f)) return false;
        if (part_[i] == 0 && (u_[i] != 0.0f || v_[i] != 0.0f)) return false;
    }
    return true;
}

void DenseposeMap::canonicalize() {
    for (std::size_t i = 0; i < part_.size(); ++i) {
        if (part_[i] == 0) {
            u_[i] = v_[i] = 0.0f;
        } else {
            u_[i] = std::clamp(u_[i], 0.0f, 1.0f);
            v_[i] = std::clamp(v_[i], 0.0f, 1.0f);
        }
    }
}

ClothMask::ClothMask(int width, int height, std::uint8_t fill) : width_(width), height_(height) {
    require(width > 0 && height > 0, ErrorCode::invalid_input, "mask dimensions must be positive");
    bits_.assign(static_cast<std::size_t>(width) * height, fill);
}

bool ClothMask::is_binary() const {
    return std::all_of(bits_.begin(), bits_.end(), [](auto b) { return b <= 1; });
}

std::size_t ClothMask::count() const {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

}  // namespace vfr
