#pragma once

#include <filesystem>
#include <span>
#include <string>

#include "vfr/preprocess/types.hpp"

namespace vfr {

// Parse map: single-channel indexed PNG whose indices are the labels 0..19.
Bytes encode_parse_png(const ParseMap& parse);
ParseMap decode_parse_png(std::span<const std::uint8_t> bytes);

// Pose: OpenPose-style JSON, {"people":[{"pose_keypoints_2d":[x,y,c, ... 54 values]}]}.
// A bare top-level "pose_keypoints_2d" key is also accepted on read.
std::string encode_pose_json(const PoseKeypoints& pose);
PoseKeypoints decode_pose_json(const std::string& text);

// Densepose: 3-channel PNG, R = part index, G = round(255 u), B = round(255 v).
Bytes encode_densepose_png(const DenseposeMap& dp);
DenseposeMap decode_densepose_png(std::span<const std::uint8_t> bytes);

// Cloth mask: gray PNG, 0 or 255.
Bytes encode_mask_png(const ClothMask& mask);
ClothMask decode_mask_png(std::span<const std::uint8_t> bytes);

ParseMap load_parse(const std::filesystem::path& path);
PoseKeypoints load_pose(const std::filesystem::path& path);
DenseposeMap load_densepose(const std::filesystem::path& path);
ClothMask load_mask(const std::filesystem::path& path);

}  // namespace vfr
