#include "vfr/preprocess/annotation_io.hpp"

#include <cmath>
#include <json.hpp>

#include "vfr/error.hpp"

namespace vfr {

using nlohmann::json;

Bytes encode_parse_png(const ParseMap& parse) {
    parse.validate();
    const auto& palette = parse_palette();
    return encode_png_indexed(parse.width(), parse.height(), parse.labels(), palette);
}

ParseMap decode_parse_png(std::span<const std::uint8_t> bytes) {
    IndexedImage indexed = decode_png_indexed(bytes);
    ParseMap out(indexed.width, indexed.height);
    out.labels() = std::move(indexed.indices);
    out.validate();
    return out;
}

std::string encode_pose_json(const PoseKeypoints& pose) {
    json values = json::array();
    for (const Keypoint& k : pose.joints) {
        values.push_back(k.x);
        values.push_back(k.y);
        values.push_back(k.confidence);
    }
    json doc = {{"version", 1.3}, {"people", json::array({json{{"pose_keypoints_2d", values}}})}};
    return doc.dump();
}

PoseKeypoints decode_pose_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        fail(ErrorCode::validation, std::string("pose JSON parse error: ") + e.what());
    }
    const json* values = nullptr;
    if (doc.contains("pose_keypoints_2d")) {
        values = &doc["pose_keypoints_2d"];
    } else if (doc.contains("people") && doc["people"].is_array()) {
        if (doc["people"].empty()) return PoseKeypoints{};
        values = &doc["people"][0]["pose_keypoints_2d"];
    }
    if (values == nullptr || !values->is_array() || values->size() != 3 * kNumJoints) {
        fail(ErrorCode::validation, "pose JSON must hold 54 numbers under pose_keypoints_2d");
    }
    PoseKeypoints pose;
    for (int j = 0; j < kNumJoints; ++j) {
        for (int k = 0; k < 3; ++k) {
            const json& v = (*values)[3 * j + k];
            if (!v.is_number()) fail(ErrorCode::validation, "pose_keypoints_2d holds a non-numeric value");
        }
        pose.joints[j] = {(*values)[3 * j].get<double>(), (*values)[3 * j + 1].get<double>(),
                          (*values)[3 * j + 2].get<double>()};
        if (pose.joints[j].confidence < 0.0 || pose.joints[j].confidence > 1.0) {
            fail(ErrorCode::validation, "pose confidence outside [0, 1]");
        }
    }
    return pose;
}

Bytes encode_densepose_png(const DenseposeMap& dp) {
    RasterImage img(dp.width(), dp.height(), 3);
    for (int y = 0; y < dp.height(); ++y) {
        for (int x = 0; x < dp.width(); ++x) {
            img.at(x, y, 0) = dp.part(x, y);
            img.at(x, y, 1) = static_cast<float>(to_byte(255.0 * dp.u(x, y)));
            img.at(x, y, 2) = static_cast<float>(to_byte(255.0 * dp.v(x, y)));
        }
    }
    return encode_png(img);
}

DenseposeMap decode_densepose_png(std::span<const std::uint8_t> bytes) {
    const RasterImage img = decode_image(bytes);
    if (img.channels() != 3) fail(ErrorCode::validation, "densepose PNG must have 3 channels");
    DenseposeMap dp(img.width(), img.height());
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            const int part = static_cast<int>(img.at(x, y, 0));
            if (part >= kNumDenseParts) fail(ErrorCode::validation, "densepose part index above 24");
            dp.part(x, y) = static_cast<std::uint8_t>(part);
            dp.u(x, y) = static_cast<float>(img.at(x, y, 1) / 255.0);
            dp.v(x, y) = static_cast<float>(img.at(x, y, 2) / 255.0);
        }
    }
    if (!dp.satisfies_invariants()) fail(ErrorCode::validation, "densepose has u/v set on non-body pixels");
    return dp;
}

Bytes encode_mask_png(const ClothMask& mask) {
    RasterImage img(mask.width(), mask.height(), 1);
    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) img.at(x, y) = mask.at(x, y) ? 255.0f : 0.0f;
    }
    return encode_png(img);
}

ClothMask decode_mask_png(std::span<const std::uint8_t> bytes) {
    RasterImage img = decode_image(bytes);
    if (img.channels() == 3) img = rgb_to_gray(img);
    ClothMask mask(img.width(), img.height());
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) mask.at(x, y) = img.at(x, y) >= 128.0f ? 1 : 0;
    }
    return mask;
}

namespace {

template <typename Fn>
auto with_path(const std::filesystem::path& path, Fn&& fn) {
    const Bytes bytes = read_file(path);
    try {
        return fn(bytes);
    } catch (const Error& e) {
        const bool corrupt = e.code() == ErrorCode::invalid_input || e.code() == ErrorCode::contract_violation;
        throw Error(corrupt ? ErrorCode::validation : e.code(),
                    path.string() + ": " + e.what());
    }
}

}  // namespace

ParseMap load_parse(const std::filesystem::path& path) {
    return with_path(path, [](const Bytes& b) { return decode_parse_png(b); });
}

PoseKeypoints load_pose(const std::filesystem::path& path) {
    return with_path(path, [](const Bytes& b) { return decode_pose_json(std::string(b.begin(), b.end())); });
}

DenseposeMap load_densepose(const std::filesystem::path& path) {
    return with_path(path, [](const Bytes& b) { return decode_densepose_png(b); });
}

ClothMask load_mask(const std::filesystem::path& path) {
    return with_path(path, [](const Bytes& b) { return decode_mask_png(b); });
}

}  // namespace vfr
