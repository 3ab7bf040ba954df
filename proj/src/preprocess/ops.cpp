#include "vfr/preprocess/ops.hpp"

#include <chrono>
#include <cmath>

#include "vfr/error.hpp"

namespace vfr {

namespace {

template <typename F>
auto call_backend(const PerceptionBackend& backend, F&& f) {
    try {
        return f();
    } catch (const Error& e) {
        if (e.code() == ErrorCode::backend_error) throw;
        fail(ErrorCode::backend_error, backend.name() + " " + std::string(to_string(backend.kind())) + ": " + e.what());
    } catch (const std::exception& e) {
        fail(ErrorCode::backend_error, backend.name() + " " + std::string(to_string(backend.kind())) + ": " + e.what());
    }
}

void require_image(const RasterImage& img) {
    require(!img.empty() && (img.channels() == 1 || img.channels() == 3), ErrorCode::invalid_input,
            "expected a non-empty 1- or 3-channel image");
}

void require_same_size(const RasterImage& img, int w, int h, const std::string& what) {
    require(img.width() == w && img.height() == h, ErrorCode::invalid_input,
            what + " size " + std::to_string(w) + "x" + std::to_string(h) + " differs from image size " +
                std::to_string(img.width()) + "x" + std::to_string(img.height()));
}

bool erased_class(std::uint8_t l) { return l == 5 || l == 6 || l == 7 || l == 10; }

}  // namespace

Timed<ParseMap> segment_human(const RasterImage& img, const Segmenter& backend) {
    require_image(img);
    const auto start = std::chrono::steady_clock::now();
    ParseMap parse = call_backend(backend, [&] { return backend.segment(img); });
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (parse.width() != img.width() || parse.height() != img.height()) {
        fail(ErrorCode::contract_violation, backend.name() + " segmenter returned a " + std::to_string(parse.width()) +
                                                "x" + std::to_string(parse.height()) + " map for a " +
                                                std::to_string(img.width()) + "x" + std::to_string(img.height()) +
                                                " image");
    }
    parse.validate();
    return {std::move(parse), seconds};
}

PoseKeypoints detect_pose(const RasterImage& img, const PoseDetector& backend) {
    require_image(img);
    PoseKeypoints pose = call_backend(backend, [&] { return backend.detect(img); });
    for (Keypoint& k : pose.joints) {
        if (!std::isfinite(k.x) || !std::isfinite(k.y) || !std::isfinite(k.confidence) || k.confidence < 0 ||
            k.confidence > 1) {
            fail(ErrorCode::contract_violation, backend.name() + " pose detector returned an invalid keypoint");
        }
        if (!k.detected()) {
            k = {};
        } else if (k.x < 0 || k.y < 0 || k.x >= img.width() || k.y >= img.height()) {
            fail(ErrorCode::contract_violation, backend.name() + " pose detector placed a joint outside the frame");
        }
    }
    return pose;
}

RasterImage remove_background(const RasterImage& img, const ParseMap& parse) {
    require_image(img);
    require_same_size(img, parse.width(), parse.height(), "parse map");
    RasterImage out = img;
    const float white = img.range() == PixelRange::byte ? 255.0f : 1.0f;
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x)
            if (parse.at(x, y) == 0)
                for (int c = 0; c < img.channels(); ++c) out.at(x, y, c) = white;
    return out;
}

std::vector<std::uint8_t> arm_capsule_mask(int width, int height, const PoseKeypoints& pose, double radius_factor) {
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(width) * height, 0);
    const Keypoint& rs = pose[Joint::right_shoulder];
    const Keypoint& ls = pose[Joint::left_shoulder];
    if (!rs.detected() || !ls.detected()) return mask;
    const double r = radius_factor * std::hypot(rs.x - ls.x, rs.y - ls.y);
    std::vector<std::pair<Keypoint, Keypoint>> segments;
    for (auto [s, e, w] : {std::tuple{Joint::right_shoulder, Joint::right_elbow, Joint::right_wrist},
                           std::tuple{Joint::left_shoulder, Joint::left_elbow, Joint::left_wrist}}) {
        if (pose[e].detected()) {
            segments.emplace_back(pose[s], pose[e]);
            if (pose[w].detected()) segments.emplace_back(pose[e], pose[w]);
        }
    }
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const double px = x + 0.5, py = y + 0.5;
            for (const auto& [a, b] : segments) {
                const double dx = b.x - a.x, dy = b.y - a.y, len2 = dx * dx + dy * dy;
                const double t = len2 > 0 ? std::clamp(((px - a.x) * dx + (py - a.y) * dy) / len2, 0.0, 1.0) : 0.0;
                if (std::hypot(a.x + t * dx - px, a.y + t * dy - py) <= r) {
                    mask[static_cast<std::size_t>(y) * width + x] = 1;
                    break;
                }
            }
        }
    }
    return mask;
}

Agnostic generate_agnostic(const RasterImage& img, const ParseMap& parse, const PoseKeypoints& pose,
                           const AgnosticOptions& options) {
    require(img.channels() == 3, ErrorCode::invalid_input, "agnostic generation expects an RGB person image");
    require_same_size(img, parse.width(), parse.height(), "parse map");
    for (Joint j : {Joint::neck, Joint::right_shoulder, Joint::left_shoulder}) {
        if (!pose[j].detected()) {
            fail(ErrorCode::pose_incomplete, "agnostic generation needs the " + std::string(joint_name(j)) + " joint");
        }
    }
    Agnostic out{options.keep_color ? img : rgb_to_gray(img), parse};
    const float fill = img.range() == PixelRange::byte ? options.fill : options.fill / 127.5f - 1.0f;
    const float black = img.range() == PixelRange::byte ? 0.0f : -1.0f;
    const auto arms = arm_capsule_mask(img.width(), img.height(), pose, options.arm_radius_factor);
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            const std::uint8_t l = parse.at(x, y);
            float value;
            if (l == 0) {
                value = black;
            } else if (erased_class(l) || arms[static_cast<std::size_t>(y) * img.width() + x]) {
                value = fill;
                out.parse.at(x, y) = 0;
            } else {
                continue;
            }
            for (int c = 0; c < out.image.channels(); ++c) out.image.at(x, y, c) = value;
        }
    }
    return out;
}

ClothMask make_cloth_mask(const RasterImage& cloth, const ClothSegmenter& backend) {
    require_image(cloth);
    const std::vector<double> conf = call_backend(backend, [&] { return backend.confidence(cloth); });
    if (conf.size() != cloth.pixel_count()) {
        fail(ErrorCode::contract_violation, backend.name() + " cloth segmenter returned the wrong number of values");
    }
    ClothMask mask(cloth.width(), cloth.height());
    for (std::size_t i = 0; i < conf.size(); ++i) {
        if (!std::isfinite(conf[i])) {
            fail(ErrorCode::contract_violation, backend.name() + " cloth segmenter returned a non-finite confidence");
        }
        mask.bits()[i] = conf[i] > 0.5 ? 1 : 0;
    }
    return mask;
}

DenseposeMap compute_densepose(const RasterImage& img, const DenseposeEstimator& backend) {
    require_image(img);
    DenseposeMap dp = call_backend(backend, [&] { return backend.estimate(img); });
    if (dp.width() != img.width() || dp.height() != img.height()) {
        fail(ErrorCode::contract_violation, backend.name() + " densepose estimator returned the wrong size");
    }
    dp.canonicalize();
    return dp;
}

}  // namespace vfr
