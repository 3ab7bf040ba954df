#include "vfr/imaging/raster.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "vfr/error.hpp"

namespace vfr {

RasterImage::RasterImage(int width, int height, int channels, PixelRange range, float fill)
    : width_(width), height_(height), channels_(channels), range_(range) {
    require(width > 0 && height > 0, ErrorCode::invalid_input, "raster dimensions must be positive");
    require(channels == 1 || channels == 3, ErrorCode::invalid_input,
            "raster must have 1 or 3 channels, got " + std::to_string(channels));
    data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
}

RasterImage RasterImage::converted(PixelRange target) const {
    if (target == range_) return *this;
    RasterImage out = *this;
    out.range_ = target;
    for (float& v : out.data_) {
        v = target == PixelRange::signed_unit ? v / 127.5f - 1.0f : (v + 1.0f) * 127.5f;
    }
    return out;
}

bool FlowField::is_finite() const {
    auto finite = [](double v) { return std::isfinite(v); };
    return std::all_of(dx.begin(), dx.end(), finite) && std::all_of(dy.begin(), dy.end(), finite);
}

unsigned char to_byte(double value) {
    const double r = std::round(value);  // std::round is half-away-from-zero
    return static_cast<unsigned char>(std::clamp(r, 0.0, 255.0));
}

RasterImage rgb_to_gray(const RasterImage& img) {
    require(img.channels() == 3, ErrorCode::invalid_input,
            "rgb_to_gray expects 3 channels, got " + std::to_string(img.channels()));
    RasterImage out(img.width(), img.height(), 1, img.range());
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            const double g = 0.299 * img.at(x, y, 0) + 0.587 * img.at(x, y, 1) + 0.114 * img.at(x, y, 2);
            out.at(x, y) = img.range() == PixelRange::byte ? static_cast<float>(to_byte(g)) : static_cast<float>(g);
        }
    }
    return out;
}

RasterImage gray_to_rgb(const RasterImage& img) {
    require(img.channels() == 1, ErrorCode::invalid_input, "gray_to_rgb expects 1 channel");
    RasterImage out(img.width(), img.height(), 3, img.range());
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            for (int c = 0; c < 3; ++c) out.at(x, y, c) = img.at(x, y);
        }
    }
    return out;
}

RasterImage resize_bilinear(const RasterImage& img, int width, int height) {
    require(width >= 1 && height >= 1, ErrorCode::invalid_input, "resize target must be at least 1x1");
    require(!img.empty(), ErrorCode::invalid_input, "resize of an empty raster");
    if (width == img.width() && height == img.height()) return img;

    RasterImage out(width, height, img.channels(), img.range());
    const double sx = static_cast<double>(img.width()) / width;
    const double sy = static_cast<double>(img.height()) / height;
    for (int y = 0; y < height; ++y) {
        const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, img.height() - 1.0);
        const int y0 = static_cast<int>(std::floor(fy));
        const int y1 = std::min(y0 + 1, img.height() - 1);
        const double wy = fy - y0;
        for (int x = 0; x < width; ++x) {
            const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, img.width() - 1.0);
            const int x0 = static_cast<int>(std::floor(fx));
            const int x1 = std::min(x0 + 1, img.width() - 1);
            const double wx = fx - x0;
            for (int c = 0; c < img.channels(); ++c) {
                const double top = (1 - wx) * img.at(x0, y0, c) + wx * img.at(x1, y0, c);
                const double bottom = (1 - wx) * img.at(x0, y1, c) + wx * img.at(x1, y1, c);
                out.at(x, y, c) = static_cast<float>((1 - wy) * top + wy * bottom);
            }
        }
    }
    return out;
}

std::vector<RasterImage> downsample_pyramid(const RasterImage& img, int levels) {
    require(levels >= 1, ErrorCode::invalid_input, "pyramid needs at least one level");
    const int need = 1 << (levels - 1);
    require(img.width() >= need && img.height() >= need, ErrorCode::invalid_input,
            "image " + std::to_string(img.width()) + "x" + std::to_string(img.height()) + " too small for " +
                std::to_string(levels) + " pyramid levels");

    std::vector<RasterImage> pyramid{img};
    for (int level = 1; level < levels; ++level) {
        const RasterImage& prev = pyramid.back();
        RasterImage next(prev.width() / 2, prev.height() / 2, prev.channels(), prev.range());
        for (int y = 0; y < next.height(); ++y) {
            for (int x = 0; x < next.width(); ++x) {
                for (int c = 0; c < prev.channels(); ++c) {
                    const double sum = static_cast<double>(prev.at(2 * x, 2 * y, c)) + prev.at(2 * x + 1, 2 * y, c) +
                                       prev.at(2 * x, 2 * y + 1, c) + prev.at(2 * x + 1, 2 * y + 1, c);
                    next.at(x, y, c) = static_cast<float>(sum / 4.0);
                }
            }
        }
        pyramid.push_back(std::move(next));
    }
    return pyramid;
}

RasterImage warp_by_flow(const RasterImage& img, const FlowField& flow) {
    require(flow.width == img.width() && flow.height == img.height(), ErrorCode::invalid_input,
            "flow field size does not match image size");
    RasterImage out(img.width(), img.height(), img.channels(), img.range());
    const int w = img.width();
    const int h = img.height();
    auto tap = [&](int x, int y, int c) -> double {
        return (x < 0 || y < 0 || x >= w || y >= h) ? 0.0 : static_cast<double>(img.at(x, y, c));
    };
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t i = flow.index(x, y);
            const double px = x + flow.dx[i];
            const double py = y + flow.dy[i];
            const double fx0 = std::floor(px);
            const double fy0 = std::floor(py);
            const double ax = px - fx0;
            const double ay = py - fy0;
            // Offsets far outside the frame would overflow int; they read 0 anyway.
            if (fx0 < -2.0 || fy0 < -2.0 || fx0 > w + 1.0 || fy0 > h + 1.0) continue;
            const int x0 = static_cast<int>(fx0);
            const int y0 = static_cast<int>(fy0);
            for (int c = 0; c < img.channels(); ++c) {
                const double v = (1 - ax) * (1 - ay) * tap(x0, y0, c) + ax * (1 - ay) * tap(x0 + 1, y0, c) +
                                 (1 - ax) * ay * tap(x0, y0 + 1, c) + ax * ay * tap(x0 + 1, y0 + 1, c);
                out.at(x, y, c) = static_cast<float>(v);
            }
        }
    }
    return out;
}

}  // namespace vfr
