#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace vfr {

/// Value convention of a raster. `byte` holds intensities in [0, 255] (file
/// boundary), `signed_unit` holds [-1, 1] (network boundary).
enum class PixelRange { byte, signed_unit };

/// Interleaved (HWC) raster with 1 or 3 channels.
class RasterImage {
  public:
    RasterImage() = default;
    RasterImage(int width, int height, int channels, PixelRange range = PixelRange::byte, float fill = 0.0f);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    int channels() const noexcept { return channels_; }
    PixelRange range() const noexcept { return range_; }
    bool empty() const noexcept { return data_.empty(); }
    std::size_t pixel_count() const noexcept { return static_cast<std::size_t>(width_) * height_; }

    float& at(int x, int y, int c = 0) { return data_[index(x, y, c)]; }
    float at(int x, int y, int c = 0) const { return data_[index(x, y, c)]; }

    std::span<float> data() noexcept { return data_; }
    std::span<const float> data() const noexcept { return data_; }

    /// Rescales values between the two range conventions (no rounding).
    RasterImage converted(PixelRange target) const;

    bool same_size(const RasterImage& other) const noexcept {
        return width_ == other.width_ && height_ == other.height_;
    }

    friend bool operator==(const RasterImage&, const RasterImage&) = default;

  private:
    std::size_t index(int x, int y, int c) const noexcept {
        return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
    }

    int width_ = 0;
    int height_ = 0;
    int channels_ = 0;
    PixelRange range_ = PixelRange::byte;
    std::vector<float> data_;
};

/// Per-pixel sampling offsets in pixel units: output(x, y) reads the source
/// at (x + dx, y + dy).
struct FlowField {
    int width = 0;
    int height = 0;
    std::vector<double> dx;
    std::vector<double> dy;

    FlowField() = default;
    FlowField(int w, int h, double fill_dx = 0.0, double fill_dy = 0.0)
        : width(w), height(h), dx(static_cast<std::size_t>(w) * h, fill_dx),
          dy(static_cast<std::size_t>(w) * h, fill_dy) {}

    std::size_t index(int x, int y) const noexcept { return static_cast<std::size_t>(y) * width + x; }
    bool is_finite() const;

    friend bool operator==(const FlowField&, const FlowField&) = default;
};

/// Round half away from zero and clamp into [0, 255].
unsigned char to_byte(double value);

RasterImage rgb_to_gray(const RasterImage& img);
RasterImage gray_to_rgb(const RasterImage& img);

/// Bilinear resampling with half-pixel centres (corners not aligned) and
/// edge clamping.
RasterImage resize_bilinear(const RasterImage& img, int width, int height);

/// Level 0 is the input; each further level is a 2x2 mean pool of the previous
/// one (odd trailing rows/columns are dropped).
std::vector<RasterImage> downsample_pyramid(const RasterImage& img, int levels);

/// Backward warp with bilinear sampling; taps outside the frame read 0.
RasterImage warp_by_flow(const RasterImage& img, const FlowField& flow);

}  // namespace vfr
