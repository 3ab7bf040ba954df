#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "vfr/imaging/raster.hpp"

namespace vfr {

using Bytes = std::vector<std::uint8_t>;

Bytes read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

/// Decodes PNG or JPEG (sniffed from the signature) into a byte-range raster.
/// Alpha is dropped; palettes are expanded; gray stays single channel.
RasterImage decode_image(std::span<const std::uint8_t> bytes);
RasterImage load_image(const std::filesystem::path& path);

/// Lossless encode; signed-unit rasters are mapped to bytes first.
Bytes encode_png(const RasterImage& img);
Bytes encode_jpeg(const RasterImage& img, int quality = 95);

/// Writes PNG, or JPEG when the extension is .jpg/.jpeg.
void save_image(const std::filesystem::path& path, const RasterImage& img);

using PaletteEntry = std::array<std::uint8_t, 3>;

/// Single-channel indexed PNG: pixel values are palette indices.
Bytes encode_png_indexed(int width, int height, std::span<const std::uint8_t> indices,
                         std::span<const PaletteEntry> palette);

struct IndexedImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> indices;
};

/// Reads raw indices from a palette PNG (or values from an 8-bit gray PNG)
/// without any palette expansion.
IndexedImage decode_png_indexed(std::span<const std::uint8_t> bytes);

}  // namespace vfr
