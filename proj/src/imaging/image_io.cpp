#include "vfr/imaging/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <csetjmp>
#include <cctype>
#include <cstdlib>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

// jpeglib.h relies on size_t/FILE being declared first.
#include <jpeglib.h>

#include "vfr/error.hpp"

namespace vfr {

namespace {

bool is_png(std::span<const std::uint8_t> bytes) {
    return bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0;
}

bool is_jpeg(std::span<const std::uint8_t> bytes) {
    return bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8 && bytes[2] == 0xFF;
}

RasterImage decode_png(std::span<const std::uint8_t> bytes) {
    png_image image;
    std::memset(&image, 0, sizeof(image));
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
        fail(ErrorCode::invalid_input, std::string("PNG decode failed: ") + image.message);
    }
    const bool gray = (image.format & PNG_FORMAT_FLAG_COLOR) == 0 && (image.format & PNG_FORMAT_FLAG_COLORMAP) == 0;
    image.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
    std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(image));
    // Composite any alpha over white so transparent product shots read as white background.
    png_color background{255, 255, 255};
    if (!png_image_finish_read(&image, &background, buffer.data(), 0, nullptr)) {
        std::string msg = image.message;
        png_image_free(&image);
        fail(ErrorCode::invalid_input, "PNG decode failed: " + msg);
    }
    const int channels = gray ? 1 : 3;
    RasterImage out(static_cast<int>(image.width), static_cast<int>(image.height), channels);
    std::copy(buffer.begin(), buffer.end(), out.data().begin());
    return out;
}

struct JpegErrorManager {
    jpeg_error_mgr base;
    std::jmp_buf jump;
    char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
    auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
    (*cinfo->err->format_message)(cinfo, err->message);
    std::longjmp(err->jump, 1);
}

RasterImage decode_jpeg(std::span<const std::uint8_t> bytes) {
    jpeg_decompress_struct cinfo{};
    JpegErrorManager jerr{};
    cinfo.err = jpeg_std_error(&jerr.base);
    jerr.base.error_exit = jpeg_error_exit;
    std::vector<std::uint8_t> pixels;
    int width = 0;
    int height = 0;
    int channels = 0;
    if (setjmp(jerr.jump)) {
        jpeg_destroy_decompress(&cinfo);
        fail(ErrorCode::invalid_input, std::string("JPEG decode failed: ") + jerr.message);
    }
    jpeg_create_decompress(&cinfo);
    jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = cinfo.jpeg_color_space == JCS_GRAYSCALE ? JCS_GRAYSCALE : JCS_RGB;
    jpeg_start_decompress(&cinfo);
    width = static_cast<int>(cinfo.output_width);
    height = static_cast<int>(cinfo.output_height);
    channels = cinfo.output_components;
    pixels.resize(static_cast<std::size_t>(width) * height * channels);
    while (cinfo.output_scanline < cinfo.output_height) {
        JSAMPROW row = pixels.data() + static_cast<std::size_t>(cinfo.output_scanline) * width * channels;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);

    RasterImage out(width, height, channels);
    std::copy(pixels.begin(), pixels.end(), out.data().begin());
    return out;
}

std::vector<std::uint8_t> to_byte_buffer(const RasterImage& img) {
    const RasterImage bytes = img.converted(PixelRange::byte);
    std::vector<std::uint8_t> out(bytes.data().size());
    std::transform(bytes.data().begin(), bytes.data().end(), out.begin(), [](float v) { return to_byte(v); });
    return out;
}

struct PngWriteBuffer {
    Bytes bytes;
};

void png_write_to_vector(png_structp png, png_bytep data, png_size_t length) {
    auto* buffer = static_cast<PngWriteBuffer*>(png_get_io_ptr(png));
    buffer->bytes.insert(buffer->bytes.end(), data, data + length);
}

struct PngReadCursor {
    std::span<const std::uint8_t> bytes;
    std::size_t offset = 0;
};

void png_read_from_span(png_structp png, png_bytep out, png_size_t length) {
    auto* cursor = static_cast<PngReadCursor*>(png_get_io_ptr(png));
    if (cursor->offset + length > cursor->bytes.size()) png_error(png, "truncated PNG stream");
    std::memcpy(out, cursor->bytes.data() + cursor->offset, length);
    cursor->offset += length;
}

}  // namespace

Bytes read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::not_found, "cannot open " + path.string());
    return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::io, "cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorCode::io, "short write to " + path.string());
}

RasterImage decode_image(std::span<const std::uint8_t> bytes) {
    if (is_png(bytes)) return decode_png(bytes);
    if (is_jpeg(bytes)) return decode_jpeg(bytes);
    fail(ErrorCode::invalid_input, "unrecognized image format (expected PNG or JPEG)");
}

RasterImage load_image(const std::filesystem::path& path) {
    const Bytes bytes = read_file(path);
    try {
        return decode_image(bytes);
    } catch (const Error& e) {
        throw Error(e.code(), path.string() + ": " + e.what());
    }
}

Bytes encode_png(const RasterImage& img) {
    require(!img.empty(), ErrorCode::invalid_input, "cannot encode an empty raster");
    png_image image;
    std::memset(&image, 0, sizeof(image));
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(img.width());
    image.height = static_cast<png_uint_32>(img.height());
    image.format = img.channels() == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
    const std::vector<std::uint8_t> pixels = to_byte_buffer(img);
    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&image, nullptr, &size, 0, pixels.data(), 0, nullptr)) {
        fail(ErrorCode::io, std::string("PNG encode failed: ") + image.message);
    }
    Bytes out(size);
    if (!png_image_write_to_memory(&image, out.data(), &size, 0, pixels.data(), 0, nullptr)) {
        fail(ErrorCode::io, std::string("PNG encode failed: ") + image.message);
    }
    out.resize(size);
    return out;
}

Bytes encode_jpeg(const RasterImage& img, int quality) {
    require(!img.empty(), ErrorCode::invalid_input, "cannot encode an empty raster");
    std::vector<std::uint8_t> pixels = to_byte_buffer(img);
    jpeg_compress_struct cinfo{};
    JpegErrorManager jerr{};
    cinfo.err = jpeg_std_error(&jerr.base);
    jerr.base.error_exit = jpeg_error_exit;
    unsigned char* mem = nullptr;
    unsigned long mem_size = 0;
    if (setjmp(jerr.jump)) {
        jpeg_destroy_compress(&cinfo);
        std::free(mem);
        fail(ErrorCode::io, std::string("JPEG encode failed: ") + jerr.message);
    }
    jpeg_create_compress(&cinfo);
    jpeg_mem_dest(&cinfo, &mem, &mem_size);
    cinfo.image_width = static_cast<JDIMENSION>(img.width());
    cinfo.image_height = static_cast<JDIMENSION>(img.height());
    cinfo.input_components = img.channels();
    cinfo.in_color_space = img.channels() == 1 ? JCS_GRAYSCALE : JCS_RGB;
    jpeg_set_defaults(&cinfo);
    jpeg_set_quality(&cinfo, quality, TRUE);
    jpeg_start_compress(&cinfo, TRUE);
    const std::size_t stride = static_cast<std::size_t>(img.width()) * img.channels();
    while (cinfo.next_scanline < cinfo.image_height) {
        JSAMPROW row = pixels.data() + cinfo.next_scanline * stride;
        jpeg_write_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_compress(&cinfo);
    Bytes out(mem, mem + mem_size);
    jpeg_destroy_compress(&cinfo);
    std::free(mem);
    return out;
}

void save_image(const std::filesystem::path& path, const RasterImage& img) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    const Bytes bytes = (ext == ".jpg" || ext == ".jpeg") ? encode_jpeg(img) : encode_png(img);
    write_file(path, bytes);
}

Bytes encode_png_indexed(int width, int height, std::span<const std::uint8_t> indices,
                         std::span<const PaletteEntry> palette) {
    require(width > 0 && height > 0, ErrorCode::invalid_input, "indexed PNG needs positive size");
    require(indices.size() == static_cast<std::size_t>(width) * height, ErrorCode::invalid_input,
            "index buffer size does not match dimensions");
    require(!palette.empty() && palette.size() <= 256, ErrorCode::invalid_input, "palette must hold 1..256 entries");

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        fail(ErrorCode::io, "libpng allocation failed");
    }
    PngWriteBuffer buffer;
    std::vector<png_color> colors(palette.size());
    for (std::size_t i = 0; i < palette.size(); ++i) colors[i] = {palette[i][0], palette[i][1], palette[i][2]};
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        fail(ErrorCode::io, "indexed PNG encode failed");
    }
    png_set_write_fn(png, &buffer, png_write_to_vector, nullptr);
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
                 PNG_COLOR_TYPE_PALETTE, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_set_PLTE(png, info, colors.data(), static_cast<int>(colors.size()));
    png_write_info(png, info);
    for (int y = 0; y < height; ++y) {
        png_write_row(png, indices.data() + static_cast<std::size_t>(y) * width);
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return std::move(buffer.bytes);
}

IndexedImage decode_png_indexed(std::span<const std::uint8_t> bytes) {
    require(is_png(bytes), ErrorCode::invalid_input, "not a PNG stream");
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail(ErrorCode::io, "libpng allocation failed");
    }
    PngReadCursor cursor{bytes, 0};
    IndexedImage out;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail(ErrorCode::invalid_input, "indexed PNG decode failed");
    }
    png_set_read_fn(png, &cursor, png_read_from_span);
    png_read_info(png, info);
    const int color_type = png_get_color_type(png, info);
    const int bit_depth = png_get_bit_depth(png, info);
    if ((color_type != PNG_COLOR_TYPE_PALETTE && color_type != PNG_COLOR_TYPE_GRAY) || bit_depth > 8) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail(ErrorCode::invalid_input, "expected an 8-bit palette or gray PNG for a label map");
    }
    if (bit_depth < 8) png_set_packing(png);
    png_read_update_info(png, info);
    out.width = static_cast<int>(png_get_image_width(png, info));
    out.height = static_cast<int>(png_get_image_height(png, info));
    out.indices.resize(static_cast<std::size_t>(out.width) * out.height);
    std::vector<png_bytep> rows(out.height);
    for (int y = 0; y < out.height; ++y) rows[y] = out.indices.data() + static_cast<std::size_t>(y) * out.width;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return out;
}

}  // namespace vfr
