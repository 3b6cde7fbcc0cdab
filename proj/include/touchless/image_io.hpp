#pragma once

// PNG and BMP codecs for 8-bit gray and RGB rasters. Writes are atomic
// (temporary file + rename) and deterministic: no timestamps or other
// run-dependent chunks are emitted.

#include <png.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "touchless/fileio.hpp"
#include "touchless/image.hpp"

namespace touchless {

namespace io_detail {

inline std::string lower_extension(const std::filesystem::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext;
}

inline std::uint32_t le32(const std::uint8_t* p) {
    return p[0] | (p[1] << 8) | (p[2] << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
inline std::uint16_t le16(const std::uint8_t* p) { return static_cast<std::uint16_t>(p[0] | (p[1] << 8)); }

inline void put32(std::vector<std::uint8_t>& b, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
inline void put16(std::vector<std::uint8_t>& b, std::uint16_t v) {
    b.push_back(static_cast<std::uint8_t>(v));
    b.push_back(static_cast<std::uint8_t>(v >> 8));
}

} // namespace io_detail

inline Image decode_png(const std::vector<std::uint8_t>& bytes, const std::string& name = "<memory>") {
    png_image image;
    std::memset(&image, 0, sizeof(image));
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size()))
        throw DataError("PNG decode failed for '" + name + "': " + image.message);
    const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
    image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    const int channels = color ? 3 : 1;
    std::vector<std::uint8_t> data(PNG_IMAGE_SIZE(image));
    // Alpha, if present, is composited onto black.
    png_color background{0, 0, 0};
    if (!png_image_finish_read(&image, &background, data.data(), 0, nullptr)) {
        std::string msg = image.message;
        png_image_free(&image);
        throw DataError("PNG decode failed for '" + name + "': " + msg);
    }
    return Image(static_cast<int>(image.width), static_cast<int>(image.height), channels, std::move(data));
}

inline std::vector<std::uint8_t> encode_png(const Image& img) {
    png_image image;
    std::memset(&image, 0, sizeof(image));
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(img.width());
    image.height = static_cast<png_uint_32>(img.height());
    image.format = img.channels() == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    // Outputs are intermediates for trainer ingest; favour encode speed.
    image.flags = PNG_IMAGE_FLAG_FAST;
    png_alloc_size_t size = 0;
    if (!png_image_write_get_memory_size(image, size, 0, img.data().data(), 0, nullptr))
        throw std::runtime_error(std::string("PNG encode failed: ") + image.message);
    std::vector<std::uint8_t> out(size);
    if (!png_image_write_to_memory(&image, out.data(), &size, 0, img.data().data(), 0, nullptr))
        throw std::runtime_error(std::string("PNG encode failed: ") + image.message);
    out.resize(size);
    return out;
}

/// Decodes uncompressed BMP: 8-bit palettized, 24-bit and 32-bit. A
/// palette whose entries are all gray yields a 1-channel image.
inline Image decode_bmp(const std::vector<std::uint8_t>& b, const std::string& name = "<memory>") {
    using io_detail::le16;
    using io_detail::le32;
    auto fail = [&](const std::string& why) { return DataError("BMP decode failed for '" + name + "': " + why); };
    if (b.size() < 54 || b[0] != 'B' || b[1] != 'M') throw fail("not a BMP file");
    const std::uint32_t offset = le32(&b[10]);
    const std::uint32_t header_size = le32(&b[14]);
    if (header_size < 40) throw fail("unsupported header");
    const auto width = static_cast<std::int32_t>(le32(&b[18]));
    const auto raw_height = static_cast<std::int32_t>(le32(&b[22]));
    const std::uint16_t bpp = le16(&b[28]);
    const std::uint32_t compression = le32(&b[30]);
    std::uint32_t colors_used = le32(&b[46]);
    if (compression != 0 && !(compression == 3 && bpp == 32)) throw fail("compressed BMP not supported");
    if (width < 1 || raw_height == 0) throw fail("invalid dimensions");
    const bool bottom_up = raw_height > 0;
    const int height = bottom_up ? raw_height : -raw_height;
    if (bpp != 8 && bpp != 24 && bpp != 32) throw fail("unsupported bit depth " + std::to_string(bpp));

    const std::size_t stride = ((static_cast<std::size_t>(width) * bpp + 31) / 32) * 4;
    if (offset + stride * height > b.size()) throw fail("truncated pixel data");

    std::vector<std::array<std::uint8_t, 3>> palette;
    bool gray_palette = true;
    if (bpp == 8) {
        if (colors_used == 0) colors_used = 256;
        const std::size_t pal_at = 14 + header_size;
        if (pal_at + 4 * colors_used > offset) throw fail("truncated palette");
        for (std::uint32_t i = 0; i < colors_used; ++i) {
            const std::uint8_t* e = &b[pal_at + 4 * i];
            palette.push_back({e[2], e[1], e[0]});
            gray_palette = gray_palette && e[0] == e[1] && e[1] == e[2];
        }
    }

    const int channels = (bpp == 8 && gray_palette) ? 1 : 3;
    Image img(width, height, channels);
    for (int y = 0; y < height; ++y) {
        const std::uint8_t* row = &b[offset + stride * (bottom_up ? height - 1 - y : y)];
        for (int x = 0; x < width; ++x) {
            if (bpp == 8) {
                const std::uint8_t idx = row[x];
                if (idx >= palette.size()) throw fail("palette index out of range");
                if (channels == 1) {
                    img.at(x, y) = palette[idx][0];
                } else {
                    for (int c = 0; c < 3; ++c) img.at(x, y, c) = palette[idx][c];
                }
            } else {
                const std::uint8_t* px = row + static_cast<std::size_t>(x) * (bpp / 8);
                img.at(x, y, 0) = px[2];
                img.at(x, y, 1) = px[1];
                img.at(x, y, 2) = px[0];
            }
        }
    }
    return img;
}

/// Gray images are written as 8-bit with a gray palette, RGB as 24-bit.
inline std::vector<std::uint8_t> encode_bmp(const Image& img) {
    using io_detail::put16;
    using io_detail::put32;
    const int bpp = img.channels() == 1 ? 8 : 24;
    const std::size_t stride = ((static_cast<std::size_t>(img.width()) * bpp + 31) / 32) * 4;
    const std::uint32_t palette_bytes = bpp == 8 ? 256 * 4 : 0;
    const std::uint32_t offset = 54 + palette_bytes;
    const std::uint32_t file_size = offset + static_cast<std::uint32_t>(stride * img.height());

    std::vector<std::uint8_t> b;
    b.reserve(file_size);
    b.push_back('B');
    b.push_back('M');
    put32(b, file_size);
    put32(b, 0);
    put32(b, offset);
    put32(b, 40);
    put32(b, static_cast<std::uint32_t>(img.width()));
    put32(b, static_cast<std::uint32_t>(img.height()));
    put16(b, 1);
    put16(b, static_cast<std::uint16_t>(bpp));
    put32(b, 0);
    put32(b, static_cast<std::uint32_t>(stride * img.height()));
    put32(b, 2835);
    put32(b, 2835);
    put32(b, bpp == 8 ? 256 : 0);
    put32(b, 0);
    if (bpp == 8) {
        for (int i = 0; i < 256; ++i) {
            const auto v = static_cast<std::uint8_t>(i);
            b.insert(b.end(), {v, v, v, 0});
        }
    }
    for (int y = img.height() - 1; y >= 0; --y) {
        const std::size_t start = b.size();
        for (int x = 0; x < img.width(); ++x) {
            if (bpp == 8) {
                b.push_back(img.at(x, y));
            } else {
                b.push_back(img.at(x, y, 2));
                b.push_back(img.at(x, y, 1));
                b.push_back(img.at(x, y, 0));
            }
        }
        b.resize(start + stride, 0);
    }
    return b;
}

/// Reads a PNG or BMP file, chosen by content signature.
inline Image read_image(const std::filesystem::path& path) {
    const auto bytes = read_binary_file(path);
    if (bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0) return decode_png(bytes, path.string());
    if (bytes.size() >= 2 && bytes[0] == 'B' && bytes[1] == 'M') return decode_bmp(bytes, path.string());
    throw DataError("unsupported image format: '" + path.string() + "'");
}

/// Writes PNG or BMP according to the file extension.
inline void write_image(const Image& img, const std::filesystem::path& path) {
    const std::string ext = io_detail::lower_extension(path);
    std::vector<std::uint8_t> bytes;
    if (ext == ".png") {
        bytes = encode_png(img);
    } else if (ext == ".bmp") {
        bytes = encode_bmp(img);
    } else {
        throw std::invalid_argument("write_image: unsupported extension '" + ext + "'");
    }
    write_file_atomic(path, bytes.data(), bytes.size());
}

} // namespace touchless
