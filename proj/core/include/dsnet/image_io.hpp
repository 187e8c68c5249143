#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "dsnet/image.hpp"

// Image codecs. PGM (P5 binary, P2 ASCII) is read and written natively; PNG
// (8-bit gray, gray+alpha, RGB, RGBA) is read through libpng. Colour input is
// reduced to luminance 0.299 R + 0.587 G + 0.114 B; alpha is ignored.
namespace dsnet::io {

Image decode_pgm(std::span<const std::uint8_t> bytes);

// "P5\n<width> <height>\n255\n" followed by the rounded, clamped pixel bytes.
std::vector<std::uint8_t> encode_pgm(const Image& img);

Image decode_png(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_png(const Image& img);
// RGB pixels interleaved, 8-bit; used by tests to exercise colour decoding.
std::vector<std::uint8_t> encode_png_rgb(std::size_t height, std::size_t width,
                                         std::span<const std::uint8_t> rgb);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

bool is_supported_image(const std::filesystem::path& path);

// Dispatches on extension (.pgm or .png, case-insensitive). Throws IoError
// for unreadable files and FormatError for malformed content.
Image read_image(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const Image& img);

}  // namespace dsnet::io
