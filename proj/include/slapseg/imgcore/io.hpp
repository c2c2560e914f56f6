#pragma once

#include <filesystem>

#include "slapseg/imgcore/image.hpp"

namespace slapseg::img {

/// Binary PGM (P5, maxval 255).
GrayImage read_pgm(const std::filesystem::path& path);
void write_pgm(const GrayImage& img, const std::filesystem::path& path);

/// 8-bit grayscale PNG. Color or 16-bit inputs are converted on read.
GrayImage read_png(const std::filesystem::path& path);
void write_png(const GrayImage& img, const std::filesystem::path& path);

/// Encodes to an in-memory PNG stream (used by the annotation service).
std::vector<std::uint8_t> encode_png(const GrayImage& img);

/// Dispatches on the extension (.png / .pgm).
GrayImage read_image(const std::filesystem::path& path);
void write_image(const GrayImage& img, const std::filesystem::path& path);

}  // namespace slapseg::img
