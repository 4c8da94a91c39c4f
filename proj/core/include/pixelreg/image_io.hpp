#pragma once

#include <filesystem>

#include "pixelreg/image.hpp"

namespace pixelreg::data {

// Reads binary PGM (P5, maxval 255) or 8-bit PNG (grayscale, or RGB reduced
// to its green channel), dispatching on the file's magic bytes. Values come
// back as raw/255.
Image load_grayscale(const std::filesystem::path& path);

// Writers quantize with round(v * 255) after clamping to [0,1].
void save_pgm(const std::filesystem::path& path, const Image& img);
void save_png(const std::filesystem::path& path, const Image& img);

}  // namespace pixelreg::data
