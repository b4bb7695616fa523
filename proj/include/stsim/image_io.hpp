#pragma once

#include <filesystem>

#include "stsim/core.hpp"

namespace stsim {

/// 8-bit RGB PNG; channel values are clamped to [0,1] and rounded.
void write_png(const std::filesystem::path& path, const RgbImage& img);

/// 8-bit grayscale PNG, nonzero pixels written as 255.
void write_png(const std::filesystem::path& path, const Mask& mask);

/// Reads an 8-bit RGB or grayscale PNG into [0,1] floats.
RgbImage read_png(const std::filesystem::path& path);

}  // namespace stsim
