#pragma once

#include <filesystem>

#include "coordsr/image.hpp"

namespace coordsr {

/// Reads any PNG as 8-bit grayscale, normalized to [0,1].
ImageGrid read_png_gray(const std::filesystem::path& path);

/// Writes an 8-bit grayscale PNG; values are clamped to [0,1] and rounded.
/// No text chunks or other metadata are emitted.
void write_png_gray(const std::filesystem::path& path, const ImageGrid& img);

/// Loads .png or .ft1 by extension.
ImageGrid read_image(const std::filesystem::path& path);

}  // namespace coordsr
