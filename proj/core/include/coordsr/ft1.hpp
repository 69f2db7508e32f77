#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "coordsr/image.hpp"
#include "coordsr/tensor.hpp"

namespace coordsr {

/// FT1 tensor file: magic "FT01", u8 rank, rank x u32 LE extents, then the
/// row-major f32 LE payload.
std::vector<unsigned char> encode_ft1(const Tensor& t);
Tensor decode_ft1(const std::vector<unsigned char>& bytes);

void write_ft1(const std::filesystem::path& path, const Tensor& t);
Tensor read_ft1(const std::filesystem::path& path);

/// Images are stored as rank-2 [rows, cols] tensors.
void write_image_ft1(const std::filesystem::path& path, const ImageGrid& img);
ImageGrid read_image_ft1(const std::filesystem::path& path);

}  // namespace coordsr
