#include "coordsr/ft1.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include "coordsr/errors.hpp"

namespace coordsr {

namespace {

constexpr char kMagic[4] = {'F', 'T', '0', '1'};

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xffu));
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

std::vector<unsigned char> encode_ft1(const Tensor& t) {
  std::vector<unsigned char> out;
  out.reserve(5 + 4 * t.shape().size() + 4 * t.numel());
  out.insert(out.end(), kMagic, kMagic + 4);
  out.push_back(static_cast<unsigned char>(t.rank()));
  for (int e : t.shape()) put_u32(out, static_cast<std::uint32_t>(e));
  for (float v : t.data()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

Tensor decode_ft1(const std::vector<unsigned char>& bytes) {
  if (bytes.size() < 5 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw ConfigError("not an FT1 tensor (bad magic)");
  }
  const int rank = bytes[4];
  if (rank > 4) throw ConfigError("FT1 rank " + std::to_string(rank) + " exceeds 4");
  std::size_t pos = 5;
  if (bytes.size() < pos + 4u * rank) throw ConfigError("truncated FT1 header");
  Shape shape(rank);
  for (int i = 0; i < rank; ++i, pos += 4) shape[i] = static_cast<int>(get_u32(&bytes[pos]));
  const std::size_t n = shape_numel(shape);
  if (bytes.size() != pos + 4 * n) throw ConfigError("FT1 payload size does not match header");
  std::vector<float> data(n);
  for (std::size_t i = 0; i < n; ++i, pos += 4) data[i] = std::bit_cast<float>(get_u32(&bytes[pos]));
  return Tensor(std::move(shape), std::move(data));
}

void write_ft1(const std::filesystem::path& path, const Tensor& t) {
  const auto bytes = encode_ft1(t);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

Tensor read_ft1(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)),
                                   std::istreambuf_iterator<char>());
  try {
    return decode_ft1(bytes);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void write_image_ft1(const std::filesystem::path& path, const ImageGrid& img) {
  write_ft1(path, Tensor({img.rows(), img.cols()},
                         std::vector<float>(img.pixels().begin(), img.pixels().end())));
}

ImageGrid read_image_ft1(const std::filesystem::path& path) {
  return ImageGrid::from_tensor(read_ft1(path));
}

}  // namespace coordsr
