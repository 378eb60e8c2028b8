#pragma once
// Binary PPM (P6, maxval 255) images and conversions to [-1, 1] tensors.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace xgan {

struct PpmImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> rgb;  // interleaved, row-major
};

void write_ppm(const std::filesystem::path& path, const PpmImage& img);
/// Throws IoError naming the path on missing or malformed files.
PpmImage read_ppm(const std::filesystem::path& path);

/// Byte p -> p / 127.5 - 1.
float byte_to_unit(std::uint8_t p);
/// Value in [-1, 1] (clamped) -> nearest byte.
std::uint8_t unit_to_byte(float v);

/// Planar CHW floats (3 channels) -> interleaved image.
PpmImage image_from_chw(std::span<const float> chw, std::size_t height, std::size_t width);
/// Interleaved image -> planar CHW floats in [-1, 1].
std::vector<float> chw_from_image(const PpmImage& img);

/// Tiles equally sized images row by row with a 1-pixel black gutter.
PpmImage tile(const std::vector<PpmImage>& images, std::size_t columns);

}  // namespace xgan
