#include "xgan/ppm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include "xgan/errors.hpp"

namespace xgan {

void write_ppm(const std::filesystem::path& path, const PpmImage& img) {
  if (img.rgb.size() != img.width * img.height * 3)
    throw ContractError("write_ppm: buffer does not match " + std::to_string(img.width) + "x" +
                        std::to_string(img.height));
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string() + ": cannot open for writing");
  out << "P6\n" << img.width << ' ' << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.rgb.data()), static_cast<std::streamsize>(img.rgb.size()));
  if (!out) throw IoError(path.string() + ": write failed");
}

namespace {

std::size_t read_header_int(std::istream& in, const std::filesystem::path& path) {
  int c = in.peek();
  while (c != EOF) {
    if (std::isspace(c)) {
      in.get();
    } else if (c == '#') {
      std::string skip;
      std::getline(in, skip);
    } else {
      break;
    }
    c = in.peek();
  }
  std::size_t v = 0;
  if (!(in >> v)) throw IoError(path.string() + ": malformed PPM header");
  return v;
}

}  // namespace

PpmImage read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string() + ": cannot open image");
  char magic[2] = {0, 0};
  in.read(magic, 2);
  if (!in || magic[0] != 'P' || magic[1] != '6') throw IoError(path.string() + ": not a binary PPM (P6)");
  PpmImage img;
  img.width = read_header_int(in, path);
  img.height = read_header_int(in, path);
  const std::size_t maxval = read_header_int(in, path);
  if (maxval != 255) throw IoError(path.string() + ": unsupported maxval " + std::to_string(maxval));
  if (img.width == 0 || img.height == 0 || img.width > 1u << 14 || img.height > 1u << 14)
    throw IoError(path.string() + ": implausible size");
  in.get();  // single whitespace before the raster
  img.rgb.resize(img.width * img.height * 3);
  in.read(reinterpret_cast<char*>(img.rgb.data()), static_cast<std::streamsize>(img.rgb.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.rgb.size())) throw IoError(path.string() + ": truncated raster");
  return img;
}

float byte_to_unit(std::uint8_t p) { return static_cast<float>(p) / 127.5f - 1.0f; }

std::uint8_t unit_to_byte(float v) {
  const float c = std::clamp(v, -1.0f, 1.0f);
  return static_cast<std::uint8_t>(std::lround((c + 1.0f) * 127.5f));
}

PpmImage image_from_chw(std::span<const float> chw, std::size_t height, std::size_t width) {
  const std::size_t plane = height * width;
  if (chw.size() != 3 * plane) throw ShapeError("image_from_chw: expected 3 channels of " + std::to_string(plane));
  PpmImage img{width, height, std::vector<std::uint8_t>(3 * plane)};
  for (std::size_t i = 0; i < plane; ++i)
    for (std::size_t c = 0; c < 3; ++c) img.rgb[3 * i + c] = unit_to_byte(chw[c * plane + i]);
  return img;
}

std::vector<float> chw_from_image(const PpmImage& img) {
  const std::size_t plane = img.width * img.height;
  std::vector<float> out(3 * plane);
  for (std::size_t i = 0; i < plane; ++i)
    for (std::size_t c = 0; c < 3; ++c) out[c * plane + i] = byte_to_unit(img.rgb[3 * i + c]);
  return out;
}

PpmImage tile(const std::vector<PpmImage>& images, std::size_t columns) {
  if (images.empty() || columns == 0) throw ContractError("tile: nothing to tile");
  const std::size_t w = images[0].width, h = images[0].height;
  const std::size_t rows = (images.size() + columns - 1) / columns;
  PpmImage out;
  out.width = columns * (w + 1) - 1;
  out.height = rows * (h + 1) - 1;
  out.rgb.assign(out.width * out.height * 3, 0);
  for (std::size_t k = 0; k < images.size(); ++k) {
    if (images[k].width != w || images[k].height != h) throw ContractError("tile: images differ in size");
    const std::size_t x0 = (k % columns) * (w + 1), y0 = (k / columns) * (h + 1);
    for (std::size_t y = 0; y < h; ++y)
      std::copy_n(images[k].rgb.data() + y * w * 3, w * 3, out.rgb.data() + ((y0 + y) * out.width + x0) * 3);
  }
  return out;
}

}  // namespace xgan
