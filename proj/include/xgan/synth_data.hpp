#pragma once
// Procedural two-view identity images.
//
// Each identity is a stack of 2-4 horizontal colour bands with an ellipse
// "head" on top. A view renders it through a colour mix, a brightness gain,
// a fixed offset, per-image sub-pixel jitter and pixel noise.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "xgan/crossgan/trainer.hpp"
#include "xgan/vae.hpp"

namespace xgan {

using Rgb = std::array<double, 3>;

struct IdentitySpec {
  int id = 0;
  /// Band boundaries as fractions of the height: 0 = top, ..., 1 = bottom.
  std::vector<double> band_edges;
  std::vector<Rgb> band_colors;
  double head_cx = 0.5, head_cy = 0.2, head_rx = 0.15, head_ry = 0.12;
  Rgb head_color{};
};

struct ViewTransform {
  std::array<Rgb, 3> channel_mix{Rgb{1, 0, 0}, Rgb{0, 1, 0}, Rgb{0, 0, 1}};
  double brightness = 1.0;
  double shift_x = 0.0;  // pixels
  double shift_y = 0.0;
  double noise_sigma = 0.02;  // in [-1, 1] units
  /// Per-image uniform shift in [-jitter, jitter] pixels on each axis.
  double jitter = 0.75;
};

/// "default", "identity" (no change, no noise) or "hard".
ViewTransform view_preset(std::string_view view_b_preset, View view);

enum class Split { train, test };
std::string to_string(Split s);
std::string to_string(View v);

struct DatasetConfig {
  std::size_t identities = 96;
  std::size_t per_view = 6;
  std::size_t image_size = 32;
  std::uint64_t seed = 7;
  std::string view_b_preset = "default";
  ViewTransform view_a = view_preset("default", View::A);
  ViewTransform view_b = view_preset("default", View::B);
  /// Identities held out for evaluation; default a third.
  std::size_t test_identities() const { return identities / 3; }
  void validate() const;
};

/// A dataset config with both view transforms taken from a preset.
DatasetConfig dataset_config(std::size_t identities, std::size_t per_view, std::uint64_t seed,
                             std::string_view view_b_preset = "default");

void to_json(nlohmann::json& j, const ViewTransform& v);
void from_json(const nlohmann::json& j, ViewTransform& v);
void to_json(nlohmann::json& j, const DatasetConfig& c);
void from_json(const nlohmann::json& j, DatasetConfig& c);

struct Sample {
  int identity = 0;
  View view = View::A;
  Split split = Split::train;
  std::size_t index = 0;
  std::vector<std::uint8_t> rgb;  // interleaved image_size x image_size x 3

  std::string relative_path() const;
};

struct Dataset {
  DatasetConfig config;
  std::vector<Sample> samples;

  /// Planar [-1, 1] floats of one sample.
  std::vector<float> pixels(const Sample& s) const;
  /// Samples of a split and view in storage order.
  std::vector<const Sample*> select(Split split, View view) const;
};

IdentitySpec make_identity(int id, Rng rng);
/// One rendered image; `rng` drives jitter and noise.
std::vector<std::uint8_t> render(const IdentitySpec& ident, const ViewTransform& view, std::size_t size, Rng rng);

Dataset generate_dataset(const DatasetConfig& config);

/// Writes {split}/{view}/{identity:05}_{index:03}.ppm, manifest.csv and
/// dataset.json under dir.
void save_dataset(const Dataset& data, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

/// Training split as anonymous pairing groups (one group per identity, in
/// an order that does not reveal the ids).
TrainView make_train_view(const Dataset& data);

/// 1-D task: view A ~ N(mean_a, sd), view B ~ N(mean_b, sd), one value per
/// group and view.
TrainView toy_train_view(std::size_t groups, double mean_a, double mean_b, double sd, std::uint64_t seed);

}  // namespace xgan
