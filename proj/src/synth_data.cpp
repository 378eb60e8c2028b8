#include "xgan/synth_data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "xgan/errors.hpp"
#include "xgan/ppm.hpp"

namespace xgan {

namespace fs = std::filesystem;

ViewTransform view_preset(std::string_view preset, View view) {
  ViewTransform v;
  if (preset == "identity") {
    v.noise_sigma = 0.0;
    v.jitter = 0.0;
    return v;
  }
  if (preset != "default" && preset != "hard")
    throw ConfigError("unknown view preset '" + std::string(preset) + "' (expected default, identity or hard)");
  if (view == View::A) return v;
  if (preset == "default") {
    v.channel_mix = {Rgb{0.3, 0, 0.7}, Rgb{0, 1, 0}, Rgb{0.7, 0, 0.3}};
    v.brightness = 0.85;
    v.shift_x = 1.0;
  } else {
    v.channel_mix = {Rgb{0.1, 0.2, 0.7}, Rgb{0.3, 0.6, 0.1}, Rgb{0.7, 0.1, 0.2}};
    v.brightness = 0.7;
    v.shift_x = 2.0;
    v.shift_y = 1.0;
    v.noise_sigma = 0.05;
  }
  return v;
}

std::string to_string(Split s) { return s == Split::train ? "train" : "test"; }
std::string to_string(View v) { return v == View::A ? "A" : "B"; }

void DatasetConfig::validate() const {
  if (identities < 2) throw ConfigError("need at least 2 identities, got " + std::to_string(identities));
  if (per_view == 0) throw ConfigError("per_view must be positive");
  if (per_view > 999) throw ConfigError("per_view must fit three digits");
  if (identities > 99999) throw ConfigError("identities must fit five digits");
  if (image_size < 8) throw ConfigError("image_size must be at least 8");
}

DatasetConfig dataset_config(std::size_t identities, std::size_t per_view, std::uint64_t seed,
                             std::string_view view_b_preset) {
  DatasetConfig c;
  c.identities = identities;
  c.per_view = per_view;
  c.seed = seed;
  c.view_b_preset = std::string(view_b_preset);
  c.view_a = view_preset(view_b_preset, View::A);
  c.view_b = view_preset(view_b_preset, View::B);
  return c;
}

void to_json(nlohmann::json& j, const ViewTransform& v) {
  j = {{"channel_mix", v.channel_mix}, {"brightness", v.brightness}, {"shift_x", v.shift_x},
       {"shift_y", v.shift_y},         {"noise_sigma", v.noise_sigma}, {"jitter", v.jitter}};
}

void from_json(const nlohmann::json& j, ViewTransform& v) {
  j.at("channel_mix").get_to(v.channel_mix);
  j.at("brightness").get_to(v.brightness);
  j.at("shift_x").get_to(v.shift_x);
  j.at("shift_y").get_to(v.shift_y);
  j.at("noise_sigma").get_to(v.noise_sigma);
  j.at("jitter").get_to(v.jitter);
}

void to_json(nlohmann::json& j, const DatasetConfig& c) {
  j = {{"identities", c.identities}, {"per_view", c.per_view},           {"image_size", c.image_size},
       {"seed", c.seed},             {"view_b_preset", c.view_b_preset}, {"view_a", c.view_a},
       {"view_b", c.view_b},         {"test_identities", c.test_identities()}};
}

void from_json(const nlohmann::json& j, DatasetConfig& c) {
  j.at("identities").get_to(c.identities);
  j.at("per_view").get_to(c.per_view);
  j.at("image_size").get_to(c.image_size);
  j.at("seed").get_to(c.seed);
  j.at("view_b_preset").get_to(c.view_b_preset);
  j.at("view_a").get_to(c.view_a);
  j.at("view_b").get_to(c.view_b);
}

std::string Sample::relative_path() const {
  char name[32];
  std::snprintf(name, sizeof name, "%05d_%03zu.ppm", identity, index);
  return to_string(split) + "/" + to_string(view) + "/" + name;
}

std::vector<float> Dataset::pixels(const Sample& s) const {
  return chw_from_image(PpmImage{config.image_size, config.image_size, s.rgb});
}

std::vector<const Sample*> Dataset::select(Split split, View view) const {
  std::vector<const Sample*> out;
  for (const auto& s : samples)
    if (s.split == split && s.view == view) out.push_back(&s);
  return out;
}

IdentitySpec make_identity(int id, Rng rng) {
  IdentitySpec s;
  s.id = id;
  const std::size_t bands = 2 + rng.below(3);
  std::vector<double> cuts;
  for (std::size_t i = 0; i + 1 < bands; ++i) cuts.push_back(rng.uniform(0.25, 0.95));
  std::sort(cuts.begin(), cuts.end());
  s.band_edges.push_back(0.0);
  s.band_edges.insert(s.band_edges.end(), cuts.begin(), cuts.end());
  s.band_edges.push_back(1.0);
  for (std::size_t i = 0; i < bands; ++i) s.band_colors.push_back({rng.uniform(), rng.uniform(), rng.uniform()});
  s.head_cx = rng.uniform(0.4, 0.6);
  s.head_cy = rng.uniform(0.12, 0.22);
  s.head_rx = rng.uniform(0.10, 0.18);
  s.head_ry = rng.uniform(0.08, 0.14);
  s.head_color = {rng.uniform(0.5, 1.0), rng.uniform(0.3, 0.8), rng.uniform(0.2, 0.6)};
  return s;
}

namespace {

Rgb base_color(const IdentitySpec& ident, double u, double v) {
  const double dx = (u - ident.head_cx) / ident.head_rx, dy = (v - ident.head_cy) / ident.head_ry;
  if (dx * dx + dy * dy <= 1.0) return ident.head_color;
  const double vc = std::clamp(v, 0.0, 1.0);
  std::size_t band = 0;
  while (band + 2 < ident.band_edges.size() && vc >= ident.band_edges[band + 1]) ++band;
  return ident.band_colors[band];
}

}  // namespace

std::vector<std::uint8_t> render(const IdentitySpec& ident, const ViewTransform& view, std::size_t size, Rng rng) {
  const double jx = view.jitter > 0 ? rng.uniform(-view.jitter, view.jitter) : 0.0;
  const double jy = view.jitter > 0 ? rng.uniform(-view.jitter, view.jitter) : 0.0;
  const double inv = 1.0 / static_cast<double>(size);
  std::vector<std::uint8_t> out(size * size * 3);
  for (std::size_t py = 0; py < size; ++py)
    for (std::size_t px = 0; px < size; ++px) {
      Rgb c{0, 0, 0};
      for (int sy = 0; sy < 2; ++sy)
        for (int sx = 0; sx < 2; ++sx) {
          const double u = (static_cast<double>(px) + 0.25 + 0.5 * sx - view.shift_x - jx) * inv;
          const double v = (static_cast<double>(py) + 0.25 + 0.5 * sy - view.shift_y - jy) * inv;
          const Rgb b = base_color(ident, u, v);
          for (int k = 0; k < 3; ++k) c[k] += 0.25 * b[k];
        }
      for (int k = 0; k < 3; ++k) {
        const Rgb& row = view.channel_mix[k];
        const double mixed = view.brightness * (row[0] * c[0] + row[1] * c[1] + row[2] * c[2]);
        double value = 2.0 * mixed - 1.0;
        if (view.noise_sigma > 0) value += view.noise_sigma * rng.normal();
        out[(py * size + px) * 3 + k] = unit_to_byte(static_cast<float>(value));
      }
    }
  return out;
}

namespace {

// Identity ids in a seed-determined order; the first third are test ids.
std::vector<int> identity_order(const DatasetConfig& c) {
  std::vector<int> ids(c.identities);
  std::iota(ids.begin(), ids.end(), 0);
  Rng rng(c.seed, fnv1a64("split"));
  for (std::size_t i = ids.size(); i > 1; --i) std::swap(ids[i - 1], ids[rng.below(i)]);
  return ids;
}

}  // namespace

Dataset generate_dataset(const DatasetConfig& config) {
  config.validate();
  Dataset data;
  data.config = config;
  const std::vector<int> order = identity_order(config);
  std::vector<Split> split(config.identities, Split::train);
  for (std::size_t i = 0; i < config.test_identities(); ++i) split[static_cast<std::size_t>(order[i])] = Split::test;

  const Rng ident_rng(config.seed, fnv1a64("identity"));
  const Rng sample_rng(config.seed, fnv1a64("sample"));
  for (std::size_t id = 0; id < config.identities; ++id) {
    const IdentitySpec ident = make_identity(static_cast<int>(id), ident_rng.split(id));
    for (View view : {View::A, View::B})
      for (std::size_t k = 0; k < config.per_view; ++k) {
        Sample s;
        s.identity = static_cast<int>(id);
        s.view = view;
        s.split = split[id];
        s.index = k;
        const std::uint64_t sub = mix64(id, (view == View::A ? 0u : 1000u) + k);
        s.rgb = render(ident, view == View::A ? config.view_a : config.view_b, config.image_size, sample_rng.split(sub));
        data.samples.push_back(std::move(s));
      }
  }
  return data;
}

void save_dataset(const Dataset& data, const fs::path& dir) {
  std::error_code ec;
  for (const char* split : {"train", "test"})
    for (const char* view : {"A", "B"}) fs::create_directories(dir / split / view, ec);
  if (ec) throw IoError(dir.string() + ": cannot create directories: " + ec.message());
  std::ostringstream manifest;
  manifest << "path,identity,view,split\n";
  for (const auto& s : data.samples) {
    const std::string rel = s.relative_path();
    write_ppm(dir / rel, PpmImage{data.config.image_size, data.config.image_size, s.rgb});
    manifest << rel << ',' << s.identity << ',' << to_string(s.view) << ',' << to_string(s.split) << '\n';
  }
  std::ofstream m(dir / "manifest.csv", std::ios::trunc);
  m << manifest.str();
  if (!m) throw IoError((dir / "manifest.csv").string() + ": write failed");
  std::ofstream j(dir / "dataset.json", std::ios::trunc);
  j << nlohmann::json(data.config).dump(2) << '\n';
  if (!j) throw IoError((dir / "dataset.json").string() + ": write failed");
}

Dataset load_dataset(const fs::path& dir) {
  Dataset data;
  {
    const fs::path p = dir / "dataset.json";
    std::ifstream in(p);
    if (!in) throw IoError(p.string() + ": cannot open");
    try {
      nlohmann::json::parse(in).get_to(data.config);
    } catch (const nlohmann::json::exception& e) {
      throw IoError(p.string() + ": " + e.what());
    }
  }
  const fs::path mpath = dir / "manifest.csv";
  std::ifstream in(mpath);
  if (!in) throw IoError(mpath.string() + ": cannot open");
  std::string line;
  if (!std::getline(in, line) || line != "path,identity,view,split")
    throw IoError(mpath.string() + ": unexpected header '" + line + "'");
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    const std::string where = mpath.string() + ":" + std::to_string(lineno);
    if (f.size() != 4) throw IoError(where + ": expected 4 fields");
    Sample s;
    try {
      s.identity = std::stoi(f[1]);
    } catch (const std::exception&) {
      throw IoError(where + ": bad identity '" + f[1] + "'");
    }
    if (f[2] != "A" && f[2] != "B") throw IoError(where + ": bad view '" + f[2] + "'");
    if (f[3] != "train" && f[3] != "test") throw IoError(where + ": bad split '" + f[3] + "'");
    s.view = f[2] == "A" ? View::A : View::B;
    s.split = f[3] == "train" ? Split::train : Split::test;
    const std::string stem = fs::path(f[0]).stem().string();
    const auto us = stem.find('_');
    if (us == std::string::npos) throw IoError(where + ": bad file name '" + f[0] + "'");
    s.index = std::stoul(stem.substr(us + 1));
    if (s.relative_path() != f[0]) throw IoError(where + ": path '" + f[0] + "' disagrees with its columns");
    const PpmImage img = read_ppm(dir / f[0]);
    if (img.width != data.config.image_size || img.height != data.config.image_size)
      throw IoError((dir / f[0]).string() + ": size " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                    " does not match dataset.json");
    s.rgb = img.rgb;
    data.samples.push_back(std::move(s));
  }
  return data;
}

TrainView make_train_view(const Dataset& data) {
  TrainView v;
  v.sample_shape = {3, data.config.image_size, data.config.image_size};
  std::map<int, std::size_t> group_of;
  const std::vector<int> order = identity_order(data.config);
  for (int id : order) {
    const bool is_train = std::any_of(data.samples.begin(), data.samples.end(),
                                      [&](const Sample& s) { return s.identity == id && s.split == Split::train; });
    if (!is_train) continue;
    group_of[id] = v.groups_a.size();
    v.groups_a.emplace_back();
    v.groups_b.emplace_back();
  }
  std::size_t na = 0, nb = 0;
  for (const auto& s : data.samples) {
    if (s.split != Split::train) continue;
    const std::size_t g = group_of.at(s.identity);
    const std::vector<float> px = data.pixels(s);
    if (s.view == View::A) {
      v.a.insert(v.a.end(), px.begin(), px.end());
      v.groups_a[g].push_back(na++);
    } else {
      v.b.insert(v.b.end(), px.begin(), px.end());
      v.groups_b[g].push_back(nb++);
    }
  }
  return v;
}

TrainView toy_train_view(std::size_t groups, double mean_a, double mean_b, double sd, std::uint64_t seed) {
  TrainView v;
  v.sample_shape = {1};
  Rng ra(seed, fnv1a64("toy_a")), rb(seed, fnv1a64("toy_b"));
  for (std::size_t g = 0; g < groups; ++g) {
    v.a.push_back(static_cast<float>(mean_a + sd * ra.normal()));
    v.b.push_back(static_cast<float>(mean_b + sd * rb.normal()));
    v.groups_a.push_back({g});
    v.groups_b.push_back({g});
  }
  return v;
}

}  // namespace xgan
