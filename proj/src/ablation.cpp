#include "xgan/ablation.hpp"

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <thread>

#include "xgan/crossgan/trainer.hpp"
#include "xgan/errors.hpp"
#include "xgan/nn/checkpoint.hpp"

namespace xgan {

namespace fs = std::filesystem;

std::string AblationCell::key() const {
  return std::string("align-") + (align ? "on" : "off") + "_k" + std::to_string(k) + "_l" + std::to_string(l);
}

namespace {

std::vector<std::size_t> parse_counts(std::string_view axis, std::string_view v) {
  auto number = [&](std::string_view s) {
    std::size_t pos = 0;
    const std::string str(s);
    unsigned long n = 0;
    try {
      n = std::stoul(str, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos == 0 || pos != str.size()) throw ConfigError("grid: bad value '" + str + "' for " + std::string(axis));
    return static_cast<std::size_t>(n);
  };
  std::vector<std::size_t> out;
  if (const auto dots = v.find(".."); dots != std::string_view::npos) {
    const std::size_t a = number(v.substr(0, dots)), b = number(v.substr(dots + 2));
    if (a > b) throw ConfigError("grid: empty range '" + std::string(v) + "'");
    for (std::size_t i = a; i <= b; ++i) out.push_back(i);
    return out;
  }
  std::size_t start = 0;
  while (start <= v.size()) {
    const auto bar = v.find('|', start);
    out.push_back(number(v.substr(start, bar == std::string_view::npos ? std::string_view::npos : bar - start)));
    if (bar == std::string_view::npos) break;
    start = bar + 1;
  }
  return out;
}

}  // namespace

std::vector<AblationCell> parse_grid(std::string_view spec) {
  std::vector<bool> aligns{true};
  std::vector<std::size_t> ks{4}, ls{1};
  std::size_t start = 0;
  while (start < spec.size()) {
    auto comma = spec.find(',', start);
    if (comma == std::string_view::npos) comma = spec.size();
    const std::string_view part = spec.substr(start, comma - start);
    start = comma + 1;
    const auto eq = part.find('=');
    if (eq == std::string_view::npos) throw ConfigError("grid: expected axis=values, got '" + std::string(part) + "'");
    const std::string_view axis = part.substr(0, eq), values = part.substr(eq + 1);
    if (axis == "k") {
      ks = parse_counts(axis, values);
    } else if (axis == "l") {
      ls = parse_counts(axis, values);
    } else if (axis == "align") {
      aligns.clear();
      std::size_t s = 0;
      while (true) {
        const auto bar = values.find('|', s);
        const std::string_view v = values.substr(s, bar == std::string_view::npos ? std::string_view::npos : bar - s);
        if (v == "on")
          aligns.push_back(true);
        else if (v == "off")
          aligns.push_back(false);
        else
          throw ConfigError("grid: align takes on|off, got '" + std::string(v) + "'");
        if (bar == std::string_view::npos) break;
        s = bar + 1;
      }
    } else {
      throw ConfigError("grid: unknown axis '" + std::string(axis) + "'");
    }
  }
  std::vector<AblationCell> cells;
  for (bool a : aligns)
    for (std::size_t k : ks)
      for (std::size_t l : ls) cells.push_back({a, k, l});
  return cells;
}

std::uint64_t cell_seed(std::uint64_t seed, const AblationCell& cell) { return seed ^ fnv1a64(cell.key()); }

namespace {

nlohmann::json result_json(const CellResult& r) {
  return {{"align", r.cell.align}, {"k", r.cell.k},   {"l", r.cell.l},         {"seed", r.seed},
          {"rank1", r.rank1},      {"rank10", r.rank10}, {"map", r.map}, {"mean_inv_loss", r.mean_inv_loss}};
}

CellResult run_cell(const EvalSet& eval_set, const TrainView& view, const AblationCell& cell,
                    const AblationOptions& opts, const fs::path& out_dir) {
  CellResult r;
  r.cell = cell;
  r.seed = cell_seed(opts.train.seed, cell);
  const fs::path dir = out_dir / "cells" / cell.key();
  const fs::path result_path = dir / "result.json";
  try {
    if (fs::exists(result_path)) {
      std::ifstream in(result_path);
      const auto j = nlohmann::json::parse(in);
      r.rank1 = j.at("rank1").get<double>();
      r.rank10 = j.at("rank10").get<double>();
      r.map = j.at("map").get<double>();
      r.mean_inv_loss = j.at("mean_inv_loss").get<double>();
      r.ok = true;
      r.skipped = true;
      return r;
    }
    const fs::path ckpt = dir / "final.xgan";
    if (!fs::exists(ckpt)) {
      if (!opts.train_missing) throw CheckpointError("missing checkpoint for cell " + cell.key() + ": " + ckpt.string());
      ModelConfig mc = opts.model;
      mc.sharing = {cell.k, cell.l};
      TrainConfig tc = opts.train;
      tc.align = cell.align;
      tc.seed = r.seed;
      Trainer trainer(mc, tc);
      train(trainer, view, dir);
    }
    Trainer trained = Trainer::resume(ckpt);
    CrossGanModel& model = trained.model();
    EvalOptions eo = opts.eval;
    eo.seed = r.seed;
    const LatentEval latent = evaluate_latent(model, eval_set, eo, trained.config().align);
    const InversionEval inv = evaluate_inversion(model, eval_set, eo);
    r.rank1 = latent.curve.rank(1);
    r.rank10 = latent.curve.rank(10);
    r.map = latent.curve.map_score;
    r.mean_inv_loss = inv.mean_inv_loss;
    write_cmc_csv(dir / "cmc_latent.csv", latent.curve);
    write_cmc_csv(dir / "cmc_inversion.csv", inv.curve);
    std::ofstream out(result_path, std::ios::trunc);
    out << result_json(r).dump(2) << '\n';
    if (!out) throw IoError(result_path.string() + ": write failed");
    r.ok = true;
  } catch (const std::exception& e) {
    r.ok = false;
    r.error = e.what();
  }
  return r;
}

}  // namespace

std::vector<CellResult> ablation_report(const Dataset& data, const std::vector<AblationCell>& cells,
                                        const AblationOptions& opts, const fs::path& out_dir) {
  if (cells.empty()) throw ConfigError("ablation: empty grid");
  const EvalSet eval_set = make_eval_set(data);
  const TrainView view = make_train_view(data);
  std::vector<CellResult> results(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++)
      results[i] = run_cell(eval_set, view, cells[i], opts, out_dir);
  };
  const std::size_t n = std::max<std::size_t>(1, std::min(opts.threads, cells.size()));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  return results;
}

void write_ablation_csv(const fs::path& path, const std::vector<CellResult>& results) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(path.string() + ": cannot open for writing");
  out << "align,k,l,rank1,rank10,map,mean_inv_loss\n";
  char buf[256];
  for (const auto& r : results) {
    if (!r.ok) continue;
    std::snprintf(buf, sizeof buf, "%s,%zu,%zu,%.6f,%.6f,%.6f,%.6f\n", r.cell.align ? "on" : "off", r.cell.k, r.cell.l,
                  r.rank1, r.rank10, r.map, r.mean_inv_loss);
    out << buf;
  }
  if (!out) throw IoError(path.string() + ": write failed");
}

std::size_t threads_from_env(std::size_t fallback) {
  const char* v = std::getenv("XGAN_THREADS");
  if (v == nullptr) return fallback;
  char* end = nullptr;
  const long n = std::strtol(v, &end, 10);
  return (end != v && *end == '\0' && n > 0) ? static_cast<std::size_t>(n) : fallback;
}

}  // namespace xgan
