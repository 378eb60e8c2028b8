#pragma once
// Grid sweeps over alignment on/off and the sharing depths k, l.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "xgan/crossgan/config.hpp"
#include "xgan/reid_eval.hpp"

namespace xgan {

struct AblationCell {
  bool align = true;
  std::size_t k = 4;
  std::size_t l = 1;
  /// Directory-safe name, e.g. "align-on_k4_l1".
  std::string key() const;
};

/// Parses "k=0..5,l=0..5,align=on|off". Each axis takes a single value, an
/// inclusive range a..b or alternatives separated by '|'. Omitted axes keep
/// the defaults (align on, k=4, l=1). Throws ConfigError.
std::vector<AblationCell> parse_grid(std::string_view spec);

/// seed XOR a hash of the cell key.
std::uint64_t cell_seed(std::uint64_t seed, const AblationCell& cell);

struct CellResult {
  AblationCell cell;
  std::uint64_t seed = 0;
  bool ok = false;
  bool skipped = false;  // loaded from an earlier run
  std::string error;
  double rank1 = 0, rank10 = 0, map = 0, mean_inv_loss = 0;
};

struct AblationOptions {
  ModelConfig model;
  TrainConfig train;
  EvalOptions eval;
  std::size_t threads = 1;
  /// Train cells that have no checkpoint yet; otherwise such cells fail.
  bool train_missing = true;
};

/// Runs every cell under out_dir/cells/<key>/ (training, then latent and
/// inversion evaluation) on up to opts.threads workers. Cells with a
/// result.json are not rerun. Failures are captured per cell.
std::vector<CellResult> ablation_report(const Dataset& data, const std::vector<AblationCell>& cells,
                                        const AblationOptions& opts, const std::filesystem::path& out_dir);

/// "align,k,l,rank1,rank10,map,mean_inv_loss" rows for successful cells.
void write_ablation_csv(const std::filesystem::path& path, const std::vector<CellResult>& results);

/// XGAN_THREADS if set to a positive integer, else `fallback`.
std::size_t threads_from_env(std::size_t fallback = 1);

}  // namespace xgan
