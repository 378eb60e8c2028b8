#pragma once
// Retrieval evaluation: distance matrices, single-shot CMC with trial
// resampling, latent inversion and pixel agreement.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "xgan/crossgan/model.hpp"
#include "xgan/synth_data.hpp"

namespace xgan {

struct DistanceMatrix {
  std::size_t rows = 0;  // probes
  std::size_t cols = 0;  // gallery candidates
  std::vector<double> values;

  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
};

struct CmcCurve {
  /// rates[r]: fraction of probes whose match ranks within the top r + 1.
  std::vector<double> rates;
  std::size_t trials = 0;
  double map_score = 0.0;

  double rank(std::size_t r) const { return rates.at(std::min(r, rates.size()) - 1); }
};

/// Single-shot CMC. Each trial keeps one candidate column per gallery
/// identity (drawn from rng when an identity has several) and ranks the
/// true match of every probe by ascending distance, ties going to the lower
/// column. Rates and mAP (= mean reciprocal rank) are averaged over trials.
/// Throws ContractError if a probe's identity has no gallery candidate.
CmcCurve cmc(const DistanceMatrix& dist, const std::vector<int>& probe_ids, const std::vector<int>& gallery_ids,
             std::size_t trials, Rng& rng, std::vector<CmcCurve>* per_trial = nullptr);

/// Test split as gallery (view A) and probes (view B).
struct EvalSet {
  Shape sample_shape;
  std::vector<float> gallery;  // all view-A test images
  std::vector<int> gallery_ids;
  std::vector<std::size_t> gallery_index;
  std::vector<float> probes;  // all view-B test images
  std::vector<int> probe_ids;
  std::vector<std::size_t> probe_index;

  std::size_t sample_size() const { return shape_size(sample_shape); }
  Tensor<float> gallery_tensor() const;
  Tensor<float> probe_tensor() const;
};

EvalSet make_eval_set(const Dataset& data);

struct EvalOptions {
  std::size_t trials = 10;
  std::uint64_t seed = 7;
  std::size_t inversion_steps = 200;
  double inversion_lr = 0.05;
  std::size_t inversion_restarts = 3;
  std::size_t quant_levels = 32;
};

/// d(p, g) = ||mu_A(g) - Align(mu_B(p))||. With use_align false the map is
/// replaced by the identity.
DistanceMatrix latent_distances(CrossGanModel& model, const EvalSet& set, bool use_align);

struct InversionResult {
  Tensor<float> z;                 // best code per row
  std::vector<double> loss;        // Euclidean distance at the best code
  std::vector<double> init_loss;   // at the starting point
};

/// Gradient descent on z (N(0, I) start from rng) minimising
/// 1/2 ||g(z) - x||^2 per row with g frozen in eval mode. Returns the best
/// code seen per row. Throws NumericError if a row's distance exceeds ten
/// times its starting distance.
InversionResult latent_inversion(ParameterStore<float>& store, const Network<float>& g, const Tensor<float>& x,
                                 std::size_t steps, double lr, Rng& rng);

/// Pixels quantised to `levels` uniform bins over [-1, 1]; per-pair share
/// of equal bins, averaged over pairs.
double pixel_agreement_ratio(const Tensor<float>& a, const Tensor<float>& b, std::size_t levels = 32);

struct LatentEval {
  DistanceMatrix dist;
  CmcCurve curve;
  std::vector<CmcCurve> per_trial;
};

struct InversionEval {
  DistanceMatrix dist;
  CmcCurve curve;
  std::vector<CmcCurve> per_trial;
  /// Per probe: distance / agreement between g1(z*) and the view-A image
  /// with the same identity and index.
  std::vector<double> transfer_loss;
  std::vector<double> agreement;
  double mean_inv_loss = 0.0;
  double mean_agreement = 0.0;
};

LatentEval evaluate_latent(CrossGanModel& model, const EvalSet& set, const EvalOptions& opts, bool use_align);

/// Probes are inverted through g2 (best of `inversion_restarts` starts),
/// rendered in view A by g1, and matched to the gallery by pixel distance.
InversionEval evaluate_inversion(CrossGanModel& model, const EvalSet& set, const EvalOptions& opts);

/// "rank,rate" rows for ranks 1..gallery size.
void write_cmc_csv(const std::filesystem::path& path, const CmcCurve& curve);

}  // namespace xgan
