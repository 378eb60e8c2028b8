#pragma once
// The alternating training loop.
//
// One step runs four phases, each with its own tape and Adam update:
//   1. both VAEs on their reconstruction + KL losses,
//   2. the alignment map and the encoders on the alignment loss (posterior
//      means; skipped when alignment is off),
//   3. both discriminators against generator samples,
//   4. both generators against the updated discriminators.
// Tied slots receive one summed gradient per phase. Every random draw of
// step t comes from a stream derived from (seed, purpose, t), so a resumed
// run replays exactly what an uninterrupted one would have done.

#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "xgan/crossgan/config.hpp"
#include "xgan/crossgan/model.hpp"
#include "xgan/errors.hpp"

namespace xgan {

/// What the trainer may see of a dataset: samples of each view, grouped
/// into anonymous pairing groups. Identity labels are not part of it.
struct TrainView {
  Shape sample_shape;
  std::vector<float> a;  // count_a x sample
  std::vector<float> b;
  std::vector<std::vector<std::size_t>> groups_a;
  std::vector<std::vector<std::size_t>> groups_b;

  std::size_t sample_size() const { return shape_size(sample_shape); }
  void validate() const;
};

struct LossReport {
  std::size_t step = 0;
  double l_vae = 0, l_align = 0, l_gan_d1 = 0, l_gan_d2 = 0, l_gan_g = 0, l_total = 0;
  // Per-stream parts.
  double l_vae_a = 0, l_vae_b = 0, l_gan_g1 = 0, l_gan_g2 = 0;
};

inline constexpr const char* kMetricsHeader = "step,l_vae,l_align,l_gan_d1,l_gan_d2,l_gan_g,l_total";
std::string metrics_row(const LossReport& r);

/// Raised when a step produces a non-finite value. The message names the
/// last checkpoint written, if any.
class TrainingAborted : public NumericError {
 public:
  using NumericError::NumericError;
};

class Trainer {
 public:
  Trainer(const ModelConfig& model, const TrainConfig& train);
  /// Continues from a checkpoint. Its stored configuration is used, except
  /// that `iters` may be overridden (0 keeps the stored value).
  static Trainer resume(const std::filesystem::path& checkpoint, std::size_t iters = 0);

  /// Runs step() + 1 on a batch drawn from `data`.
  LossReport train_step(const TrainView& data);

  std::size_t step() const { return step_; }
  CrossGanModel& model() { return model_; }
  const CrossGanModel& model() const { return model_; }
  const TrainConfig& config() const { return train_; }
  std::string config_json() const;
  void save(const std::filesystem::path& path) const;

 private:
  struct Batch {
    Tensor<float> a, b;
  };
  Batch sample_batch(const TrainView& data, std::size_t t) const;
  Rng stream(std::string_view purpose, std::size_t t) const;
  GradMap<float> finish_phase(Tape<float>& tape, const Tensor<float>& loss, std::size_t t);

  CrossGanModel model_;
  TrainConfig train_;
  std::size_t step_ = 0;
};

struct TrainResult {
  std::filesystem::path checkpoint;  // final checkpoint
  std::filesystem::path metrics;     // metrics.csv
  std::vector<LossReport> reports;   // steps run by this call
};

/// Runs steps until trainer.config().iters, writing into out_dir:
/// metrics.csv, checkpoints/step_NNNNNN.xgan every checkpoint_every steps,
/// final.xgan, and samples/step_NNNNNN.ppm grids for image data. When the
/// trainer was resumed, metrics.csv rows after its step are replaced.
TrainResult train(Trainer& trainer, const TrainView& data, const std::filesystem::path& out_dir,
                  const std::function<void(const LossReport&)>& on_step = {});

}  // namespace xgan
