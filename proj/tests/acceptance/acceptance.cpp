// Acceptance suite: one PASS/FAIL line per criterion.
//
// The desk-scale training runs behind criteria 6-8 take tens of minutes
// each. They are trained once per work directory and shared; each
// criterion is charged the standalone cost of the runs it depends on plus
// its own evaluation, so the reported runtime is what the criterion would
// take on its own.
//
//   xgan_acceptance [--only 1,2,...] [--work DIR] [--fresh]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "../common/cmc_oracle.hpp"
#include "../common/grad_cases.hpp"
#include "CLI11.hpp"
#include "xgan/crossgan/trainer.hpp"
#include "xgan/nn/checkpoint.hpp"
#include "xgan/reid_eval.hpp"
#include "xgan/synth_data.hpp"

using namespace xgan;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool ok = false;  // the property itself, before the runtime bound
  std::string detail;
  double seconds = 0;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// ---------------------------------------------------------------- runs

struct RunInfo {
  fs::path dir;
  double train_seconds = 0;
};

class Runs {
 public:
  explicit Runs(fs::path work) : work_(std::move(work)) {}

  const Dataset& desk_data() {
    if (!data_) data_ = generate_dataset(DatasetConfig{});
    return *data_;
  }
  const TrainView& desk_view() {
    if (!view_) view_ = make_train_view(desk_data());
    return *view_;
  }

  /// Trains (or reuses) a desk run named `name`.
  RunInfo desk(const std::string& name, bool align, std::size_t k) {
    if (auto it = done_.find(name); it != done_.end()) return it->second;
    ModelConfig mc = model_preset("desk");
    mc.sharing = {k, 1};
    TrainConfig tc = train_preset("desk");
    tc.align = align;
    return get(name, [&](const fs::path& dir) {
      Trainer t(mc, tc);
      train(t, desk_view(), dir, progress(name));
    });
  }

  /// Resumes run `from` at `step` and finishes it under `name`.
  RunInfo resumed(const std::string& name, const RunInfo& from, std::size_t step) {
    if (auto it = done_.find(name); it != done_.end()) return it->second;
    return get(name, [&](const fs::path& dir) {
      char ck[64];
      std::snprintf(ck, sizeof ck, "step_%06zu.xgan", step);
      fs::create_directories(dir);
      // The uninterrupted run's rows up to `step` stand in for the ones the
      // interrupted run would have written before stopping.
      fs::copy_file(from.dir / "metrics.csv", dir / "metrics.csv", fs::copy_options::overwrite_existing);
      Trainer t = Trainer::resume(from.dir / "checkpoints" / ck);
      train(t, desk_view(), dir, progress(name));
    });
  }

 private:
  static std::function<void(const LossReport&)> progress(const std::string& name) {
    return [name, t0 = Clock::now()](const LossReport& r) {
      if (r.step % 250 == 0)
        std::cerr << "  [" << name << "] step " << r.step << " l_total " << r.l_total << " (" << fmt("%.0f", seconds_since(t0))
                  << " s)\n";
    };
  }

  RunInfo get(const std::string& name, const std::function<void(const fs::path&)>& body) {
    RunInfo info{work_ / name, 0};
    const fs::path stamp = info.dir / "train_seconds.txt";
    if (fs::exists(stamp) && fs::exists(info.dir / "final.xgan")) {
      std::ifstream(stamp) >> info.train_seconds;
      std::cerr << "  [" << name << "] reusing " << info.dir << '\n';
    } else {
      fs::remove_all(info.dir);
      const auto t0 = Clock::now();
      body(info.dir);
      info.train_seconds = seconds_since(t0);
      std::ofstream(stamp) << info.train_seconds << '\n';
    }
    done_[name] = info;
    return info;
  }

  fs::path work_;
  std::optional<Dataset> data_;
  std::optional<TrainView> view_;
  std::map<std::string, RunInfo> done_;
};

// ---------------------------------------------------------- criteria

Outcome gradients() {
  const auto t0 = Clock::now();
  std::size_t cases = 0, failed = 0, too_big = 0;
  double worst = 0;
  std::string worst_name;
  auto run = [&](const std::vector<testing::GradCase>& all, bool model) {
    for (const auto& gc : all) {
      ++cases;
      if (model && gc.param_count() > 1000) ++too_big;
      const GradCheckReport r = grad_check(gc.f, gc.params, 1e-5, 1e-4);
      if (!r.pass()) {
        ++failed;
        std::cerr << "  " << gc.name << ": " << r.summary();
      }
      if (r.max_rel_err() > worst) worst = r.max_rel_err(), worst_name = gc.name;
    }
  };
  run(testing::op_cases(), false);
  run(testing::model_cases(), true);
  Outcome o;
  o.ok = failed == 0 && too_big == 0;
  o.detail = std::to_string(cases) + " cases, " + std::to_string(failed) + " failed, worst rel err " +
             fmt("%.2e", worst) + " (" + worst_name + ")" +
             (too_big ? ", " + std::to_string(too_big) + " nets over 1k params" : "");
  o.seconds = seconds_since(t0);
  return o;
}

Outcome kl_divergence() {
  const auto t0 = Clock::now();
  Rng setting(2718, 1);
  std::size_t bad = 0;
  double worst_z = 0;
  constexpr std::size_t kSamples = 1000000;
  for (int s = 0; s < 50; ++s) {
    const std::size_t j = 1 + setting.below(4);
    std::vector<double> mu(j), lv(j), sd(j);
    for (std::size_t i = 0; i < j; ++i) {
      mu[i] = setting.uniform(-2.0, 2.0);
      sd[i] = std::exp(setting.uniform(std::log(0.2), std::log(3.0)));
      lv[i] = 2 * std::log(sd[i]);
    }
    const double kl =
        kl_to_standard_normal(GaussianPosterior<double>{Tensor<double>({1, j}, mu), Tensor<double>({1, j}, lv)}).item();
    // E_q[log q(z) - log p(z)] with z ~ q.
    Rng draw(31415, static_cast<std::uint64_t>(s));
    double sum = 0, sum2 = 0;
    for (std::size_t n = 0; n < kSamples; ++n) {
      double v = 0;
      for (std::size_t i = 0; i < j; ++i) {
        const double e = draw.normal(), z = mu[i] + sd[i] * e;
        v += -std::log(sd[i]) - 0.5 * e * e + 0.5 * z * z;
      }
      sum += v;
      sum2 += v * v;
    }
    const double mean = sum / kSamples;
    const double se = std::sqrt(std::max(0.0, sum2 / kSamples - mean * mean) / kSamples);
    const double zscore = std::abs(mean - kl) / se;
    worst_z = std::max(worst_z, zscore);
    if (zscore > 3.0) ++bad;
  }
  const double ref =
      kl_to_standard_normal(GaussianPosterior<double>{Tensor<double>({1, 1}, {1.0}), Tensor<double>({1, 1}, {0.0})})
          .item();
  Outcome o;
  o.ok = bad == 0 && std::abs(ref - 0.5) <= 1e-2;
  o.detail = "50 settings, " + std::to_string(bad) + " outside 3 SE (worst " + fmt("%.2f", worst_z) +
             " SE); KL(1,1,1) = " + fmt("%.6f", ref);
  o.seconds = seconds_since(t0);
  return o;
}

// Small image model for the tying check: the same five-layer generator and
// four-layer discriminator shapes as desk, on 16 x 16 images.
ModelConfig tying_model(std::size_t k, std::size_t l) {
  ModelConfig c;
  c.size = 16;
  c.latent = 16;
  c.vae_hidden = {64, 64};
  c.g_width = 8;
  c.d_width = 8;
  c.d_hidden = 64;
  c.sharing = {k, l};
  return c;
}

bool same_values(const Tensor<float>& a, const Tensor<float>& b) {
  return a.shape() == b.shape() && std::equal(a.data().begin(), a.data().end(), b.data().begin(),
                                              [](float x, float y) { return std::memcmp(&x, &y, sizeof x) == 0; });
}

Outcome weight_sharing() {
  const auto t0 = Clock::now();
  DatasetConfig dc;
  dc.image_size = 16;
  const TrainView view = make_train_view(generate_dataset(dc));
  constexpr std::size_t kSteps = 500;

  // Part 1: k=4, l=1 for 500 steps; every tied name pair reads identical
  // values and moments, and the untied ones have diverged.
  Trainer tied(tying_model(4, 1), train_preset("desk"));
  for (std::size_t s = 0; s < kSteps; ++s) tied.train_step(view);
  const CrossGanModel& m = tied.model();
  std::size_t tied_pairs = 0, mismatched = 0, untied_equal = 0;
  auto compare = [&](const Network<float>& a, const Network<float>& b, auto is_tied) {
    for (std::size_t i = 0; i < a.spec().depth(); ++i) {
      const auto pa = a.layer_params(i), pb = b.layer_params(i);
      for (std::size_t q = 0; q < pa.size(); ++q) {
        const auto& sa = m.store.slot(pa[q]);
        const auto& sb = m.store.slot(pb[q]);
        const bool eq = same_values(sa.value, sb.value) && same_values(sa.adam_m, sb.adam_m) &&
                        same_values(sa.adam_v, sb.adam_v);
        if (is_tied(i)) {
          ++tied_pairs;
          mismatched += !eq;
        } else if (sa.trainable) {
          untied_equal += same_values(sa.value, sb.value);
        }
      }
    }
  };
  const std::size_t gd = m.g1.spec().depth(), dd = m.f1.spec().depth();
  compare(m.g1, m.g2, [](std::size_t i) { return i < 4; });
  compare(m.f1, m.f2, [dd](std::size_t i) { return i + 1 >= dd; });
  (void)gd;

  // Part 2: k=l=0, alignment off. Stream 1 of the two-stream run against a
  // run that only has stream 1.
  TrainConfig two = train_preset("desk");
  two.align = false;
  TrainConfig one = two;
  one.streams = 1;
  Trainer both(tying_model(0, 0), two), alone(tying_model(0, 0), one);
  std::size_t loss_mismatch = 0;
  for (std::size_t s = 0; s < kSteps; ++s) {
    const LossReport a = both.train_step(view), b = alone.train_step(view);
    loss_mismatch += a.l_vae_a != b.l_vae_a || a.l_gan_d1 != b.l_gan_d1 || a.l_gan_g1 != b.l_gan_g1;
  }
  std::size_t param_mismatch = 0;
  for (const auto& [id, slot] : alone.model().store.slots()) {
    const bool stream1 = id.rfind("vae_a", 0) == 0 || id.rfind("g1", 0) == 0 || id.rfind("f1", 0) == 0;
    if (stream1) param_mismatch += !same_values(slot.value, both.model().store.slot(id).value);
  }

  Outcome o;
  o.ok = tied_pairs > 0 && mismatched == 0 && untied_equal == 0 && loss_mismatch == 0 && param_mismatch == 0;
  o.detail = std::to_string(tied_pairs) + " tied pairs, " + std::to_string(mismatched) + " differ; " +
             std::to_string(untied_equal) + " untied pairs equal; stream-1 loss mismatches " +
             std::to_string(loss_mismatch) + "/" + std::to_string(kSteps) + ", param mismatches " +
             std::to_string(param_mismatch);
  o.seconds = seconds_since(t0);
  return o;
}

Outcome toy_gan() {
  const auto t0 = Clock::now();
  constexpr double kMeanA = 2.0, kMeanB = -2.0;
  const TrainView view = toy_train_view(512, kMeanA, kMeanB, 0.5, 7);
  Trainer t(toy_model_config(), toy_train_config());
  bool finite = true;
  while (t.step() < t.config().iters) {
    const LossReport r = t.train_step(view);
    for (double v : {r.l_vae, r.l_align, r.l_gan_d1, r.l_gan_d2, r.l_gan_g, r.l_total}) finite = finite && std::isfinite(v);
  }
  CrossGanModel& m = t.model();
  Rng rng(7, fnv1a64("toy_eval"));
  const Tensor<float> z = sample_standard_normal<float>(rng, {8192, m.config.latent});
  const ForwardOptions<float> eval{nullptr, BatchNormMode::eval, false};
  auto mean_of = [&](const Network<float>& g) {
    const Tensor<float> y = g.forward(m.store, z, eval);
    double s = 0;
    for (float v : y.data()) s += v;
    return s / static_cast<double>(y.size());
  };
  const double ga = mean_of(m.g1), gb = mean_of(m.g2);
  Outcome o;
  o.ok = finite && std::abs(ga - kMeanA) <= 0.3 && std::abs(gb - kMeanB) <= 0.3;
  o.detail = "after " + std::to_string(t.step()) + " steps: mean g1 " + fmt("%.3f", ga) + " (target 2), g2 " +
             fmt("%.3f", gb) + " (target -2), losses " + (finite ? "finite" : "NON-FINITE");
  o.seconds = seconds_since(t0);
  return o;
}

Outcome cmc_oracle() {
  const auto t0 = Clock::now();
  Rng gen(2024, 5);
  std::size_t mismatches = 0, broken = 0;
  for (int i = 0; i < 200; ++i) {
    const testing::CmcInstance in = testing::random_cmc_instance(gen, 16, 16);
    const std::size_t trials = 1 + gen.below(4);
    Rng r1(77, static_cast<std::uint64_t>(i)), r2(77, static_cast<std::uint64_t>(i));
    std::vector<CmcCurve> per;
    const CmcCurve got = cmc(in.dist, in.probe_ids, in.gallery_ids, trials, r1, &per);
    const CmcCurve want = testing::brute_force_cmc(in, trials, r2);
    mismatches += got.rates != want.rates || got.map_score != want.map_score;
    broken += !testing::cmc_invariants_hold(got);
    for (const auto& c : per) broken += !testing::cmc_invariants_hold(c);
  }
  Outcome o;
  o.ok = mismatches == 0 && broken == 0;
  o.detail = "200 instances, " + std::to_string(mismatches) + " mismatches, " + std::to_string(broken) +
             " curves breaking monotonicity or terminal 1";
  o.seconds = seconds_since(t0);
  return o;
}

Outcome alignment_ablation(Runs& runs) {
  const RunInfo on = runs.desk("align_on_k4_l1", true, 4);
  const RunInfo off = runs.desk("align_off_k4_l1", false, 4);
  const auto t0 = Clock::now();
  const EvalSet set = make_eval_set(runs.desk_data());
  const EvalOptions opts;
  Trainer a = Trainer::resume(on.dir / "final.xgan");
  Trainer b = Trainer::resume(off.dir / "final.xgan");
  const double r_on = evaluate_latent(a.model(), set, opts, true).curve.rank(1);
  const double r_off = evaluate_latent(b.model(), set, opts, false).curve.rank(1);
  const double random = 1.0 / static_cast<double>(std::set<int>(set.gallery_ids.begin(), set.gallery_ids.end()).size());
  Outcome o;
  o.ok = r_on - r_off >= 0.05 && r_on - random >= 0.25;
  o.detail = "latent rank-1 with alignment " + fmt("%.1f%%", 100 * r_on) + ", without " + fmt("%.1f%%", 100 * r_off) +
             ", random " + fmt("%.1f%%", 100 * random);
  o.seconds = on.train_seconds + off.train_seconds + seconds_since(t0);
  return o;
}

Outcome sharing_sweep(Runs& runs) {
  const RunInfo k4 = runs.desk("align_on_k4_l1", true, 4);
  const RunInfo k0 = runs.desk("align_on_k0_l1", true, 0);
  const auto t0 = Clock::now();
  const EvalSet set = make_eval_set(runs.desk_data());
  const EvalOptions opts;
  Trainer a = Trainer::resume(k4.dir / "final.xgan");
  Trainer b = Trainer::resume(k0.dir / "final.xgan");
  const InversionEval e4 = evaluate_inversion(a.model(), set, opts);
  const InversionEval e0 = evaluate_inversion(b.model(), set, opts);
  Outcome o;
  o.ok = e4.mean_inv_loss < e0.mean_inv_loss;
  o.detail = "mean inversion loss k=4 " + fmt("%.3f", e4.mean_inv_loss) + ", k=0 " + fmt("%.3f", e0.mean_inv_loss) +
             " (agreement " + fmt("%.3f", e4.mean_agreement) + " vs " + fmt("%.3f", e0.mean_agreement) + ")";
  o.seconds = k4.train_seconds + k0.train_seconds + seconds_since(t0);
  return o;
}

Outcome determinism(Runs& runs) {
  const RunInfo a = runs.desk("align_on_k4_l1", true, 4);
  const RunInfo again = runs.desk("align_on_k4_l1_rerun", true, 4);
  const RunInfo res = runs.resumed("align_on_k4_l1_resumed", a, 1500);
  const auto t0 = Clock::now();
  const std::string csv = read_file(a.dir / "metrics.csv");
  const bool rerun_csv = csv == read_file(again.dir / "metrics.csv");
  const bool rerun_ckpt = read_file(a.dir / "final.xgan") == read_file(again.dir / "final.xgan");
  const bool resume_csv = csv == read_file(res.dir / "metrics.csv");
  const bool resume_ckpt = read_file(a.dir / "final.xgan") == read_file(res.dir / "final.xgan");
  Outcome o;
  o.ok = !csv.empty() && rerun_csv && rerun_ckpt && resume_csv && resume_ckpt;
  auto yn = [](bool b) { return b ? "identical" : "DIFFERENT"; };
  o.detail = std::string("rerun metrics ") + yn(rerun_csv) + ", checkpoint " + yn(rerun_ckpt) +
             "; resume@1500 metrics " + yn(resume_csv) + ", checkpoint " + yn(resume_ckpt);
  o.seconds = a.train_seconds + again.train_seconds + res.train_seconds + seconds_since(t0);
  return o;
}

Outcome alignment_floor() {
  const auto t0 = Clock::now();
  Rng rng(1618, 9);
  std::size_t below = 0, wrong_equality = 0, floored_batches = 0;
  for (int b = 0; b < 10000; ++b) {
    const std::size_t n = 1 + rng.below(16), j = 1 + rng.below(8);
    const double tau = rng.uniform(0.05, 2.0);
    // Mix pairs near and far from each other so both sides of the floor occur.
    const double spread = rng.below(2) == 0 ? 0.1 : 1.0;
    std::vector<float> z(n * j), za(n * j);
    for (std::size_t i = 0; i < n * j; ++i) {
      z[i] = static_cast<float>(rng.uniform(-1, 1));
      za[i] = static_cast<float>(z[i] + spread * rng.uniform(-1, 1) / std::sqrt(double(j)));
    }
    const float loss = alignment_loss(Tensor<float>({n, j}, z), Tensor<float>({n, j}, za), {tau}).item();
    // Oracle on the same float data.
    bool all_under = true;
    for (std::size_t r = 0; r < n; ++r) {
      float d2 = 0;
      for (std::size_t c = 0; c < j; ++c) {
        const float d = z[r * j + c] - za[r * j + c];
        d2 += d * d;
      }
      all_under = all_under && d2 <= static_cast<float>(tau);
    }
    floored_batches += all_under;
    below += loss < static_cast<float>(tau);
    wrong_equality += (loss == static_cast<float>(tau)) != all_under;
  }
  Outcome o;
  o.ok = below == 0 && wrong_equality == 0;
  o.detail = "10000 batches (" + std::to_string(floored_batches) + " fully floored): " + std::to_string(below) +
             " below tau, " + std::to_string(wrong_equality) + " equality mismatches";
  o.seconds = seconds_since(t0);
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::vector<int> only;
  std::string work = "acceptance_runs";
  bool fresh = false;
  app.add_option("--only", only, "Criteria to run")->delimiter(',');
  app.add_option("--work", work, "Directory for the shared training runs");
  app.add_flag("--fresh", fresh, "Discard earlier training runs");
  CLI11_PARSE(app, argc, argv);
  if (fresh) fs::remove_all(work);
  fs::create_directories(work);
  Runs runs{fs::path(work)};

  struct Criterion {
    int id;
    const char* name;
    double bound;  // seconds
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> all = {
      {1, "gradient correctness", 120, gradients},
      {2, "analytic KL vs Monte-Carlo", 60, kl_divergence},
      {3, "weight-sharing invariant", 180, weight_sharing},
      {4, "toy GAN means", 120, toy_gan},
      {5, "CMC oracle equivalence", 30, cmc_oracle},
      {6, "alignment ablation", 1200, [&] { return alignment_ablation(runs); }},
      {7, "weight-sharing sweep", 1800, [&] { return sharing_sweep(runs); }},
      {8, "determinism and resume", 600, [&] { return determinism(runs); }},
      {9, "alignment loss floor", 10, alignment_floor},
  };

  std::vector<std::string> lines;
  bool all_pass = true;
  for (const auto& c : all) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    std::cerr << "criterion " << c.id << " (" << c.name << ") ...\n";
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.ok = false;
      o.detail = std::string("error: ") + e.what();
    }
    const bool in_time = o.seconds <= c.bound;
    const bool pass = o.ok && in_time;
    all_pass = all_pass && pass;
    std::ostringstream line;
    line << "criterion " << c.id << " " << (pass ? "PASS" : "FAIL") << "  " << c.name << ": " << o.detail << "; "
         << fmt("%.1f", o.seconds) << " s (bound " << fmt("%.0f", c.bound) << " s"
         << (in_time ? "" : ", EXCEEDED") << ")";
    std::cout << line.str() << std::endl;
    lines.push_back(line.str());
  }
  std::cout << "\nsummary\n";
  for (const auto& l : lines) std::cout << l << '\n';
  return all_pass ? 0 : 1;
}
