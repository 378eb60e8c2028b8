#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "../common/grad_cases.hpp"
#include "doctest.h"
#include "xgan/crossgan/losses.hpp"
#include "xgan/errors.hpp"
#include "xgan/nn/checkpoint.hpp"
#include "xgan/synth_data.hpp"

using namespace xgan;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("xgan_unit_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::vector<float> values(const Tensor<float>& t) { return {t.data().begin(), t.data().end()}; }

bool same_store(const ParameterStore<float>& a, const ParameterStore<float>& b) {
  if (a.slot_ids() != b.slot_ids()) return false;
  for (const auto& [id, slot] : a.slots())
    if (values(slot.value) != values(b.slot(id).value)) return false;
  return true;
}

ModelConfig small_image_config(std::size_t k, std::size_t l) {
  ModelConfig c;
  c.size = 8;
  c.latent = 6;
  c.vae_hidden = {16};
  c.g_width = 4;
  c.d_width = 4;
  c.d_hidden = 8;
  c.sharing = {k, l};
  return c;
}

TrainConfig short_run(std::size_t iters, bool align = true) {
  TrainConfig t;
  t.batch = 8;
  t.iters = iters;
  t.align = align;
  t.checkpoint_every = 5;
  t.sample_every = 1000;
  return t;
}

}  // namespace

TEST_CASE("discriminator and generator losses") {
  const Tensor<double> real({2, 1}, {0.9, 0.6}), fake({2, 1}, {0.2, 0.5});
  const double d = -(std::log(0.9) + std::log(0.6)) / 2 - (std::log(0.8) + std::log(0.5)) / 2;
  CHECK(discriminator_loss(real, fake).item() == doctest::Approx(d));
  CHECK(generator_loss(fake).item() == doctest::Approx(-(std::log(0.2) + std::log(0.5)) / 2));
  CHECK(generator_loss(fake, true).item() == doctest::Approx((std::log(0.8) + std::log(0.5)) / 2));
  // Clamped before the log.
  const Tensor<double> zero({1, 1}, {0.0});
  CHECK(generator_loss(zero).item() == doctest::Approx(-std::log(kProbClamp)));
  CHECK(std::isfinite(discriminator_loss(zero, Tensor<double>({1, 1}, {1.0})).item()));
}

TEST_CASE("a discriminator at one half costs 2 log 2 per stream") {
  const Tensor<double> half({4, 1}, {0.5, 0.5, 0.5, 0.5});
  const double d = discriminator_loss(half, half).item();
  CHECK(std::abs(d - 2 * std::log(2.0)) < 1e-6);
  CHECK(std::abs(2 * d - 4 * std::log(2.0)) < 1e-6);
  // Near-perfect discriminator: clamped, close to zero, never negative.
  const double p = discriminator_loss(Tensor<double>({1, 1}, {1.0}), Tensor<double>({1, 1}, {0.0})).item();
  CHECK(p >= 0.0);
  CHECK(p < 1e-6);
}

TEST_CASE("feature matching compares batch means") {
  const Tensor<double> a({2, 2}, {1, 2, 3, 4}), b({2, 2}, {0, 0, 2, 2});
  // Means (2, 3) and (1, 1).
  CHECK(feature_matching_loss(a, b).item() == doctest::Approx(1.0 + 4.0));
  CHECK(feature_matching_loss(a, a).item() == 0.0);
  // Scaling both feature sets by c scales the loss by c^2.
  CHECK(feature_matching_loss(scale(a, 3.0), scale(b, 3.0)).item() == doctest::Approx(9.0 * 5.0));
}

TEST_CASE("each training phase only reaches its own parameters") {
  CrossGanModel m = build_model(small_image_config(4, 1), 2);
  ParameterStore<float>& store = m.store;
  Rng r(1, 1);
  const Tensor<float> xa = sample_standard_normal<float>(r, {4, 3, 8, 8});
  const Tensor<float> xb = sample_standard_normal<float>(r, {4, 3, 8, 8});
  auto prefixes = [](const GradMap<float>& g) {
    std::set<std::string> p;
    for (const auto& [id, t] : g) p.insert(id.substr(0, id.find('.')));
    return p;
  };
  {
    Tape<float> tape;
    Rng ea(2, 1), eb(2, 2);
    const auto l = vae_loss_pair(store, m.vae_a, m.vae_b, xa, xb, ea, eb, {&tape});
    CHECK(prefixes(tape.backward(l.total)) == std::set<std::string>{"vae_a", "vae_b"});
  }
  {
    Tape<float> tape;
    const auto pa = encode(store, m.vae_a, xa, {&tape}), pb = encode(store, m.vae_b, xb, {&tape});
    const auto l = alignment_loss(pa.mu, align(store, m.align, pb.mu, {&tape}), {1e-6});
    CHECK(prefixes(tape.backward(l)) == std::set<std::string>{"align", "vae_a", "vae_b"});
  }
  const Tensor<float> z = sample_standard_normal<float>(r, {4, 6});
  {
    Tape<float> tape;
    const ForwardOptions<float> frozen{nullptr, BatchNormMode::train, false};
    const auto fake = m.g1.forward(store, z, frozen);
    const auto l = discriminator_loss(m.f1.forward(store, xa, {&tape}), m.f1.forward(store, fake, {&tape}));
    // f1 owns its untied layers; the tied last layer lives under "f".
    CHECK(prefixes(tape.backward(l)) == std::set<std::string>{"f", "f1"});
  }
  {
    Tape<float> tape;
    const auto l = generator_loss(m.f2.forward(store, m.g2.forward(store, z, {&tape}), {}));
    CHECK(prefixes(tape.backward(l)) == std::set<std::string>{"g", "g2"});
  }
}

TEST_CASE("adversarial loss gradients pass the finite-difference check") {
  for (const auto& gc : testing::model_cases()) {
    if (gc.name.rfind("l_gan", 0) != 0) continue;
    const auto r = grad_check(gc.f, gc.params);
    INFO(gc.name << ": " << r.summary());
    CHECK(r.pass());
  }
}

TEST_CASE("configs round-trip through JSON and validate") {
  ModelConfig m = small_image_config(3, 2);
  m.vae_hidden = {7, 9};
  nlohmann::json j = m;
  const auto m2 = j.get<ModelConfig>();
  CHECK(nlohmann::json(m2) == j);

  TrainConfig t = train_preset("paper");
  CHECK(t.batch == 128);
  CHECK(t.iters == 30000);
  t.feature_matching = true;
  t.tau = 0.25;
  j = t;
  CHECK(nlohmann::json(j.get<TrainConfig>()) == j);

  CHECK(train_preset("desk").batch == 32);
  CHECK(train_preset("desk").iters == 3000);
  CHECK_THROWS_AS(train_preset("laptop"), ConfigError);

  TrainConfig bad;
  bad.batch = 7;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = TrainConfig{};
  bad.streams = 1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad.align = false;
  CHECK_NOTHROW(bad.validate());

  ModelConfig deep = small_image_config(6, 1);
  CHECK_THROWS_WITH_AS(deep.validate(), doctest::Contains("k=6"), ConfigError);
  deep.sharing = {1, 6};
  CHECK_THROWS_AS(deep.validate(), ConfigError);
}

TEST_CASE("the model ties the first k generator and last l discriminator layers") {
  CrossGanModel m = build_model(small_image_config(3, 2), 5);
  const std::size_t gd = m.g1.spec().depth(), dd = m.f1.spec().depth();
  for (std::size_t i = 0; i < gd; ++i) {
    const auto p1 = m.g1.layer_params(i), p2 = m.g2.layer_params(i);
    for (std::size_t q = 0; q < p1.size(); ++q)
      CHECK((m.store.resolve(p1[q]) == m.store.resolve(p2[q])) == (i < 3));
  }
  for (std::size_t i = 0; i < dd; ++i) {
    const auto p1 = m.f1.layer_params(i), p2 = m.f2.layer_params(i);
    for (std::size_t q = 0; q < p1.size(); ++q)
      CHECK((m.store.resolve(p1[q]) == m.store.resolve(p2[q])) == (i + 2 >= dd));
  }
  // Same seed, same initial values.
  CrossGanModel again = build_model(small_image_config(3, 2), 5);
  CHECK(same_store(m.store, again.store));
}

TEST_CASE("training is deterministic and keeps tied layers identical") {
  const ModelConfig mc = small_image_config(4, 1);
  const DatasetConfig dc = dataset_config(6, 2, 3);
  auto dcfg = dc;
  dcfg.image_size = 8;
  const TrainView view = make_train_view(generate_dataset(dcfg));
  Trainer a(mc, short_run(3)), b(mc, short_run(3));
  for (int i = 0; i < 3; ++i) {
    const auto ra = a.train_step(view), rb = b.train_step(view);
    CHECK(ra.l_total == rb.l_total);
    CHECK(std::isfinite(ra.l_total));
    CHECK(ra.l_align >= 1.0);
  }
  CHECK(same_store(a.model().store, b.model().store));
  const auto& g1 = a.model().g1;
  const auto& g2 = a.model().g2;
  for (std::size_t i = 0; i < 4; ++i) {
    const auto p1 = g1.layer_params(i), p2 = g2.layer_params(i);
    for (std::size_t q = 0; q < p1.size(); ++q)
      CHECK(values(a.model().store.value(p1[q])) == values(a.model().store.value(p2[q])));
  }
}

TEST_CASE("resuming from a checkpoint reproduces the uninterrupted run") {
  const ModelConfig mc = toy_model_config();
  const TrainView view = toy_train_view(64, 0.0, 2.0, 0.5, 1);
  const fs::path full = temp_dir("resume_full"), part = temp_dir("resume_part");
  Trainer straight(mc, short_run(10));
  const TrainResult r = train(straight, view, full);
  CHECK(r.reports.size() == 10);
  CHECK(fs::exists(full / "checkpoints" / "step_000005.xgan"));
  CHECK(fs::exists(r.checkpoint));

  fs::copy(full / "metrics.csv", part / "metrics.csv");
  Trainer resumed = Trainer::resume(full / "checkpoints" / "step_000005.xgan");
  CHECK(resumed.step() == 5);
  const TrainResult r2 = train(resumed, view, part);
  CHECK(r2.reports.size() == 5);
  CHECK(same_store(straight.model().store, resumed.model().store));
  for (std::size_t i = 0; i < 5; ++i) CHECK(r2.reports[i].l_total == r.reports[i + 5].l_total);

  std::ifstream in(part / "metrics.csv");
  std::string header, line;
  std::getline(in, header);
  CHECK(header == kMetricsHeader);
  std::size_t rows = 0;
  while (std::getline(in, line)) rows += !line.empty();
  CHECK(rows == 10);
}

TEST_CASE("resume can extend the iteration budget") {
  const fs::path dir = temp_dir("resume_extend");
  const TrainView view = toy_train_view(16, 0.0, 1.0, 0.5, 2);
  Trainer t(toy_model_config(), short_run(2));
  train(t, view, dir);
  Trainer more = Trainer::resume(dir / "final.xgan", 4);
  CHECK(more.config().iters == 4);
  CHECK(train(more, view, dir).reports.size() == 2);
  CHECK_THROWS_AS(Trainer::resume(dir / "missing.xgan"), CheckpointError);
}

TEST_CASE("single-stream training leaves view-B networks untouched") {
  ModelConfig mc = toy_model_config();
  mc.sharing = {0, 0};
  TrainConfig tc = short_run(4, false);
  tc.streams = 1;
  Trainer t(mc, tc);
  const ParameterStore<float> before = t.model().store;
  const TrainView view = toy_train_view(16, 0.0, 1.0, 0.5, 3);
  for (int i = 0; i < 4; ++i) {
    const auto r = t.train_step(view);
    CHECK(r.l_vae_b == 0.0);
    CHECK(r.l_gan_d2 == 0.0);
  }
  bool a_moved = false;
  for (const auto& [id, slot] : t.model().store.slots()) {
    const bool moved = values(slot.value) != values(before.slot(id).value);
    const bool view_b = id.rfind("vae_b", 0) == 0 || id.rfind("g2", 0) == 0 || id.rfind("f2", 0) == 0 ||
                        id.rfind("align", 0) == 0;
    if (view_b) {
      INFO(id);
      CHECK_FALSE(moved);
    }
    a_moved = a_moved || moved;
  }
  CHECK(a_moved);
}

TEST_CASE("training rejects data of the wrong shape") {
  Trainer t(toy_model_config(), short_run(1));
  TrainView v = toy_train_view(4, 0, 1, 1, 1);
  v.sample_shape = {2};
  v.a.resize(v.a.size() * 2);
  v.b.resize(v.b.size() * 2);
  CHECK_THROWS_AS(train(t, v, temp_dir("bad_shape")), ShapeError);
}
