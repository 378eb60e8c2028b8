#include "xgan/crossgan/trainer.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "xgan/crossgan/losses.hpp"
#include "xgan/nn/checkpoint.hpp"
#include "xgan/nn/optim.hpp"
#include "xgan/ppm.hpp"

namespace xgan {

namespace fs = std::filesystem;

void TrainView::validate() const {
  const std::size_t s = sample_size();
  if (s == 0 || a.empty() || b.empty()) throw ContractError("train view: no samples");
  if (a.size() % s != 0 || b.size() % s != 0) throw ShapeError("train view: buffers are not whole samples of " + shape_str(sample_shape));
  if (groups_a.empty() || groups_a.size() != groups_b.size())
    throw ContractError("train view: both views need the same non-zero number of groups");
  for (std::size_t g = 0; g < groups_a.size(); ++g) {
    if (groups_a[g].empty() || groups_b[g].empty())
      throw ContractError("train view: group " + std::to_string(g) + " lacks a sample of one view");
    for (auto i : groups_a[g])
      if (i >= a.size() / s) throw ContractError("train view: view-A index out of range");
    for (auto i : groups_b[g])
      if (i >= b.size() / s) throw ContractError("train view: view-B index out of range");
  }
}

std::string metrics_row(const LossReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g", r.step, r.l_vae, r.l_align, r.l_gan_d1,
                r.l_gan_d2, r.l_gan_g, r.l_total);
  return buf;
}

Trainer::Trainer(const ModelConfig& model, const TrainConfig& train) : train_(train) {
  train_.validate();
  model_ = build_model(model, train_.seed);
}

Trainer Trainer::resume(const fs::path& checkpoint, std::size_t iters) {
  const CheckpointData data = read_checkpoint(checkpoint);
  ModelConfig mc;
  TrainConfig tc;
  try {
    const auto j = nlohmann::json::parse(data.config_json);
    j.at("model").get_to(mc);
    j.at("train").get_to(tc);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(checkpoint.string() + ": bad embedded configuration: " + e.what());
  }
  if (iters != 0) tc.iters = iters;
  Trainer t(mc, tc);
  restore_store(t.model_.store, data);
  t.step_ = data.step;
  return t;
}

std::string Trainer::config_json() const {
  const nlohmann::json j = {{"model", model_.config}, {"train", train_}};
  return j.dump();
}

void Trainer::save(const fs::path& path) const { save_checkpoint(path, model_.store, step_, config_json()); }

Rng Trainer::stream(std::string_view purpose, std::size_t t) const {
  return Rng(train_.seed, fnv1a64(purpose)).split(static_cast<std::uint64_t>(t));
}

Trainer::Batch Trainer::sample_batch(const TrainView& data, std::size_t t) const {
  const std::size_t s = data.sample_size();
  const std::size_t m = train_.batch;
  Rng ra = stream("batch_a", t);
  Rng rb = stream("batch_b", t);
  std::vector<float> a(m * s), b(m * s);
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t g = ra.below(data.groups_a.size());
    const auto& ga = data.groups_a[g];
    const std::size_t ia = ga[ra.below(ga.size())];
    std::copy_n(data.a.data() + ia * s, s, a.data() + i * s);
    if (train_.streams == 2) {
      const auto& gb = data.groups_b[g];
      const std::size_t ib = gb[rb.below(gb.size())];
      std::copy_n(data.b.data() + ib * s, s, b.data() + i * s);
    }
  }
  Shape shape{m};
  shape.insert(shape.end(), data.sample_shape.begin(), data.sample_shape.end());
  return {Tensor<float>(shape, std::move(a)), Tensor<float>(shape, std::move(b))};
}

GradMap<float> Trainer::finish_phase(Tape<float>& tape, const Tensor<float>& loss, std::size_t t) {
  GradMap<float> grads = tape.backward(loss);
  clip_each(grads, train_.clip);
  adam_step(model_.store, grads, AdamConfig{train_.lr, train_.beta1, train_.beta2, train_.adam_eps}, t);
  return grads;
}

LossReport Trainer::train_step(const TrainView& data) {
  const std::size_t t = step_ + 1;
  const bool two = train_.streams == 2;
  CrossGanModel& m = model_;
  ParameterStore<float>& store = m.store;
  const Batch batch = sample_batch(data, t);
  LossReport r;
  r.step = t;

  // 1. VAEs.
  {
    Tape<float> tape;
    const ForwardOptions<float> fwd{&tape};
    Rng ea = stream("vae_eps_a", t), eb = stream("vae_eps_b", t);
    const Tensor<float> la = vae_loss(store, m.vae_a, batch.a, ea, fwd);
    Tensor<float> total = la;
    r.l_vae_a = la.item();
    if (two) {
      const Tensor<float> lb = vae_loss(store, m.vae_b, batch.b, eb, fwd);
      r.l_vae_b = lb.item();
      total = add(la, lb);
    }
    r.l_vae = total.item();
    finish_phase(tape, total, t);
  }

  // 2. Alignment. The posteriors are needed for the GAN codes either way.
  GaussianPosterior<float> post_a, post_b;
  {
    Tape<float> tape;
    const bool track = train_.align;
    const ForwardOptions<float> fwd{track ? &tape : nullptr};
    post_a = encode(store, m.vae_a, batch.a, fwd);
    if (two) post_b = encode(store, m.vae_b, batch.b, fwd);
    if (track) {
      const Tensor<float> la =
          alignment_loss(post_a.mu, align(store, m.align, post_b.mu, fwd), AlignmentConfig{train_.tau});
      r.l_align = la.item();
      finish_phase(tape, la, t);
    }
  }

  auto gan_code = [&](const GaussianPosterior<float>& post, std::string_view purpose) {
    Rng rng = stream(purpose, t);
    const GaussianPosterior<float> fixed{post.mu.detach(), post.log_var.detach()};
    return reparameterize(fixed, rng).z.detach();
  };
  const Tensor<float> z_a = gan_code(post_a, "gan_eps_a");
  const Tensor<float> z_b = two ? gan_code(post_b, "gan_eps_b") : Tensor<float>();

  // 3. Discriminators against frozen generator samples.
  {
    Tape<float> tape;
    const ForwardOptions<float> frozen_g{nullptr, BatchNormMode::train, false};
    const ForwardOptions<float> fwd{&tape};
    const Tensor<float> d1 = discriminator_loss(m.f1.forward(store, batch.a, fwd),
                                                m.f1.forward(store, m.g1.forward(store, z_a, frozen_g), fwd));
    Tensor<float> total = d1;
    r.l_gan_d1 = d1.item();
    if (two) {
      const Tensor<float> d2 = discriminator_loss(m.f2.forward(store, batch.b, fwd),
                                                  m.f2.forward(store, m.g2.forward(store, z_b, frozen_g), fwd));
      r.l_gan_d2 = d2.item();
      total = add(d1, d2);
    }
    finish_phase(tape, total, t);
  }

  // 4. Generators against the updated, frozen discriminators.
  {
    Tape<float> tape;
    const ForwardOptions<float> fwd{&tape};
    const ForwardOptions<float> frozen_d{nullptr};
    auto g_loss = [&](const Network<float>& g, const Network<float>& f, const Tensor<float>& z,
                      const Tensor<float>& real) {
      const Tensor<float> fake = g.forward(store, z, fwd);
      if (!train_.feature_matching) return generator_loss(f.forward(store, fake, frozen_d), train_.saturating);
      std::vector<Tensor<float>> real_layers, fake_layers;
      f.forward(store, real, frozen_d, &real_layers);
      f.forward(store, fake, frozen_d, &fake_layers);
      const std::size_t pen = real_layers.size() - 2;
      return feature_matching_loss(real_layers[pen], fake_layers[pen]);
    };
    const Tensor<float> g1 = g_loss(m.g1, m.f1, z_a, batch.a);
    Tensor<float> total = g1;
    r.l_gan_g1 = g1.item();
    if (two) {
      const Tensor<float> g2 = g_loss(m.g2, m.f2, z_b, batch.b);
      r.l_gan_g2 = g2.item();
      total = add(g1, g2);
    }
    r.l_gan_g = total.item();
    finish_phase(tape, total, t);
  }

  r.l_total = r.l_vae + r.l_align + r.l_gan_d1 + r.l_gan_d2;
  step_ = t;
  return r;
}

namespace {

std::string step_name(std::size_t step, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "step_%06zu%s", step, ext);
  return buf;
}

void write_samples(Trainer& trainer, const fs::path& path) {
  CrossGanModel& m = trainer.model();
  if (m.config.kind != DataKind::image || m.config.channels != 3) return;
  constexpr std::size_t kCount = 8;
  Rng rng(trainer.config().seed, fnv1a64("sample_z"));
  const Tensor<float> z = sample_standard_normal<float>(rng, {kCount, m.config.latent});
  const ForwardOptions<float> eval{nullptr, BatchNormMode::eval, false};
  std::vector<PpmImage> tiles;
  for (const Network<float>* g : {&m.g1, &m.g2}) {
    const Tensor<float> img = g->forward(m.store, z, eval);
    const std::size_t per = img.size() / kCount;
    for (std::size_t i = 0; i < kCount; ++i)
      tiles.push_back(image_from_chw(img.data().subspan(i * per, per), m.config.size, m.config.size));
  }
  write_ppm(path, tile(tiles, kCount));
}

// Keeps the header and the rows up to `step` of an existing metrics file.
std::string metrics_prefix(const fs::path& path, std::size_t step) {
  std::string out = std::string(kMetricsHeader) + "\n";
  std::ifstream in(path);
  if (!in) return out;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (std::stoull(line.substr(0, line.find(','))) > step) break;
    out += line + "\n";
  }
  return out;
}

}  // namespace

TrainResult train(Trainer& trainer, const TrainView& data, const fs::path& out_dir,
                  const std::function<void(const LossReport&)>& on_step) {
  data.validate();
  const CrossGanModel& m = trainer.model();
  if (data.sample_shape != m.config.sample_shape())
    throw ShapeError("train: data samples " + shape_str(data.sample_shape) + " but model expects " +
                     shape_str(m.config.sample_shape()));
  const TrainConfig& cfg = trainer.config();
  std::error_code ec;
  fs::create_directories(out_dir / "checkpoints", ec);
  fs::create_directories(out_dir / "samples", ec);
  if (ec) throw IoError(out_dir.string() + ": cannot create output directories: " + ec.message());

  TrainResult result;
  result.metrics = out_dir / "metrics.csv";
  result.checkpoint = out_dir / "final.xgan";

  const std::string prefix = trainer.step() == 0 ? std::string(kMetricsHeader) + "\n"
                                                 : metrics_prefix(result.metrics, trainer.step());
  std::ofstream csv(result.metrics, std::ios::trunc);
  if (!csv) throw IoError(result.metrics.string() + ": cannot open for writing");
  csv << prefix;

  fs::path last_checkpoint = out_dir / "checkpoints" / step_name(trainer.step(), ".xgan");
  trainer.save(last_checkpoint);
  if (trainer.step() == 0) write_samples(trainer, out_dir / "samples" / step_name(0, ".ppm"));

  while (trainer.step() < cfg.iters) {
    LossReport r;
    try {
      r = trainer.train_step(data);
    } catch (const NumericError& e) {
      throw TrainingAborted("step " + std::to_string(trainer.step() + 1) + ": " + e.what() +
                            "; last checkpoint: " + last_checkpoint.string());
    }
    csv << metrics_row(r) << '\n';
    if (!csv) throw IoError(result.metrics.string() + ": write failed");
    result.reports.push_back(r);
    if (on_step) on_step(r);
    if (r.step % cfg.checkpoint_every == 0) {
      last_checkpoint = out_dir / "checkpoints" / step_name(r.step, ".xgan");
      trainer.save(last_checkpoint);
    }
    if (r.step % cfg.sample_every == 0) write_samples(trainer, out_dir / "samples" / step_name(r.step, ".ppm"));
  }
  csv.flush();
  trainer.save(result.checkpoint);
  return result;
}

}  // namespace xgan
