#include "xgan/reid_eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "xgan/errors.hpp"

namespace xgan {

CmcCurve cmc(const DistanceMatrix& dist, const std::vector<int>& probe_ids, const std::vector<int>& gallery_ids,
             std::size_t trials, Rng& rng, std::vector<CmcCurve>* per_trial) {
  if (dist.rows == 0 || dist.cols == 0) throw ContractError("cmc: empty gallery or probe set");
  if (dist.rows != probe_ids.size() || dist.cols != gallery_ids.size() || dist.values.size() != dist.rows * dist.cols)
    throw ShapeError("cmc: distance matrix " + std::to_string(dist.rows) + "x" + std::to_string(dist.cols) +
                     " does not match " + std::to_string(probe_ids.size()) + " probes and " +
                     std::to_string(gallery_ids.size()) + " gallery ids");
  if (trials == 0) throw ContractError("cmc: trials must be positive");

  std::map<int, std::vector<std::size_t>> candidates;
  for (std::size_t c = 0; c < gallery_ids.size(); ++c) candidates[gallery_ids[c]].push_back(c);
  for (int id : probe_ids)
    if (candidates.count(id) == 0) throw ContractError("cmc: probe identity " + std::to_string(id) + " is not in the gallery");

  const std::size_t g = candidates.size();
  CmcCurve avg;
  avg.rates.assign(g, 0.0);
  avg.trials = trials;
  for (std::size_t t = 0; t < trials; ++t) {
    std::map<int, std::size_t> chosen;
    std::vector<std::size_t> columns;
    for (const auto& [id, cols] : candidates) {
      const std::size_t c = cols.size() == 1 ? cols[0] : cols[rng.below(cols.size())];
      chosen[id] = c;
      columns.push_back(c);
    }
    std::vector<double> hits(g, 0.0);
    double rr = 0.0;
    for (std::size_t p = 0; p < dist.rows; ++p) {
      const std::size_t truth = chosen.at(probe_ids[p]);
      const double dt = dist.at(p, truth);
      std::size_t rank = 0;
      for (std::size_t c : columns) {
        const double d = dist.at(p, c);
        if (d < dt || (d == dt && c < truth)) ++rank;
      }
      hits[rank] += 1.0;
      rr += 1.0 / static_cast<double>(rank + 1);
    }
    CmcCurve one;
    one.trials = 1;
    one.rates.resize(g);
    double cum = 0.0;
    for (std::size_t r = 0; r < g; ++r) {
      cum += hits[r];
      one.rates[r] = cum / static_cast<double>(dist.rows);
    }
    one.map_score = rr / static_cast<double>(dist.rows);
    for (std::size_t r = 0; r < g; ++r) avg.rates[r] += one.rates[r];
    avg.map_score += one.map_score;
    if (per_trial != nullptr) per_trial->push_back(std::move(one));
  }
  for (auto& r : avg.rates) r /= static_cast<double>(trials);
  avg.map_score /= static_cast<double>(trials);
  return avg;
}

Tensor<float> EvalSet::gallery_tensor() const {
  Shape s{gallery_ids.size()};
  s.insert(s.end(), sample_shape.begin(), sample_shape.end());
  return Tensor<float>(s, gallery);
}

Tensor<float> EvalSet::probe_tensor() const {
  Shape s{probe_ids.size()};
  s.insert(s.end(), sample_shape.begin(), sample_shape.end());
  return Tensor<float>(s, probes);
}

EvalSet make_eval_set(const Dataset& data) {
  EvalSet set;
  set.sample_shape = {3, data.config.image_size, data.config.image_size};
  for (const Sample* s : data.select(Split::test, View::A)) {
    const auto px = data.pixels(*s);
    set.gallery.insert(set.gallery.end(), px.begin(), px.end());
    set.gallery_ids.push_back(s->identity);
    set.gallery_index.push_back(s->index);
  }
  for (const Sample* s : data.select(Split::test, View::B)) {
    const auto px = data.pixels(*s);
    set.probes.insert(set.probes.end(), px.begin(), px.end());
    set.probe_ids.push_back(s->identity);
    set.probe_index.push_back(s->index);
  }
  if (set.gallery_ids.empty() || set.probe_ids.empty()) throw ContractError("eval set: test split has no images");
  return set;
}

namespace {

DistanceMatrix row_distances(const Tensor<float>& probes, const Tensor<float>& gallery) {
  DistanceMatrix d;
  d.rows = probes.dim(0);
  d.cols = gallery.dim(0);
  const std::size_t w = probes.size() / d.rows;
  if (gallery.size() / d.cols != w) throw ShapeError("distance: probe and gallery rows differ in width");
  d.values.resize(d.rows * d.cols);
  for (std::size_t r = 0; r < d.rows; ++r)
    for (std::size_t c = 0; c < d.cols; ++c) {
      double s = 0.0;
      const float* a = probes.ptr() + r * w;
      const float* b = gallery.ptr() + c * w;
      for (std::size_t k = 0; k < w; ++k) {
        const double diff = static_cast<double>(a[k]) - static_cast<double>(b[k]);
        s += diff * diff;
      }
      d.values[r * d.cols + c] = std::sqrt(s);
    }
  return d;
}

std::vector<double> paired_distances(const Tensor<float>& a, const Tensor<float>& b) {
  const std::size_t n = a.dim(0), w = a.size() / n;
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < w; ++k) {
      const double diff = static_cast<double>(a.at(i * w + k)) - static_cast<double>(b.at(i * w + k));
      s += diff * diff;
    }
    out[i] = std::sqrt(s);
  }
  return out;
}

const ForwardOptions<float> kEval{nullptr, BatchNormMode::eval, false};

}  // namespace

DistanceMatrix latent_distances(CrossGanModel& model, const EvalSet& set, bool use_align) {
  const Tensor<float> zg = encode(model.store, model.vae_a, set.gallery_tensor(), kEval).mu;
  Tensor<float> zp = encode(model.store, model.vae_b, set.probe_tensor(), kEval).mu;
  if (use_align) zp = align(model.store, model.align, zp, kEval);
  return row_distances(zp, zg);
}

InversionResult latent_inversion(ParameterStore<float>& store, const Network<float>& g, const Tensor<float>& x,
                                 std::size_t steps, double lr, Rng& rng) {
  if (x.rank() == 0 || x.dim(0) == 0) throw ContractError("latent_inversion: empty target batch");
  const std::size_t n = x.dim(0);
  const std::size_t latent = g.spec().input_shape.at(0);
  Tensor<float> z = sample_standard_normal<float>(rng, {n, latent});
  const Tensor<float> target = reshape(x, [&] {
    Shape s{n};
    const Shape o = g.spec().output_shape();
    s.insert(s.end(), o.begin(), o.end());
    return s;
  }());

  InversionResult res;
  res.z = z;
  std::vector<float> best_z(z.data().begin(), z.data().end());
  for (std::size_t s = 0; s <= steps; ++s) {
    Tape<float> tape;
    const Tensor<float> zt = tape.leaf("z", z);
    const Tensor<float> out = g.forward(store, zt, kEval);
    const std::vector<double> dist = paired_distances(out, target);
    if (s == 0) {
      res.init_loss = dist;
      res.loss = dist;
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (dist[i] > 10.0 * res.init_loss[i] && dist[i] > 1e-12)
        throw NumericError("latent_inversion: row " + std::to_string(i) + " diverged at step " + std::to_string(s) +
                           " (distance " + std::to_string(dist[i]) + ", initial " +
                           std::to_string(res.init_loss[i]) + ", lr " + std::to_string(lr) + ")");
      if (dist[i] < res.loss[i] || s == 0) {
        res.loss[i] = dist[i];
        std::copy_n(z.ptr() + i * latent, latent, best_z.begin() + static_cast<std::ptrdiff_t>(i * latent));
      }
    }
    if (s == steps) break;
    const Tensor<float> loss = scale(sum(square(sub(out, target))), 0.5f);
    const Tensor<float> grad = tape.backward(loss).at("z");
    std::vector<float> next(z.data().begin(), z.data().end());
    const float step = static_cast<float>(lr);
    for (std::size_t k = 0; k < next.size(); ++k) next[k] -= step * grad.at(k);
    z = Tensor<float>({n, latent}, std::move(next));
  }
  res.z = Tensor<float>({n, latent}, std::move(best_z));
  return res;
}

double pixel_agreement_ratio(const Tensor<float>& a, const Tensor<float>& b, std::size_t levels) {
  if (a.shape() != b.shape() || a.rank() == 0 || a.dim(0) == 0)
    throw ShapeError("pixel_agreement_ratio: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  if (levels < 2) throw ContractError("pixel_agreement_ratio: need at least 2 levels");
  auto bin = [levels](float v) {
    const double u = (std::clamp(static_cast<double>(v), -1.0, 1.0) + 1.0) / 2.0;
    return std::min(levels - 1, static_cast<std::size_t>(u * static_cast<double>(levels)));
  };
  const std::size_t n = a.dim(0), w = a.size() / n;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t same = 0;
    for (std::size_t k = 0; k < w; ++k) same += bin(a.at(i * w + k)) == bin(b.at(i * w + k));
    total += static_cast<double>(same) / static_cast<double>(w);
  }
  return total / static_cast<double>(n);
}

LatentEval evaluate_latent(CrossGanModel& model, const EvalSet& set, const EvalOptions& opts, bool use_align) {
  LatentEval out;
  out.dist = latent_distances(model, set, use_align);
  Rng rng(opts.seed, fnv1a64("cmc"));
  out.curve = cmc(out.dist, set.probe_ids, set.gallery_ids, opts.trials, rng, &out.per_trial);
  return out;
}

InversionEval evaluate_inversion(CrossGanModel& model, const EvalSet& set, const EvalOptions& opts) {
  if (opts.inversion_restarts == 0) throw ContractError("evaluate_inversion: need at least one restart");
  const Tensor<float> probes = set.probe_tensor();
  const std::size_t n = probes.dim(0), latent = model.config.latent;

  std::vector<float> best_z(n * latent);
  std::vector<double> best_loss(n, 0.0);
  const Rng base(opts.seed, fnv1a64("inversion"));
  for (std::size_t r = 0; r < opts.inversion_restarts; ++r) {
    Rng rng = base.split(r);
    const InversionResult res = latent_inversion(model.store, model.g2, probes, opts.inversion_steps,
                                                 opts.inversion_lr, rng);
    for (std::size_t i = 0; i < n; ++i)
      if (r == 0 || res.loss[i] < best_loss[i]) {
        best_loss[i] = res.loss[i];
        std::copy_n(res.z.ptr() + i * latent, latent, best_z.begin() + static_cast<std::ptrdiff_t>(i * latent));
      }
  }
  const Tensor<float> transferred =
      model.g1.forward(model.store, Tensor<float>({n, latent}, std::move(best_z)), kEval);

  InversionEval out;
  out.dist = row_distances(transferred, set.gallery_tensor());
  Rng rng(opts.seed, fnv1a64("cmc"));
  out.curve = cmc(out.dist, set.probe_ids, set.gallery_ids, opts.trials, rng, &out.per_trial);

  std::map<std::pair<int, std::size_t>, std::size_t> counterpart;
  std::map<int, std::size_t> first_of;
  for (std::size_t c = 0; c < set.gallery_ids.size(); ++c) {
    counterpart.emplace(std::make_pair(set.gallery_ids[c], set.gallery_index[c]), c);
    first_of.emplace(set.gallery_ids[c], c);
  }
  const std::size_t w = set.sample_size();
  const Tensor<float> gallery = set.gallery_tensor();
  for (std::size_t p = 0; p < n; ++p) {
    auto it = counterpart.find({set.probe_ids[p], set.probe_index[p]});
    const std::size_t c = it != counterpart.end() ? it->second : first_of.at(set.probe_ids[p]);
    out.transfer_loss.push_back(out.dist.at(p, c));
    Shape one{1};
    one.insert(one.end(), set.sample_shape.begin(), set.sample_shape.end());
    const Tensor<float> a(one, std::vector<float>(transferred.ptr() + p * w, transferred.ptr() + (p + 1) * w));
    const Tensor<float> b(one, std::vector<float>(gallery.ptr() + c * w, gallery.ptr() + (c + 1) * w));
    out.agreement.push_back(pixel_agreement_ratio(a, b, opts.quant_levels));
  }
  for (std::size_t p = 0; p < n; ++p) {
    out.mean_inv_loss += out.transfer_loss[p] / static_cast<double>(n);
    out.mean_agreement += out.agreement[p] / static_cast<double>(n);
  }
  return out;
}

void write_cmc_csv(const std::filesystem::path& path, const CmcCurve& curve) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(path.string() + ": cannot open for writing");
  out << "rank,rate\n";
  char buf[64];
  for (std::size_t r = 0; r < curve.rates.size(); ++r) {
    std::snprintf(buf, sizeof buf, "%zu,%.6f\n", r + 1, curve.rates[r]);
    out << buf;
  }
  if (!out) throw IoError(path.string() + ": write failed");
}

}  // namespace xgan
