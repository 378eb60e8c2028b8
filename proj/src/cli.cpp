#include "xgan/cli.hpp"

#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "xgan/ablation.hpp"
#include "xgan/crossgan/trainer.hpp"
#include "xgan/errors.hpp"
#include "xgan/reid_eval.hpp"
#include "xgan/synth_data.hpp"

namespace xgan {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

json eval_json(const EvalOptions& e) {
  return {{"trials", e.trials},
          {"seed", e.seed},
          {"inversion_steps", e.inversion_steps},
          {"inversion_lr", e.inversion_lr},
          {"inversion_restarts", e.inversion_restarts},
          {"quant_levels", e.quant_levels}};
}

void eval_from_json(const json& j, EvalOptions& e) {
  e.trials = j.value("trials", e.trials);
  e.seed = j.value("seed", e.seed);
  e.inversion_steps = j.value("inversion_steps", e.inversion_steps);
  e.inversion_lr = j.value("inversion_lr", e.inversion_lr);
  e.inversion_restarts = j.value("inversion_restarts", e.inversion_restarts);
  e.quant_levels = j.value("quant_levels", e.quant_levels);
}

// Everything a command needs; serialized to run.json before any work.
struct RunConfig {
  std::string command;
  std::string preset = "desk";
  std::string data;
  std::string out;
  std::string checkpoint;
  std::string resume;
  std::string strategy = "latent";
  std::string grid = "align=on|off";
  DatasetConfig dataset;
  ModelConfig model;
  TrainConfig train;
  EvalOptions eval;

  json to_json() const {
    json j{{"command", command}, {"out", out}};
    if (command == "gen-data") {
      j["dataset"] = dataset;
      return j;
    }
    j["data"] = data;
    if (command == "train" || command == "ablate") {
      j["preset"] = preset;
      j["model"] = model;
      j["train"] = train;
    }
    if (command == "train" && !resume.empty()) j["resume"] = resume;
    if (command == "eval") {
      j["checkpoint"] = checkpoint;
      j["strategy"] = strategy;
    }
    if (command == "eval" || command == "ablate") j["eval"] = eval_json(eval);
    if (command == "ablate") j["grid"] = grid;
    return j;
  }

  void merge(const json& j) {
    preset = j.value("preset", preset);
    data = j.value("data", data);
    out = j.value("out", out);
    checkpoint = j.value("checkpoint", checkpoint);
    resume = j.value("resume", resume);
    strategy = j.value("strategy", strategy);
    grid = j.value("grid", grid);
    if (j.contains("dataset")) j.at("dataset").get_to(dataset);
    if (j.contains("model")) j.at("model").get_to(model);
    if (j.contains("train")) j.at("train").get_to(train);
    if (j.contains("eval")) eval_from_json(j.at("eval"), eval);
  }
};

// Value of `--name X` or `--name=X` anywhere in args.
std::optional<std::string> find_flag(const std::vector<std::string>& args, const std::string& name) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == name && i + 1 < args.size()) return args[i + 1];
    if (args[i].rfind(name + "=", 0) == 0) return args[i].substr(name.size() + 1);
  }
  return std::nullopt;
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string() + ": cannot open");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void write_run_json(const RunConfig& rc) {
  fs::create_directories(rc.out);
  const fs::path path = fs::path(rc.out) / "run.json";
  std::ofstream out(path, std::ios::trunc);
  out << rc.to_json().dump(2) << '\n';
  if (!out) throw IoError(path.string() + ": write failed");
}

Dataset load_data(const std::string& dir) {
  if (dir.empty()) throw ConfigError("--data is required");
  if (!fs::exists(fs::path(dir) / "dataset.json")) throw IoError(dir + ": no dataset.json (run gen-data first)");
  return load_dataset(dir);
}

// Model geometry follows the dataset's image size.
ModelConfig model_for(ModelConfig mc, const Dataset& data) {
  mc.kind = DataKind::image;
  mc.channels = 3;
  mc.size = data.config.image_size;
  mc.validate();
  return mc;
}

int cmd_gen_data(const RunConfig& rc, bool dry_run, std::ostream& out, std::ostream& err) {
  rc.dataset.validate();
  if (rc.out.empty()) throw ConfigError("--out is required");
  if (dry_run) {
    out << rc.to_json().dump(2) << '\n';
    return kExitOk;
  }
  write_run_json(rc);
  const Dataset data = generate_dataset(rc.dataset);
  save_dataset(data, rc.out);
  err << "wrote " << data.samples.size() << " images to " << rc.out << '\n';
  out << (fs::path(rc.out) / "run.json").string() << '\n'
      << (fs::path(rc.out) / "dataset.json").string() << '\n'
      << (fs::path(rc.out) / "manifest.csv").string() << '\n';
  return kExitOk;
}

int cmd_train(RunConfig rc, bool dry_run, std::ostream& out, std::ostream& err) {
  if (rc.out.empty()) throw ConfigError("--out is required");
  rc.train.validate();
  rc.model.validate();
  if (dry_run) {
    out << rc.to_json().dump(2) << '\n';
    return kExitOk;
  }
  const Dataset data = load_data(rc.data);
  rc.model = model_for(rc.model, data);
  write_run_json(rc);
  err << "training k=" << rc.model.sharing.k << " l=" << rc.model.sharing.l
      << " align=" << (rc.train.align ? "on" : "off") << " iters=" << rc.train.iters << " batch=" << rc.train.batch
      << " seed=" << rc.train.seed << '\n';
  std::optional<Trainer> trainer;
  if (rc.resume.empty())
    trainer.emplace(rc.model, rc.train);
  else
    trainer.emplace(Trainer::resume(rc.resume, rc.train.iters));
  const TrainResult res = train(*trainer, make_train_view(data), rc.out);
  out << (fs::path(rc.out) / "run.json").string() << '\n'
      << res.metrics.string() << '\n'
      << res.checkpoint.string() << '\n';
  return kExitOk;
}

int cmd_eval(const RunConfig& rc, bool dry_run, std::ostream& out, std::ostream& err) {
  if (rc.out.empty()) throw ConfigError("--out is required");
  if (rc.checkpoint.empty()) throw ConfigError("--checkpoint is required");
  if (rc.strategy != "latent" && rc.strategy != "inversion")
    throw ConfigError("--strategy must be latent or inversion, got '" + rc.strategy + "'");
  if (rc.eval.trials == 0) throw ConfigError("--trials must be positive");
  if (dry_run) {
    out << rc.to_json().dump(2) << '\n';
    return kExitOk;
  }
  write_run_json(rc);
  Trainer trained = Trainer::resume(rc.checkpoint);
  const Dataset data = load_data(rc.data);
  const EvalSet set = make_eval_set(data);
  const fs::path dir = rc.out;
  json summary{{"checkpoint", rc.checkpoint}, {"strategy", rc.strategy}, {"trials", rc.eval.trials}};
  CmcCurve curve;
  if (rc.strategy == "latent") {
    const LatentEval ev = evaluate_latent(trained.model(), set, rc.eval, trained.config().align);
    curve = ev.curve;
  } else {
    const InversionEval ev = evaluate_inversion(trained.model(), set, rc.eval);
    curve = ev.curve;
    const fs::path agree = dir / "agreement.csv";
    std::ofstream a(agree, std::ios::trunc);
    a << "probe,identity,transfer_loss,agreement\n";
    char buf[128];
    for (std::size_t i = 0; i < ev.agreement.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%zu,%d,%.6f,%.6f\n", i, set.probe_ids[i], ev.transfer_loss[i],
                    ev.agreement[i]);
      a << buf;
    }
    if (!a) throw IoError(agree.string() + ": write failed");
    summary["mean_inv_loss"] = ev.mean_inv_loss;
    summary["mean_agreement"] = ev.mean_agreement;
  }
  const fs::path cmc_path = dir / ("cmc_" + rc.strategy + ".csv");
  write_cmc_csv(cmc_path, curve);
  summary["rank1"] = curve.rank(1);
  summary["rank5"] = curve.rank(5);
  summary["rank10"] = curve.rank(10);
  summary["map"] = curve.map_score;
  const fs::path summary_path = dir / "summary.json";
  std::ofstream s(summary_path, std::ios::trunc);
  s << summary.dump(2) << '\n';
  if (!s) throw IoError(summary_path.string() + ": write failed");
  err << rc.strategy << ": rank-1 " << curve.rank(1) << ", mAP " << curve.map_score << '\n';
  out << (dir / "run.json").string() << '\n' << cmc_path.string() << '\n';
  if (rc.strategy == "inversion") out << (dir / "agreement.csv").string() << '\n';
  out << summary_path.string() << '\n';
  return kExitOk;
}

int cmd_ablate(RunConfig rc, bool dry_run, std::ostream& out, std::ostream& err) {
  if (rc.out.empty()) throw ConfigError("--out is required");
  const std::vector<AblationCell> cells = parse_grid(rc.grid);
  rc.train.validate();
  for (const auto& c : cells) {
    ModelConfig mc = rc.model;
    mc.sharing = {c.k, c.l};
    mc.validate();
  }
  if (dry_run) {
    out << rc.to_json().dump(2) << '\n';
    return kExitOk;
  }
  const Dataset data = load_data(rc.data);
  rc.model = model_for(rc.model, data);
  write_run_json(rc);
  AblationOptions opts;
  opts.model = rc.model;
  opts.train = rc.train;
  opts.eval = rc.eval;
  opts.threads = threads_from_env(1);
  const auto results = ablation_report(data, cells, opts, rc.out);
  const fs::path csv = fs::path(rc.out) / "ablation.csv";
  write_ablation_csv(csv, results);
  std::size_t ok = 0;
  for (const auto& r : results) {
    if (r.ok) {
      ++ok;
      if (r.skipped) err << "cell " << r.cell.key() << ": reused earlier result\n";
      out << (fs::path(rc.out) / "cells" / r.cell.key() / "result.json").string() << '\n';
    } else {
      err << "cell " << r.cell.key() << " failed: " << r.error << '\n';
    }
  }
  out << csv.string() << '\n';
  err << ok << "/" << results.size() << " cells succeeded\n";
  return ok == 0 ? kExitAllCellsFailed : kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  RunConfig rc;
  bool dry_run = false;
  std::string config_path, view_b_preset;
  std::size_t identities = 0, per_view = 0, size = 0, k = 0, l = 0, iters = 0, batch = 0, trials = 0, inv_steps = 0;
  std::size_t ckpt_every = 0;
  std::uint64_t seed = 0;
  bool no_align = false, feature_matching = false, saturating = false;

  CLI::App app{"Cross-view GAN toolkit", "xgan"};
  app.require_subcommand(1);
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "Start from a run.json");
    sub->add_flag("--dry-run", dry_run, "Validate the configuration and exit");
    sub->add_option("--out", rc.out, "Output directory");
    sub->add_option("--seed", seed, "Random seed");
  };
  auto* gen = app.add_subcommand("gen-data", "Generate the synthetic two-view dataset");
  common(gen);
  gen->add_option("--identities", identities, "Number of identities (>= 2)");
  gen->add_option("--per-view", per_view, "Images per identity and view");
  gen->add_option("--image-size", size, "Image side in pixels");
  gen->add_option("--view-b-preset", view_b_preset, "default|identity|hard")
      ->check(CLI::IsMember({"default", "identity", "hard"}));

  auto training = [&](CLI::App* sub) {
    sub->add_option("--data", rc.data, "Dataset directory");
    sub->add_option("--preset", rc.preset, "desk|paper")->check(CLI::IsMember({"desk", "paper"}));
    sub->add_option("--iters", iters, "Training iterations");
    sub->add_option("--batch", batch, "Mini-batch size (even)");
    sub->add_flag("--no-align", no_align, "Disable the alignment term");
    sub->add_flag("--feature-matching", feature_matching, "Feature-matching generator objective");
    sub->add_flag("--saturating", saturating, "Literal log(1 - D(G(z))) generator objective");
    sub->add_option("--checkpoint-every", ckpt_every, "Checkpoint interval");
  };
  auto* tr = app.add_subcommand("train", "Train a model");
  common(tr);
  training(tr);
  tr->add_option("--k", k, "Leading generator layers tied");
  tr->add_option("--l", l, "Trailing discriminator layers tied");
  tr->add_option("--resume", rc.resume, "Continue from a checkpoint");

  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint");
  common(ev);
  ev->add_option("--checkpoint", rc.checkpoint, "Checkpoint file");
  ev->add_option("--data", rc.data, "Dataset directory");
  ev->add_option("--strategy", rc.strategy, "latent|inversion")->check(CLI::IsMember({"latent", "inversion"}));
  ev->add_option("--trials", trials, "CMC trials");
  ev->add_option("--inversion-steps", inv_steps, "Gradient steps per inversion start");

  auto* ab = app.add_subcommand("ablate", "Sweep alignment and sharing depths");
  common(ab);
  training(ab);
  ab->add_option("--grid", rc.grid, "e.g. k=0..5,l=0..5,align=on|off");
  ab->add_option("--trials", trials, "CMC trials");
  ab->add_option("--inversion-steps", inv_steps, "Gradient steps per inversion start");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    // Layering: built-in defaults, then --preset, then --config, then flags.
    if (auto p = find_flag(args, "--preset")) {
      rc.preset = *p;
      rc.train = train_preset(*p);
      rc.model = model_preset(*p);
    }
    if (auto c = find_flag(args, "--config")) rc.merge(read_json_file(*c));
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "xgan: " << e.what() << '\n' << app.help();
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "xgan: " << e.what() << '\n';
    return kExitUsage;
  } catch (const IoError& e) {
    err << "xgan: " << e.what() << '\n';
    return kExitIo;
  }

  CLI::App* sub = app.get_subcommands().front();
  rc.command = sub->get_name();
  auto given = [&](const char* name) {
    const CLI::Option* opt = sub->get_option_no_throw(name);
    return opt != nullptr && opt->count() > 0;
  };
  if (given("--seed")) {
    rc.dataset.seed = seed;
    rc.train.seed = seed;
    rc.eval.seed = seed;
  }
  if (given("--identities")) rc.dataset.identities = identities;
  if (given("--per-view")) rc.dataset.per_view = per_view;
  if (given("--image-size")) rc.dataset.image_size = size;
  if (given("--view-b-preset")) {
    rc.dataset.view_b_preset = view_b_preset;
    rc.dataset.view_a = view_preset(view_b_preset, View::A);
    rc.dataset.view_b = view_preset(view_b_preset, View::B);
  }
  if (given("--iters")) rc.train.iters = iters;
  if (given("--batch")) rc.train.batch = batch;
  if (given("--k")) rc.model.sharing.k = k;
  if (given("--l")) rc.model.sharing.l = l;
  if (no_align) rc.train.align = false;
  if (feature_matching) rc.train.feature_matching = true;
  if (saturating) rc.train.saturating = true;
  if (given("--checkpoint-every")) rc.train.checkpoint_every = ckpt_every;
  if (given("--trials")) rc.eval.trials = trials;
  if (given("--inversion-steps")) rc.eval.inversion_steps = inv_steps;

  try {
    if (rc.command == "gen-data") return cmd_gen_data(rc, dry_run, out, err);
    if (rc.command == "train") return cmd_train(rc, dry_run, out, err);
    if (rc.command == "eval") return cmd_eval(rc, dry_run, out, err);
    return cmd_ablate(rc, dry_run, out, err);
  } catch (const ConfigError& e) {
    err << "xgan: " << e.what() << '\n';
    return kExitUsage;
  } catch (const CheckpointError& e) {
    err << "xgan: " << e.what() << '\n';
    return kExitCheckpoint;
  } catch (const IoError& e) {
    err << "xgan: " << e.what() << '\n';
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    err << "xgan: " << e.what() << '\n';
    return kExitIo;
  } catch (const NumericError& e) {
    err << "xgan: training aborted: " << e.what() << '\n';
    return kExitNumeric;
  }
}

}  // namespace xgan
