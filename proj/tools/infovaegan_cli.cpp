// infovaegan: train, evaluate and inspect models from the command line.
//
// Exit codes: 0 success, 2 bad configuration or flags, 3 non-finite loss,
// 4 unreadable or corrupted checkpoint, 1 anything else.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "infovaegan/checkpoint.hpp"
#include "infovaegan/config.hpp"
#include "infovaegan/data.hpp"
#include "infovaegan/eval.hpp"
#include "infovaegan/pgm.hpp"
#include "infovaegan/training.hpp"

namespace fs = std::filesystem;
using namespace ivg;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNonFinite = 3;
constexpr int kExitCheckpoint = 4;

struct ExitError {
  int code;
  std::string message;
};

RunConfig config_or_exit(const std::string& path) {
  try {
    return load_config(path);
  } catch (const ConfigError& e) {
    throw ExitError{kExitConfig, e.what()};
  }
}

TrainState checkpoint_or_exit(const fs::path& path) {
  try {
    return load_checkpoint(read_bytes(path));
  } catch (const CheckpointError& e) {
    throw ExitError{kExitCheckpoint, path.string() + ": " + e.what()};
  } catch (const std::runtime_error& e) {
    throw ExitError{kExitCheckpoint, e.what()};
  }
}

/// Write to a sibling temp file, then rename, so an interrupted run never
/// leaves a half-written artifact behind.
template <typename Fn>
void write_atomically(const fs::path& path, Fn&& fill) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + tmp.string());
    fill(os);
    if (!os) throw std::runtime_error("failed writing " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string metrics_json(const MetricsSummary& m) {
  const nlohmann::json doc = {
      {"cluster_accuracy", m.cluster_accuracy},
      {"disentanglement_score", m.disentanglement_score},
      {"reconstruction_mse", m.reconstruction_mse},
      {"baseline_reconstruction_mse", m.baseline_reconstruction_mse},
      {"test_elbo", m.test_elbo},
  };
  return doc.dump(2) + "\n";
}

/// Rows of an existing run log that belong to records before `records`.
std::vector<std::string> previous_log_rows(const fs::path& path, std::size_t records) {
  std::vector<std::string> rows;
  std::ifstream is(path);
  if (!is) return rows;
  std::string line;
  std::getline(is, line);  // header
  while (std::getline(is, line)) {
    const auto comma = line.find(',');
    if (comma == std::string::npos) continue;
    if (std::stoull(line.substr(0, comma)) < records) rows.push_back(line);
  }
  return rows;
}

struct TrainArgs {
  std::string config;
  std::string out;
  bool resume = false;
};

int cmd_train(const TrainArgs& args) {
  const RunConfig cfg = config_or_exit(args.config);
  const fs::path out = args.out;
  fs::create_directories(out);
  const fs::path ckpt_path = out / "checkpoint.ivgn";
  const fs::path log_path = out / "runlog.csv";

  TrainState state = args.resume ? checkpoint_or_exit(ckpt_path) : init_train_state(cfg.train);
  if (args.resume && state.bundle.pixels() != cfg.data.pixels()) {
    throw ExitError{kExitConfig, "checkpoint image size does not match the config"};
  }
  const std::vector<std::string> prefix = args.resume ? previous_log_rows(log_path, state.records) : std::vector<std::string>{};

  const SpriteDataset data(cfg.data);
  RunLog log;
  auto save = [&](const TrainState& s) {
    const auto bytes = save_checkpoint(s);
    write_atomically(ckpt_path, [&](std::ostream& os) {
      os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    });
    write_atomically(log_path, [&](std::ostream& os) {
      os << "step,stage,term,value\n";
      for (const auto& row : prefix) os << row << '\n';
      log.write_csv(os, false);
    });
  };
  const std::size_t every = cfg.train.checkpoint_every;
  const StepHook hook = [&](const TrainState& s) {
    const std::size_t done = s.stage_two_done > 0 ? s.stage_two_done : s.stage_one_done;
    if (every > 0 && done % every == 0) save(s);
  };

  try {
    train_stage_one(cfg.train, data, state, log, hook);
    train_stage_two(cfg.train, state, log, hook);
  } catch (const NonFiniteLoss& e) {
    save(state);
    const nlohmann::json diag = {{"step", e.step}, {"stage", step_kind_name(e.kind)}, {"term", e.term}};
    write_atomically(out / "failure.json", [&](std::ostream& os) { os << diag.dump(2) << '\n'; });
    throw ExitError{kExitNonFinite, e.what()};
  }
  save(state);

  const MetricsSummary metrics = evaluate_bundle(state.bundle, data, cfg.eval, cfg.train.weights);
  write_atomically(out / "metrics.json", [&](std::ostream& os) { os << metrics_json(metrics); });
  std::cout << metrics_json(metrics);
  return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& config) {
  const RunConfig cfg = config_or_exit(config);
  const TrainState state = checkpoint_or_exit(checkpoint);
  if (state.bundle.pixels() != cfg.data.pixels()) {
    throw ExitError{kExitConfig, "checkpoint image size does not match the config"};
  }
  const SpriteDataset data(cfg.data);
  std::cout << metrics_json(evaluate_bundle(state.bundle, data, cfg.eval, cfg.train.weights));
  return 0;
}

struct TraverseArgs {
  std::string checkpoint;
  std::string latent;
  double lo = -1.0;
  double hi = 1.0;
  std::size_t steps = 7;
  std::size_t rows = 4;
  std::uint64_t seed = 0;
  std::string output;
};

TraversalSpec parse_latent(const std::string& latent, const PriorConfig& prior) {
  TraversalSpec spec;
  if (latent == "d") {
    spec.target = TraversalTarget::Discrete;
    return spec;
  }
  const char kind = latent.empty() ? '?' : latent[0];
  std::size_t index = 0;
  std::size_t used = 0;
  try {
    index = std::stoul(latent.substr(1), &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if ((kind != 'c' && kind != 'z') || used == 0 || used + 1 != latent.size()) {
    throw ExitError{kExitConfig, "--latent must be c<i>, z<i> or d, got '" + latent + "'"};
  }
  spec.target = kind == 'c' ? TraversalTarget::Continuous : TraversalTarget::Noise;
  const std::size_t extent = kind == 'c' ? prior.c_dim : prior.z_dim;
  if (index >= extent) {
    throw ExitError{kExitConfig, "--latent " + latent + " is out of range (" + std::to_string(extent) + " dims)"};
  }
  spec.index = index;
  return spec;
}

Tensor stack_rows(const Tensor& a, const Tensor& b) {
  std::vector<double> v(a.values().begin(), a.values().end());
  v.insert(v.end(), b.values().begin(), b.values().end());
  return Tensor({a.shape()[0] + b.shape()[0], a.shape()[1]}, std::move(v));
}

int cmd_traverse(const TraverseArgs& args) {
  const TrainState state = checkpoint_or_exit(args.checkpoint);
  const ModelBundle& bundle = state.bundle;
  TraversalSpec spec = parse_latent(args.latent, bundle.prior);
  spec.lo = args.lo;
  spec.hi = args.hi;
  spec.steps = args.steps;

  // Row 0 is the prior-mean code; the remaining rows are prior samples.
  LatentCode base = prior_mean_code(bundle.prior, 1);
  if (args.rows > 1) {
    Rng rng(args.seed);
    const LatentCode extra = sample_prior(bundle.prior, args.rows - 1, rng);
    base = {stack_rows(base.z, extra.z), stack_rows(base.d, extra.d), stack_rows(base.c, extra.c)};
  }
  TraversalGrid grid;
  try {
    grid = latent_traversal(bundle, base, spec);
  } catch (const std::logic_error& e) {
    throw ExitError{kExitConfig, e.what()};
  }
  write_pgm(args.output, montage(grid));
  return 0;
}

int cmd_export_dataset(const std::string& config, const std::string& dir) {
  const RunConfig cfg = config.empty() ? RunConfig{} : config_or_exit(config);
  const fs::path out = dir;
  fs::create_directories(out);
  const std::size_t side = cfg.data.image_side;
  std::ostringstream index;
  index << "file,shape,pos_x,pos_y\n";
  for (const FactorSample& s : all_samples(cfg.data)) {
    const std::string name = std::string(shape_name(s.factors[0])) + "_" + std::to_string(s.factors[1]) + "_" +
                             std::to_string(s.factors[2]) + ".pgm";
    write_pgm(out / name, to_gray(s.image, side, side));
    index << name << ',' << shape_name(s.factors[0]) << ',' << s.factors[1] << ',' << s.factors[2] << '\n';
  }
  write_atomically(out / "index.csv", [&](std::ostream& os) { os << index.str(); });
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"InfoVAEGAN: adversarial generator with interpretable codes and data-free inference", "infovaegan"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Run both training stages and evaluate the result");
  train_cmd->add_option("--config", train.config, "JSON experiment config")->required();
  train_cmd->add_option("--out", train.out, "Output directory")->required();
  train_cmd->add_flag("--resume", train.resume, "Continue from <out>/checkpoint.ivgn");

  std::string eval_ckpt, eval_config;
  auto* eval_cmd = app.add_subcommand("eval", "Print evaluation metrics of a checkpoint as JSON");
  eval_cmd->add_option("--checkpoint", eval_ckpt, "Checkpoint file")->required();
  eval_cmd->add_option("--config", eval_config, "JSON experiment config (data and eval settings)")->required();

  TraverseArgs trav;
  auto* trav_cmd = app.add_subcommand("traverse", "Render a latent traversal montage as a PGM image");
  trav_cmd->add_option("--checkpoint", trav.checkpoint, "Checkpoint file")->required();
  trav_cmd->add_option("--latent", trav.latent, "c<i>, z<i> or d")->required();
  trav_cmd->add_option("--lo", trav.lo, "Lower end of the sweep")->capture_default_str();
  trav_cmd->add_option("--hi", trav.hi, "Upper end of the sweep")->capture_default_str();
  trav_cmd->add_option("--steps", trav.steps, "Columns (ignored for d)")->capture_default_str()->check(CLI::Range(2, 1000));
  trav_cmd->add_option("--rows", trav.rows, "Base codes; row 0 is the prior mean")->capture_default_str()->check(CLI::Range(1, 1000));
  trav_cmd->add_option("--seed", trav.seed, "Seed for the sampled base rows")->capture_default_str();
  trav_cmd->add_option("output", trav.output, "Output .pgm path")->required();

  std::string export_config, export_dir;
  auto* export_cmd = app.add_subcommand("export-dataset", "Write every sprite as PGM plus index.csv");
  export_cmd->add_option("--config", export_config, "JSON experiment config (defaults if omitted)");
  export_cmd->add_option("--dir", export_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*train_cmd) return cmd_train(train);
    if (*eval_cmd) return cmd_eval(eval_ckpt, eval_config);
    if (*trav_cmd) return cmd_traverse(trav);
    if (*export_cmd) return cmd_export_dataset(export_config, export_dir);
  } catch (const ExitError& e) {
    std::cerr << "infovaegan: " << e.message << '\n';
    return e.code;
  } catch (const std::exception& e) {
    std::cerr << "infovaegan: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
