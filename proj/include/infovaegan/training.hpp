#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "infovaegan/data.hpp"
#include "infovaegan/eval.hpp"
#include "infovaegan/model.hpp"
#include "infovaegan/nn.hpp"
#include "infovaegan/objectives.hpp"

namespace ivg {

struct TrainConfig {
  std::size_t batch_size = 64;
  std::size_t n_critic = 5;
  std::size_t stage_one_steps = 3000;  // generator updates
  std::size_t stage_two_steps = 2000;  // inference-network updates
  LossWeights weights;
  PriorConfig prior;
  ArchitectureConfig arch;
  AdamHyper gan_optimizer;      // critic, generator, and the u-encoder's MI updates
  AdamHyper encoder_optimizer;  // both encoders during stage two
  std::uint64_t seed = 1;
  std::size_t checkpoint_every = 0;  // in generator / encoder steps; 0 disables
  bool mi_enabled = true;
  bool refine_encoder_u = true;  // stage two also updates the u-encoder

  void validate() const;
};

enum class StepKind : std::uint8_t { Critic, Generator, Inference };

std::string_view step_kind_name(StepKind kind);

struct StepRecord {
  std::size_t step = 0;
  StepKind kind = StepKind::Critic;
  std::vector<std::pair<std::string, double>> terms;
  double wall_seconds = 0.0;

  double term(std::string_view name) const;
  bool has_term(std::string_view name) const;
};

struct RunLog {
  std::vector<StepRecord> records;

  /// One row per (record, term); wall time is not written so logs from
  /// identical runs are byte-identical.
  void write_csv(std::ostream& os, bool header = true) const;
  std::size_t csv_rows() const;
};

/// Everything needed to continue a run exactly where it stopped.
struct TrainState {
  ModelBundle bundle;
  AdamState critic_opt;
  AdamState generator_opt;
  AdamState encoder_u_opt;
  AdamState encoder_z_opt;
  Rng rng;
  std::size_t stage_one_done = 0;
  std::size_t stage_two_done = 0;
  std::size_t records = 0;
};

class NonFiniteLoss : public std::runtime_error {
 public:
  NonFiniteLoss(std::size_t step, StepKind kind, std::string term, double value);
  std::size_t step;
  StepKind kind;
  std::string term;
};

TrainState init_train_state(const TrainConfig& cfg);

/// One critic update; generator and encoders are frozen.
StepRecord critic_step(const TrainConfig& cfg, const SpriteDataset& data, TrainState& state);
/// One generator update on the adversarial loss plus, when enabled, the MI
/// term (which also updates the u-encoder).
StepRecord generator_step(const TrainConfig& cfg, TrainState& state);
/// One inference update ascending the data-free ELBO; generator frozen.
StepRecord inference_step(const TrainConfig& cfg, TrainState& state);

/// Called after every generator / inference step with the updated state.
using StepHook = std::function<void(const TrainState&)>;

void train_stage_one(const TrainConfig& cfg, const SpriteDataset& data, TrainState& state, RunLog& log,
                     const StepHook& hook = {});
void train_stage_two(const TrainConfig& cfg, TrainState& state, RunLog& log, const StepHook& hook = {});

struct TrainResult {
  TrainState state;
  RunLog log;
  MetricsSummary metrics;
};

TrainResult train_full(const TrainConfig& cfg, const SpriteDataset& data, const EvalConfig& eval = {});

}  // namespace ivg
