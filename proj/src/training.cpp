#include "infovaegan/training.hpp"

#include <cassert>
#include <chrono>
#include <cmath>
#include <ostream>
#include <tuple>

namespace ivg {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void require_finite(const StepRecord& rec) {
  for (const auto& [name, value] : rec.terms) {
    if (!std::isfinite(value)) throw NonFiniteLoss(rec.step, rec.kind, name, value);
  }
}

std::vector<Tensor> concat_leaves(const BoundMlp& a, const BoundMlp& b) {
  auto out = a.leaves();
  auto more = b.leaves();
  out.insert(out.end(), more.begin(), more.end());
  return out;
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size < 1 || n_critic < 1 || stage_one_steps < 1) {
    throw ContractError("train config: batch_size, n_critic and stage_one_steps must be >= 1");
  }
  weights.validate();
  prior.validate();
  if (arch.pixels < 1 || arch.hidden < 1) throw ContractError("train config: architecture extents must be >= 1");
  for (const AdamHyper* h : {&gan_optimizer, &encoder_optimizer}) {
    if (!(h->lr > 0.0) || h->beta1 < 0.0 || h->beta1 >= 1.0 || h->beta2 < 0.0 || h->beta2 >= 1.0 || !(h->eps > 0.0)) {
      throw ContractError("train config: invalid Adam hyperparameters");
    }
  }
}

std::string_view step_kind_name(StepKind kind) {
  switch (kind) {
    case StepKind::Critic: return "critic";
    case StepKind::Generator: return "generator";
    case StepKind::Inference: return "inference";
  }
  return "?";
}

double StepRecord::term(std::string_view name) const {
  for (const auto& [n, v] : terms) {
    if (n == name) return v;
  }
  throw std::out_of_range("step record has no term " + std::string(name));
}

bool StepRecord::has_term(std::string_view name) const {
  for (const auto& t : terms) {
    if (t.first == name) return true;
  }
  return false;
}

void RunLog::write_csv(std::ostream& os, bool header) const {
  if (header) os << "step,stage,term,value\n";
  const auto old_precision = os.precision(17);
  for (const auto& rec : records) {
    for (const auto& [name, value] : rec.terms) {
      os << rec.step << ',' << step_kind_name(rec.kind) << ',' << name << ',' << value << '\n';
    }
  }
  os.precision(old_precision);
}

std::size_t RunLog::csv_rows() const {
  std::size_t n = 1;
  for (const auto& rec : records) n += rec.terms.size();
  return n;
}

NonFiniteLoss::NonFiniteLoss(std::size_t step_, StepKind kind_, std::string term_, double value)
    : std::runtime_error("non-finite " + std::string(step_kind_name(kind_)) + " loss term '" + term_ + "' = " +
                         std::to_string(value) + " at step " + std::to_string(step_)),
      step(step_),
      kind(kind_),
      term(std::move(term_)) {}

TrainState init_train_state(const TrainConfig& cfg) {
  cfg.validate();
  Rng init_rng = Rng(cfg.seed).substream(0);
  TrainState s{init_bundle(cfg.arch, cfg.prior, init_rng), {}, {}, {}, {}, Rng(cfg.seed)};
  s.critic_opt = init_adam(s.bundle.critic, cfg.gan_optimizer);
  s.generator_opt = init_adam(s.bundle.generator, cfg.gan_optimizer);
  s.encoder_u_opt = init_adam(s.bundle.encoder_u, cfg.gan_optimizer);
  s.encoder_z_opt = init_adam(s.bundle.encoder_z, cfg.encoder_optimizer);
  return s;
}

StepRecord critic_step(const TrainConfig& cfg, const SpriteDataset& data, TrainState& state) {
  const auto start = Clock::now();
#ifndef NDEBUG
  const auto frozen_before = std::make_tuple(parameter_checksum(state.bundle.generator),
                                             parameter_checksum(state.bundle.encoder_u),
                                             parameter_checksum(state.bundle.encoder_z));
#endif
  const Tensor real = data.sample_images(cfg.batch_size, state.rng);
  const LatentCode code = sample_prior(cfg.prior, cfg.batch_size, state.rng);
  const Tensor fake = generate(frozen_view(state.bundle), code);

  Graph graph;
  const BundleView view = make_view(state.bundle, &graph, {.critic = true});
  const CriticLossTerms terms = critic_loss(view, real, fake, state.rng, cfg.weights);

  StepRecord rec{state.records, StepKind::Critic, {}, 0.0};
  rec.terms = {{"real_score", terms.real_score_mean.item()},
               {"fake_score", terms.fake_score_mean.item()},
               {"gradient_penalty", terms.gradient_penalty.item()},
               {"critic_total", terms.total.item()}};
  require_finite(rec);

  const auto leaves = view.critic.leaves();
  const GradientMap grads = backward(terms.total, leaves);
  adam_step(state.bundle.critic, view.critic, grads, state.critic_opt);
#ifndef NDEBUG
  assert(frozen_before == std::make_tuple(parameter_checksum(state.bundle.generator),
                                          parameter_checksum(state.bundle.encoder_u),
                                          parameter_checksum(state.bundle.encoder_z)));
#endif
  ++state.records;
  rec.wall_seconds = seconds_since(start);
  return rec;
}

StepRecord generator_step(const TrainConfig& cfg, TrainState& state) {
  const auto start = Clock::now();
  const LatentCode code = sample_prior(cfg.prior, cfg.batch_size, state.rng);

  Graph graph;
  const BundleView view = make_view(state.bundle, &graph, {.generator = true, .encoder_u = cfg.mi_enabled});
  const Tensor fake = generate(view, code);
  const Tensor adversarial = generator_adv_loss(view, fake);

  StepRecord rec{state.records, StepKind::Generator, {}, 0.0};
  rec.terms.emplace_back("adversarial", adversarial.item());
  Tensor total = adversarial;
  if (cfg.mi_enabled) {
    const MiTerms mi = mi_loss(view, fake, code, cfg.weights);
    total = add(adversarial, mi.training_loss);
    rec.terms.emplace_back("mi_discrete", mi.discrete_logprob_mean.item());
    rec.terms.emplace_back("mi_continuous", mi.continuous_logdensity_mean.item());
    rec.terms.emplace_back("mi_lower_bound", mi.lower_bound.item());
  }
  rec.terms.emplace_back("generator_total", total.item());
  require_finite(rec);

  const GradientMap grads = backward(total, concat_leaves(view.generator, view.encoder_u));
  adam_step(state.bundle.generator, view.generator, grads, state.generator_opt);
  if (cfg.mi_enabled) adam_step(state.bundle.encoder_u, view.encoder_u, grads, state.encoder_u_opt);
  ++state.records;
  rec.wall_seconds = seconds_since(start);
  return rec;
}

StepRecord inference_step(const TrainConfig& cfg, TrainState& state) {
  const auto start = Clock::now();
  if (state.stage_two_done == 0 && cfg.refine_encoder_u) {
    state.encoder_u_opt = init_adam(state.bundle.encoder_u, cfg.encoder_optimizer);
  }
  const LatentCode code = sample_prior(cfg.prior, cfg.batch_size, state.rng);
  const Tensor x_fake = generate(frozen_view(state.bundle), code);

  Graph graph;
  const BundleView view =
      make_view(state.bundle, &graph, {.encoder_u = cfg.refine_encoder_u, .encoder_z = true});
  const ElboTerms elbo = datafree_elbo(view, x_fake, state.rng, cfg.weights);

  StepRecord rec{state.records, StepKind::Inference, {}, 0.0};
  rec.terms = {{"recon_loglik", elbo.recon_loglik.item()},
               {"kl_z", elbo.kl_z.item()},
               {"kl_c", elbo.kl_c.item()},
               {"kl_d", elbo.kl_d.item()},
               {"elbo", elbo.elbo.item()}};
  require_finite(rec);

  const GradientMap grads = backward(neg(elbo.elbo), concat_leaves(view.encoder_z, view.encoder_u));
  adam_step(state.bundle.encoder_z, view.encoder_z, grads, state.encoder_z_opt);
  if (cfg.refine_encoder_u) adam_step(state.bundle.encoder_u, view.encoder_u, grads, state.encoder_u_opt);
  ++state.records;
  rec.wall_seconds = seconds_since(start);
  return rec;
}

void train_stage_one(const TrainConfig& cfg, const SpriteDataset& data, TrainState& state, RunLog& log,
                     const StepHook& hook) {
  cfg.validate();
  while (state.stage_one_done < cfg.stage_one_steps) {
    for (std::size_t k = 0; k < cfg.n_critic; ++k) log.records.push_back(critic_step(cfg, data, state));
    log.records.push_back(generator_step(cfg, state));
    ++state.stage_one_done;
    if (hook) hook(state);
  }
}

void train_stage_two(const TrainConfig& cfg, TrainState& state, RunLog& log, const StepHook& hook) {
  cfg.validate();
  const auto frozen = std::make_pair(parameter_checksum(state.bundle.generator), parameter_checksum(state.bundle.critic));
  while (state.stage_two_done < cfg.stage_two_steps) {
    log.records.push_back(inference_step(cfg, state));
    ++state.stage_two_done;
    if (hook) hook(state);
  }
  if (frozen != std::make_pair(parameter_checksum(state.bundle.generator), parameter_checksum(state.bundle.critic))) {
    throw ContractError("stage two modified the generator or critic");
  }
}

TrainResult train_full(const TrainConfig& cfg, const SpriteDataset& data, const EvalConfig& eval) {
  TrainResult r{init_train_state(cfg), {}, {}};
  train_stage_one(cfg, data, r.state, r.log);
  train_stage_two(cfg, r.state, r.log);
  r.metrics = evaluate_bundle(r.state.bundle, data, eval, cfg.weights);
  return r;
}

}  // namespace ivg
