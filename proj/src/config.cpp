#include "infovaegan/config.hpp"

#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <sstream>

#include <json.hpp>

namespace ivg {

namespace {

using nlohmann::json;

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ConfigError("config field '" + path + "': " + what);
}

std::size_t read_count(const json& v, const std::string& path) {
  if (!v.is_number_integer() || (v.is_number_integer() && v.get<long long>() < 0)) {
    fail(path, "expected a non-negative integer");
  }
  return v.get<std::size_t>();
}

double read_real(const json& v, const std::string& path) {
  if (!v.is_number()) fail(path, "expected a number");
  return v.get<double>();
}

bool read_bool(const json& v, const std::string& path) {
  if (!v.is_boolean()) fail(path, "expected true or false");
  return v.get<bool>();
}

using Handler = std::function<void(const json&, const std::string&)>;

/// Dispatch every key of an object to its handler; unknown keys are errors.
void visit(const json& obj, const std::string& path, const std::map<std::string, Handler>& handlers) {
  if (!obj.is_object()) fail(path.empty() ? "<root>" : path, "expected an object");
  for (const auto& [key, value] : obj.items()) {
    auto it = handlers.find(key);
    if (it == handlers.end()) fail(join(path, key), "unknown key");
    it->second(value, join(path, key));
  }
}

std::map<std::string, Handler> adam_fields(AdamHyper& h) {
  return {
      {"lr", [&](const json& v, const std::string& p) { h.lr = read_real(v, p); }},
      {"beta1", [&](const json& v, const std::string& p) { h.beta1 = read_real(v, p); }},
      {"beta2", [&](const json& v, const std::string& p) { h.beta2 = read_real(v, p); }},
      {"eps", [&](const json& v, const std::string& p) { h.eps = read_real(v, p); }},
  };
}

void check_adam(const AdamHyper& h, const std::string& path) {
  if (!(h.lr > 0.0)) fail(path + ".lr", "must be positive");
  if (!(h.beta1 >= 0.0 && h.beta1 < 1.0)) fail(path + ".beta1", "must lie in [0, 1)");
  if (!(h.beta2 >= 0.0 && h.beta2 < 1.0)) fail(path + ".beta2", "must lie in [0, 1)");
  if (!(h.eps > 0.0)) fail(path + ".eps", "must be positive");
}

std::pair<std::size_t, std::size_t> line_col(std::string_view text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

json adam_json(const AdamHyper& h) { return {{"lr", h.lr}, {"beta1", h.beta1}, {"beta2", h.beta2}, {"eps", h.eps}}; }

}  // namespace

void RunConfig::validate() const {
  data.validate();
  if (train.arch.pixels != data.pixels()) {
    throw ConfigError("config: model pixels (" + std::to_string(train.arch.pixels) + ") differ from data.image_side^2");
  }
  train.validate();
  check_adam(train.gan_optimizer, "optimizer.gan");
  check_adam(train.encoder_optimizer, "optimizer.encoder");
  if (eval.votes < 10) fail("eval.votes", "must be at least 10");
  if (eval.samples_per_vote < 2) fail("eval.samples_per_vote", "must be at least 2");
  if (eval.test_elbo_samples < 1) fail("eval.test_elbo_samples", "must be at least 1");
  if (eval.test_batch < 1) fail("eval.test_batch", "must be at least 1");
}

RunConfig parse_config(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto [line, col] = line_col(text, e.byte == 0 ? 0 : e.byte - 1);
    throw ConfigError("config: invalid JSON at line " + std::to_string(line) + ", column " + std::to_string(col));
  }

  RunConfig cfg;
  TrainConfig& t = cfg.train;
  visit(doc, "",
        {
            {"seed", [&](const json& v, const std::string& p) { t.seed = read_count(v, p); }},
            {"batch_size", [&](const json& v, const std::string& p) { t.batch_size = read_count(v, p); }},
            {"n_critic", [&](const json& v, const std::string& p) { t.n_critic = read_count(v, p); }},
            {"stage_one_steps", [&](const json& v, const std::string& p) { t.stage_one_steps = read_count(v, p); }},
            {"stage_two_steps", [&](const json& v, const std::string& p) { t.stage_two_steps = read_count(v, p); }},
            {"checkpoint_every", [&](const json& v, const std::string& p) { t.checkpoint_every = read_count(v, p); }},
            {"mi_enabled", [&](const json& v, const std::string& p) { t.mi_enabled = read_bool(v, p); }},
            {"refine_encoder_u", [&](const json& v, const std::string& p) { t.refine_encoder_u = read_bool(v, p); }},
            {"model",
             [&](const json& v, const std::string& p) {
               visit(v, p,
                     {
                         {"hidden", [&](const json& x, const std::string& q) { t.arch.hidden = read_count(x, q); }},
                         {"depth", [&](const json& x, const std::string& q) { t.arch.depth = read_count(x, q); }},
                     });
             }},
            {"prior",
             [&](const json& v, const std::string& p) {
               visit(v, p,
                     {
                         {"z_dim", [&](const json& x, const std::string& q) { t.prior.z_dim = read_count(x, q); }},
                         {"c_dim", [&](const json& x, const std::string& q) { t.prior.c_dim = read_count(x, q); }},
                         {"categories",
                          [&](const json& x, const std::string& q) { t.prior.categories = read_count(x, q); }},
                         {"temperature",
                          [&](const json& x, const std::string& q) { t.prior.temperature = read_real(x, q); }},
                         {"continuous_law",
                          [&](const json& x, const std::string& q) {
                            if (x == "uniform") {
                              t.prior.continuous_law = ContinuousLaw::Uniform;
                            } else if (x == "gaussian") {
                              t.prior.continuous_law = ContinuousLaw::Gaussian;
                            } else {
                              fail(q, "expected \"uniform\" or \"gaussian\"");
                            }
                          }},
                     });
             }},
            {"loss",
             [&](const json& v, const std::string& p) {
               LossWeights& w = t.weights;
               visit(v, p,
                     {
                         {"gradient_penalty",
                          [&](const json& x, const std::string& q) { w.gradient_penalty = read_real(x, q); }},
                         {"mi_discrete", [&](const json& x, const std::string& q) { w.mi_discrete = read_real(x, q); }},
                         {"mi_continuous",
                          [&](const json& x, const std::string& q) { w.mi_continuous = read_real(x, q); }},
                         {"recon_sigma", [&](const json& x, const std::string& q) { w.recon_sigma = read_real(x, q); }},
                     });
             }},
            {"optimizer",
             [&](const json& v, const std::string& p) {
               visit(v, p,
                     {
                         {"gan", [&](const json& x, const std::string& q) { visit(x, q, adam_fields(t.gan_optimizer)); }},
                         {"encoder",
                          [&](const json& x, const std::string& q) { visit(x, q, adam_fields(t.encoder_optimizer)); }},
                     });
             }},
            {"data",
             [&](const json& v, const std::string& p) {
               FactorSpec& d = cfg.data;
               visit(v, p,
                     {
                         {"image_side", [&](const json& x, const std::string& q) { d.image_side = read_count(x, q); }},
                         {"sprite_size", [&](const json& x, const std::string& q) { d.sprite_size = read_count(x, q); }},
                         {"grid", [&](const json& x, const std::string& q) { d.grid = read_count(x, q); }},
                     });
             }},
            {"eval",
             [&](const json& v, const std::string& p) {
               EvalConfig& e = cfg.eval;
               visit(v, p,
                     {
                         {"votes", [&](const json& x, const std::string& q) { e.votes = read_count(x, q); }},
                         {"samples_per_vote",
                          [&](const json& x, const std::string& q) { e.samples_per_vote = read_count(x, q); }},
                         {"test_elbo_samples",
                          [&](const json& x, const std::string& q) { e.test_elbo_samples = read_count(x, q); }},
                         {"test_batch", [&](const json& x, const std::string& q) { e.test_batch = read_count(x, q); }},
                         {"seed", [&](const json& x, const std::string& q) { e.seed = read_count(x, q); }},
                     });
             }},
        });

  t.arch.pixels = cfg.data.pixels();
  try {
    cfg.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("config: cannot read '" + path.string() + "'");
  std::ostringstream buf;
  buf << is.rdbuf();
  return parse_config(buf.str());
}

std::string config_to_json(const RunConfig& cfg) {
  const TrainConfig& t = cfg.train;
  json doc = {
      {"seed", t.seed},
      {"batch_size", t.batch_size},
      {"n_critic", t.n_critic},
      {"stage_one_steps", t.stage_one_steps},
      {"stage_two_steps", t.stage_two_steps},
      {"checkpoint_every", t.checkpoint_every},
      {"mi_enabled", t.mi_enabled},
      {"refine_encoder_u", t.refine_encoder_u},
      {"model", {{"hidden", t.arch.hidden}, {"depth", t.arch.depth}}},
      {"prior",
       {{"z_dim", t.prior.z_dim},
        {"c_dim", t.prior.c_dim},
        {"categories", t.prior.categories},
        {"continuous_law", t.prior.continuous_law == ContinuousLaw::Uniform ? "uniform" : "gaussian"},
        {"temperature", t.prior.temperature}}},
      {"loss",
       {{"gradient_penalty", t.weights.gradient_penalty},
        {"mi_discrete", t.weights.mi_discrete},
        {"mi_continuous", t.weights.mi_continuous},
        {"recon_sigma", t.weights.recon_sigma}}},
      {"optimizer", {{"gan", adam_json(t.gan_optimizer)}, {"encoder", adam_json(t.encoder_optimizer)}}},
      {"data",
       {{"image_side", cfg.data.image_side}, {"sprite_size", cfg.data.sprite_size}, {"grid", cfg.data.grid}}},
      {"eval",
       {{"votes", cfg.eval.votes},
        {"samples_per_vote", cfg.eval.samples_per_vote},
        {"test_elbo_samples", cfg.eval.test_elbo_samples},
        {"test_batch", cfg.eval.test_batch},
        {"seed", cfg.eval.seed}}},
  };
  return doc.dump(2) + "\n";
}

}  // namespace ivg
