#include "infovaegan/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ivg {

namespace {

std::vector<std::vector<double>> rows_of(const Tensor& t) {
  const std::size_t n = t.shape()[0];
  const std::size_t w = t.shape()[1];
  std::vector<std::vector<double>> out(n);
  const auto v = t.values();
  for (std::size_t r = 0; r < n; ++r) out[r].assign(v.begin() + static_cast<std::ptrdiff_t>(r * w),
                                                    v.begin() + static_cast<std::ptrdiff_t>((r + 1) * w));
  return out;
}

Mlp reinit_like(const Mlp& net, Rng& rng) {
  std::vector<std::size_t> extents{net.input_extent()};
  for (const auto& l : net.layers) extents.push_back(l.fan_out());
  return init_mlp(extents, net.head, rng);
}

// Row-major grid of codes: base row r repeated across the columns.
LatentCode tile_rows(const LatentCode& base, std::size_t cols) {
  auto tile = [cols](const Tensor& t) {
    const std::size_t rows = t.shape()[0];
    const std::size_t w = t.shape()[1];
    std::vector<double> v;
    v.reserve(rows * cols * w);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c)
        for (std::size_t j = 0; j < w; ++j) v.push_back(t.at(r * w + j));
    return Tensor({rows * cols, w}, std::move(v));
  };
  return {tile(base.z), tile(base.d), tile(base.c)};
}

}  // namespace

std::vector<std::size_t> hungarian_min_cost(const std::vector<std::vector<double>>& cost) {
  // Shortest augmenting paths with row/column potentials, O(n^3).
  const std::size_t n = cost.size();
  for (const auto& row : cost) {
    if (row.size() != n) throw ContractError("hungarian: cost matrix must be square");
  }
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);  // match[col] = row (1-based, 0 = free)
  for (std::size_t i = 1; i <= n; ++i) {
    match[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = match[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> row_to_col(n, 0);
  for (std::size_t j = 1; j <= n; ++j) row_to_col[match[j] - 1] = j - 1;
  return row_to_col;
}

ClusterAccuracyResult cluster_accuracy(std::span<const std::size_t> predicted, std::span<const std::size_t> truth,
                                       std::size_t k) {
  if (predicted.size() != truth.size()) throw ContractError("cluster_accuracy: length mismatch");
  if (predicted.empty()) throw ContractError("cluster_accuracy: no labels");
  ClusterAccuracyResult res;
  res.confusion.assign(k, std::vector<std::size_t>(k, 0));
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (predicted[i] >= k || truth[i] >= k) throw ContractError("cluster_accuracy: label out of range");
    ++res.confusion[predicted[i]][truth[i]];
  }
  std::vector<std::vector<double>> cost(k, std::vector<double>(k));
  for (std::size_t p = 0; p < k; ++p)
    for (std::size_t t = 0; t < k; ++t) cost[p][t] = -static_cast<double>(res.confusion[p][t]);
  res.assignment = hungarian_min_cost(cost);
  std::size_t matched = 0;
  for (std::size_t p = 0; p < k; ++p) matched += res.confusion[p][res.assignment[p]];
  res.accuracy = static_cast<double>(matched) / static_cast<double>(predicted.size());
  return res;
}

Representation bundle_representation(const ModelBundle& bundle) {
  return [&bundle](std::span<const FactorSample> samples) {
    const BundleView view = frozen_view(bundle);
    const EncoderOutput post = encode(view, images_tensor(samples));
    const Tensor parts[] = {post.z_post.mean(), post.c_post.mean(), post.d_post.probabilities()};
    return rows_of(concat_last(parts));
  };
}

DisentanglementResult disentanglement_score(const Representation& represent, const FactorSpec& spec,
                                            std::size_t votes, std::size_t samples_per_vote, const Rng& rng) {
  if (votes < 10) throw ContractError("disentanglement_score: need at least 10 votes");
  if (samples_per_vote < 2) throw ContractError("disentanglement_score: need at least 2 samples per vote");
  const auto card = spec.cardinalities();
  std::size_t varying = 0;
  for (auto c : card) varying += c >= 2 ? 1 : 0;
  if (varying < 2) throw ContractError("disentanglement_score: need at least two factors");

  const auto corpus = all_samples(spec);
  const auto global = represent(corpus);
  const std::size_t dims = global.front().size();
  std::vector<double> scale(dims, 0.0);
  for (std::size_t j = 0; j < dims; ++j) {
    double m = 0.0;
    for (const auto& row : global) m += row[j];
    m /= static_cast<double>(global.size());
    double var = 0.0;
    for (const auto& row : global) var += (row[j] - m) * (row[j] - m);
    scale[j] = std::sqrt(var / static_cast<double>(global.size()));
  }

  std::vector<std::pair<std::size_t, std::size_t>> cast;  // (dim, factor)
  for (std::size_t v = 0; v < votes; ++v) {
    Rng vote_rng = rng.substream(v);
    const std::size_t factor = vote_rng.index(kFactorCount);
    const std::size_t value = vote_rng.index(card[factor]);
    const auto batch = fixed_factor_batch(spec, factor, value, samples_per_vote, vote_rng);
    const auto reps = represent(batch);
    std::size_t best = 0;
    double best_var = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < dims; ++j) {
      if (scale[j] < 1e-6) continue;
      double m = 0.0;
      for (const auto& row : reps) m += row[j] / scale[j];
      m /= static_cast<double>(reps.size());
      double var = 0.0;
      for (const auto& row : reps) var += (row[j] / scale[j] - m) * (row[j] / scale[j] - m);
      var /= static_cast<double>(reps.size());
      if (var < best_var) {
        best_var = var;
        best = j;
      }
    }
    cast.emplace_back(best, factor);
  }

  DisentanglementResult res;
  res.votes.assign(dims, std::vector<std::size_t>(kFactorCount, 0));
  std::vector<std::vector<std::size_t>> train(dims, std::vector<std::size_t>(kFactorCount, 0));
  const std::size_t split = votes / 2;
  for (std::size_t v = 0; v < votes; ++v) {
    ++res.votes[cast[v].first][cast[v].second];
    if (v < split) ++train[cast[v].first][cast[v].second];
  }
  res.majority_factor.resize(dims);
  for (std::size_t j = 0; j < dims; ++j) {
    res.majority_factor[j] = static_cast<std::size_t>(
        std::distance(train[j].begin(), std::max_element(train[j].begin(), train[j].end())));
  }
  std::size_t correct = 0;
  for (std::size_t v = split; v < votes; ++v) correct += res.majority_factor[cast[v].first] == cast[v].second;
  res.score = static_cast<double>(correct) / static_cast<double>(votes - split);
  return res;
}

LatentCode prior_mean_code(const PriorConfig& prior, std::size_t rows) {
  return {Tensor::zeros({rows, prior.z_dim}),
          Tensor::full({rows, prior.categories}, 1.0 / static_cast<double>(prior.categories)),
          Tensor::zeros({rows, prior.c_dim})};
}

TraversalGrid latent_traversal(const ModelBundle& bundle, const LatentCode& base, const TraversalSpec& spec) {
  const auto& prior = bundle.prior;
  std::size_t width = 0;
  switch (spec.target) {
    case TraversalTarget::Continuous: width = prior.c_dim; break;
    case TraversalTarget::Noise: width = prior.z_dim; break;
    case TraversalTarget::Discrete: width = prior.categories; break;
  }
  if (spec.target != TraversalTarget::Discrete) {
    if (spec.index >= width) {
      throw ContractError("latent_traversal: latent index " + std::to_string(spec.index) + " out of range (" +
                          std::to_string(width) + " dims)");
    }
    if (spec.steps < 2) throw ContractError("latent_traversal: need at least 2 steps");
  }
  TraversalGrid grid;
  grid.rows = base.batch();
  grid.cols = spec.target == TraversalTarget::Discrete ? prior.categories : spec.steps;
  grid.image_side = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(bundle.pixels()))));
  for (std::size_t c = 0; c < grid.cols; ++c) {
    if (spec.target == TraversalTarget::Discrete) {
      grid.values.push_back(static_cast<double>(c));
    } else {
      const double t = static_cast<double>(c) / static_cast<double>(grid.cols - 1);
      grid.values.push_back(c + 1 == grid.cols ? spec.hi : spec.lo + (spec.hi - spec.lo) * t);
    }
  }

  LatentCode tiled = tile_rows(base, grid.cols);
  auto set_column = [&](Tensor& part) {
    const std::size_t w = part.shape()[1];
    std::vector<double> v(part.values().begin(), part.values().end());
    for (std::size_t r = 0; r < grid.rows; ++r) {
      for (std::size_t c = 0; c < grid.cols; ++c) {
        double* row = v.data() + (r * grid.cols + c) * w;
        if (spec.target == TraversalTarget::Discrete) {
          std::fill(row, row + w, 0.0);
          row[c] = 1.0;
        } else {
          row[spec.index] = grid.values[c];
        }
      }
    }
    part = Tensor(part.shape(), std::move(v));
  };
  switch (spec.target) {
    case TraversalTarget::Continuous: set_column(tiled.c); break;
    case TraversalTarget::Noise: set_column(tiled.z); break;
    case TraversalTarget::Discrete: set_column(tiled.d); break;
  }
  grid.codes = tiled;
  grid.images = rows_of(generate(frozen_view(bundle), tiled));
  return grid;
}

double mean_squared_error(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) throw ShapeError("mean_squared_error: shapes differ");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += (a.at(i) - b.at(i)) * (a.at(i) - b.at(i));
  return acc / static_cast<double>(a.size());
}

double reconstruction_error(const ModelBundle& bundle, const Tensor& x) {
  Rng unused(0);
  return mean_squared_error(x, reconstruct(frozen_view(bundle), x, unused, ReconstructionMode::Mean));
}

ClusterAccuracyResult shape_cluster_accuracy(const ModelBundle& bundle, const SpriteDataset& data) {
  const auto& corpus = data.corpus();
  const UPosterior post = encode_u(frozen_view(bundle), images_tensor(corpus));
  const auto predicted = argmax_rows(post.d_post.logits());
  std::vector<std::size_t> truth;
  truth.reserve(corpus.size());
  for (const auto& s : corpus) truth.push_back(s.factors[0]);
  return cluster_accuracy(predicted, truth, std::max(kShapeCount, bundle.prior.categories));
}

MetricsSummary evaluate_bundle(const ModelBundle& bundle, const SpriteDataset& data, const EvalConfig& cfg,
                               const LossWeights& weights) {
  MetricsSummary m;
  Rng rng(cfg.seed);
  m.cluster_accuracy = shape_cluster_accuracy(bundle, data).accuracy;
  m.disentanglement_score =
      disentanglement_score(bundle_representation(bundle), data.spec(), cfg.votes, cfg.samples_per_vote,
                            rng.substream(1))
          .score;

  const Tensor corpus = images_tensor(data.corpus());
  m.reconstruction_mse = reconstruction_error(bundle, corpus);
  ModelBundle baseline = bundle;
  Rng init_rng = rng.substream(2);
  baseline.encoder_u = reinit_like(bundle.encoder_u, init_rng);
  baseline.encoder_z = reinit_like(bundle.encoder_z, init_rng);
  m.baseline_reconstruction_mse = reconstruction_error(baseline, corpus);

  Rng elbo_rng = rng.substream(3);
  const Tensor batch = data.sample_images(cfg.test_batch, elbo_rng);
  m.test_elbo = test_elbo(frozen_view(bundle), batch, elbo_rng, cfg.test_elbo_samples, weights).elbo.item();
  return m;
}

}  // namespace ivg
