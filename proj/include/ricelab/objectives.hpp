#pragma once

// Training objectives for the toy problem (ERM, average and smoothed-maximum
// risk over the transform family, and the invariance-regularized objective),
// the per-sample regularized objective for generic models, and the training
// loop that minimizes them.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "ricelab/cit.hpp"
#include "ricelab/csv.hpp"
#include "ricelab/error.hpp"
#include "ricelab/model.hpp"
#include "ricelab/rng.hpp"
#include "ricelab/scm_toy.hpp"

namespace ricelab {

inline constexpr double kSmoothingCoef = 0.2;
inline constexpr std::size_t kNumToyTransforms = 6;

// ---------------------------------------------------------------------------
// Smoothed maximum

/// sum_k exp(c l_k) l_k / sum_k exp(c l_k), evaluated with the largest
/// exponent subtracted.
inline double smooth_max(std::span<const double> values,
                         double c = kSmoothingCoef) {
  if (values.empty()) throw PreconditionError("smooth_max: empty input");
  if (!(c > 0.0)) throw PreconditionError("smooth_max: c must be positive");
  const double top = *std::max_element(values.begin(), values.end());
  double num = 0.0;
  double den = 0.0;
  for (double l : values) {
    const double w = std::exp(c * (l - top));
    num += w * l;
    den += w;
  }
  return num / den;
}

/// d smooth_max / d l_j = w_j (1 + c (l_j - smooth_max)), w the softmax.
inline std::vector<double> smooth_max_grad(std::span<const double> values,
                                           double c = kSmoothingCoef) {
  const double s = smooth_max(values, c);
  const double top = *std::max_element(values.begin(), values.end());
  std::vector<double> w(values.size());
  double den = 0.0;
  for (std::size_t k = 0; k < values.size(); ++k) {
    w[k] = std::exp(c * (values[k] - top));
    den += w[k];
  }
  for (std::size_t k = 0; k < values.size(); ++k) {
    w[k] = w[k] / den * (1.0 + c * (values[k] - s));
  }
  return w;
}

// ---------------------------------------------------------------------------
// Loss kinds

struct Erm {
  friend constexpr bool operator==(const Erm&, const Erm&) = default;
};
struct AvgTransforms {
  friend constexpr bool operator==(const AvgTransforms&,
                                   const AvgTransforms&) = default;
};
struct MaxTransforms {
  friend constexpr bool operator==(const MaxTransforms&,
                                   const MaxTransforms&) = default;
};
struct Rice {
  double lambda = 1.0;
  friend constexpr bool operator==(const Rice&, const Rice&) = default;
};

using LossKind = std::variant<Erm, AvgTransforms, MaxTransforms, Rice>;

inline std::string loss_name(const LossKind& kind) {
  switch (kind.index()) {
    case 0: return "erm";
    case 1: return "avg";
    case 2: return "max";
    default: return "rice";
  }
}

inline LossKind parse_loss(std::string_view name, double rice_lambda = 1.0) {
  if (name == "erm") return Erm{};
  if (name == "avg") return AvgTransforms{};
  if (name == "max") return MaxTransforms{};
  if (name == "rice") {
    if (!(rice_lambda >= 0.0) || !std::isfinite(rice_lambda)) {
      throw ConfigError("rice lambda must be finite and >= 0");
    }
    return Rice{rice_lambda};
  }
  throw ConfigError("unknown loss '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// Toy design: features of T_k(x_i) for the six-member family, computed once.

struct ToyDesign {
  std::vector<double> y;
  /// features[k][i] = v(T_k(x_i)), k = 0 is the identity.
  std::array<std::vector<FeatureVec>, kNumToyTransforms> features;

  std::size_t size() const noexcept { return y.size(); }
};

inline ToyDesign make_design(const ToyDataset& data) {
  if (data.samples.empty()) throw PreconditionError("empty dataset");
  const auto family = toy_transform_family();
  ToyDesign d;
  d.y.reserve(data.size());
  for (auto& f : d.features) f.reserve(data.size());
  for (const auto& s : data.samples) {
    d.y.push_back(s.y);
    for (std::size_t k = 0; k < kNumToyTransforms; ++k) {
      d.features[k].push_back(feature_map(ricelab::apply(family[k], s.x)));
    }
  }
  return d;
}

/// l_k = mean_i (y_i - h(T_k(x_i)))^2 for k = 0..5.
inline std::array<double, kNumToyTransforms> transform_losses(
    const ModelParams& p, const ToyDesign& design) {
  std::array<double, kNumToyTransforms> l{};
  const double n = static_cast<double>(design.size());
  for (std::size_t k = 0; k < kNumToyTransforms; ++k) {
    double acc = 0.0;
    for (std::size_t i = 0; i < design.size(); ++i) {
      const double r = design.y[i] - predict_features(p, design.features[k][i]);
      acc += r * r;
    }
    l[k] = acc / n;
  }
  return l;
}

inline std::array<double, kNumToyTransforms> transform_losses(
    const ModelParams& p, const ToyDataset& data) {
  return transform_losses(p, make_design(data));
}

/// Objective value split into its empirical-risk and penalty parts, with the
/// gradient when requested.
struct LossEval {
  double value = 0.0;
  double erm_term = 0.0;
  double reg_term = 0.0;
  ParamVec grad{};
};

/// Evaluates the toy objective on the samples listed in `batch` (all samples
/// when empty). Sums run in index order.
inline LossEval evaluate_toy_loss(const ModelParams& p, const ToyDesign& design,
                                  const LossKind& kind, double c,
                                  std::span<const std::size_t> batch = {},
                                  bool with_grad = true) {
  const std::size_t n = batch.empty() ? design.size() : batch.size();
  if (n == 0) throw PreconditionError("evaluate_toy_loss: empty batch");
  const double inv_n = 1.0 / static_cast<double>(n);
  const bool erm_only = std::holds_alternative<Erm>(kind);
  const std::size_t n_transforms = erm_only ? 1 : kNumToyTransforms;
  const bool is_rice = std::holds_alternative<Rice>(kind);

  // Pass 1: predictions and activation gates.
  std::vector<double> pred(n * n_transforms);
  std::vector<unsigned char> gate(n * n_transforms);
  for (std::size_t s = 0; s < n; ++s) {
    const std::size_t i = batch.empty() ? s : batch[s];
    for (std::size_t k = 0; k < n_transforms; ++k) {
      const auto& v = design.features[k][i];
      const double hidden = dot(p.beta1, v);
      gate[s * n_transforms + k] = hidden > 0.0;
      pred[s * n_transforms + k] =
          (hidden > 0.0 ? hidden : 0.0) + dot(p.beta2, v);
    }
  }

  std::array<double, kNumToyTransforms> risk{};  // l_k
  std::array<double, kNumToyTransforms> disc{};  // d_k
  for (std::size_t s = 0; s < n; ++s) {
    const std::size_t i = batch.empty() ? s : batch[s];
    const double p0 = pred[s * n_transforms];
    for (std::size_t k = 0; k < n_transforms; ++k) {
      const double pk = pred[s * n_transforms + k];
      risk[k] += (design.y[i] - pk) * (design.y[i] - pk);
      disc[k] += (p0 - pk) * (p0 - pk);
    }
  }
  for (std::size_t k = 0; k < n_transforms; ++k) {
    risk[k] *= inv_n;
    disc[k] *= inv_n;
  }

  LossEval out;
  out.erm_term = risk[0];
  // Weights of d l_k (risk_w) and d d_k (disc_w) in the objective.
  std::array<double, kNumToyTransforms> risk_w{};
  std::array<double, kNumToyTransforms> disc_w{};
  std::visit(
      [&](const auto& op) {
        using Op = std::decay_t<decltype(op)>;
        if constexpr (std::is_same_v<Op, Erm>) {
          out.value = risk[0];
          risk_w[0] = 1.0;
        } else if constexpr (std::is_same_v<Op, AvgTransforms>) {
          double sum = 0.0;
          for (double l : risk) sum += l;
          out.value = sum / static_cast<double>(kNumToyTransforms);
          risk_w.fill(1.0 / static_cast<double>(kNumToyTransforms));
        } else if constexpr (std::is_same_v<Op, MaxTransforms>) {
          out.value = smooth_max(risk, c);
          const auto w = smooth_max_grad(risk, c);
          std::copy(w.begin(), w.end(), risk_w.begin());
        } else {
          out.reg_term = op.lambda * smooth_max(disc, c);
          out.value = risk[0] + out.reg_term;
          risk_w[0] = 1.0;
          const auto w = smooth_max_grad(disc, c);
          for (std::size_t k = 0; k < kNumToyTransforms; ++k) {
            disc_w[k] = op.lambda * w[k];
          }
        }
      },
      kind);
  if (!std::holds_alternative<Rice>(kind)) out.reg_term = out.value - risk[0];
  if (!with_grad) return out;

  // Pass 2: accumulate coefficient * d pred_{s,k} / d beta.
  ParamVec& g = out.grad;
  for (std::size_t s = 0; s < n; ++s) {
    const std::size_t i = batch.empty() ? s : batch[s];
    const double p0 = pred[s * n_transforms];
    double coef0 = 0.0;
    for (std::size_t k = 0; k < n_transforms; ++k) {
      const double pk = pred[s * n_transforms + k];
      // d l_k / d pred_{s,k} = -2 (y - pk) / n
      double coef = risk_w[k] * (-2.0) * (design.y[i] - pk) * inv_n;
      if (is_rice && k > 0) {
        // d d_k / d pred_{s,k} = -2 (p0 - pk) / n, and +2 (p0 - pk) / n on p0.
        const double dd = 2.0 * (p0 - pk) * inv_n * disc_w[k];
        coef -= dd;
        coef0 += dd;
      }
      if (k == 0) {
        coef0 += coef;
        continue;
      }
      if (coef == 0.0) continue;
      const auto& v = design.features[k][i];
      const bool on = gate[s * n_transforms + k];
      for (std::size_t j = 0; j < kNumFeatures; ++j) {
        if (on) g[j] += coef * v[j];
        g[kNumFeatures + j] += coef * v[j];
      }
    }
    const auto& v0 = design.features[0][i];
    const bool on0 = gate[s * n_transforms];
    for (std::size_t j = 0; j < kNumFeatures; ++j) {
      if (on0) g[j] += coef0 * v0[j];
      g[kNumFeatures + j] += coef0 * v0[j];
    }
  }
  return out;
}

/// The toy loss of the given kind over the whole dataset.
inline double toy_loss(const ModelParams& p, const ToyDesign& design,
                       const LossKind& kind, double c = kSmoothingCoef) {
  return evaluate_toy_loss(p, design, kind, c, {}, false).value;
}

inline double toy_loss(const ModelParams& p, const ToyDataset& data,
                       const LossKind& kind, double c = kSmoothingCoef) {
  return toy_loss(p, make_design(data), kind, c);
}

// ---------------------------------------------------------------------------
// Per-sample regularized objective for arbitrary models:
//   (1/n) sum_i L(h(x_i), y_i) + (lambda0/n) sum_i smax_T D(h(x_i), h(T x_i))

template <class Output, class Label, class LossFn, class DiscFn>
double rice_objective(std::span<const Output> outputs,
                      std::span<const Label> labels,
                      std::span<const std::vector<Output>> transformed,
                      LossFn&& loss, DiscFn&& discrepancy, double lambda0,
                      double c = kSmoothingCoef) {
  const std::size_t n = outputs.size();
  if (n == 0 || labels.size() != n || transformed.size() != n) {
    throw PreconditionError("rice_objective: inconsistent sample counts");
  }
  double risk = 0.0;
  double reg = 0.0;
  std::vector<double> d;
  for (std::size_t i = 0; i < n; ++i) {
    risk += loss(outputs[i], labels[i]);
    if (transformed[i].empty()) {
      throw PreconditionError("rice_objective: sample without transforms");
    }
    d.clear();
    for (const auto& t : transformed[i]) d.push_back(discrepancy(outputs[i], t));
    reg += smooth_max(d, c);
  }
  return risk / static_cast<double>(n) +
         lambda0 * reg / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// Classification primitives

/// -log softmax(logits)[label], stabilized by the largest logit.
inline double softmax_cross_entropy(std::span<const double> logits,
                                    std::size_t label) {
  if (label >= logits.size()) {
    throw PreconditionError("softmax_cross_entropy: label out of range");
  }
  const double top = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - top);
  return std::log(sum) + top - logits[label];
}

/// Squared Euclidean distance between two output vectors.
inline double l2_discrepancy(std::span<const double> a,
                             std::span<const double> b) {
  if (a.size() != b.size()) {
    throw PreconditionError("l2_discrepancy: size mismatch");
  }
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
  return s;
}

// ---------------------------------------------------------------------------
// Training

struct Sgd {
  friend constexpr bool operator==(const Sgd&, const Sgd&) = default;
};
struct Adam {
  double b1 = 0.9;
  double b2 = 0.999;
  double eps = 1e-8;
  friend constexpr bool operator==(const Adam&, const Adam&) = default;
};
using Optimizer = std::variant<Sgd, Adam>;

struct TrainConfig {
  LossKind loss = Erm{};
  double lr = 1e-2;
  std::size_t iterations = 5000;
  /// 0 selects full-batch updates.
  std::size_t batch_size = 0;
  Optimizer optimizer = Adam{};
  std::uint64_t seed = 0;
  double smoothing_coef = kSmoothingCoef;
  /// Emit a progress row every `log_every` iterations; 0 disables logging.
  std::size_t log_every = 0;
  /// The Rice penalty weight ramps linearly from lambda / warmup to lambda
  /// over this many iterations; 0 applies the full weight from the start.
  std::size_t penalty_warmup = 0;
};

inline void validate(const TrainConfig& cfg) {
  if (!(cfg.lr > 0.0) || !std::isfinite(cfg.lr)) {
    throw ConfigError("train: lr must be positive");
  }
  if (cfg.iterations < 1) throw ConfigError("train: iterations must be >= 1");
  if (!(cfg.smoothing_coef > 0.0)) {
    throw ConfigError("train: smoothing coefficient must be positive");
  }
  if (const auto* r = std::get_if<Rice>(&cfg.loss);
      r && (!(r->lambda >= 0.0) || !std::isfinite(r->lambda))) {
    throw ConfigError("train: rice lambda must be finite and >= 0");
  }
}

struct ProgressRow {
  std::size_t iteration = 0;
  double objective = 0.0;
  double erm_term = 0.0;
  double reg_term = 0.0;
};

inline constexpr std::string_view kProgressHeader =
    "iteration,objective,erm_term,reg_term";

inline std::string progress_to_csv(std::span<const ProgressRow> rows) {
  std::string out(kProgressHeader);
  out += '\n';
  for (const auto& r : rows) {
    out += std::to_string(r.iteration) + ',' +
           csv::format_double(r.objective) + ',' +
           csv::format_double(r.erm_term) + ',' +
           csv::format_double(r.reg_term) + '\n';
  }
  return out;
}

/// Draws `size` distinct indices from [0, n) for iteration t.
inline std::vector<std::size_t> sample_batch(std::size_t n, std::size_t size,
                                             std::uint64_t seed,
                                             std::size_t t) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  CounterRng rng(derive_seed(seed, "minibatch", t));
  for (std::size_t j = 0; j < size; ++j) {
    const std::size_t pick = j + rng.below(n - j);
    std::swap(idx[j], idx[pick]);
  }
  idx.resize(size);
  return idx;
}

/// Regularized training loop: features of every transformed sample are built
/// once, then each iteration draws a batch and descends the gradient of the
/// full objective (risk and penalty alike).
inline ModelParams train(const TrainConfig& cfg, const ToyDesign& design,
                         std::vector<ProgressRow>* log = nullptr) {
  validate(cfg);
  const std::size_t n = design.size();
  const bool full_batch = cfg.batch_size == 0 || cfg.batch_size >= n;
  const ModelParams init = init_params(cfg.seed);
  const ParamVec init_flat = init.flat();
  AdamState state(std::vector<double>(init_flat.begin(), init_flat.end()));
  const auto* adam = std::get_if<Adam>(&cfg.optimizer);

  std::vector<std::size_t> batch;
  for (std::size_t t = 0; t < cfg.iterations; ++t) {
    if (!full_batch) batch = sample_batch(n, cfg.batch_size, cfg.seed, t);
    const ModelParams current = ModelParams::from_flat(state.params);
    LossKind kind = cfg.loss;
    if (auto* rice = std::get_if<Rice>(&kind);
        rice && t < cfg.penalty_warmup) {
      rice->lambda *= static_cast<double>(t + 1) /
                      static_cast<double>(cfg.penalty_warmup);
    }
    const LossEval ev =
        evaluate_toy_loss(current, design, kind, cfg.smoothing_coef, batch);
    if (!std::isfinite(ev.value)) {
      throw DivergenceError(t, "training diverged at iteration " +
                                   std::to_string(t) + " (objective " +
                                   csv::format_double(ev.value) + ")");
    }
    if (log && cfg.log_every > 0 && t % cfg.log_every == 0) {
      log->push_back({t, ev.value, ev.erm_term, ev.reg_term});
    }
    if (adam) {
      adam_update(state, ev.grad, {cfg.lr, adam->b1, adam->b2, adam->eps});
    } else {
      sgd_update(state.params, ev.grad, cfg.lr);
    }
  }
  ModelParams out = ModelParams::from_flat(state.params);
  for (double c : state.params) {
    if (!std::isfinite(c)) {
      throw DivergenceError(cfg.iterations,
                            "training produced non-finite parameters");
    }
  }
  if (log && cfg.log_every > 0) {
    const LossEval last =
        evaluate_toy_loss(out, design, cfg.loss, cfg.smoothing_coef, {}, false);
    log->push_back({cfg.iterations, last.value, last.erm_term, last.reg_term});
  }
  return out;
}

inline ModelParams train(const TrainConfig& cfg, const ToyDataset& data,
                         std::vector<ProgressRow>* log = nullptr) {
  return train(cfg, make_design(data), log);
}

/// Mean squared prediction error on a dataset.
inline double test_mse(const ModelParams& p, const ToyDataset& data) {
  double acc = 0.0;
  for (const auto& s : data.samples) {
    const double r = s.y - predict(p, s.x);
    acc += r * r;
  }
  return acc / static_cast<double>(data.size());
}

}  // namespace ricelab
