#pragma once

// The toy predictor h_beta(X) = ReLU(beta1 . v(X)) + beta2 . v(X) over the
// fifteen monomials of degree <= 2 in the matrix entries, plus the first-order
// optimizers that train it.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ricelab/csv.hpp"
#include "ricelab/error.hpp"
#include "ricelab/rng.hpp"
#include "ricelab/scm_toy.hpp"

namespace ricelab {

inline constexpr std::size_t kNumFeatures = 15;
inline constexpr std::size_t kNumParams = 2 * kNumFeatures;

/// (1, X11, X21, X12, X22, X11^2, X21^2, X12^2, X22^2,
///  X11X21, X11X12, X11X22, X21X12, X21X22, X12X22)
using FeatureVec = std::array<double, kNumFeatures>;
using ParamVec = std::array<double, kNumParams>;

/// Positions of the two determinant monomials in FeatureVec.
inline constexpr std::size_t kFeatX11X22 = 11;
inline constexpr std::size_t kFeatX21X12 = 12;

struct ModelParams {
  FeatureVec beta1{};
  FeatureVec beta2{};

  ParamVec flat() const noexcept {
    ParamVec out{};
    for (std::size_t j = 0; j < kNumFeatures; ++j) {
      out[j] = beta1[j];
      out[kNumFeatures + j] = beta2[j];
    }
    return out;
  }

  static ModelParams from_flat(std::span<const double> flat) {
    if (flat.size() != kNumParams) {
      throw PreconditionError("ModelParams: expected 30 coefficients");
    }
    ModelParams p;
    for (std::size_t j = 0; j < kNumFeatures; ++j) {
      p.beta1[j] = flat[j];
      p.beta2[j] = flat[kNumFeatures + j];
    }
    return p;
  }

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

inline FeatureVec feature_map(const Matrix2& x) noexcept {
  return {1.0,
          x.x11,
          x.x21,
          x.x12,
          x.x22,
          x.x11 * x.x11,
          x.x21 * x.x21,
          x.x12 * x.x12,
          x.x22 * x.x22,
          x.x11 * x.x21,
          x.x11 * x.x12,
          x.x11 * x.x22,
          x.x21 * x.x12,
          x.x21 * x.x22,
          x.x12 * x.x22};
}

inline double dot(const FeatureVec& a, const FeatureVec& b) noexcept {
  double s = 0.0;
  for (std::size_t j = 0; j < kNumFeatures; ++j) s += a[j] * b[j];
  return s;
}

inline double predict_features(const ModelParams& p,
                               const FeatureVec& v) noexcept {
  const double hidden = dot(p.beta1, v);
  return (hidden > 0.0 ? hidden : 0.0) + dot(p.beta2, v);
}

inline double predict(const ModelParams& p, const Matrix2& x) noexcept {
  return predict_features(p, feature_map(x));
}

/// d predict / d (beta1, beta2); the ReLU subgradient at zero is 0.
inline ParamVec grad_predict(const ModelParams& p, const Matrix2& x) noexcept {
  const FeatureVec v = feature_map(x);
  const bool active = dot(p.beta1, v) > 0.0;
  ParamVec g{};
  for (std::size_t j = 0; j < kNumFeatures; ++j) {
    g[j] = active ? v[j] : 0.0;
    g[kNumFeatures + j] = v[j];
  }
  return g;
}

/// Parameters with h(X) = ReLU(2 det X) - det X = |det X|.
inline ModelParams realizing_params() noexcept {
  ModelParams p;
  p.beta1[kFeatX11X22] = 2.0;
  p.beta1[kFeatX21X12] = -2.0;
  p.beta2[kFeatX11X22] = -1.0;
  p.beta2[kFeatX21X12] = 1.0;
  return p;
}

/// Each coefficient drawn from N(0, 0.01) (standard deviation 0.1).
inline ModelParams init_params(std::uint64_t seed) {
  CounterRng rng(derive_seed(seed, "init-params"));
  ParamVec flat{};
  for (auto& c : flat) c = 0.1 * rng.normal();
  return ModelParams::from_flat(flat);
}

struct AdamHyper {
  double lr = 1e-2;
  double b1 = 0.9;
  double b2 = 0.999;
  double eps = 1e-8;
};

/// Parameters plus the Adam moment estimates; owned by one training loop.
struct AdamState {
  std::vector<double> params;
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;

  explicit AdamState(std::vector<double> initial)
      : params(std::move(initial)),
        m(params.size(), 0.0),
        v(params.size(), 0.0) {}
};

/// One bias-corrected Adam step.
inline void adam_update(AdamState& state, std::span<const double> grads,
                        const AdamHyper& hp) {
  if (grads.size() != state.params.size() ||
      state.m.size() != state.params.size() ||
      state.v.size() != state.params.size()) {
    throw PreconditionError("adam_update: dimension mismatch (params " +
                            std::to_string(state.params.size()) + ", grads " +
                            std::to_string(grads.size()) + ")");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(hp.b1, t);
  const double c2 = 1.0 - std::pow(hp.b2, t);
  for (std::size_t j = 0; j < grads.size(); ++j) {
    state.m[j] = hp.b1 * state.m[j] + (1.0 - hp.b1) * grads[j];
    state.v[j] = hp.b2 * state.v[j] + (1.0 - hp.b2) * grads[j] * grads[j];
    const double m_hat = state.m[j] / c1;
    const double v_hat = state.v[j] / c2;
    state.params[j] -= hp.lr * m_hat / (std::sqrt(v_hat) + hp.eps);
  }
}

inline void sgd_update(std::span<double> params, std::span<const double> grads,
                       double lr) {
  if (grads.size() != params.size()) {
    throw PreconditionError("sgd_update: dimension mismatch");
  }
  for (std::size_t j = 0; j < params.size(); ++j) params[j] -= lr * grads[j];
}

inline constexpr std::string_view kParamsHeader = "index,block,value";

/// 30 rows `index,block,value`; index counts within a block, block is 1 or 2.
inline std::string params_to_csv(const ModelParams& p) {
  std::string out(kParamsHeader);
  out += '\n';
  for (int block = 1; block <= 2; ++block) {
    const auto& beta = block == 1 ? p.beta1 : p.beta2;
    for (std::size_t j = 0; j < kNumFeatures; ++j) {
      out += std::to_string(j) + ',' + std::to_string(block) + ',' +
             csv::format_double(beta[j]) + '\n';
    }
  }
  return out;
}

inline ModelParams params_from_csv(const std::string& text) {
  const auto rows = csv::lines(text);
  if (rows.size() != kNumParams + 1 || rows.front() != kParamsHeader) {
    throw ConfigError("parameter CSV must hold a header and 30 rows");
  }
  ModelParams p;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto f = csv::split(rows[r]);
    if (f.size() != 3) throw ConfigError("parameter CSV: bad row");
    const auto index = static_cast<std::size_t>(csv::parse_double(f[0]));
    const auto block = static_cast<int>(csv::parse_double(f[1]));
    if (index >= kNumFeatures || (block != 1 && block != 2)) {
      throw ConfigError("parameter CSV: index/block out of range");
    }
    (block == 1 ? p.beta1 : p.beta2)[index] = csv::parse_double(f[2]);
  }
  return p;
}

}  // namespace ricelab
