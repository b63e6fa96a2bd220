#pragma once

// Exhaustive checks of the invariance results on finite spaces. Inputs are
// {0, ..., m-1}; functions, transformations, and predictors are enumerated
// outright, so every check here is an independent brute-force oracle.

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <numeric>
#include <queue>
#include <set>
#include <string>
#include <vector>

#include "ricelab/error.hpp"
#include "ricelab/rng.hpp"

namespace ricelab::finite {

/// Cap on m for enumerating all m^m transformations.
inline constexpr std::size_t kMaxMapDomain = 6;
/// Cap on m for enumerating all predictors.
inline constexpr std::size_t kMaxPredictorDomain = 5;
/// Risk values closer than this are ties. Generated instances use small
/// integer weights, so genuine gaps are orders of magnitude larger.
inline constexpr double kTieTolerance = 1e-9;

/// A function {0..m-1} -> {0..codomain-1}.
struct FiniteFn {
  std::vector<int> values;
  int codomain = 1;

  FiniteFn() = default;
  FiniteFn(std::vector<int> v, int r) : values(std::move(v)), codomain(r) {
    for (int x : values) {
      if (x < 0 || x >= codomain) {
        throw PreconditionError("FiniteFn: value outside codomain");
      }
    }
  }
  /// Codomain inferred as max value + 1.
  static FiniteFn of(std::vector<int> v) {
    const int r = v.empty() ? 1 : *std::max_element(v.begin(), v.end()) + 1;
    return FiniteFn(std::move(v), r);
  }

  std::size_t size() const noexcept { return values.size(); }
  int operator()(std::size_t x) const { return values[x]; }

  friend bool operator==(const FiniteFn& a, const FiniteFn& b) {
    return a.values == b.values;
  }
  friend auto operator<=>(const FiniteFn& a, const FiniteFn& b) {
    return a.values <=> b.values;
  }
};

/// A total map {0..m-1} -> {0..m-1}; need not be bijective.
struct FiniteMap {
  std::vector<int> image;

  std::size_t size() const noexcept { return image.size(); }
  int operator()(std::size_t x) const { return image[x]; }

  friend bool operator==(const FiniteMap&, const FiniteMap&) = default;
  friend auto operator<=>(const FiniteMap&, const FiniteMap&) = default;
};

inline FiniteMap identity_map(std::size_t m) {
  FiniteMap id{std::vector<int>(m)};
  std::iota(id.image.begin(), id.image.end(), 0);
  return id;
}

/// (outer o inner)(x) = outer(inner(x)).
inline FiniteMap compose(const FiniteMap& outer, const FiniteMap& inner) {
  FiniteMap out{std::vector<int>(inner.size())};
  for (std::size_t x = 0; x < inner.size(); ++x) {
    out.image[x] = outer.image[static_cast<std::size_t>(inner.image[x])];
  }
  return out;
}

/// h o T = h.
inline bool is_invariant(const FiniteMap& t, const FiniteFn& h) {
  if (t.size() != h.size()) {
    throw PreconditionError("is_invariant: domain sizes differ");
  }
  for (std::size_t x = 0; x < h.size(); ++x) {
    if (h(static_cast<std::size_t>(t(x))) != h(x)) return false;
  }
  return true;
}

/// Decodes `index` as m base-`base` digits, least significant first.
inline std::vector<int> decode_digits(std::uint64_t index, std::size_t m,
                                      int base) {
  std::vector<int> digits(m);
  for (std::size_t x = 0; x < m; ++x) {
    digits[x] = static_cast<int>(index % static_cast<std::uint64_t>(base));
    index /= static_cast<std::uint64_t>(base);
  }
  return digits;
}

inline std::uint64_t ipow(std::uint64_t base, std::size_t exp) {
  std::uint64_t r = 1;
  for (std::size_t i = 0; i < exp; ++i) r *= base;
  return r;
}

/// Every function {0..m-1} -> {0..r-1}, in lexicographic digit order.
inline std::vector<FiniteFn> all_functions(std::size_t m, int r) {
  if (m > kMaxMapDomain) throw SizeError("all_functions: m too large");
  std::vector<FiniteFn> out;
  const std::uint64_t count = ipow(static_cast<std::uint64_t>(r), m);
  out.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    out.emplace_back(decode_digits(i, m, r), r);
  }
  return out;
}

/// T_h = { T : h o T = h }, in sorted order.
inline std::vector<FiniteMap> invariant_maps(const FiniteFn& h) {
  const std::size_t m = h.size();
  if (m > kMaxMapDomain) {
    throw SizeError("invariant_maps: domain size " + std::to_string(m) +
                    " exceeds the cap of " + std::to_string(kMaxMapDomain));
  }
  std::vector<FiniteMap> out;
  const std::uint64_t count = ipow(m, m);
  for (std::uint64_t i = 0; i < count; ++i) {
    FiniteMap t{decode_digits(i, m, static_cast<int>(m))};
    if (is_invariant(t, h)) out.push_back(std::move(t));
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// True iff every level set of h1 lies inside a level set of h2, i.e.
/// h2 = v o h1 for some v.
inline bool refines(const FiniteFn& h1, const FiniteFn& h2) {
  if (h1.size() != h2.size()) {
    throw PreconditionError("refines: domain sizes differ");
  }
  for (std::size_t a = 0; a < h1.size(); ++a) {
    for (std::size_t b = a + 1; b < h1.size(); ++b) {
      if (h1(a) == h1(b) && h2(a) != h2(b)) return false;
    }
  }
  return true;
}

/// Both clauses of the characterization:
///   T_h1 subset of T_h2  <=>  h1 refines h2
///   T_h1 == T_h2         <=>  mutual refinement.
inline bool check_lemma1(const FiniteFn& h1, const FiniteFn& h2) {
  const auto t1 = invariant_maps(h1);
  const auto t2 = invariant_maps(h2);
  const bool subset = std::includes(t2.begin(), t2.end(), t1.begin(), t1.end());
  const bool equal = t1 == t2;
  const bool fwd = refines(h1, h2);
  const bool back = refines(h2, h1);
  return subset == fwd && equal == (fwd && back);
}

/// True iff within every level set of g each point reaches every other
/// point through finite compositions of maps from I. The empty composition
/// counts, so x reaches itself.
inline bool is_essential(const std::vector<FiniteMap>& maps, const FiniteFn& g) {
  for (const auto& t : maps) {
    if (!is_invariant(t, g)) {
      throw PreconditionError("is_essential: a map does not preserve g");
    }
  }
  const std::size_t m = g.size();
  for (std::size_t start = 0; start < m; ++start) {
    std::vector<bool> seen(m, false);
    std::queue<std::size_t> frontier;
    seen[start] = true;
    frontier.push(start);
    while (!frontier.empty()) {
      const std::size_t x = frontier.front();
      frontier.pop();
      for (const auto& t : maps) {
        const auto y = static_cast<std::size_t>(t(x));
        if (!seen[y]) {
          seen[y] = true;
          frontier.push(y);
        }
      }
    }
    for (std::size_t other = 0; other < m; ++other) {
      if (g(other) == g(start) && !seen[other]) return false;
    }
  }
  return true;
}

/// For essential I of h1: [I subset of T_h2] implies h1 refines h2.
inline bool check_lemma2(const std::vector<FiniteMap>& maps,
                         const FiniteFn& h1, const FiniteFn& h2) {
  if (!is_essential(maps, h1)) {
    throw PreconditionError("check_lemma2: map set is not essential for h1");
  }
  const bool hypothesis = std::all_of(
      maps.begin(), maps.end(),
      [&h2](const FiniteMap& t) { return is_invariant(t, h2); });
  return !hypothesis || refines(h1, h2);
}

// ---------------------------------------------------------------------------
// Instances and risks

/// Joint law over (x, y), causal feature g, and a loss table over a finite
/// prediction set.
struct FiniteInstance {
  std::size_t m = 0;
  std::size_t n_labels = 0;
  std::size_t n_preds = 0;
  /// prob[x * n_labels + y]
  std::vector<double> prob;
  FiniteFn g;
  /// loss[z * n_labels + y]
  std::vector<double> loss;

  double p(std::size_t x, std::size_t y) const { return prob[x * n_labels + y]; }
  double L(std::size_t z, std::size_t y) const { return loss[z * n_labels + y]; }

  double marginal(std::size_t x) const {
    double s = 0.0;
    for (std::size_t y = 0; y < n_labels; ++y) s += p(x, y);
    return s;
  }

  /// Checks non-negativity, normalization, positive marginals, and shapes.
  void validate() const {
    if (m == 0 || n_labels == 0 || n_preds == 0) {
      throw PreconditionError("FiniteInstance: empty dimension");
    }
    if (prob.size() != m * n_labels || loss.size() != n_preds * n_labels ||
        g.size() != m) {
      throw PreconditionError("FiniteInstance: table shapes do not match");
    }
    double total = 0.0;
    for (double v : prob) {
      if (!(v >= 0.0)) throw PreconditionError("FiniteInstance: negative prob");
      total += v;
    }
    if (std::abs(total - 1.0) > 1e-9) {
      throw PreconditionError("FiniteInstance: probabilities do not sum to 1");
    }
    for (std::size_t x = 0; x < m; ++x) {
      if (!(marginal(x) > 0.0)) {
        throw PreconditionError("FiniteInstance: input " + std::to_string(x) +
                                " has zero probability");
      }
    }
  }

  /// 0-1 loss with predictions ranging over the labels.
  static FiniteInstance zero_one(std::vector<double> prob, FiniteFn g,
                                 std::size_t n_labels) {
    FiniteInstance inst;
    inst.m = g.size();
    inst.n_labels = n_labels;
    inst.n_preds = n_labels;
    inst.prob = std::move(prob);
    inst.g = std::move(g);
    inst.loss.assign(n_labels * n_labels, 1.0);
    for (std::size_t z = 0; z < n_labels; ++z) inst.loss[z * n_labels + z] = 0.0;
    inst.validate();
    return inst;
  }

  /// Squared loss (z - y)^2 with real-valued labels and a prediction grid.
  static FiniteInstance squared_grid(std::vector<double> prob, FiniteFn g,
                                     const std::vector<double>& label_values,
                                     const std::vector<double>& grid) {
    FiniteInstance inst;
    inst.m = g.size();
    inst.n_labels = label_values.size();
    inst.n_preds = grid.size();
    inst.prob = std::move(prob);
    inst.g = std::move(g);
    inst.loss.resize(grid.size() * label_values.size());
    for (std::size_t z = 0; z < grid.size(); ++z) {
      for (std::size_t y = 0; y < label_values.size(); ++y) {
        const double d = grid[z] - label_values[y];
        inst.loss[z * label_values.size() + y] = d * d;
      }
    }
    inst.validate();
    return inst;
  }
};

/// E[L(h(X), Y)] for a predictor given by its values on {0..m-1}.
inline double risk(const FiniteInstance& inst, const std::vector<int>& h) {
  double r = 0.0;
  for (std::size_t x = 0; x < inst.m; ++x) {
    for (std::size_t y = 0; y < inst.n_labels; ++y) {
      r += inst.p(x, y) * inst.L(static_cast<std::size_t>(h[x]), y);
    }
  }
  return r;
}

/// Every predictor {0..m-1} -> {0..n_preds-1}.
inline std::vector<FiniteFn> all_predictors(const FiniteInstance& inst) {
  if (inst.m > kMaxPredictorDomain) {
    throw SizeError("predictor enumeration: m exceeds " +
                    std::to_string(kMaxPredictorDomain));
  }
  return all_functions(inst.m, static_cast<int>(inst.n_preds));
}

/// All predictors phi o g where phi(w) ranges over the argmin of the
/// conditional risk given g(X) = w. Ties yield one predictor per choice.
inline std::vector<FiniteFn> hs_set(const FiniteInstance& inst) {
  inst.validate();
  const int levels = inst.g.codomain;
  // Per level: the unnormalized conditional risk of each prediction.
  std::vector<std::vector<int>> choices(static_cast<std::size_t>(levels));
  for (int w = 0; w < levels; ++w) {
    double mass = 0.0;
    bool present = false;
    std::vector<double> cond(inst.n_preds, 0.0);
    for (std::size_t x = 0; x < inst.m; ++x) {
      if (inst.g(x) != w) continue;
      present = true;
      for (std::size_t y = 0; y < inst.n_labels; ++y) {
        mass += inst.p(x, y);
        for (std::size_t z = 0; z < inst.n_preds; ++z) {
          cond[z] += inst.p(x, y) * inst.L(z, y);
        }
      }
    }
    if (!present) continue;
    if (!(mass > 0.0)) {
      throw PreconditionError("hs_set: level set " + std::to_string(w) +
                              " has zero probability");
    }
    for (auto& c : cond) c /= mass;
    const double best = *std::min_element(cond.begin(), cond.end());
    for (std::size_t z = 0; z < inst.n_preds; ++z) {
      if (cond[z] <= best + kTieTolerance) {
        choices[static_cast<std::size_t>(w)].push_back(static_cast<int>(z));
      }
    }
  }
  // Cartesian product over the levels that occur.
  std::vector<std::vector<int>> phis(1, std::vector<int>(levels, 0));
  for (int w = 0; w < levels; ++w) {
    const auto& opts = choices[static_cast<std::size_t>(w)];
    if (opts.empty()) continue;
    std::vector<std::vector<int>> next;
    for (const auto& phi : phis) {
      for (int z : opts) {
        auto extended = phi;
        extended[static_cast<std::size_t>(w)] = z;
        next.push_back(std::move(extended));
      }
    }
    phis = std::move(next);
  }
  std::set<FiniteFn> out;
  for (const auto& phi : phis) {
    std::vector<int> h(inst.m);
    for (std::size_t x = 0; x < inst.m; ++x) {
      h[x] = phi[static_cast<std::size_t>(inst.g(x))];
    }
    out.emplace(std::move(h), static_cast<int>(inst.n_preds));
  }
  return {out.begin(), out.end()};
}

/// Risk minimizers among all predictors h with h o T = h for every T in I.
inline std::vector<FiniteFn> constrained_minimizers(
    const FiniteInstance& inst, const std::vector<FiniteMap>& maps) {
  std::vector<FiniteFn> feasible;
  std::vector<double> risks;
  for (auto& h : all_predictors(inst)) {
    const bool ok = std::all_of(maps.begin(), maps.end(), [&h](const FiniteMap& t) {
      return is_invariant(t, h);
    });
    if (!ok) continue;
    risks.push_back(risk(inst, h.values));
    feasible.push_back(std::move(h));
  }
  std::vector<FiniteFn> out;
  if (feasible.empty()) return out;
  const double best = *std::min_element(risks.begin(), risks.end());
  for (std::size_t i = 0; i < feasible.size(); ++i) {
    if (risks[i] <= best + kTieTolerance) out.push_back(feasible[i]);
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// hs_set equals the constrained risk minimizers for an essential I.
inline bool check_theorem3(const FiniteInstance& inst,
                           const std::vector<FiniteMap>& maps) {
  if (!is_essential(maps, inst.g)) {
    throw PreconditionError("check_theorem3: map set is not essential for g");
  }
  return hs_set(inst) == constrained_minimizers(inst, maps);
}

/// max over T in `maps` of E[L(h(T(X)), Y)].
inline double max_transformed_risk(const FiniteInstance& inst,
                                   const FiniteFn& h,
                                   const std::vector<FiniteMap>& maps) {
  double worst = -1.0;
  std::vector<int> moved(inst.m);
  for (const auto& t : maps) {
    for (std::size_t x = 0; x < inst.m; ++x) {
      moved[x] = h(static_cast<std::size_t>(t(x)));
    }
    worst = std::max(worst, risk(inst, moved));
  }
  return worst;
}

/// Every member of hs_set minimizes max_{T in T_g} E[L(h(T(X)), Y)] over
/// all predictors (containment, not equality).
inline bool check_theorem2(const FiniteInstance& inst) {
  const auto maps = invariant_maps(inst.g);
  double best = INFINITY;
  for (const auto& h : all_predictors(inst)) {
    best = std::min(best, max_transformed_risk(inst, h, maps));
  }
  for (const auto& hs : hs_set(inst)) {
    if (max_transformed_risk(inst, hs, maps) > best + kTieTolerance) {
      return false;
    }
  }
  return true;
}

/// Conditional law of Y given the level g(X) = w, [w * n_labels + y].
/// Fails when P(y | x) differs between inputs of one level set.
inline std::vector<double> structural_kernel(const FiniteInstance& inst) {
  inst.validate();
  const auto levels = static_cast<std::size_t>(inst.g.codomain);
  std::vector<double> kernel(levels * inst.n_labels, 0.0);
  std::vector<bool> set(levels, false);
  for (std::size_t x = 0; x < inst.m; ++x) {
    const auto w = static_cast<std::size_t>(inst.g(x));
    const double mx = inst.marginal(x);
    for (std::size_t y = 0; y < inst.n_labels; ++y) {
      const double cond = inst.p(x, y) / mx;
      double& slot = kernel[w * inst.n_labels + y];
      if (!set[w]) {
        slot = cond;
      } else if (std::abs(slot - cond) > 1e-9) {
        throw PreconditionError(
            "check_theorem1_family: outcome law depends on x beyond g(x)");
      }
    }
    set[w] = true;
  }
  return kernel;
}

/// Risk of h under Q_P: X ~ marginal, Y drawn from the structural kernel.
inline double family_risk(const FiniteInstance& inst,
                          const std::vector<double>& kernel,
                          const std::vector<double>& marginal,
                          const std::vector<int>& h) {
  double r = 0.0;
  for (std::size_t x = 0; x < inst.m; ++x) {
    const auto w = static_cast<std::size_t>(inst.g(x));
    for (std::size_t y = 0; y < inst.n_labels; ++y) {
      r += marginal[x] * kernel[w * inst.n_labels + y] *
           inst.L(static_cast<std::size_t>(h[x]), y);
    }
  }
  return r;
}

/// For the family {Q_P : P in marginals}, every predictor's worst-case risk
/// is at least that of every member of hs_set.
inline bool check_theorem1_family(const FiniteInstance& inst,
                                  const std::vector<std::vector<double>>& marginals) {
  const auto kernel = structural_kernel(inst);
  if (marginals.empty()) {
    throw PreconditionError("check_theorem1_family: empty marginal family");
  }
  for (const auto& mg : marginals) {
    if (mg.size() != inst.m) {
      throw PreconditionError("check_theorem1_family: marginal has wrong size");
    }
    double s = 0.0;
    for (double v : mg) {
      if (!(v >= 0.0)) {
        throw PreconditionError("check_theorem1_family: negative marginal");
      }
      s += v;
    }
    if (std::abs(s - 1.0) > 1e-9) {
      throw PreconditionError("check_theorem1_family: marginal not normalized");
    }
  }
  auto worst = [&](const std::vector<int>& h) {
    double w = -INFINITY;
    for (const auto& mg : marginals) w = std::max(w, family_risk(inst, kernel, mg, h));
    return w;
  };
  double hs_worst = -INFINITY;
  for (const auto& hs : hs_set(inst)) hs_worst = std::max(hs_worst, worst(hs.values));
  for (const auto& h : all_predictors(inst)) {
    if (worst(h.values) < hs_worst - kTieTolerance) return false;
  }
  return true;
}

/// Point masses on every input plus the uniform distribution.
inline std::vector<std::vector<double>> point_masses_plus_uniform(std::size_t m) {
  std::vector<std::vector<double>> family;
  for (std::size_t x = 0; x < m; ++x) {
    std::vector<double> delta(m, 0.0);
    delta[x] = 1.0;
    family.push_back(std::move(delta));
  }
  family.emplace_back(m, 1.0 / static_cast<double>(m));
  return family;
}

// ---------------------------------------------------------------------------
// Random generators for the seeded suites

inline FiniteFn random_function(CounterRng& rng, std::size_t m, int codomain) {
  std::vector<int> v(m);
  for (auto& x : v) x = static_cast<int>(rng.below(static_cast<std::uint64_t>(codomain)));
  return FiniteFn(std::move(v), codomain);
}

/// A uniformly random element of T_g: each x is sent to a random member of
/// its own level set.
inline FiniteMap random_invariant_map(CounterRng& rng, const FiniteFn& g) {
  FiniteMap t{std::vector<int>(g.size())};
  for (std::size_t x = 0; x < g.size(); ++x) {
    std::vector<int> level;
    for (std::size_t z = 0; z < g.size(); ++z) {
      if (g(z) == g(x)) level.push_back(static_cast<int>(z));
    }
    t.image[x] = level[rng.below(level.size())];
  }
  return t;
}

/// A random essential set for g: one to three random invariant maps, redrawn
/// until essential; after 64 misses a random cycle through each level set is
/// appended, which is always essential.
inline std::vector<FiniteMap> random_essential_set(CounterRng& rng,
                                                   const FiniteFn& g) {
  std::vector<FiniteMap> maps;
  for (int attempt = 0; attempt < 64; ++attempt) {
    maps.clear();
    const std::size_t k = 1 + rng.below(3);
    for (std::size_t i = 0; i < k; ++i) maps.push_back(random_invariant_map(rng, g));
    if (is_essential(maps, g)) return maps;
  }
  FiniteMap cycle = identity_map(g.size());
  for (int w = 0; w < g.codomain; ++w) {
    std::vector<int> level;
    for (std::size_t x = 0; x < g.size(); ++x) {
      if (g(x) == w) level.push_back(static_cast<int>(x));
    }
    for (std::size_t i = level.size(); i > 1; --i) {
      std::swap(level[i - 1], level[rng.below(i)]);
    }
    for (std::size_t i = 0; i < level.size(); ++i) {
      cycle.image[static_cast<std::size_t>(level[i])] = level[(i + 1) % level.size()];
    }
  }
  maps.push_back(std::move(cycle));
  return maps;
}

/// Normalizes integer weights into a probability table.
inline std::vector<double> normalize(const std::vector<double>& weights) {
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::vector<double> out(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i) out[i] = weights[i] / total;
  return out;
}

/// Random 0-1 loss instance: g with a random number of levels, joint weights
/// in {0..8} with every input given positive mass.
inline FiniteInstance random_instance(CounterRng& rng, std::size_t m,
                                      std::size_t n_labels) {
  const int levels = static_cast<int>(1 + rng.below(m));
  FiniteFn g = random_function(rng, m, levels);
  std::vector<double> w(m * n_labels);
  for (std::size_t x = 0; x < m; ++x) {
    double row = 0.0;
    for (std::size_t y = 0; y < n_labels; ++y) {
      w[x * n_labels + y] = static_cast<double>(rng.below(9));
      row += w[x * n_labels + y];
    }
    if (row == 0.0) w[x * n_labels + rng.below(n_labels)] = 1.0;
  }
  return FiniteInstance::zero_one(normalize(w), std::move(g), n_labels);
}

/// Random instance whose outcome law depends on x only through g(x):
/// prob(x, y) = P(x) K(y | g(x)) with positive integer weights.
inline FiniteInstance random_structural_instance(CounterRng& rng, std::size_t m,
                                                 std::size_t n_labels) {
  const int levels = static_cast<int>(1 + rng.below(m));
  FiniteFn g = random_function(rng, m, levels);
  std::vector<double> px(m);
  for (auto& v : px) v = static_cast<double>(1 + rng.below(8));
  px = normalize(px);
  std::vector<double> kernel(static_cast<std::size_t>(levels) * n_labels);
  for (int w = 0; w < levels; ++w) {
    std::vector<double> row(n_labels);
    for (auto& v : row) v = static_cast<double>(1 + rng.below(8));
    row = normalize(row);
    std::copy(row.begin(), row.end(),
              kernel.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(w) * n_labels));
  }
  std::vector<double> prob(m * n_labels);
  for (std::size_t x = 0; x < m; ++x) {
    for (std::size_t y = 0; y < n_labels; ++y) {
      prob[x * n_labels + y] =
          px[x] * kernel[static_cast<std::size_t>(g(x)) * n_labels + y];
    }
  }
  return FiniteInstance::zero_one(std::move(prob), std::move(g), n_labels);
}

}  // namespace ricelab::finite
