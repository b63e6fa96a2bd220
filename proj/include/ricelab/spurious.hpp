#pragma once

// Tabular analog of the colored-digits experiment. Each class owns a random
// codeword of causal bits and two colors. Observed bits are the codeword with
// independent flips; in the training split the color is one of the class's
// two colors (a perfect but spurious predictor), in the test split it is
// uniform over all colors. The invariant transformation replaces the color
// with canonical color 0.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ricelab/csv.hpp"
#include "ricelab/error.hpp"
#include "ricelab/objectives.hpp"
#include "ricelab/rng.hpp"

namespace ricelab {

struct SpuriousConfig {
  std::size_t n_causal_bits = 8;
  /// Two colors per class, so there are n_colors / 2 classes.
  std::size_t n_colors = 10;
  double causal_flip_prob = 0.25;
  /// Codewords are redrawn until every pair differs in at least this many bits.
  std::size_t min_codeword_distance = 4;
  std::size_t n_train = 10000;
  std::size_t n_test = 10000;
  double lambda0 = 0.25;
  double lr = 0.5;
  std::size_t iterations = 2000;
  std::uint64_t seed = 0;

  std::size_t n_classes() const noexcept { return n_colors / 2; }
  std::size_t input_dim() const noexcept { return n_causal_bits + n_colors; }
};

inline void validate(const SpuriousConfig& cfg) {
  if (cfg.n_causal_bits < 1 || cfg.n_causal_bits > 20) {
    throw ConfigError("spurious: n_causal_bits must lie in [1, 20]");
  }
  if (cfg.n_colors < 4 || cfg.n_colors % 2 != 0) {
    throw ConfigError("spurious: n_colors must be even and >= 4");
  }
  if (!(cfg.causal_flip_prob >= 0.0 && cfg.causal_flip_prob < 0.5)) {
    throw ConfigError("spurious: causal_flip_prob must lie in [0, 0.5)");
  }
  if (cfg.n_train < 1 || cfg.n_test < 1 || cfg.iterations < 1) {
    throw ConfigError("spurious: sizes and iterations must be >= 1");
  }
  if (!(cfg.lambda0 >= 0.0) || !(cfg.lr > 0.0)) {
    throw ConfigError("spurious: lambda0 must be >= 0 and lr > 0");
  }
}

enum class Split { kTrain, kTest };

using Codeword = std::vector<std::uint8_t>;

/// One codeword per class, drawn with rejection until pairwise Hamming
/// distances reach cfg.min_codeword_distance.
inline std::vector<Codeword> make_codebook(const SpuriousConfig& cfg) {
  validate(cfg);
  CounterRng rng(derive_seed(cfg.seed, "spurious-codebook"));
  const std::size_t k = cfg.n_classes();
  for (int attempt = 0; attempt < 100000; ++attempt) {
    std::vector<Codeword> book(k, Codeword(cfg.n_causal_bits));
    for (auto& word : book) {
      for (auto& bit : word) bit = static_cast<std::uint8_t>(rng.below(2));
    }
    bool ok = true;
    for (std::size_t a = 0; a < k && ok; ++a) {
      for (std::size_t b = a + 1; b < k && ok; ++b) {
        std::size_t d = 0;
        for (std::size_t j = 0; j < cfg.n_causal_bits; ++j) {
          d += book[a][j] != book[b][j];
        }
        ok = d >= cfg.min_codeword_distance;
      }
    }
    if (ok) return book;
  }
  throw ConfigError("spurious: no codebook meets the minimum distance");
}

struct SpuriousDataset {
  std::size_t n_bits = 0;
  std::size_t n_colors = 0;
  /// Observed causal bits, row-major n x n_bits.
  std::vector<std::uint8_t> bits;
  std::vector<std::size_t> color;
  std::vector<std::size_t> label;

  std::size_t size() const noexcept { return label.size(); }

  /// Causal bit block followed by the one-hot color block.
  std::vector<double> input(std::size_t i) const {
    std::vector<double> x(n_bits + n_colors, 0.0);
    for (std::size_t j = 0; j < n_bits; ++j) x[j] = bits[i * n_bits + j];
    x[n_bits + color[i]] = 1.0;
    return x;
  }
};

inline SpuriousDataset make_spurious_dataset(const SpuriousConfig& cfg,
                                             Split split) {
  const auto book = make_codebook(cfg);
  const bool train = split == Split::kTrain;
  const std::size_t n = train ? cfg.n_train : cfg.n_test;
  SpuriousDataset d;
  d.n_bits = cfg.n_causal_bits;
  d.n_colors = cfg.n_colors;
  d.bits.resize(n * cfg.n_causal_bits);
  d.color.resize(n);
  d.label.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    CounterRng rng(derive_seed(
        cfg.seed, train ? "spurious-train" : "spurious-test", i));
    const std::size_t y = rng.below(cfg.n_classes());
    d.label[i] = y;
    for (std::size_t j = 0; j < cfg.n_causal_bits; ++j) {
      const bool flip = rng.uniform() <= cfg.causal_flip_prob &&
                        cfg.causal_flip_prob > 0.0;
      d.bits[i * cfg.n_causal_bits + j] =
          static_cast<std::uint8_t>(book[y][j] ^ (flip ? 1 : 0));
    }
    d.color[i] = train ? 2 * y + rng.below(2) : rng.below(cfg.n_colors);
  }
  return d;
}

/// Replaces the color block with canonical color 0; the causal block is
/// copied unchanged.
inline std::vector<double> decolor_transform(std::span<const double> input,
                                             std::size_t n_bits,
                                             std::size_t n_colors) {
  if (input.size() != n_bits + n_colors) {
    throw PreconditionError("decolor_transform: input has " +
                            std::to_string(input.size()) +
                            " entries, expected " +
                            std::to_string(n_bits + n_colors));
  }
  std::size_t ones = 0;
  for (std::size_t c = 0; c < n_colors; ++c) {
    const double v = input[n_bits + c];
    if (v == 1.0) {
      ++ones;
    } else if (v != 0.0) {
      ones = 2;
    }
  }
  if (ones != 1) {
    throw PreconditionError("decolor_transform: color block is not one-hot");
  }
  std::vector<double> out(input.begin(), input.end());
  std::fill(out.begin() + static_cast<std::ptrdiff_t>(n_bits), out.end(), 0.0);
  out[n_bits] = 1.0;
  return out;
}

/// Accuracy of the Bayes rule that sees only the observed causal bits,
/// by exact enumeration of all 2^n_bits observations.
inline double causal_bayes_rate(const SpuriousConfig& cfg) {
  const auto book = make_codebook(cfg);
  const std::size_t k = cfg.n_classes();
  const double p = cfg.causal_flip_prob;
  double total = 0.0;
  for (std::uint64_t obs = 0; obs < (1ULL << cfg.n_causal_bits); ++obs) {
    double best = 0.0;
    for (std::size_t y = 0; y < k; ++y) {
      double lik = 1.0 / static_cast<double>(k);
      for (std::size_t j = 0; j < cfg.n_causal_bits; ++j) {
        const bool bit = (obs >> j) & 1U;
        lik *= (bit != static_cast<bool>(book[y][j])) ? p : 1.0 - p;
      }
      best = std::max(best, lik);
    }
    total += best;
  }
  return total;
}

/// Linear softmax classifier: logits = W [x; 1].
struct LinearSoftmax {
  std::size_t n_classes = 0;
  std::size_t n_inputs = 0;
  /// Row-major n_classes x (n_inputs + 1); the last column is the bias.
  std::vector<double> weights;

  LinearSoftmax(std::size_t classes, std::size_t inputs)
      : n_classes(classes),
        n_inputs(inputs),
        weights(classes * (inputs + 1), 0.0) {}

  std::vector<double> logits(std::span<const double> x) const {
    std::vector<double> z(n_classes, 0.0);
    const std::size_t stride = n_inputs + 1;
    for (std::size_t k = 0; k < n_classes; ++k) {
      double s = weights[k * stride + n_inputs];
      for (std::size_t j = 0; j < n_inputs; ++j) {
        s += weights[k * stride + j] * x[j];
      }
      z[k] = s;
    }
    return z;
  }

  std::size_t predict(std::span<const double> x) const {
    const auto z = logits(x);
    return static_cast<std::size_t>(std::max_element(z.begin(), z.end()) -
                                    z.begin());
  }
};

/// Full-batch gradient descent on mean cross entropy plus
/// lambda0 * mean ||f(x) - f(decolor(x))||^2 over logits. With lambda0 = 0
/// this is plain ERM. `decolor_inputs` replaces every input by its decolored
/// version before training.
inline LinearSoftmax train_spurious_classifier(const SpuriousConfig& cfg,
                                               const SpuriousDataset& data,
                                               double lambda0,
                                               bool decolor_inputs = false) {
  const std::size_t n = data.size();
  const std::size_t dim = cfg.input_dim();
  const std::size_t k = cfg.n_classes();
  std::vector<std::vector<double>> xs(n);
  std::vector<std::vector<double>> diffs(n);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = data.input(i);
    const auto dec = decolor_transform(xs[i], cfg.n_causal_bits, cfg.n_colors);
    if (decolor_inputs) xs[i] = dec;
    diffs[i].resize(dim);
    for (std::size_t j = 0; j < dim; ++j) diffs[i][j] = xs[i][j] - dec[j];
  }
  LinearSoftmax model(k, dim);
  const std::size_t stride = dim + 1;
  std::vector<double> grad(model.weights.size());
  std::vector<double> prob(k);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t t = 0; t < cfg.iterations; ++t) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double objective = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto z = model.logits(xs[i]);
      objective += softmax_cross_entropy(z, data.label[i]);
      const double top = *std::max_element(z.begin(), z.end());
      double sum = 0.0;
      for (std::size_t c = 0; c < k; ++c) sum += prob[c] = std::exp(z[c] - top);
      for (std::size_t c = 0; c < k; ++c) {
        const double r = (prob[c] / sum - (c == data.label[i] ? 1.0 : 0.0)) * inv_n;
        for (std::size_t j = 0; j < dim; ++j) grad[c * stride + j] += r * xs[i][j];
        grad[c * stride + dim] += r;
      }
      if (lambda0 > 0.0 && !decolor_inputs) {
        // f(x) - f(decolor x) = W diff (the bias cancels).
        for (std::size_t c = 0; c < k; ++c) {
          double delta = 0.0;
          for (std::size_t j = 0; j < dim; ++j) {
            delta += model.weights[c * stride + j] * diffs[i][j];
          }
          if (delta == 0.0) continue;
          objective += lambda0 * delta * delta;
          const double r = 2.0 * lambda0 * delta * inv_n;
          for (std::size_t j = 0; j < dim; ++j) {
            grad[c * stride + j] += r * diffs[i][j];
          }
        }
      }
    }
    if (!std::isfinite(objective)) {
      throw DivergenceError(t, "spurious: training diverged at iteration " +
                                   std::to_string(t));
    }
    for (std::size_t w = 0; w < grad.size(); ++w) {
      model.weights[w] -= cfg.lr * grad[w];
    }
  }
  return model;
}

/// Fraction of correct predictions; with `decolor` set the model sees the
/// decolored inputs, as it did in training.
inline double accuracy(const LinearSoftmax& model, const SpuriousDataset& data,
                       bool decolor = false) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    auto x = data.input(i);
    if (decolor) x = decolor_transform(x, data.n_bits, data.n_colors);
    hits += model.predict(x) == data.label[i];
  }
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

struct SpuriousResult {
  double erm_accuracy = 0.0;
  double rice_accuracy = 0.0;
  /// ERM trained and evaluated on decolored inputs.
  double decolored_accuracy = 0.0;
  double bayes_rate = 0.0;
  std::size_t n_test = 0;
  std::uint64_t seed = 0;

  friend bool operator==(const SpuriousResult&,
                         const SpuriousResult&) = default;
};

/// Test accuracy on the color-randomized split for ERM, RICE and the
/// decolored-input reference, plus the exact causal-only Bayes rate.
inline SpuriousResult run_spurious(const SpuriousConfig& cfg) {
  validate(cfg);
  const auto train_set = make_spurious_dataset(cfg, Split::kTrain);
  const auto test_set = make_spurious_dataset(cfg, Split::kTest);
  SpuriousResult r;
  r.erm_accuracy = accuracy(train_spurious_classifier(cfg, train_set, 0.0), test_set);
  r.rice_accuracy =
      accuracy(train_spurious_classifier(cfg, train_set, cfg.lambda0), test_set);
  r.decolored_accuracy =
      accuracy(train_spurious_classifier(cfg, train_set, 0.0, true), test_set, true);
  r.bayes_rate = causal_bayes_rate(cfg);
  r.n_test = cfg.n_test;
  r.seed = cfg.seed;
  return r;
}

inline constexpr std::string_view kSpuriousHeader = "method,accuracy,n_test,seed";

inline std::string spurious_to_csv(const SpuriousResult& r) {
  std::string out(kSpuriousHeader);
  out += '\n';
  const auto row = [&](std::string_view method, double acc) {
    out += std::string(method) + ',' + csv::format_double(acc) + ',' +
           std::to_string(r.n_test) + ',' + std::to_string(r.seed) + '\n';
  };
  row("erm", r.erm_accuracy);
  row("rice", r.rice_accuracy);
  row("erm_decolored", r.decolored_accuracy);
  return out;
}

/// Parses the rows written by spurious_to_csv; bayes_rate is not stored.
inline SpuriousResult spurious_from_csv(const std::string& text) {
  const auto lines = csv::lines(text);
  if (lines.empty() || lines.front() != kSpuriousHeader) {
    throw ConfigError("spurious CSV: missing header");
  }
  SpuriousResult r;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = csv::split(lines[i]);
    if (f.size() != 4) throw ConfigError("spurious CSV: bad row");
    const double acc = csv::parse_double(f[1]);
    if (f[0] == "erm") {
      r.erm_accuracy = acc;
    } else if (f[0] == "rice") {
      r.rice_accuracy = acc;
    } else if (f[0] == "erm_decolored") {
      r.decolored_accuracy = acc;
    } else {
      throw ConfigError("spurious CSV: unknown method '" + std::string(f[0]) + "'");
    }
    r.n_test = static_cast<std::size_t>(csv::parse_double(f[2]));
    r.seed = std::stoull(std::string(f[3]));
  }
  return r;
}

inline void write_results(const SpuriousResult& r,
                          const std::filesystem::path& path) {
  csv::write_file(path, spurious_to_csv(r));
}

}  // namespace ricelab
