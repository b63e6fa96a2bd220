#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <numeric>

#include "ricelab/spurious.hpp"

using namespace ricelab;

namespace {

// Upper tail of the chi-square distribution by numerically integrating the
// density; independent of any library quantile.
double chi2_upper_tail(double x, double df) {
  const double k = df / 2.0;
  const double log_norm = -k * std::log(2.0) - std::lgamma(k);
  auto density = [&](double t) {
    return t <= 0.0 ? 0.0 : std::exp(log_norm + (k - 1) * std::log(t) - t / 2.0);
  };
  // Simpson's rule on [0, x].
  const int steps = 200000;
  const double h = x / steps;
  double s = density(0.0) + density(x);
  for (int i = 1; i < steps; ++i) s += density(i * h) * (i % 2 ? 4.0 : 2.0);
  return 1.0 - s * h / 3.0;
}

class SpuriousDefault : public ::testing::Test {
 protected:
  static void SetUpTestSuite() { result_ = new SpuriousResult(run_spurious(SpuriousConfig{})); }
  static void TearDownTestSuite() {
    delete result_;
    result_ = nullptr;
  }
  static SpuriousResult* result_;
};

SpuriousResult* SpuriousDefault::result_ = nullptr;

}  // namespace

TEST(Codebook, MinimumDistanceAndDeterminism) {
  SpuriousConfig cfg;
  const auto book = make_codebook(cfg);
  ASSERT_EQ(book.size(), cfg.n_classes());
  for (std::size_t a = 0; a < book.size(); ++a) {
    ASSERT_EQ(book[a].size(), cfg.n_causal_bits);
    for (std::size_t b = a + 1; b < book.size(); ++b) {
      std::size_t d = 0;
      for (std::size_t j = 0; j < cfg.n_causal_bits; ++j) d += book[a][j] != book[b][j];
      EXPECT_GE(d, cfg.min_codeword_distance);
    }
  }
  EXPECT_EQ(book, make_codebook(cfg));
}

TEST(Codebook, ImpossibleDistanceRejected) {
  SpuriousConfig cfg;
  cfg.n_causal_bits = 2;
  cfg.min_codeword_distance = 3;
  EXPECT_THROW(make_codebook(cfg), ConfigError);
}

TEST(SpuriousDataset, NoiselessTrainHasTwoPerfectPredictors) {
  SpuriousConfig cfg;
  cfg.causal_flip_prob = 0.0;
  cfg.n_train = 2000;
  const auto book = make_codebook(cfg);
  const auto d = make_spurious_dataset(cfg, Split::kTrain);
  for (std::size_t i = 0; i < d.size(); ++i) {
    EXPECT_EQ(d.color[i] / 2, d.label[i]);
    for (std::size_t j = 0; j < cfg.n_causal_bits; ++j) {
      EXPECT_EQ(d.bits[i * cfg.n_causal_bits + j], book[d.label[i]][j]);
    }
  }
}

TEST(SpuriousDataset, TestColorIndependentOfLabel) {
  SpuriousConfig cfg;
  const auto d = make_spurious_dataset(cfg, Split::kTest);
  ASSERT_GE(d.size(), 10000u);
  const std::size_t k = cfg.n_classes();
  const std::size_t c = cfg.n_colors;
  std::vector<double> counts(k * c, 0.0);
  std::vector<double> rows(k, 0.0);
  std::vector<double> cols(c, 0.0);
  for (std::size_t i = 0; i < d.size(); ++i) {
    counts[d.label[i] * c + d.color[i]] += 1;
    rows[d.label[i]] += 1;
    cols[d.color[i]] += 1;
  }
  const double n = static_cast<double>(d.size());
  double stat = 0.0;
  for (std::size_t y = 0; y < k; ++y) {
    for (std::size_t col = 0; col < c; ++col) {
      const double e = rows[y] * cols[col] / n;
      stat += (counts[y * c + col] - e) * (counts[y * c + col] - e) / e;
    }
  }
  const double df = static_cast<double>((k - 1) * (c - 1));
  EXPECT_NEAR(chi2_upper_tail(58.62, 36.0), 0.01, 2e-4);
  EXPECT_LT(stat, 58.62) << "df " << df;
}

TEST(SpuriousDataset, TrainColorPairsWithLabel) {
  SpuriousConfig cfg;
  cfg.n_train = 3000;
  const auto d = make_spurious_dataset(cfg, Split::kTrain);
  for (std::size_t i = 0; i < d.size(); ++i) EXPECT_EQ(d.color[i] / 2, d.label[i]);
}

TEST(SpuriousDataset, FlipRate) {
  SpuriousConfig cfg;
  const auto book = make_codebook(cfg);
  const auto d = make_spurious_dataset(cfg, Split::kTest);
  double flips = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    for (std::size_t j = 0; j < cfg.n_causal_bits; ++j) {
      flips += d.bits[i * cfg.n_causal_bits + j] != book[d.label[i]][j];
    }
  }
  const double n = static_cast<double>(d.size() * cfg.n_causal_bits);
  EXPECT_NEAR(flips / n, 0.25, 4 * std::sqrt(0.25 * 0.75 / n));
}

TEST(BayesRate, MatchesEmpiricalBayesRule) {
  SpuriousConfig cfg;
  const auto book = make_codebook(cfg);
  const auto d = make_spurious_dataset(cfg, Split::kTest);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    // Equal priors and a symmetric channel: nearest codeword, lowest index on ties.
    std::size_t best = 0;
    std::size_t best_dist = cfg.n_causal_bits + 1;
    for (std::size_t y = 0; y < book.size(); ++y) {
      std::size_t dist = 0;
      for (std::size_t j = 0; j < cfg.n_causal_bits; ++j) {
        dist += d.bits[i * cfg.n_causal_bits + j] != book[y][j];
      }
      if (dist < best_dist) {
        best = y;
        best_dist = dist;
      }
    }
    hits += best == d.label[i];
  }
  const double acc = static_cast<double>(hits) / static_cast<double>(d.size());
  const double bayes = causal_bayes_rate(cfg);
  EXPECT_NEAR(acc, bayes, 4 * std::sqrt(bayes * (1 - bayes) / static_cast<double>(d.size())));
}

TEST(BayesRate, Limits) {
  SpuriousConfig cfg;
  cfg.causal_flip_prob = 0.0;
  EXPECT_NEAR(causal_bayes_rate(cfg), 1.0, 1e-12);
}

TEST(Decolor, IdempotentAndPreservesCausalBlock) {
  SpuriousConfig cfg;
  cfg.n_test = 200;
  const auto d = make_spurious_dataset(cfg, Split::kTest);
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto x = d.input(i);
    const auto once = decolor_transform(x, cfg.n_causal_bits, cfg.n_colors);
    EXPECT_EQ(decolor_transform(once, cfg.n_causal_bits, cfg.n_colors), once);
    for (std::size_t j = 0; j < cfg.n_causal_bits; ++j) EXPECT_EQ(once[j], x[j]);
    EXPECT_EQ(once[cfg.n_causal_bits], 1.0);
  }
}

TEST(Decolor, MalformedInputRejected) {
  std::vector<double> short_input(5, 0.0);
  EXPECT_THROW(decolor_transform(short_input, 2, 4), PreconditionError);
  std::vector<double> two_hot{1, 0, 1, 1, 0, 0};
  EXPECT_THROW(decolor_transform(two_hot, 2, 4), PreconditionError);
  std::vector<double> no_color{1, 0, 0, 0, 0, 0};
  EXPECT_THROW(decolor_transform(no_color, 2, 4), PreconditionError);
}

TEST(Decolor, ConditionalLabelLawMatchesCausalBlock) {
  // Exact training joint P(y, bits, color) on a small configuration. Grouping
  // by the decolored input must give P(y | bits).
  SpuriousConfig cfg;
  cfg.n_causal_bits = 4;
  cfg.n_colors = 4;
  cfg.min_codeword_distance = 2;
  const auto book = make_codebook(cfg);
  const std::size_t k = cfg.n_classes();
  const double p = cfg.causal_flip_prob;
  std::map<std::vector<double>, std::vector<double>> by_decolored;
  std::map<std::uint64_t, std::vector<double>> by_bits;
  for (std::uint64_t obs = 0; obs < 16; ++obs) {
    for (std::size_t color = 0; color < cfg.n_colors; ++color) {
      std::vector<double> x(cfg.input_dim(), 0.0);
      for (std::size_t j = 0; j < 4; ++j) x[j] = static_cast<double>((obs >> j) & 1U);
      x[4 + color] = 1.0;
      const auto key = decolor_transform(x, 4, cfg.n_colors);
      auto& joint = by_decolored[key];
      joint.resize(k, 0.0);
      auto& causal = by_bits[obs];
      causal.resize(k, 0.0);
      for (std::size_t y = 0; y < k; ++y) {
        double lik = 1.0 / static_cast<double>(k);
        for (std::size_t j = 0; j < 4; ++j) {
          lik *= (((obs >> j) & 1U) != book[y][j]) ? p : 1 - p;
        }
        const double pc = color / 2 == y ? 0.5 : 0.0;
        joint[y] += lik * pc;
        causal[y] += lik * pc;
      }
    }
  }
  for (const auto& [key, joint] : by_decolored) {
    std::uint64_t obs = 0;
    for (std::size_t j = 0; j < 4; ++j) obs |= static_cast<std::uint64_t>(key[j]) << j;
    const auto& causal = by_bits.at(obs);
    const double zj = std::accumulate(joint.begin(), joint.end(), 0.0);
    const double zc = std::accumulate(causal.begin(), causal.end(), 0.0);
    for (std::size_t y = 0; y < k; ++y) EXPECT_NEAR(joint[y] / zj, causal[y] / zc, 1e-15);
  }
}

TEST(SpuriousTraining, ZeroPenaltyEqualsErm) {
  SpuriousConfig cfg;
  cfg.n_train = 1000;
  cfg.iterations = 200;
  const auto train = make_spurious_dataset(cfg, Split::kTrain);
  const auto a = train_spurious_classifier(cfg, train, 0.0);
  const auto b = train_spurious_classifier(cfg, train, 0.0);
  EXPECT_EQ(a.weights, b.weights);
  cfg.lambda0 = 0.0;
  cfg.n_test = 1000;
  const auto r = run_spurious(cfg);
  EXPECT_EQ(r.erm_accuracy, r.rice_accuracy);
}

TEST(SpuriousTraining, LinearSoftmaxShape) {
  LinearSoftmax m(3, 4);
  EXPECT_EQ(m.weights.size(), 15u);
  m.weights[1 * 5 + 4] = 1.0;  // bias of class 1
  const std::vector<double> x(4, 0.0);
  EXPECT_EQ(m.predict(x), 1u);
}

TEST(SpuriousConfigValidation, Rejections) {
  SpuriousConfig cfg;
  cfg.causal_flip_prob = 0.5;
  EXPECT_THROW(validate(cfg), ConfigError);
  cfg = {};
  cfg.n_colors = 7;
  EXPECT_THROW(validate(cfg), ConfigError);
  cfg = {};
  cfg.lr = 0.0;
  EXPECT_THROW(validate(cfg), ConfigError);
}

TEST_F(SpuriousDefault, ErmFollowsColor) {
  // Test colors are uniform, so a color-reading rule is at chance.
  EXPECT_LT(result_->erm_accuracy, 0.3);
}

TEST_F(SpuriousDefault, RiceBeatsErmByFifteenPoints) {
  EXPECT_GE(result_->rice_accuracy - result_->erm_accuracy, 0.15);
}

TEST_F(SpuriousDefault, RiceNearCausalBayesRate) {
  EXPECT_LE(std::abs(result_->rice_accuracy - result_->bayes_rate), 0.02);
}

TEST_F(SpuriousDefault, DecoloredTrainingNearCausalBayesRate) {
  EXPECT_LE(std::abs(result_->decolored_accuracy - result_->bayes_rate), 0.02);
}

TEST_F(SpuriousDefault, CsvRoundTrip) {
  const std::string text = spurious_to_csv(*result_);
  EXPECT_EQ(text.substr(0, text.find('\n')), "method,accuracy,n_test,seed");
  auto back = spurious_from_csv(text);
  back.bayes_rate = result_->bayes_rate;
  EXPECT_EQ(back, *result_);
}
