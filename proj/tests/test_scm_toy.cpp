#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "ricelab/scm_toy.hpp"

using namespace ricelab;

namespace {

constexpr double kPi = std::numbers::pi;

// Bisection on the erfc-based CDF, independent of the rational approximation.
double bisect_quantile(double p) {
  double lo = -40.0;
  double hi = 40.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (0.5 * std::erfc(-mid / std::sqrt(2.0)) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

Matrix2 with_midpoint(double wx, double wy) {
  // Columns (wx, wy) + (1, -2) and (wx, wy) - (1, -2).
  return Matrix2::from_columns(wx + 1.0, wy - 2.0, wx - 1.0, wy + 2.0);
}

struct Moments {
  double mean = 0.0;
  double sd = 0.0;
};

Moments moments(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return {m, std::sqrt(s / static_cast<double>(v.size() - 1))};
}

}  // namespace

TEST(AngleAlpha, VerticalMidpoint) {
  EXPECT_NEAR(angle_alpha(with_midpoint(0.0, 1.0)), kPi / 2, 1e-15);
}

TEST(AngleAlpha, UpperLeftDiagonal) {
  EXPECT_NEAR(angle_alpha(with_midpoint(-1.0, 1.0)), 3 * kPi / 4, 1e-15);
}

TEST(AngleAlpha, LowerRightFoldsToSameAngle) {
  EXPECT_NEAR(angle_alpha(with_midpoint(1.0, -1.0)), 3 * kPi / 4, 1e-15);
}

TEST(AngleAlpha, ZeroMidpointIsDomainError) {
  EXPECT_THROW(angle_alpha(with_midpoint(0.0, 0.0)), DomainError);
}

TEST(AngleAlpha, HorizontalMidpointIsClamped) {
  EXPECT_EQ(angle_alpha(with_midpoint(1.0, 0.0)), kAngleClamp);
  EXPECT_EQ(angle_alpha(with_midpoint(-1.0, 0.0)), kAngleClamp);
}

TEST(AngleAlpha, UndirectedUnderNegation) {
  CounterRng rng(11);
  for (int i = 0; i < 1000; ++i) {
    const double wx = rng.normal();
    const double wy = rng.normal();
    const double a = angle_alpha(with_midpoint(wx, wy));
    EXPECT_NEAR(a, angle_alpha(with_midpoint(-wx, -wy)), 1e-14);
    EXPECT_GT(a, 0.0);
    EXPECT_LT(a, kPi);
  }
}

TEST(InvNormCdf, Median) { EXPECT_NEAR(inv_norm_cdf(0.5), 0.0, 1e-15); }

TEST(InvNormCdf, MatchesBisectionOracle) {
  EXPECT_NEAR(bisect_quantile(0.975), 1.959964, 1e-6);
  EXPECT_NEAR(bisect_quantile(0.16), -0.994458, 1e-6);
  EXPECT_NEAR(inv_norm_cdf(0.975), bisect_quantile(0.975), 1e-9);
  EXPECT_NEAR(inv_norm_cdf(0.16), bisect_quantile(0.16), 1e-9);
}

TEST(InvNormCdf, CdfRoundTripAcrossRange) {
  for (double p : {1e-12, 1e-8, 1e-4, 0.01, 0.02425, 0.1, 0.3, 0.5, 0.7, 0.9,
                   0.97575, 0.99, 1 - 1e-4, 1 - 1e-8}) {
    EXPECT_NEAR(norm_cdf(inv_norm_cdf(p)), p, 1e-9) << "p=" << p;
    EXPECT_NEAR(inv_norm_cdf(p), bisect_quantile(p), 1e-7 * (1 + std::abs(bisect_quantile(p))))
        << "p=" << p;
  }
}

TEST(InvNormCdf, OutsideUnitIntervalIsDomainError) {
  EXPECT_THROW(inv_norm_cdf(0.0), DomainError);
  EXPECT_THROW(inv_norm_cdf(1.0), DomainError);
  EXPECT_THROW(inv_norm_cdf(-0.1), DomainError);
  EXPECT_THROW(inv_norm_cdf(std::nan("")), DomainError);
}

TEST(GenNoise, ZeroStrengthReturnsEps) {
  EXPECT_DOUBLE_EQ(gen_noise(0.3, 1.25, 0.0), 1.25);
}

TEST(GenNoise, QuarterTurnAngleScalesEps) {
  EXPECT_NEAR(gen_noise(kPi / 2, 2.0, 3.0), 2.0 / std::sqrt(10.0), 1e-15);
}

TEST(GenNoise, UnitQuantileAndUnitStrength) {
  const double alpha = kPi * norm_cdf(1.0);
  EXPECT_NEAR(gen_noise(alpha, 1.0, 1.0), std::sqrt(2.0), 1e-9);
}

TEST(GenNoise, AngleOutsideRangeIsDomainError) {
  EXPECT_THROW(gen_noise(0.0, 0.0, 1.0), DomainError);
  EXPECT_THROW(gen_noise(kPi, 0.0, 1.0), DomainError);
}

TEST(SampleDataset, SizeAndMetadata) {
  const auto d = sample_dataset(1000, -3.0, 5);
  EXPECT_EQ(d.size(), 1000u);
  EXPECT_EQ(d.a, -3.0);
  EXPECT_EQ(d.seed, 5u);
  for (const auto& s : d.samples) {
    EXPECT_TRUE(s.x.is_finite());
    EXPECT_TRUE(std::isfinite(s.y));
  }
}

TEST(SampleDataset, Deterministic) {
  const auto a = sample_dataset(500, 1.5, 42);
  const auto b = sample_dataset(500, 1.5, 42);
  EXPECT_EQ(a.samples, b.samples);
  const auto c = sample_dataset(500, 1.5, 43);
  EXPECT_NE(a.samples, c.samples);
}

TEST(SampleDataset, PrefixStable) {
  const auto small = sample_dataset(10, 0.5, 9);
  const auto large = sample_dataset(100, 0.5, 9);
  for (std::size_t i = 0; i < small.size(); ++i) {
    EXPECT_EQ(small.samples[i], large.samples[i]);
  }
}

TEST(SampleDataset, RejectsBadArguments) {
  EXPECT_THROW(sample_dataset(0, 0.0, 1), PreconditionError);
  EXPECT_THROW(sample_dataset(5, INFINITY, 1), DomainError);
}

TEST(SampleDataset, ColumnVariances) {
  const auto d = sample_dataset(100000, 0.0, 3);
  std::vector<double> c1;
  std::vector<double> c2;
  for (const auto& s : d.samples) {
    c1.push_back(s.x.x11);
    c2.push_back(s.x.x22);
  }
  EXPECT_NEAR(moments(c1).sd, 1.0, 0.02);
  EXPECT_NEAR(moments(c2).sd, std::sqrt(2.0), 0.02);
}

class NoiseMarginal : public ::testing::TestWithParam<double> {};

TEST_P(NoiseMarginal, StandardNormalMoments) {
  const auto d = sample_dataset(100000, GetParam(), 17);
  std::vector<double> eta;
  for (const auto& s : d.samples) eta.push_back(recovered_noise(s));
  const auto m = moments(eta);
  EXPECT_LE(std::abs(m.mean), 0.02);
  EXPECT_LE(std::abs(m.sd - 1.0), 0.02);
}

TEST_P(NoiseMarginal, CorrelationWithAngleQuantile) {
  const double a = GetParam();
  const auto d = sample_dataset(100000, a, 23);
  std::vector<double> q;
  std::vector<double> eta;
  for (const auto& s : d.samples) {
    q.push_back(inv_norm_cdf(angle_alpha(s.x) / kPi));
    eta.push_back(recovered_noise(s));
  }
  const auto mq = moments(q);
  const auto me = moments(eta);
  double cov = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) cov += (q[i] - mq.mean) * (eta[i] - me.mean);
  cov /= static_cast<double>(q.size() - 1);
  const double corr = cov / (mq.sd * me.sd);
  const double expected = a / std::sqrt(a * a + 1.0);
  EXPECT_NEAR(corr, expected, 0.02);
  if (a != 0.0) {
    EXPECT_EQ(std::signbit(corr), std::signbit(a));
  }
}

INSTANTIATE_TEST_SUITE_P(Strengths, NoiseMarginal, ::testing::Values(-3.0, 0.0, 3.0));

TEST(DatasetCsv, HeaderAndRoundTrip) {
  const auto d = sample_dataset(50, -3.0, 1);
  const std::string text = dataset_to_csv(d);
  EXPECT_EQ(text.substr(0, text.find('\n')), "x11,x21,x12,x22,y");
  const auto back = dataset_from_csv(text);
  EXPECT_EQ(back.samples, d.samples);
}

TEST(DatasetCsv, RejectsMissingHeader) {
  EXPECT_THROW(dataset_from_csv("1,2,3,4,5\n"), ConfigError);
  EXPECT_THROW(dataset_from_csv("x11,x21,x12,x22,y\n1,2,3\n"), ConfigError);
}
