#pragma once

// Structural causal model of the 2x2-matrix toy problem:
//   X1 ~ N(0, I2), X2 ~ N(0, 2 I2), X = (X1, X2)
//   eta = (a * Phi^-1(alpha / pi) + eps) / sqrt(a^2 + 1),  eps ~ N(0, 1)
//   Y = |det X| + eta
// where alpha is the undirected angle of (X1 + X2) / 2 with the x-axis.
// The parameter a controls how strongly the non-causal angle tracks the noise.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "ricelab/csv.hpp"
#include "ricelab/error.hpp"
#include "ricelab/rng.hpp"

namespace ricelab {

/// A 2x2 matrix stored by entry; (x11, x21) is the first column X1 and
/// (x12, x22) the second column X2.
struct Matrix2 {
  double x11 = 0.0;
  double x21 = 0.0;
  double x12 = 0.0;
  double x22 = 0.0;

  static constexpr Matrix2 from_columns(double c1x, double c1y, double c2x,
                                        double c2y) noexcept {
    return {c1x, c1y, c2x, c2y};
  }
  static constexpr Matrix2 identity() noexcept { return {1.0, 0.0, 0.0, 1.0}; }

  constexpr double det() const noexcept { return x11 * x22 - x21 * x12; }

  bool is_finite() const noexcept {
    return std::isfinite(x11) && std::isfinite(x21) && std::isfinite(x12) &&
           std::isfinite(x22);
  }

  friend constexpr bool operator==(const Matrix2&, const Matrix2&) = default;
};

struct ToySample {
  Matrix2 x;
  double y = 0.0;

  friend constexpr bool operator==(const ToySample&,
                                   const ToySample&) = default;
};

struct ToyDataset {
  std::vector<ToySample> samples;
  double a = 0.0;
  std::uint64_t seed = 0;

  std::size_t size() const noexcept { return samples.size(); }
};

inline constexpr double kAngleClamp = 1e-12;

/// Undirected angle of the column midpoint with the positive x-axis, folded
/// into (0, pi) and clamped away from the endpoints.
inline double angle_alpha(const Matrix2& x) {
  const double wx = 0.5 * (x.x11 + x.x12);
  const double wy = 0.5 * (x.x21 + x.x22);
  if (wx == 0.0 && wy == 0.0) {
    throw DomainError("angle_alpha: column midpoint is the zero vector");
  }
  double angle = std::atan2(wy, wx);
  if (angle < 0.0) angle += std::numbers::pi;
  if (angle >= std::numbers::pi) angle -= std::numbers::pi;
  return std::clamp(angle, kAngleClamp, std::numbers::pi - kAngleClamp);
}

inline double norm_cdf(double x) noexcept {
  return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

inline double norm_pdf(double x) noexcept {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

/// Standard normal quantile: Acklam's rational approximation followed by one
/// Newton step against the erfc-based CDF.
inline double inv_norm_cdf(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw DomainError("inv_norm_cdf: probability must lie in (0, 1)");
  }
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;

  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) *
        q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q +
          c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double density = norm_pdf(x);
  if (density > 0.0) x -= (norm_cdf(x) - p) / density;
  return x;
}

/// eta = (a * Phi^-1(alpha / pi) + eps) / sqrt(a^2 + 1).
inline double gen_noise(double alpha, double eps, double a) {
  if (!(alpha > 0.0 && alpha < std::numbers::pi)) {
    throw DomainError("gen_noise: alpha must lie in (0, pi)");
  }
  return (a * inv_norm_cdf(alpha / std::numbers::pi) + eps) /
         std::sqrt(a * a + 1.0);
}

/// The structural noise implied by a sample, y - |det x|.
inline double recovered_noise(const ToySample& s) noexcept {
  return s.y - std::abs(s.x.det());
}

/// Draws one sample from the stream keyed by (seed, index).
inline ToySample sample_one(double a, std::uint64_t seed, std::uint64_t index) {
  CounterRng rng(derive_seed(seed, "toy-sample", index));
  ToySample s;
  s.x.x11 = rng.normal();
  s.x.x21 = rng.normal();
  s.x.x12 = std::numbers::sqrt2 * rng.normal();
  s.x.x22 = std::numbers::sqrt2 * rng.normal();
  const double eps = rng.normal();
  const double eta = gen_noise(angle_alpha(s.x), eps, a);
  s.y = std::abs(s.x.det()) + eta;
  return s;
}

/// n i.i.d. samples at spurious strength a. Sample i depends only on
/// (seed, i), so datasets that share a seed share inputs and eps across a.
inline ToyDataset sample_dataset(std::size_t n, double a, std::uint64_t seed) {
  if (n == 0) throw PreconditionError("sample_dataset: n must be >= 1");
  if (!std::isfinite(a)) throw DomainError("sample_dataset: a must be finite");
  ToyDataset data;
  data.a = a;
  data.seed = seed;
  data.samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    data.samples.push_back(sample_one(a, seed, i));
  }
  return data;
}

inline constexpr std::string_view kDatasetHeader = "x11,x21,x12,x22,y";

inline std::string dataset_to_csv(const ToyDataset& data) {
  std::string out(kDatasetHeader);
  out += '\n';
  for (const auto& s : data.samples) {
    out += csv::format_double(s.x.x11) + ',' + csv::format_double(s.x.x21) +
           ',' + csv::format_double(s.x.x12) + ',' +
           csv::format_double(s.x.x22) + ',' + csv::format_double(s.y) + '\n';
  }
  return out;
}

/// Parses the gen-data CSV format; a and seed are not stored in the file.
inline ToyDataset dataset_from_csv(const std::string& text) {
  const auto rows = csv::lines(text);
  if (rows.empty() || rows.front() != kDatasetHeader) {
    throw ConfigError("dataset CSV must start with header '" +
                      std::string(kDatasetHeader) + "'");
  }
  ToyDataset data;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto f = csv::split(rows[r]);
    if (f.size() != 5) {
      throw ConfigError("dataset CSV row " + std::to_string(r) +
                        " has wrong field count");
    }
    data.samples.push_back({{csv::parse_double(f[0]), csv::parse_double(f[1]),
                             csv::parse_double(f[2]), csv::parse_double(f[3])},
                            csv::parse_double(f[4])});
  }
  return data;
}

}  // namespace ricelab
