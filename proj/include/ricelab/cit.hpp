#pragma once

// Causal feature and causal invariant transformations of the 2x2 toy:
// g(X) = |det X|, and five matrix actions whose determinant multiplier has
// unit magnitude.

#include <cmath>
#include <concepts>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

#include "ricelab/csv.hpp"
#include "ricelab/error.hpp"
#include "ricelab/scm_toy.hpp"

namespace ricelab {

/// Left multiplication by the rotation matrix [[cos, -sin], [sin, cos]].
struct Rotate {
  double theta = 0.0;
  friend constexpr bool operator==(const Rotate&, const Rotate&) = default;
};
/// Right multiplication by diag(a, 1/a).
struct ScaleCols {
  double a = 1.0;
  friend constexpr bool operator==(const ScaleCols&,
                                   const ScaleCols&) = default;
};
/// Right multiplication by diag(-1, 1).
struct MirrorX {
  friend constexpr bool operator==(const MirrorX&, const MirrorX&) = default;
};
/// Right multiplication by [[1, 1], [0, 1]].
struct ShearCols {
  friend constexpr bool operator==(const ShearCols&,
                                   const ShearCols&) = default;
};
/// Multiplication by -I.
struct NegateBoth {
  friend constexpr bool operator==(const NegateBoth&,
                                   const NegateBoth&) = default;
};
struct Identity {
  friend constexpr bool operator==(const Identity&, const Identity&) = default;
};

using Transform =
    std::variant<Rotate, ScaleCols, MirrorX, ShearCols, NegateBoth, Identity>;

/// Composition T_1 o ... o T_K; the last element acts first.
using TransformChain = std::vector<Transform>;

inline constexpr double kRotateMax = std::numbers::pi / 4.0;
inline constexpr double kScaleMin = 2.0 / 3.0;
inline constexpr double kScaleMax = 1.5;
inline constexpr double kDefaultCitTolerance = 1e-9;

/// Rotation by theta; with strict set, theta must lie in [0, pi/4].
inline Transform make_rotate(double theta, bool strict = true) {
  if (!std::isfinite(theta)) throw DomainError("rotate: theta must be finite");
  if (strict && !(theta >= 0.0 && theta <= kRotateMax)) {
    throw DomainError("rotate: theta " + csv::format_double(theta) +
                      " outside [0, pi/4]");
  }
  return Rotate{theta};
}

/// Column scaling by (a, 1/a); with strict set, a must lie in [2/3, 3/2].
inline Transform make_scale(double a, bool strict = true) {
  if (!std::isfinite(a) || a == 0.0) {
    throw DomainError("scale: a must be finite and non-zero");
  }
  if (strict && !(a >= kScaleMin && a <= kScaleMax)) {
    throw DomainError("scale: a " + csv::format_double(a) +
                      " outside [2/3, 3/2]");
  }
  return ScaleCols{a};
}

inline Matrix2 apply(const Transform& t, const Matrix2& x) {
  return std::visit(
      [&x](const auto& op) -> Matrix2 {
        using Op = std::decay_t<decltype(op)>;
        if constexpr (std::is_same_v<Op, Rotate>) {
          const double c = std::cos(op.theta);
          const double s = std::sin(op.theta);
          return {c * x.x11 - s * x.x21, s * x.x11 + c * x.x21,
                  c * x.x12 - s * x.x22, s * x.x12 + c * x.x22};
        } else if constexpr (std::is_same_v<Op, ScaleCols>) {
          return {op.a * x.x11, op.a * x.x21, x.x12 / op.a, x.x22 / op.a};
        } else if constexpr (std::is_same_v<Op, MirrorX>) {
          return {-x.x11, -x.x21, x.x12, x.x22};
        } else if constexpr (std::is_same_v<Op, ShearCols>) {
          return {x.x11, x.x21, x.x11 + x.x12, x.x21 + x.x22};
        } else if constexpr (std::is_same_v<Op, NegateBoth>) {
          return {-x.x11, -x.x21, -x.x12, -x.x22};
        } else {
          return x;
        }
      },
      t);
}

inline Matrix2 apply_chain(const TransformChain& chain, Matrix2 x) {
  for (auto it = chain.rbegin(); it != chain.rend(); ++it) x = ricelab::apply(*it, x);
  return x;
}

/// g(X) = |det X|, the area-type causal feature of the toy.
inline double causal_feature(const Matrix2& x) noexcept {
  return std::abs(x.det());
}

/// True iff |g(map(x)) - g(x)| <= tol on every sample. `map` may be any
/// callable Matrix2 -> Matrix2, which allows probing non-members too.
template <class Map>
  requires std::is_invocable_r_v<Matrix2, Map, const Matrix2&>
bool is_cit(Map&& map, std::span<const Matrix2> samples,
            double tol = kDefaultCitTolerance) {
  if (!(tol > 0.0)) throw PreconditionError("is_cit: tol must be positive");
  for (const auto& x : samples) {
    if (std::abs(causal_feature(map(x)) - causal_feature(x)) > tol) {
      return false;
    }
  }
  return true;
}

inline bool is_cit(const Transform& t, std::span<const Matrix2> samples,
                   double tol = kDefaultCitTolerance) {
  return is_cit([&t](const Matrix2& x) { return ricelab::apply(t, x); }, samples, tol);
}

/// T1..T5: Rotate(pi/12), ScaleCols(1.1), MirrorX, ShearCols, NegateBoth.
inline std::vector<Transform> toy_essential_set() {
  return {Rotate{std::numbers::pi / 12.0}, ScaleCols{1.1}, MirrorX{},
          ShearCols{}, NegateBoth{}};
}

/// Identity followed by the five essential transforms (T0..T5).
inline std::vector<Transform> toy_transform_family() {
  auto family = toy_essential_set();
  family.insert(family.begin(), Identity{});
  return family;
}

inline std::string to_string(const Transform& t) {
  return std::visit(
      [](const auto& op) -> std::string {
        using Op = std::decay_t<decltype(op)>;
        if constexpr (std::is_same_v<Op, Rotate>) {
          return "rotate:" + csv::format_double(op.theta);
        } else if constexpr (std::is_same_v<Op, ScaleCols>) {
          return "scale:" + csv::format_double(op.a);
        } else if constexpr (std::is_same_v<Op, MirrorX>) {
          return "mirror";
        } else if constexpr (std::is_same_v<Op, ShearCols>) {
          return "shear";
        } else if constexpr (std::is_same_v<Op, NegateBoth>) {
          return "negate";
        } else {
          return "identity";
        }
      },
      t);
}

/// Parses `rotate:<theta>`, `scale:<a>`, `mirror`, `shear`, `negate`,
/// `identity`.
inline Transform parse_transform(std::string_view text, bool strict = true) {
  auto starts = [&text](std::string_view prefix) {
    return text.substr(0, prefix.size()) == prefix;
  };
  if (starts("rotate:")) {
    return make_rotate(csv::parse_double(text.substr(7)), strict);
  }
  if (starts("scale:")) {
    return make_scale(csv::parse_double(text.substr(6)), strict);
  }
  if (text == "mirror") return MirrorX{};
  if (text == "shear") return ShearCols{};
  if (text == "negate") return NegateBoth{};
  if (text == "identity") return Identity{};
  throw ConfigError("unknown transform '" + std::string(text) + "'");
}

}  // namespace ricelab
