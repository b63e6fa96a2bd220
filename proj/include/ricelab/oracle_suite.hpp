#pragma once

// Seeded batch of the finite-space checks plus the toy CIT check, as run by
// `rice_lab verify-oracle`.

#include <chrono>
#include <cstdint>
#include <string>
#include <vector>

#include "ricelab/cit.hpp"
#include "ricelab/finite_oracle.hpp"
#include "ricelab/rng.hpp"

namespace ricelab {

struct OracleCheck {
  std::string name;
  std::size_t instances = 0;
  bool passed = false;
  double seconds = 0.0;
};

struct OracleSuiteConfig {
  std::uint64_t seed = 0;
  std::size_t cit_samples = 10000;
  std::size_t lemma2_instances = 50;
  std::size_t theorem3_instances = 50;
  std::size_t theorem2_instances = 50;
  std::size_t theorem1_instances = 20;
  /// Appends a check built on a false claim; used to exercise the failure path.
  bool inject_failure = false;
};

/// `<name>,<instances>,<pass|fail>`
inline std::string format_check(const OracleCheck& c) {
  return c.name + "," + std::to_string(c.instances) + "," +
         (c.passed ? "pass" : "fail");
}

inline std::string oracle_to_csv(const std::vector<OracleCheck>& checks) {
  std::string out = "check,instances,result\n";
  for (const auto& c : checks) out += format_check(c) + "\n";
  return out;
}

inline bool all_passed(const std::vector<OracleCheck>& checks) {
  for (const auto& c : checks) {
    if (!c.passed) return false;
  }
  return true;
}

namespace oracle {

template <class Body>
OracleCheck timed(std::string name, Body&& body) {
  OracleCheck c;
  c.name = std::move(name);
  const auto start = std::chrono::steady_clock::now();
  body(c);
  c.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return c;
}

inline OracleCheck cit_invariance(std::uint64_t seed, std::size_t n) {
  return timed("cit_invariance", [&](OracleCheck& c) {
    CounterRng rng(derive_seed(seed, "oracle-cit"));
    std::vector<Matrix2> xs(n);
    for (auto& x : xs) x = Matrix2{rng.normal(), rng.normal(), rng.normal(), rng.normal()};
    const auto family = toy_essential_set();
    c.instances = family.size() * n;
    c.passed = true;
    for (const auto& t : family) c.passed = c.passed && is_cit(t, xs);
  });
}

inline OracleCheck invariant_maps_closure() {
  return timed("invariant_maps_closure", [&](OracleCheck& c) {
    c.passed = true;
    for (std::size_t m = 1; m <= 4; ++m) {
      for (const auto& h : finite::all_functions(m, 3)) {
        ++c.instances;
        const auto maps = finite::invariant_maps(h);
        bool ok = std::binary_search(maps.begin(), maps.end(), finite::identity_map(m));
        for (const auto& a : maps) {
          for (const auto& b : maps) {
            ok = ok && finite::is_invariant(finite::compose(a, b), h);
          }
        }
        c.passed = c.passed && ok;
      }
    }
  });
}

inline OracleCheck refines_preorder() {
  return timed("refines_preorder", [&](OracleCheck& c) {
    const auto fns = finite::all_functions(4, 3);
    c.passed = true;
    for (const auto& a : fns) {
      c.passed = c.passed && finite::refines(a, a);
      for (const auto& b : fns) {
        if (!finite::refines(a, b)) continue;
        for (const auto& d : fns) {
          if (finite::refines(b, d) && !finite::refines(a, d)) c.passed = false;
        }
      }
    }
    c.instances = fns.size() * fns.size() * fns.size();
  });
}

inline OracleCheck lemma1() {
  return timed("lemma1", [&](OracleCheck& c) {
    const auto fns = finite::all_functions(4, 3);
    c.passed = true;
    for (const auto& a : fns) {
      for (const auto& b : fns) {
        c.passed = c.passed && finite::check_lemma1(a, b);
        ++c.instances;
      }
    }
  });
}

inline OracleCheck lemma2(std::uint64_t seed, std::size_t n) {
  return timed("lemma2", [&](OracleCheck& c) {
    c.passed = true;
    for (std::size_t i = 0; i < n; ++i) {
      CounterRng rng(derive_seed(seed, "oracle-lemma2", i));
      const std::size_t m = 2 + rng.below(3);
      const auto h1 = finite::random_function(rng, m, static_cast<int>(1 + rng.below(m)));
      const auto maps = finite::random_essential_set(rng, h1);
      finite::FiniteFn h2;
      if (rng.below(2) == 0) {
        const auto v = finite::random_function(rng, static_cast<std::size_t>(h1.codomain), 3);
        std::vector<int> vals(m);
        for (std::size_t x = 0; x < m; ++x) vals[x] = v(static_cast<std::size_t>(h1(x)));
        h2 = finite::FiniteFn(std::move(vals), 3);
      } else {
        h2 = finite::random_function(rng, m, 3);
      }
      c.passed = c.passed && finite::check_lemma2(maps, h1, h2);
      ++c.instances;
    }
  });
}

inline OracleCheck theorem3(std::uint64_t seed, std::size_t n) {
  return timed("theorem3", [&](OracleCheck& c) {
    c.passed = true;
    for (std::size_t i = 0; i < n; ++i) {
      CounterRng rng(derive_seed(seed, "oracle-theorem3", i));
      const std::size_t m = 2 + rng.below(4);
      const std::size_t labels = 2 + rng.below(2);
      const auto inst = finite::random_instance(rng, m, labels);
      const auto maps = finite::random_essential_set(rng, inst.g);
      c.passed = c.passed && finite::check_theorem3(inst, maps);
      ++c.instances;
    }
  });
}

inline OracleCheck theorem2(std::uint64_t seed, std::size_t n) {
  return timed("theorem2", [&](OracleCheck& c) {
    c.passed = true;
    for (std::size_t i = 0; i < n; ++i) {
      CounterRng rng(derive_seed(seed, "oracle-theorem2", i));
      const std::size_t m = 2 + rng.below(3);
      const std::size_t labels = 2 + rng.below(2);
      c.passed = c.passed && finite::check_theorem2(finite::random_instance(rng, m, labels));
      ++c.instances;
    }
  });
}

inline OracleCheck theorem1_family(std::uint64_t seed, std::size_t n) {
  return timed("theorem1_family", [&](OracleCheck& c) {
    c.passed = true;
    for (std::size_t i = 0; i < n; ++i) {
      CounterRng rng(derive_seed(seed, "oracle-theorem1", i));
      const std::size_t m = 2 + rng.below(4);
      const std::size_t labels = 2 + rng.below(2);
      const auto inst = finite::random_structural_instance(rng, m, labels);
      c.passed = c.passed &&
                 finite::check_theorem1_family(inst, finite::point_masses_plus_uniform(m));
      ++c.instances;
    }
  });
}

/// Claims [0,0,1] refines [0,1,1], which is false.
inline OracleCheck injected_failure() {
  return timed("injected_failure", [&](OracleCheck& c) {
    c.instances = 1;
    c.passed = finite::refines(finite::FiniteFn::of({0, 0, 1}),
                               finite::FiniteFn::of({0, 1, 1}));
  });
}

}  // namespace oracle

inline std::vector<OracleCheck> run_oracle_suite(const OracleSuiteConfig& cfg) {
  std::vector<OracleCheck> out;
  out.push_back(oracle::cit_invariance(cfg.seed, cfg.cit_samples));
  out.push_back(oracle::invariant_maps_closure());
  out.push_back(oracle::refines_preorder());
  out.push_back(oracle::lemma1());
  out.push_back(oracle::lemma2(cfg.seed, cfg.lemma2_instances));
  out.push_back(oracle::theorem3(cfg.seed, cfg.theorem3_instances));
  out.push_back(oracle::theorem2(cfg.seed, cfg.theorem2_instances));
  out.push_back(oracle::theorem1_family(cfg.seed, cfg.theorem1_instances));
  if (cfg.inject_failure) out.push_back(oracle::injected_failure());
  return out;
}

}  // namespace ricelab
