#pragma once

// Seeded random worlds for sweeps and property tests. Draws come from
// std::mt19937_64, whose output sequence the standard fixes, converted to
// doubles by hand so results do not depend on the standard library.

#include "semcom/learning.hpp"

#include <random>

namespace semcom {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [lo, hi].
  Index integer(Index lo, Index hi) {
    return lo + static_cast<Index>(engine_() % static_cast<std::uint64_t>(hi - lo + 1));
  }
  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
};

struct RandomInstanceOptions {
  Index min_concepts = 1, max_concepts = 3;
  Index min_samples = 2, max_samples = 3;
  Index min_m = 1, max_m = 2;
  Index min_hypotheses = 2, max_hypotheses = 4;
  Index max_datasets = 9;  // resample sizes until |Z|^m fits
};

/// Flat Dirichlet draw; with `zero_prob` > 0 some entries are zeroed (at
/// least one entry survives).
Distribution random_distribution(Rng& rng, Index n, double zero_prob = 0.0);

/// Losses uniform on [0, 1] with l_max = 1.
ProblemInstance random_instance(Rng& rng, const RandomInstanceOptions& opts = {});

Posterior random_posterior(Rng& rng, const ProblemInstance& instance, double zero_prob = 0.0);

/// Each position a random deterministic map S -> H.
std::vector<Posterior> random_deterministic_schedule(Rng& rng, const ProblemInstance& instance, Index n);

LearningRule random_rule(Rng& rng, const ProblemInstance& instance);

}  // namespace semcom
