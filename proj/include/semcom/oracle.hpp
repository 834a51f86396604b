#pragma once

// Brute-force references. None of these call the solvers, coders or
// distortion helpers they are used to check; they work from the raw tensors
// of the instance.

#include "semcom/coordination.hpp"

#include <optional>

namespace semcom {

struct OracleBudget {
  std::uint64_t max_states = 10'000'000;
  double grid_step = 1e-3;
};

enum class OracleObjective { mutual_information, kl_to_prior };

struct GridOracleResult {
  double rate = 0.0;        // bits
  Matrix q;                 // minimizing grid point, N x |H|
  std::uint64_t states = 0; // grid points visited
  bool exhaustive = true;   // single full pass at grid_step
};

/// min objective over q with d_sem(alice, q) <= epsilon. Every coordinate
/// but one lives on the grid; the remaining one (mass moved between two
/// hypotheses of one dataset) is minimized exactly, so the semantic
/// constraint is met with equality when it binds. When the full grid
/// exceeds max_states a coarse exhaustive pass is followed by exhaustive
/// boxes at grid_step around the incumbent, moved until the incumbent is
/// interior (the partially minimized objective is convex).
/// EnumerationTooLarge when |S_eff| (|H| - 1) > 4; ValidationError when
/// epsilon is infeasible.
GridOracleResult rd_grid_oracle(const ProblemInstance& instance, const Posterior& alice, double epsilon,
                                const OracleBudget& budget = {},
                                OracleObjective objective = OracleObjective::mutual_information,
                                const std::optional<Distribution>& prior = std::nullopt);

/// Output law of MRC by recursion over all |H|^K candidate tuples.
Distribution mrc_enumeration_oracle(const Distribution& q, const Distribution& p, Index n_candidates,
                                    std::uint64_t max_states = 10'000'000);

struct SequenceDistortion {
  double d_avg = 0.0;
  double d_max = 0.0;
};

/// Both sequence distortions by summing per-sample losses over concepts,
/// datasets and samples, position by position.
SequenceDistortion sequence_distortion_oracle(const SequenceTrace& trace, const ProblemInstance& instance);

}  // namespace semcom
