#pragma once

// Sequences of n learning problems. Alice holds one single-letter belief Q;
// Bob produces a belief per position. d_avg averages the per-position
// semantic distortions, d_max takes the worst position.

#include "semcom/channel_coding.hpp"

#include <optional>
#include <vector>

namespace semcom {

struct SequenceTrace {
  Index n = 0;
  std::vector<Index> datasets;          // realized s^n
  std::vector<Posterior> alice_rows;     // Q_i
  std::vector<Posterior> bob_rows;       // Q̂_i, exact or estimated
  std::vector<Index> hypotheses;         // realized ĥ^n
  Matrix joint_type;                     // N x |H|, (1/n) sum_i 1{(s_i, ĥ_i) = (s, h)}
  double bits_used = 0.0;
  std::uint64_t cr_bits = 0;
  bool unlimited_common_randomness = true;
};

/// d_sem(alice[i], bob[i]) for each position.
std::vector<double> per_position_d_sem(std::span<const Posterior> alice, std::span<const Posterior> bob,
                                       const ProblemInstance& instance);
double d_avg_seq(std::span<const Posterior> alice, std::span<const Posterior> bob,
                 const ProblemInstance& instance);
double d_max_seq(std::span<const Posterior> alice, std::span<const Posterior> bob,
                 const ProblemInstance& instance);

/// (1/n) sum_i bob[i]: for deterministic rows this is the conditional type
/// (1/n) sum_i 1{ĥ_i(s) = h}, against which d_avg becomes a single d_sem.
Posterior schedule_type(std::span<const Posterior> bob);

/// Empirical joint of realized pairs over the N x |H| grid.
Matrix joint_type_of(std::span<const Index> datasets, std::span<const Index> hypotheses, Index num_datasets,
                     Index num_hypotheses);

// ---------------------------------------------------------------------------
// The two-hypothesis world: h0 always loses 0, h1 always loses 1, Alice is
// uniform over both for every dataset.

ProblemInstance example1_instance();
Posterior example1_alice(const ProblemInstance& instance);
/// Bob's deterministic schedule: h1 at odd positions (1-based), h0 at even.
std::vector<Posterior> example1_schedule(const ProblemInstance& instance, Index n);

struct Example1Report {
  SequenceTrace trace;
  double d_avg = 0.0;
  double d_max = 0.0;
};

Example1Report run_example_1(Index n, std::uint64_t seed = 0);

// ---------------------------------------------------------------------------

/// Zero-bit Bob following a fixed schedule of deterministic rows; data s^n is
/// drawn from P_S with `seed` only to fill the realized joint type.
SequenceTrace simulate_empirical_deterministic(const ProblemInstance& instance, const Posterior& alice,
                                               std::span<const Posterior> schedule, Index n,
                                               std::uint64_t seed = 0);

struct StrongOptions {
  long trials = 10'000;
  CodingMode mode = CodingMode::per_symbol;
  CodingOptions coding;
  /// Alice's belief used for d_sem; defaults to q_target.
  std::optional<Posterior> reference;
};

struct StrongReport {
  SequenceTrace trace;                 // first trial, with bob_rows estimated over all trials
  std::vector<double> d_sem_position;  // estimated per position
  std::vector<double> ci_half_width;   // 95% normal interval
  std::vector<double> tv_position;     // TV(empirical (s, ĥ) law at i, P_S x q_target)
  double d_avg = 0.0;
  double d_max = 0.0;
  double tv_max = 0.0;
  double bits_per_symbol = 0.0;        // averaged over trials
  long trials = 0;
};

/// Strong coordination by channel simulation: each trial draws fresh s^n and
/// codes every position against prior = q_target.marginal() with shared
/// randomness derived from `cr` and the trial index.
StrongReport simulate_strong(const ProblemInstance& instance, const Posterior& q_target, Index n,
                             const CommonRandomness& cr, const StrongOptions& opts = {});

}  // namespace semcom
