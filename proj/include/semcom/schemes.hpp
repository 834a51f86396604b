#pragma once

// Sending the model versus sending compressed data. Scheme 1 codes Bob's
// belief directly at the rate budget; scheme 2 sends Ŝ = ρ(S) and lets Bob
// refit the learning rule on it. Also the distortion-rate bounds driven by
// the rate deficit Δ_R.

#include "semcom/rate_distortion.hpp"

#include <vector>

namespace semcom {

/// A deterministic compressor: dataset index -> compressed symbol in
/// [0, num_symbols). Symbols must all be used.
struct Compressor {
  std::vector<Index> map;

  Index num_symbols() const;
};

/// Every compressor on n datasets up to relabelling (set partitions as
/// restricted growth strings): Bell(n) of them.
std::vector<Compressor> enumerate_compressors(Index n);

struct SchemeOptions {
  RDOptions rd;
  double boundary_tol = 1e-6;  // bits; |I(S;Ĥ¹) - R| below this counts as on the boundary
};

struct SchemeReport {
  double rate_budget = 0.0;
  double rate_at_zero = 0.0;          // R(0), bits
  double mi_model = 0.0;              // I(S;Ĥ¹)
  double mi_model2 = 0.0;             // I(S;Ĥ²)
  double mi_residual = 0.0;           // I(S;Ŝ²|Ĥ²)
  double mi_pair = 0.0;               // I(S;(Ŝ², Ĥ²)), the scheme-2 joint
  double chain_rule_error = 0.0;      // |mi_pair - mi_model2 - mi_residual|
  double delta_r = 0.0;               // max(0, R(0) - R), bits
  double bound1 = 0.0;
  double bound2 = 0.0;
  double measured_distortion = 0.0;   // scheme 1
  double scheme2_distortion = 0.0;
  bool feasible2 = true;              // mi_pair <= R
  bool boundary_holds = true;         // scheme 1 optimum sits at I = R
  bool inequality_checked = false;    // I(S;Ĥ¹) >= I(S;Ĥ²) was asserted
};

/// Bob's refit belief on compressed data, as a posterior over the original
/// datasets (rows constant on each cell of ρ).
Posterior scheme2_posterior(const ProblemInstance& instance, const LearningRule& rule,
                            const Posterior& alice, const Compressor& rho);

/// Throws InvariantViolation when the chain rule breaks (1e-8) or, for a
/// feasible scheme 2 with scheme 1 on its boundary, I(S;Ĥ¹) < I(S;Ĥ²).
SchemeReport compare_schemes(const ProblemInstance& instance, const LearningRule& rule,
                             const Posterior& alice, double rate_budget, const Compressor& rho,
                             const SchemeOptions& opts = {});

/// L_max * min(sqrt(Δ/2), sqrt(1 - e^-Δ)), Δ in nats.
double distortion_rate_bound(Nats delta, double l_max);
double distortion_rate_bound(Bits delta, double l_max);
/// Same formula at Δ + I(S;Ŝ²|Ĥ²).
double distortion_rate_bound_scheme2(Nats delta, Nats residual, double l_max);
double distortion_rate_bound_scheme2(Bits delta, Bits residual, double l_max);

struct BoundRow {
  double epsilon = 0.0;
  double rate = 0.0;          // R(ε) under the prior, bits
  double rate_star = 0.0;     // R(0)
  double delta_r = 0.0;       // bits
  double distortion = 0.0;    // d_sem of the ε-optimizer
  double bound = 0.0;
  double slack = 0.0;         // bound - distortion
};

/// One row per ε >= 0. Throws InvariantViolation, with the instance
/// serialized as the repro, when distortion > bound + 1e-9.
std::vector<BoundRow> verify_bound(const ProblemInstance& instance, const Posterior& alice,
                                   const Distribution& prior, const std::vector<double>& epsilons,
                                   const RDOptions& opts = {});

}  // namespace semcom
