#pragma once

// Rate-distortion for semantic distortion. The semantic constraint
// d_sem(alice, q) <= eps is linear in q through the effective distortion
// matrix, which turns the problem into a classical finite-alphabet
// rate-distortion problem on source P_S with reproduction alphabet H.
//
// solve_rd minimizes I(S;H) by Blahut-Arimoto at a fixed slope and bisects
// the slope to meet the budget. solve_rd_with_prior minimizes
// E_S[D_KL(q(.|S) || prior)], whose fixed-slope minimizer is closed-form.

#include "semcom/learning.hpp"

#include <vector>

namespace semcom {

struct RDOptions {
  double rate_tol = 1e-7;         // bits, Blahut-Arimoto duality-gap target
  long max_iters = 100'000;       // inner iterations per slope
  double beta_max = 1e6;          // largest finite slope tried before the hard limit
  double objective_tol = 1e-12;   // bits, secondary stopping rule on objective change
  int max_bisections = 200;
};

struct RDPoint {
  double epsilon = 0.0;     // requested budget
  double rate = 0.0;        // bits
  double distortion = 0.0;  // d_sem(alice, q_tilde)
  Posterior q_tilde;
  double slope = 0.0;       // Lagrange multiplier, nats per unit distortion (inf at the hard limit)
  long iterations = 0;      // inner iterations summed over the slope search
  double duality_gap = 0.0; // bits
};

struct RDCurve {
  std::vector<RDPoint> points;
};

/// Budgets for which the feasible set is nonempty start at `min_epsilon`
/// (<= 0, attained by the per-dataset best hypothesis); from `zero_rate_epsilon`
/// on, one S-independent hypothesis suffices.
struct EpsilonRange {
  double min_epsilon = 0.0;
  double zero_rate_epsilon = 0.0;
};

EpsilonRange epsilon_range(const ProblemInstance& instance, const Posterior& alice);

/// min I(S;H) over q with d_sem(alice, q) <= epsilon.
/// Throws ValidationError for epsilon below epsilon_range().min_epsilon and
/// ConvergenceError when Blahut-Arimoto exhausts max_iters.
RDPoint solve_rd(const ProblemInstance& instance, const Posterior& alice, double epsilon,
                 const RDOptions& opts = {});

/// Inverse lookup: the smallest-distortion point whose rate is at most `rate`.
/// The returned point's epsilon equals its distortion.
RDPoint solve_rd_at_rate(const ProblemInstance& instance, const Posterior& alice, double rate,
                         const RDOptions& opts = {});

/// One point per epsilon; checks monotonicity and convexity of the result and
/// throws InvariantViolation if either fails.
RDCurve rd_curve(const ProblemInstance& instance, const Posterior& alice,
                 const std::vector<double>& epsilons, const RDOptions& opts = {});

/// sum_s P_S(s) D_KL(q(.|s) || prior), bits. SupportError if some row leaves
/// the prior's support.
double kl_rate(const Posterior& q_tilde, const Distribution& prior, const ProblemInstance& instance);

/// min E_S[D_KL(q(.|S) || prior)] over q with d_sem(alice, q) <= epsilon.
/// SupportError when the budget cannot be met inside the prior's support.
RDPoint solve_rd_with_prior(const ProblemInstance& instance, const Posterior& alice,
                            const Distribution& prior, double epsilon, const RDOptions& opts = {});

}  // namespace semcom
