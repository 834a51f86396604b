#include "semcom/rate_distortion.hpp"

#include <algorithm>
#include <limits>
#include <numbers>
#include <optional>

namespace semcom {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kArgminTolerance = 1e-12;
constexpr double kFlushBelow = 1e-200;
constexpr double kInitialSlope = 0.5;

// Zero-probability datasets removed from the source alphabet.
struct ReducedProblem {
  std::vector<Index> keep;
  Vector p;
  Matrix D;
};

ReducedProblem reduce(const Distribution& source, const Matrix& D) {
  ReducedProblem red;
  for (Index s = 0; s < source.size(); ++s) {
    if (source[s] > 0.0) red.keep.push_back(s);
  }
  const auto n = static_cast<Index>(red.keep.size());
  red.p.resize(n);
  red.D.resize(n, D.cols());
  for (Index i = 0; i < n; ++i) {
    red.p(i) = source[red.keep[i]];
    red.D.row(i) = D.row(red.keep[i]);
  }
  return red;
}

Posterior expand(const ReducedProblem& red, const Matrix& q, const Vector& fill_row,
                 const Distribution& source) {
  Matrix rows = fill_row.transpose().replicate(source.size(), 1);
  for (std::size_t i = 0; i < red.keep.size(); ++i) rows.row(red.keep[i]) = q.row(static_cast<Index>(i));
  // Blahut-Arimoto drives dead columns to denormals; P_S(s) q(h|s) would then
  // underflow to a zero marginal under a nonzero row entry.
  rows = (rows.array() < kFlushBelow).select(0.0, rows);
  rows = rows.array().colwise() / rows.rowwise().sum().array();
  return Posterior(std::move(rows), source);
}

double expected_distortion(const ReducedProblem& red, const Matrix& q) {
  return red.p.dot((q.array() * red.D.array()).rowwise().sum().matrix());
}

double reduced_mi(const ReducedProblem& red, const Matrix& q) {
  return mutual_information(Matrix(red.p.asDiagonal() * q));
}

struct SlopeSolution {
  double beta = 0.0;
  Matrix q;
  double expected = 0.0;
  double rate = 0.0;
  long iterations = 0;
  double gap = 0.0;
};

// Column h* minimizing the average distortion; the rate-zero reproduction.
Index best_constant(const ReducedProblem& red) {
  Index best = 0;
  const Vector avg = red.D.transpose() * red.p;
  avg.minCoeff(&best);
  return best;
}

SlopeSolution constant_solution(const ReducedProblem& red) {
  const Index h = best_constant(red);
  SlopeSolution sol;
  sol.q = Matrix::Zero(red.D.rows(), red.D.cols());
  sol.q.col(h).setOnes();
  sol.expected = expected_distortion(red, sol.q);
  return sol;
}

// Kernel exp(-beta (D - rowmin)); beta = inf keeps only the per-row argmin set.
Matrix slope_kernel(const Matrix& D, double beta, const Eigen::Array<bool, Eigen::Dynamic, 1>* support) {
  Matrix E = Matrix::Zero(D.rows(), D.cols());
  for (Index s = 0; s < D.rows(); ++s) {
    double lo = kInf;
    for (Index h = 0; h < D.cols(); ++h) {
      if (!support || (*support)(h)) lo = std::min(lo, D(s, h));
    }
    for (Index h = 0; h < D.cols(); ++h) {
      if (support && !(*support)(h)) continue;
      const double dm = D(s, h) - lo;
      E(s, h) = std::isinf(beta) ? (dm <= kArgminTolerance ? 1.0 : 0.0) : std::exp(-beta * dm);
    }
  }
  return E;
}

SlopeSolution blahut_arimoto(const ReducedProblem& red, double beta, const RDOptions& opts) {
  const Index n = red.D.rows();
  const Index nh = red.D.cols();
  const Matrix E = slope_kernel(red.D, beta, nullptr);
  Vector r = Vector::Constant(nh, 1.0 / static_cast<double>(nh));
  Vector z(n);
  Vector c(nh);
  double prev_objective = kInf;
  double gap = kInf;

  for (long it = 1; it <= opts.max_iters; ++it) {
    z = E * r;
    c = E.transpose() * (red.p.array() / z.array()).matrix();
    double max_log_c = -kInf;
    double mean_log_c = 0.0;
    for (Index h = 0; h < nh; ++h) {
      if (c(h) <= 0.0) continue;
      const double lc = std::log(c(h));
      max_log_c = std::max(max_log_c, lc);
      mean_log_c += r(h) * c(h) * lc;
    }
    gap = (max_log_c - mean_log_c) / std::numbers::ln2;
    const double objective = -red.p.dot(z.array().log().matrix()) / std::numbers::ln2;
    const bool done = gap < opts.rate_tol || std::abs(prev_objective - objective) < opts.objective_tol;
    if (done) {
      SlopeSolution sol;
      sol.beta = beta;
      sol.q = z.cwiseInverse().asDiagonal() * E * r.asDiagonal();
      sol.expected = expected_distortion(red, sol.q);
      sol.rate = reduced_mi(red, sol.q);
      sol.iterations = it;
      sol.gap = std::max(gap, 0.0);
      return sol;
    }
    prev_objective = objective;
    r = r.cwiseProduct(c);
    r /= r.sum();
  }
  throw ConvergenceError("Blahut-Arimoto did not converge at slope " + std::to_string(beta) +
                             " within " + std::to_string(opts.max_iters) +
                             " iterations; last duality gap " + std::to_string(gap) + " bits",
                         gap);
}

struct Bracket {
  SlopeSolution lo;  // infeasible side (expected > target), smaller slope
  SlopeSolution hi;  // feasible side
  long iterations = 0;
};

// Find slopes lo < hi around the point where `feasible` flips from false to
// true; `solve` maps a slope to its solution. The hard limit is the fallback
// upper end.
template <typename Solve, typename Feasible>
Bracket bracket_slope(SlopeSolution lo, const SlopeSolution& hard, Solve solve, Feasible feasible,
                      const RDOptions& opts) {
  Bracket b{std::move(lo), hard, 0};
  std::optional<SlopeSolution> hi;
  for (double beta = kInitialSlope; beta <= opts.beta_max; beta *= 2.0) {
    SlopeSolution sol = solve(beta);
    b.iterations += sol.iterations;
    if (feasible(sol)) {
      hi = std::move(sol);
      break;
    }
    b.lo = std::move(sol);
  }
  if (!hi) return b;
  b.hi = std::move(*hi);
  for (int k = 0; k < opts.max_bisections; ++k) {
    if (b.hi.beta - b.lo.beta <= 1e-13 * b.hi.beta) break;
    if (b.lo.expected - b.hi.expected <= 1e-15) break;
    const double mid = 0.5 * (b.lo.beta + b.hi.beta);
    SlopeSolution sol = solve(mid);
    b.iterations += sol.iterations;
    if (feasible(sol)) {
      b.hi = std::move(sol);
    } else {
      b.lo = std::move(sol);
    }
  }
  return b;
}

// lambda * hi + (1 - lambda) * lo with expected distortion exactly at target.
Matrix mix_to_target(const ReducedProblem& red, const SlopeSolution& lo, const SlopeSolution& hi,
                     double target) {
  const double span = lo.expected - hi.expected;
  double lambda = span > 0.0 ? std::clamp((lo.expected - target) / span, 0.0, 1.0) : 1.0;
  Matrix q = lambda * hi.q + (1.0 - lambda) * lo.q;
  for (int k = 0; k < 60 && expected_distortion(red, q) > target && lambda < 1.0; ++k) {
    lambda = std::min(1.0, lambda + std::ldexp(1.0, -52 + k));
    q = lambda * hi.q + (1.0 - lambda) * lo.q;
  }
  return q;
}

struct Prepared {
  EffectiveDistortion ed;
  ReducedProblem red;
  double d_min = 0.0;  // expected distortion with per-dataset argmin
  double d_max = 0.0;  // expected distortion of the best constant
};

Prepared prepare(const ProblemInstance& instance, const Posterior& alice) {
  Prepared p{effective_distortion_matrix(instance, alice), {}, 0.0, 0.0};
  p.red = reduce(alice.source(), p.ed.distortion);
  p.d_min = p.red.p.dot(p.red.D.rowwise().minCoeff());
  p.d_max = (p.red.D.transpose() * p.red.p).minCoeff();
  return p;
}

RDPoint make_point(const Prepared& prep, const Posterior& alice, double epsilon, const Matrix& q,
                   double slope, long iterations, double gap) {
  const Distribution marginal(q.transpose() * prep.red.p);
  Posterior post = expand(prep.red, q, marginal.probs(), alice.source());
  const double distortion = prep.ed.d_sem(post);
  const double rate = mutual_information(post);
  return RDPoint{epsilon, rate, distortion, std::move(post), slope, iterations, gap};
}

}  // namespace

EpsilonRange epsilon_range(const ProblemInstance& instance, const Posterior& alice) {
  const Prepared prep = prepare(instance, alice);
  return {prep.d_min - prep.ed.baseline, prep.d_max - prep.ed.baseline};
}

RDPoint solve_rd(const ProblemInstance& instance, const Posterior& alice, double epsilon,
                 const RDOptions& opts) {
  const Prepared prep = prepare(instance, alice);
  const double target = epsilon + prep.ed.baseline;
  if (target < prep.d_min - 1e-12) {
    throw ValidationError("solve_rd: epsilon " + std::to_string(epsilon) +
                          " is below the smallest achievable distortion " +
                          std::to_string(prep.d_min - prep.ed.baseline));
  }
  const SlopeSolution zero = constant_solution(prep.red);
  if (target >= prep.d_max) return make_point(prep, alice, epsilon, zero.q, 0.0, 0, 0.0);

  const SlopeSolution hard = blahut_arimoto(prep.red, kInf, opts);
  if (target <= hard.expected) {
    return make_point(prep, alice, epsilon, hard.q, kInf, hard.iterations, hard.gap);
  }
  const Bracket b = bracket_slope(
      zero, hard, [&](double beta) { return blahut_arimoto(prep.red, beta, opts); },
      [&](const SlopeSolution& s) { return s.expected <= target; }, opts);

  Matrix q = mix_to_target(prep.red, b.lo, b.hi, target);
  if (reduced_mi(prep.red, q) > b.hi.rate) q = b.hi.q;
  return make_point(prep, alice, epsilon, q, b.hi.beta, b.iterations + hard.iterations,
                    std::max(b.lo.gap, b.hi.gap));
}

RDPoint solve_rd_at_rate(const ProblemInstance& instance, const Posterior& alice, double rate,
                         const RDOptions& opts) {
  const Prepared prep = prepare(instance, alice);
  const SlopeSolution zero = constant_solution(prep.red);
  auto finish = [&](const Matrix& q, double slope, long iters, double gap) {
    RDPoint pt = make_point(prep, alice, 0.0, q, slope, iters, gap);
    pt.epsilon = pt.distortion;
    return pt;
  };
  if (rate <= 0.0) return finish(zero.q, 0.0, 0, 0.0);
  const SlopeSolution hard = blahut_arimoto(prep.red, kInf, opts);
  if (hard.rate <= rate) return finish(hard.q, kInf, hard.iterations, hard.gap);

  const Bracket b = bracket_slope(
      zero, hard, [&](double beta) { return blahut_arimoto(prep.red, beta, opts); },
      [&](const SlopeSolution& s) { return s.rate >= rate; }, opts);

  // I(lambda) is convex with I(0) < rate <= I(1): bisect for the right end of
  // the sublevel set.
  double lo = 0.0;
  double hi = 1.0;
  for (int k = 0; k < 100; ++k) {
    const double mid = 0.5 * (lo + hi);
    const Matrix q = mid * b.hi.q + (1.0 - mid) * b.lo.q;
    if (reduced_mi(prep.red, q) <= rate) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const Matrix q = lo * b.hi.q + (1.0 - lo) * b.lo.q;
  return finish(q, b.hi.beta, b.iterations + hard.iterations, std::max(b.lo.gap, b.hi.gap));
}

RDCurve rd_curve(const ProblemInstance& instance, const Posterior& alice,
                 const std::vector<double>& epsilons, const RDOptions& opts) {
  if (!std::is_sorted(epsilons.begin(), epsilons.end())) {
    throw ValidationError("rd_curve: epsilons must be sorted ascending");
  }
  RDCurve curve;
  for (double eps : epsilons) curve.points.push_back(solve_rd(instance, alice, eps, opts));

  const auto& pts = curve.points;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    if (pts[i].rate > pts[i - 1].rate + 10 * opts.rate_tol) {
      throw InvariantViolation("rd_curve: rate increases between eps=" + std::to_string(pts[i - 1].epsilon) +
                               " and eps=" + std::to_string(pts[i].epsilon));
    }
  }
  for (std::size_t i = 1; i + 1 < pts.size(); ++i) {
    const double e0 = pts[i - 1].epsilon, e1 = pts[i].epsilon, e2 = pts[i + 1].epsilon;
    if (e2 <= e0) continue;
    const double t = (e1 - e0) / (e2 - e0);
    const double chord = (1.0 - t) * pts[i - 1].rate + t * pts[i + 1].rate;
    if (pts[i].rate > chord + 1e-6) {
      throw InvariantViolation("rd_curve: convexity fails at eps=" + std::to_string(e1));
    }
  }
  return curve;
}

double kl_rate(const Posterior& q_tilde, const Distribution& prior, const ProblemInstance& instance) {
  if (q_tilde.num_datasets() != instance.num_datasets() || prior.size() != q_tilde.num_hypotheses()) {
    throw ValidationError("kl_rate: shape mismatch");
  }
  double total = 0.0;
  for (Index s = 0; s < q_tilde.num_datasets(); ++s) {
    try {
      const double d = kl_divergence(q_tilde.rows().row(s).transpose(), prior.probs());
      total += q_tilde.source()[s] * d;
    } catch (const SupportError&) {
      throw SupportError("kl_rate: infinite rate, row " + std::to_string(s) +
                         " puts mass outside the prior's support");
    }
  }
  return total;
}

RDPoint solve_rd_with_prior(const ProblemInstance& instance, const Posterior& alice,
                            const Distribution& prior, double epsilon, const RDOptions& opts) {
  if (prior.size() != instance.num_hypotheses()) throw ValidationError("prior over the wrong alphabet");
  const Prepared prep = prepare(instance, alice);
  const double target = epsilon + prep.ed.baseline;
  const Eigen::Array<bool, Eigen::Dynamic, 1> support = prior.probs().array() > 0.0;
  const ReducedProblem& red = prep.red;
  const Vector& P = prior.probs();

  auto solve = [&](double beta) {
    SlopeSolution sol;
    sol.beta = beta;
    sol.q = slope_kernel(red.D, beta, &support) * P.asDiagonal();
    for (Index s = 0; s < sol.q.rows(); ++s) sol.q.row(s) /= sol.q.row(s).sum();
    sol.expected = expected_distortion(red, sol.q);
    sol.rate = 0.0;
    for (Index s = 0; s < sol.q.rows(); ++s) {
      sol.rate += red.p(s) * kl_divergence(sol.q.row(s).transpose(), P);
    }
    sol.iterations = 1;
    return sol;
  };
  // Lagrangian dual bound at slope beta >= 0, bits.
  auto dual = [&](double beta) {
    double total = -beta * target;
    for (Index s = 0; s < red.D.rows(); ++s) {
      double lo = kInf;
      for (Index h = 0; h < red.D.cols(); ++h) {
        if (support(h)) lo = std::min(lo, red.D(s, h));
      }
      double zsum = 0.0;
      for (Index h = 0; h < red.D.cols(); ++h) {
        if (support(h)) zsum += P(h) * std::exp(-beta * (red.D(s, h) - lo));
      }
      total += red.p(s) * (-std::log(zsum) - beta * lo);
    }
    return total / std::numbers::ln2;
  };
  auto finish = [&](const Matrix& q, double slope, long iters, double gap) {
    Posterior post = expand(red, q, P, alice.source());
    const double distortion = prep.ed.d_sem(post);
    const double rate = kl_rate(post, prior, instance);
    return RDPoint{epsilon, rate, distortion, std::move(post), slope, iters, gap};
  };

  const SlopeSolution flat = solve(0.0);
  if (target >= flat.expected) return finish(flat.q, 0.0, 1, 0.0);
  const SlopeSolution hard = solve(kInf);
  if (target < hard.expected - 1e-12) {
    throw SupportError("solve_rd_with_prior: infinite rate, epsilon " + std::to_string(epsilon) +
                       " needs hypotheses outside the prior's support");
  }
  if (target <= hard.expected) return finish(hard.q, kInf, 1, 0.0);

  const Bracket b = bracket_slope(
      flat, hard, solve, [&](const SlopeSolution& s) { return s.expected <= target; }, opts);
  Matrix q = mix_to_target(red, b.lo, b.hi, target);
  RDPoint pt = finish(q, b.hi.beta, b.iterations, 0.0);
  if (pt.rate > b.hi.rate) pt = finish(b.hi.q, b.hi.beta, b.iterations, 0.0);
  if (std::isfinite(b.hi.beta)) pt.duality_gap = std::max(0.0, pt.rate - dual(b.hi.beta));
  return pt;
}

}  // namespace semcom
