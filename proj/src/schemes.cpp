#include "semcom/schemes.hpp"

#include <algorithm>
#include <cmath>

namespace semcom {

Index Compressor::num_symbols() const {
  return map.empty() ? 0 : *std::max_element(map.begin(), map.end()) + 1;
}

std::vector<Compressor> enumerate_compressors(Index n) {
  if (n < 1) throw ValidationError("enumerate_compressors: need at least one dataset");
  if (n > 12) throw EnumerationTooLarge("enumerate_compressors: Bell(" + std::to_string(n) + ") is too many");
  std::vector<Compressor> out;
  std::vector<Index> a(static_cast<std::size_t>(n), 0);
  // Restricted growth strings: a[0] = 0, a[i] <= 1 + max(a[0..i-1]).
  auto rec = [&](auto&& self, std::size_t i, Index top) -> void {
    if (i == a.size()) {
      out.push_back({a});
      return;
    }
    for (Index v = 0; v <= top + 1; ++v) {
      a[i] = v;
      self(self, i + 1, std::max(top, v));
    }
  };
  rec(rec, 1, 0);
  return out;
}

namespace {

void require_compressor(const Compressor& rho, Index n) {
  if (static_cast<Index>(rho.map.size()) != n) {
    throw ValidationError("compressor maps " + std::to_string(rho.map.size()) + " datasets, instance has " +
                          std::to_string(n));
  }
  const Index k = rho.num_symbols();
  std::vector<bool> used(static_cast<std::size_t>(k), false);
  for (Index s : rho.map) {
    if (s < 0) throw ValidationError("compressor symbols must be >= 0");
    used[static_cast<std::size_t>(s)] = true;
  }
  if (std::find(used.begin(), used.end(), false) != used.end()) {
    throw ValidationError("compressor symbols must be 0..k-1 with none unused");
  }
}

double plogq(double p, double ratio) { return p > 0.0 ? p * std::log2(ratio) : 0.0; }

}  // namespace

Posterior scheme2_posterior(const ProblemInstance& instance, const LearningRule& rule,
                            const Posterior& alice, const Compressor& rho) {
  const Index n = instance.num_datasets();
  require_compressor(rho, n);
  const Index k = rho.num_symbols();
  const Vector& ps = instance.datasets().marginal.probs();

  // P(s | ŝ), uniform over the cell when the cell has no mass.
  Matrix weight = Matrix::Zero(k, n);
  for (Index s = 0; s < n; ++s) weight(rho.map[s], s) = ps(s);
  for (Index c = 0; c < k; ++c) {
    const double mass = weight.row(c).sum();
    if (mass > 0.0) {
      weight.row(c) /= mass;
    } else {
      for (Index s = 0; s < n; ++s) weight(c, s) = rho.map[s] == c ? 1.0 : 0.0;
      weight.row(c) /= weight.row(c).sum();
    }
  }
  const Matrix compressed = std::holds_alternative<MapTableRule>(rule)
                                ? Matrix(weight * alice.rows())
                                : rows_from_scores(rule, weight * bayes_empirical_score(instance));
  Matrix rows(n, instance.num_hypotheses());
  for (Index s = 0; s < n; ++s) rows.row(s) = compressed.row(rho.map[s]);
  return Posterior(std::move(rows), instance.datasets().marginal);
}

SchemeReport compare_schemes(const ProblemInstance& instance, const LearningRule& rule,
                             const Posterior& alice, double rate_budget, const Compressor& rho,
                             const SchemeOptions& opts) {
  if (!(rate_budget >= 0.0)) throw ValidationError("rate budget must be >= 0");
  SchemeReport r;
  r.rate_budget = rate_budget;

  const RDPoint zero = solve_rd(instance, alice, 0.0, opts.rd);
  r.rate_at_zero = zero.rate;
  const RDPoint one = solve_rd_at_rate(instance, alice, rate_budget, opts.rd);
  r.mi_model = one.rate;
  r.measured_distortion = one.distortion;
  r.boundary_holds = std::abs(one.rate - rate_budget) <= opts.boundary_tol;

  const Posterior two = scheme2_posterior(instance, rule, alice, rho);
  r.scheme2_distortion = d_sem(alice, two, instance);

  // Joint over (S, Ŝ, Ĥ): P_S(s) 1{ρ(s) = ŝ} Q²(h | ŝ).
  const Index n = instance.num_datasets();
  const Index k = rho.num_symbols();
  const Index nh = instance.num_hypotheses();
  const Vector& ps = instance.datasets().marginal.probs();
  Matrix pair = Matrix::Zero(n, k * nh);  // S x (Ŝ, Ĥ)
  for (Index s = 0; s < n; ++s) {
    for (Index h = 0; h < nh; ++h) pair(s, rho.map[s] * nh + h) = ps(s) * two.rows()(s, h);
  }
  r.mi_pair = mutual_information(pair);
  r.mi_model2 = mutual_information(two);

  const Vector p_h = two.marginal().probs();
  Matrix p_sh = two.joint();                                    // S x H
  Matrix p_ch = Matrix::Zero(k, nh);                            // Ŝ x H
  for (Index s = 0; s < n; ++s) p_ch.row(rho.map[s]) += p_sh.row(s);
  double residual = 0.0;
  for (Index s = 0; s < n; ++s) {
    for (Index h = 0; h < nh; ++h) {
      // ŝ = ρ(s) is determined by s, so P(s, ŝ, h) = P(s, h).
      residual += plogq(p_sh(s, h), p_h(h) / p_ch(rho.map[s], h));
    }
  }
  r.mi_residual = std::max(0.0, residual);
  r.chain_rule_error = std::abs(r.mi_pair - r.mi_model2 - r.mi_residual);

  r.feasible2 = r.mi_pair <= rate_budget + opts.boundary_tol;
  r.delta_r = std::max(0.0, r.rate_at_zero - rate_budget);
  r.bound1 = distortion_rate_bound(Bits{r.delta_r}, instance.l_max());
  r.bound2 = distortion_rate_bound_scheme2(Bits{r.delta_r}, Bits{r.mi_residual}, instance.l_max());

  if (r.chain_rule_error > 1e-8) {
    throw InvariantViolation("chain rule I(S;Ŝ,Ĥ) = I(S;Ĥ) + I(S;Ŝ|Ĥ) off by " +
                                 std::to_string(r.chain_rule_error),
                             instance_to_json(instance).dump());
  }
  if (r.feasible2 && r.boundary_holds) {
    r.inequality_checked = true;
    if (r.mi_model + opts.boundary_tol < r.mi_model2) {
      throw InvariantViolation("I(S;Ĥ¹) = " + std::to_string(r.mi_model) + " < I(S;Ĥ²) = " +
                                   std::to_string(r.mi_model2),
                               instance_to_json(instance).dump());
    }
  }
  return r;
}

// ---------------------------------------------------------------------------

double distortion_rate_bound(Nats delta, double l_max) {
  if (!(delta.value >= 0.0)) throw ValidationError("rate deficit must be >= 0");
  if (!(l_max >= 0.0)) throw ValidationError("l_max must be >= 0");
  if (std::isinf(delta.value)) return l_max;
  return l_max * std::min(std::sqrt(0.5 * delta.value), std::sqrt(-std::expm1(-delta.value)));
}

double distortion_rate_bound(Bits delta, double l_max) { return distortion_rate_bound(delta.to_nats(), l_max); }

double distortion_rate_bound_scheme2(Nats delta, Nats residual, double l_max) {
  if (!(residual.value >= 0.0)) throw ValidationError("residual information must be >= 0");
  if (!(delta.value >= 0.0)) throw ValidationError("rate deficit must be >= 0");
  return distortion_rate_bound(Nats{delta.value + residual.value}, l_max);
}

double distortion_rate_bound_scheme2(Bits delta, Bits residual, double l_max) {
  return distortion_rate_bound_scheme2(delta.to_nats(), residual.to_nats(), l_max);
}

std::vector<BoundRow> verify_bound(const ProblemInstance& instance, const Posterior& alice,
                                   const Distribution& prior, const std::vector<double>& epsilons,
                                   const RDOptions& opts) {
  for (double e : epsilons) {
    if (!(e >= 0.0)) throw ValidationError("verify_bound: budgets must be >= 0");
  }
  const double rate_star = solve_rd_with_prior(instance, alice, prior, 0.0, opts).rate;
  std::vector<BoundRow> rows;
  for (double e : epsilons) {
    const RDPoint pt = solve_rd_with_prior(instance, alice, prior, e, opts);
    BoundRow row;
    row.epsilon = e;
    row.rate = pt.rate;
    row.rate_star = rate_star;
    row.delta_r = std::max(0.0, rate_star - pt.rate);
    row.distortion = pt.distortion;
    row.bound = distortion_rate_bound(Bits{row.delta_r}, instance.l_max());
    row.slack = row.bound - row.distortion;
    if (row.distortion > row.bound + 1e-9) {
      nlohmann::json repro = {{"instance", instance_to_json(instance)},
                              {"epsilon", e},
                              {"alice", rule_to_json(MapTableRule{alice.rows()})["rows"]},
                              {"prior", std::vector<double>(prior.probs().begin(), prior.probs().end())}};
      throw InvariantViolation("distortion " + std::to_string(row.distortion) + " exceeds the bound " +
                                   std::to_string(row.bound) + " at epsilon " + std::to_string(e),
                               repro.dump());
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace semcom
