#pragma once

#include "semcom/spaces.hpp"

#include <json.hpp>

#include <variant>

namespace semcom {

/// A stochastic matrix Q(h|s), one row per dataset, together with the source
/// law P_S it is paired with and the induced marginal Q_H.
class Posterior {
 public:
  Posterior(Matrix rows, Distribution source);

  /// Rows over the dataset space of `instance`.
  static Posterior over(const ProblemInstance& instance, Matrix rows);
  static Posterior constant(const ProblemInstance& instance, const Distribution& row);

  const Matrix& rows() const noexcept { return rows_; }
  Distribution row(Index s) const { return Distribution(rows_.row(s).transpose()); }
  const Distribution& source() const noexcept { return source_; }
  const Distribution& marginal() const noexcept { return marginal_; }

  /// P_S(s) Q(h|s).
  Matrix joint() const { return source_.probs().asDiagonal() * rows_; }

  Index num_datasets() const { return rows_.rows(); }
  Index num_hypotheses() const { return rows_.cols(); }

 private:
  Matrix rows_;
  Distribution source_;
  Distribution marginal_;
};

/// I(S;H) of the joint P_S(s) Q(h|s).
double mutual_information(const Posterior& q);

/// Convex combination lambda*a + (1-lambda)*b over the same source.
Posterior mix(const Posterior& a, const Posterior& b, double lambda);

struct GibbsRule {
  double beta = 1.0;
};
struct ErmRule {};
struct MapTableRule {
  Matrix rows;
};

using LearningRule = std::variant<GibbsRule, ErmRule, MapTableRule>;

LearningRule rule_from_json(const nlohmann::json& doc);
nlohmann::json rule_to_json(const LearningRule& rule);

/// m * sum_c P(c|s) * empirical loss of delta_h on s, as an N x |H| matrix.
/// Gibbs and ERM rank hypotheses by this score.
Matrix bayes_empirical_score(const ProblemInstance& instance);

/// Apply a rule to precomputed per-dataset scores (rows indexed by dataset).
Matrix rows_from_scores(const LearningRule& rule, const Matrix& scores);

Posterior fit(const LearningRule& rule, const ProblemInstance& instance);

/// (1/m) sum_j sum_h q(h) l[c](h, z_j).
double empirical_loss(const Distribution& q, std::span<const int> dataset, Index concept_index,
                      const ProblemInstance& instance);
double empirical_loss(const Distribution& q, Index dataset, Index concept_index,
                      const ProblemInstance& instance);

/// sum_z p_c(z) sum_h q(h) l[c](h, z).
double true_loss(const Distribution& q, Index concept_index, const ProblemInstance& instance);

/// True loss of each point hypothesis: |C| x |H|.
Matrix concept_hypothesis_loss(const ProblemInstance& instance);

/// E_{C,S}[L_C(bob(.|S)) - L_C(alice(.|S))]. Signed.
double d_sem(const Posterior& alice, const Posterior& bob, const ProblemInstance& instance);

/// D[s][h] = sum_c P(c|s) L_c(h) and the baseline b = <alice, D>, so that
/// d_sem(alice, q) = sum_s P_S(s) <q(.|s), D[s]> - b for every q.
struct EffectiveDistortion {
  Matrix distortion;
  double baseline = 0.0;

  double expected(const Posterior& q) const;
  double d_sem(const Posterior& q) const { return expected(q) - baseline; }
};

EffectiveDistortion effective_distortion_matrix(const ProblemInstance& instance,
                                                const Posterior& alice);

}  // namespace semcom
