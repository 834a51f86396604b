#include "semcom/learning.hpp"

namespace semcom {

using nlohmann::json;

namespace {

constexpr double kErmTieTolerance = 1e-12;

void check_rows(Matrix& rows, Index expected_rows) {
  if (rows.rows() != expected_rows) {
    throw ValidationError("posterior has " + std::to_string(rows.rows()) + " rows, expected " +
                          std::to_string(expected_rows));
  }
  for (Index s = 0; s < rows.rows(); ++s) {
    try {
      rows.row(s) = Distribution(rows.row(s).transpose()).probs().transpose();
    } catch (const ValidationError& e) {
      throw ValidationError("posterior row " + std::to_string(s) + ": " + e.what());
    }
  }
}

}  // namespace

Posterior::Posterior(Matrix rows, Distribution source)
    : rows_(std::move(rows)),
      source_(std::move(source)),
      marginal_([&] {
        check_rows(rows_, source_.size());
        return Distribution(rows_.transpose() * source_.probs());
      }()) {}

Posterior Posterior::over(const ProblemInstance& instance, Matrix rows) {
  return Posterior(std::move(rows), instance.datasets().marginal);
}

Posterior Posterior::constant(const ProblemInstance& instance, const Distribution& row) {
  Matrix rows = row.probs().transpose().replicate(instance.num_datasets(), 1);
  return over(instance, std::move(rows));
}

double mutual_information(const Posterior& q) { return mutual_information(q.joint()); }

Posterior mix(const Posterior& a, const Posterior& b, double lambda) {
  if (a.rows().rows() != b.rows().rows() || a.rows().cols() != b.rows().cols()) {
    throw ValidationError("mix: posteriors over different spaces");
  }
  return Posterior(lambda * a.rows() + (1.0 - lambda) * b.rows(), a.source());
}

// ---------------------------------------------------------------------------

LearningRule rule_from_json(const json& doc) {
  if (!doc.is_object() || !doc.contains("rule") || !doc["rule"].is_string()) {
    throw ValidationError("expected {\"rule\": ...}", "/rule");
  }
  const auto name = doc["rule"].get<std::string>();
  if (name == "gibbs") {
    if (!doc.contains("beta") || !doc["beta"].is_number()) throw ValidationError("expected a number", "/beta");
    const double beta = doc["beta"].get<double>();
    if (!(beta >= 0.0)) throw ValidationError("inverse temperature must be >= 0", "/beta");
    return GibbsRule{beta};
  }
  if (name == "erm") return ErmRule{};
  if (name == "map_table") {
    if (!doc.contains("rows") || !doc["rows"].is_array() || doc["rows"].empty()) {
      throw ValidationError("expected a non-empty array of rows", "/rows");
    }
    const json& arr = doc["rows"];
    const auto n = static_cast<Index>(arr.size());
    const auto h = static_cast<Index>(arr[0].is_array() ? arr[0].size() : 0);
    Matrix rows(n, h);
    for (Index s = 0; s < n; ++s) {
      const std::string ptr = "/rows/" + std::to_string(s);
      if (!arr[s].is_array() || static_cast<Index>(arr[s].size()) != h) {
        throw ValidationError("row length mismatch", ptr);
      }
      for (Index k = 0; k < h; ++k) {
        if (!arr[s][k].is_number()) throw ValidationError("expected a number", ptr + "/" + std::to_string(k));
        rows(s, k) = arr[s][k].get<double>();
      }
    }
    return MapTableRule{std::move(rows)};
  }
  throw ValidationError("unknown rule '" + name + "'", "/rule");
}

json rule_to_json(const LearningRule& rule) {
  return std::visit(
      [](const auto& r) -> json {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, GibbsRule>) {
          return {{"rule", "gibbs"}, {"beta", r.beta}};
        } else if constexpr (std::is_same_v<T, ErmRule>) {
          return {{"rule", "erm"}};
        } else {
          json rows = json::array();
          for (Index s = 0; s < r.rows.rows(); ++s) {
            json row = json::array();
            for (Index h = 0; h < r.rows.cols(); ++h) row.push_back(r.rows(s, h));
            rows.push_back(row);
          }
          return {{"rule", "map_table"}, {"rows", rows}};
        }
      },
      rule);
}

Matrix bayes_empirical_score(const ProblemInstance& instance) {
  const auto& ds = instance.datasets();
  const auto& loss = instance.hypotheses().loss;
  const Index n = ds.size();
  const Index nh = instance.num_hypotheses();
  Matrix score = Matrix::Zero(n, nh);
  for (Index s = 0; s < n; ++s) {
    const auto t = ds.tuple(s);
    for (Index c = 0; c < instance.num_concepts(); ++c) {
      const double w = ds.posterior(s, c);
      if (w == 0.0) continue;
      for (int z : t) score.row(s) += w * loss[c].col(z).transpose();
    }
  }
  return score;
}

Matrix rows_from_scores(const LearningRule& rule, const Matrix& scores) {
  return std::visit(
      [&](const auto& r) -> Matrix {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, GibbsRule>) {
          if (!(r.beta >= 0.0)) throw ValidationError("gibbs: beta must be >= 0");
          Matrix rows(scores.rows(), scores.cols());
          for (Index s = 0; s < scores.rows(); ++s) {
            const double lo = scores.row(s).minCoeff();
            rows.row(s) = (-r.beta * (scores.row(s).array() - lo)).exp().matrix();
            rows.row(s) /= rows.row(s).sum();
          }
          return rows;
        } else if constexpr (std::is_same_v<T, ErmRule>) {
          Matrix rows = Matrix::Zero(scores.rows(), scores.cols());
          for (Index s = 0; s < scores.rows(); ++s) {
            const double lo = scores.row(s).minCoeff();
            const double tol = kErmTieTolerance * std::max(1.0, std::abs(lo));
            for (Index h = 0; h < scores.cols(); ++h) {
              if (scores(s, h) <= lo + tol) rows(s, h) = 1.0;
            }
            rows.row(s) /= rows.row(s).sum();
          }
          return rows;
        } else {
          if (r.rows.rows() != scores.rows() || r.rows.cols() != scores.cols()) {
            throw ValidationError("map_table: expected " + std::to_string(scores.rows()) + " x " +
                                  std::to_string(scores.cols()) + " rows, got " +
                                  std::to_string(r.rows.rows()) + " x " + std::to_string(r.rows.cols()));
          }
          return r.rows;
        }
      },
      rule);
}

Posterior fit(const LearningRule& rule, const ProblemInstance& instance) {
  return Posterior::over(instance, rows_from_scores(rule, bayes_empirical_score(instance)));
}

// ---------------------------------------------------------------------------

double empirical_loss(const Distribution& q, std::span<const int> dataset, Index concept_index,
                      const ProblemInstance& instance) {
  if (q.size() != instance.num_hypotheses()) throw ValidationError("empirical_loss: wrong alphabet");
  if (dataset.empty()) throw ValidationError("empirical_loss: empty dataset");
  const Matrix& loss = instance.hypotheses().loss.at(static_cast<std::size_t>(concept_index));
  double total = 0.0;
  for (int z : dataset) total += q.probs().dot(loss.col(z));
  return total / static_cast<double>(dataset.size());
}

double empirical_loss(const Distribution& q, Index dataset, Index concept_index,
                      const ProblemInstance& instance) {
  return empirical_loss(q, instance.datasets().tuple(dataset), concept_index, instance);
}

double true_loss(const Distribution& q, Index concept_index, const ProblemInstance& instance) {
  if (q.size() != instance.num_hypotheses()) throw ValidationError("true_loss: wrong alphabet");
  const Matrix& loss = instance.hypotheses().loss.at(static_cast<std::size_t>(concept_index));
  return q.probs().dot(loss * instance.concepts().data_law.row(concept_index).transpose());
}

Matrix concept_hypothesis_loss(const ProblemInstance& instance) {
  Matrix out(instance.num_concepts(), instance.num_hypotheses());
  for (Index c = 0; c < instance.num_concepts(); ++c) {
    out.row(c) = (instance.hypotheses().loss[c] * instance.concepts().data_law.row(c).transpose()).transpose();
  }
  return out;
}

namespace {

void require_same_space(const Posterior& a, const Posterior& b, const ProblemInstance& instance) {
  if (a.num_datasets() != instance.num_datasets() || b.num_datasets() != instance.num_datasets() ||
      a.num_hypotheses() != instance.num_hypotheses() || b.num_hypotheses() != instance.num_hypotheses()) {
    throw ValidationError("d_sem: posteriors are not over the instance's dataset space");
  }
}

}  // namespace

double d_sem(const Posterior& alice, const Posterior& bob, const ProblemInstance& instance) {
  require_same_space(alice, bob, instance);
  const Matrix joint = instance.concept_dataset_joint();  // C x N
  const Matrix tl = concept_hypothesis_loss(instance);     // C x H
  const Matrix diff = bob.rows() - alice.rows();           // N x H
  // sum_{c,s} P(c,s) <diff(s), tl(c)>
  return (joint.array() * (tl * diff.transpose()).array()).sum();
}

double EffectiveDistortion::expected(const Posterior& q) const {
  if (q.rows().rows() != distortion.rows() || q.rows().cols() != distortion.cols()) {
    throw ValidationError("posterior does not match the distortion matrix");
  }
  return q.source().probs().dot((q.rows().array() * distortion.array()).rowwise().sum().matrix());
}

EffectiveDistortion effective_distortion_matrix(const ProblemInstance& instance, const Posterior& alice) {
  require_same_space(alice, alice, instance);
  EffectiveDistortion out;
  out.distortion = instance.datasets().posterior * concept_hypothesis_loss(instance);
  out.baseline = out.expected(alice);
  return out;
}

}  // namespace semcom
