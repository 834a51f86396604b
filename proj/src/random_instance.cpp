#include "semcom/random_instance.hpp"

#include <cmath>

namespace semcom {

Distribution random_distribution(Rng& rng, Index n, double zero_prob) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = -std::log(1.0 - rng.uniform());
  if (zero_prob > 0.0) {
    const Index keep = rng.integer(0, n - 1);
    for (Index i = 0; i < n; ++i) {
      if (i != keep && rng.bernoulli(zero_prob)) v(i) = 0.0;
    }
  }
  if (!(v.sum() > 0.0)) v.setOnes();
  return Distribution(v / v.sum());
}

ProblemInstance random_instance(Rng& rng, const RandomInstanceOptions& opts) {
  Index nz = 0, m = 0;
  for (;;) {
    nz = rng.integer(opts.min_samples, opts.max_samples);
    m = rng.integer(opts.min_m, opts.max_m);
    if (std::pow(static_cast<double>(nz), static_cast<double>(m)) <= static_cast<double>(opts.max_datasets)) break;
  }
  const Index nc = rng.integer(opts.min_concepts, opts.max_concepts);
  const Index nh = rng.integer(opts.min_hypotheses, opts.max_hypotheses);

  std::vector<std::string> concepts, samples, hyps;
  for (Index c = 0; c < nc; ++c) concepts.push_back("c" + std::to_string(c));
  for (Index z = 0; z < nz; ++z) samples.push_back("z" + std::to_string(z));
  for (Index h = 0; h < nh; ++h) hyps.push_back("h" + std::to_string(h));

  Matrix law(nc, nz);
  for (Index c = 0; c < nc; ++c) law.row(c) = random_distribution(rng, nz).probs().transpose();
  std::vector<Matrix> loss;
  for (Index c = 0; c < nc; ++c) {
    Matrix l(nh, nz);
    for (Index h = 0; h < nh; ++h) {
      for (Index z = 0; z < nz; ++z) l(h, z) = rng.uniform();
    }
    loss.push_back(std::move(l));
  }
  ConceptSpace cs(std::move(concepts), std::move(samples), random_distribution(rng, nc), std::move(law));
  return ProblemInstance(std::move(cs), HypothesisSpace(std::move(hyps), std::move(loss), 1.0), m);
}

Posterior random_posterior(Rng& rng, const ProblemInstance& instance, double zero_prob) {
  Matrix rows(instance.num_datasets(), instance.num_hypotheses());
  for (Index s = 0; s < rows.rows(); ++s) {
    rows.row(s) = random_distribution(rng, instance.num_hypotheses(), zero_prob).probs().transpose();
  }
  return Posterior::over(instance, std::move(rows));
}

std::vector<Posterior> random_deterministic_schedule(Rng& rng, const ProblemInstance& instance, Index n) {
  std::vector<Posterior> out;
  for (Index i = 0; i < n; ++i) {
    Matrix rows = Matrix::Zero(instance.num_datasets(), instance.num_hypotheses());
    for (Index s = 0; s < rows.rows(); ++s) rows(s, rng.integer(0, instance.num_hypotheses() - 1)) = 1.0;
    out.push_back(Posterior::over(instance, std::move(rows)));
  }
  return out;
}

LearningRule random_rule(Rng& rng, const ProblemInstance& instance) {
  switch (rng.integer(0, 2)) {
    case 0:
      return GibbsRule{rng.uniform(0.1, 5.0)};
    case 1:
      return ErmRule{};
    default:
      return MapTableRule{random_posterior(rng, instance).rows()};
  }
}

}  // namespace semcom
