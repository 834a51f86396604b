#include "semcom/coordination.hpp"
#include "semcom/random_instance.hpp"
#include "semcom/rate_distortion.hpp"

#include <gtest/gtest.h>

namespace semcom {
namespace {

struct Case {
  ProblemInstance instance;
  Posterior alice;
};

Case draw_case(Rng& rng) {
  ProblemInstance inst = random_instance(rng);
  Posterior alice = random_posterior(rng, inst, 0.2);
  return {std::move(inst), std::move(alice)};
}

double eps_at(const EpsilonRange& r, double frac) {
  return r.min_epsilon + frac * (r.zero_rate_epsilon - r.min_epsilon);
}

TEST(EpsilonRange, Example1) {
  const ProblemInstance inst = example1_instance();
  const EpsilonRange r = epsilon_range(inst, example1_alice(inst));
  EXPECT_DOUBLE_EQ(r.min_epsilon, -0.5);
  EXPECT_DOUBLE_EQ(r.zero_rate_epsilon, -0.5);
}

TEST(SolveRd, ZeroRateBeyondThreshold) {
  Rng rng(41);
  for (int t = 0; t < 30; ++t) {
    const Case c = draw_case(rng);
    const EpsilonRange r = epsilon_range(c.instance, c.alice);
    const RDPoint p = solve_rd(c.instance, c.alice, r.zero_rate_epsilon + 0.1);
    EXPECT_NEAR(p.rate, 0.0, 1e-9);
  }
}

TEST(SolveRd, BelowMinimumIsRejected) {
  const ProblemInstance inst = example1_instance();
  EXPECT_THROW(solve_rd(inst, example1_alice(inst), -0.6), ValidationError);
}

TEST(SolveRd, FeasibleAndSelfConsistent) {
  Rng rng(42);
  for (int t = 0; t < 60; ++t) {
    const Case c = draw_case(rng);
    const EpsilonRange r = epsilon_range(c.instance, c.alice);
    const double eps = eps_at(r, rng.uniform());
    const RDPoint p = solve_rd(c.instance, c.alice, eps);
    EXPECT_LE(d_sem(c.alice, p.q_tilde, c.instance), eps + 1e-8);
    EXPECT_NEAR(p.rate, mutual_information(p.q_tilde), 1e-8);
    EXPECT_NEAR(p.rate, kl_rate(p.q_tilde, p.q_tilde.marginal(), c.instance), 1e-8);
    EXPECT_LE(p.duality_gap, 1e-6);
  }
}

TEST(RdCurve, MonotoneAndConvex) {
  Rng rng(43);
  for (int t = 0; t < 20; ++t) {
    const Case c = draw_case(rng);
    const EpsilonRange r = epsilon_range(c.instance, c.alice);
    if (r.zero_rate_epsilon - r.min_epsilon < 1e-6) continue;
    std::vector<double> eps;
    for (int k = 0; k <= 10; ++k) eps.push_back(eps_at(r, k / 10.0));
    const RDCurve curve = rd_curve(c.instance, c.alice, eps);
    ASSERT_EQ(curve.points.size(), eps.size());
    for (std::size_t k = 1; k < eps.size(); ++k) {
      EXPECT_LE(curve.points[k].rate, curve.points[k - 1].rate + 1e-7);
    }
    for (std::size_t k = 1; k + 1 < eps.size(); ++k) {
      EXPECT_LE(curve.points[k].rate, 0.5 * (curve.points[k - 1].rate + curve.points[k + 1].rate) + 1e-6);
    }
  }
}

TEST(SolveRdAtRate, InvertsTheCurve) {
  Rng rng(44);
  for (int t = 0; t < 20; ++t) {
    const Case c = draw_case(rng);
    const EpsilonRange r = epsilon_range(c.instance, c.alice);
    const RDPoint p = solve_rd(c.instance, c.alice, eps_at(r, 0.4));
    const RDPoint back = solve_rd_at_rate(c.instance, c.alice, p.rate);
    EXPECT_LE(back.rate, p.rate + 1e-6);
    EXPECT_NEAR(back.distortion, p.distortion, 1e-4);
  }
}

TEST(KlRate, MarginalPriorGivesMutualInformation) {
  Rng rng(45);
  for (int t = 0; t < 200; ++t) {
    const Case c = draw_case(rng);
    const Posterior q = random_posterior(rng, c.instance, 0.3);
    EXPECT_NEAR(kl_rate(q, q.marginal(), c.instance), mutual_information(q), 1e-10);
    const Distribution prior = random_distribution(rng, c.instance.num_hypotheses());
    EXPECT_NEAR(kl_rate(q, prior, c.instance), mutual_information(q) + kl_divergence(q.marginal(), prior), 1e-10);
  }
}

TEST(KlRate, SupportErrorOutsidePrior) {
  const ProblemInstance inst = example1_instance();
  EXPECT_THROW(kl_rate(example1_alice(inst), Distribution::point_mass(2, 0), inst), SupportError);
}

TEST(SolveRdWithPrior, ExampleOneValues) {
  const ProblemInstance inst = example1_instance();
  const Posterior alice = example1_alice(inst);
  const RDPoint at_zero = solve_rd_with_prior(inst, alice, Distribution::uniform(2), 0.0);
  EXPECT_NEAR(at_zero.rate, 0.0, 1e-9);
  const RDPoint at_min = solve_rd_with_prior(inst, alice, Distribution::uniform(2), -0.5);
  EXPECT_NEAR(at_min.rate, 1.0, 1e-7);
  EXPECT_THROW(solve_rd_with_prior(inst, alice, Distribution::point_mass(2, 1), -0.5), SupportError);
}

TEST(SolveRdWithPrior, DominatesMutualInformationAndMatchesAtMinimizerMarginal) {
  Rng rng(46);
  for (int t = 0; t < 40; ++t) {
    const Case c = draw_case(rng);
    const EpsilonRange r = epsilon_range(c.instance, c.alice);
    const double eps = eps_at(r, rng.uniform(0.2, 0.8));
    const RDPoint mi = solve_rd(c.instance, c.alice, eps);
    const Distribution prior = random_distribution(rng, c.instance.num_hypotheses());
    const RDPoint kl = solve_rd_with_prior(c.instance, c.alice, prior, eps);
    EXPECT_GE(kl.rate, mi.rate - 1e-6);
    EXPECT_LE(d_sem(c.alice, kl.q_tilde, c.instance), eps + 1e-8);

    bool full = (mi.q_tilde.marginal().probs().array() > 1e-9).all();
    if (!full) continue;
    const RDPoint same = solve_rd_with_prior(c.instance, c.alice, mi.q_tilde.marginal(), eps);
    EXPECT_NEAR(same.rate, mi.rate, 1e-6);
  }
}

TEST(SolveRdWithPrior, PythagoreanInequality) {
  // Any q meeting the budget: E D(q||P) >= E D(q||q_hat) + E D(q_hat||P).
  Rng rng(47);
  int checked = 0;
  for (int t = 0; t < 200; ++t) {
    const ProblemInstance inst = random_instance(rng);
    const Posterior alice = random_posterior(rng, inst);
    const Distribution prior = random_distribution(rng, inst.num_hypotheses());
    const EpsilonRange r = epsilon_range(inst, alice);
    if (r.zero_rate_epsilon - r.min_epsilon < 1e-6) continue;
    const double eps = eps_at(r, rng.uniform(0.1, 0.9));
    const RDPoint p = solve_rd_with_prior(inst, alice, prior, eps);
    if (!(p.q_tilde.rows().array() > 0.0).all()) continue;

    const EffectiveDistortion ed = effective_distortion_matrix(inst, alice);
    Matrix best = Matrix::Zero(inst.num_datasets(), inst.num_hypotheses());
    for (Index s = 0; s < inst.num_datasets(); ++s) {
      Index h = 0;
      ed.distortion.row(s).minCoeff(&h);
      best(s, h) = 1.0;
    }
    const Posterior q_min = Posterior::over(inst, best);
    const Posterior other = random_posterior(rng, inst);
    const double d_other = ed.d_sem(other);
    const double lambda = d_other <= eps ? 1.0 : (eps - r.min_epsilon) / (d_other - r.min_epsilon);
    const Posterior q = mix(other, q_min, lambda);
    ASSERT_LE(ed.d_sem(q), eps + 1e-12);

    double cross = 0.0;
    for (Index s = 0; s < inst.num_datasets(); ++s) {
      cross += inst.datasets().marginal[s] *
               kl_divergence(q.rows().row(s).transpose(), p.q_tilde.rows().row(s).transpose());
    }
    EXPECT_LE(cross + p.rate, kl_rate(q, prior, inst) + 1e-6);
    ++checked;
  }
  EXPECT_GT(checked, 50);
}

}  // namespace
}  // namespace semcom
