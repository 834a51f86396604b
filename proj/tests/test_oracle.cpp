#include "semcom/oracle.hpp"
#include "semcom/random_instance.hpp"
#include "semcom/rate_distortion.hpp"

#include <gtest/gtest.h>

namespace semcom {
namespace {

ProblemInstance two_by_two(Rng& rng) {
  RandomInstanceOptions o;
  o.min_samples = o.max_samples = 2;
  o.min_m = o.max_m = 1;
  o.min_hypotheses = o.max_hypotheses = 2;
  return random_instance(rng, o);
}

TEST(SequenceOracle, Example1Traces) {
  const std::array<double, 4> avg{0.0, 1.0 / 6.0, 0.0, 0.1};
  for (Index n = 2; n <= 5; ++n) {
    const Example1Report r = run_example_1(n);
    const SequenceDistortion o = sequence_distortion_oracle(r.trace, example1_instance());
    EXPECT_NEAR(o.d_avg, avg[static_cast<std::size_t>(n - 2)], 1e-15);
    EXPECT_NEAR(o.d_max, 0.5, 1e-15);
  }
}

TEST(SequenceOracle, AgreesOnRandomSchedules) {
  Rng rng(91);
  for (int t = 0; t < 50; ++t) {
    const ProblemInstance inst = random_instance(rng);
    const Posterior alice = random_posterior(rng, inst, 0.2);
    const Index n = rng.integer(1, 8);
    const auto schedule = random_deterministic_schedule(rng, inst, n);
    const SequenceTrace tr = simulate_empirical_deterministic(inst, alice, schedule, n);
    const SequenceDistortion o = sequence_distortion_oracle(tr, inst);
    EXPECT_NEAR(o.d_avg, d_avg_seq(tr.alice_rows, tr.bob_rows, inst), 1e-12);
    EXPECT_NEAR(o.d_max, d_max_seq(tr.alice_rows, tr.bob_rows, inst), 1e-12);
  }
}

TEST(MrcOracle, SmallCases) {
  Vector q(2);
  q << 1.0, 0.0;
  EXPECT_NEAR(mrc_enumeration_oracle(Distribution(q), Distribution::uniform(2), 2)[0], 0.75, 1e-15);
  Vector p(3);
  p << 0.2, 0.3, 0.5;
  const Distribution one = mrc_enumeration_oracle(Distribution::uniform(3), Distribution(p), 1);
  EXPECT_LT((one.probs() - p).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_THROW(mrc_enumeration_oracle(Distribution::uniform(4), Distribution::uniform(4), 20, 1000),
               EnumerationTooLarge);
}

TEST(GridOracle, TwoByTwoMatchesSolver) {
  Rng rng(92);
  for (int t = 0; t < 20; ++t) {
    const ProblemInstance inst = two_by_two(rng);
    const Posterior alice = random_posterior(rng, inst);
    const EpsilonRange r = epsilon_range(inst, alice);
    const double eps = r.min_epsilon + rng.uniform() * (r.zero_rate_epsilon - r.min_epsilon);
    const GridOracleResult g = rd_grid_oracle(inst, alice, eps);
    EXPECT_TRUE(g.exhaustive);
    EXPECT_NEAR(g.rate, solve_rd(inst, alice, eps).rate, 1e-4);
  }
}

TEST(GridOracle, KlObjectiveMatchesPriorSolver) {
  Rng rng(93);
  for (int t = 0; t < 20; ++t) {
    const ProblemInstance inst = two_by_two(rng);
    const Posterior alice = random_posterior(rng, inst);
    const Distribution prior = random_distribution(rng, 2);
    const EpsilonRange r = epsilon_range(inst, alice);
    const double eps = r.min_epsilon + rng.uniform() * (r.zero_rate_epsilon - r.min_epsilon);
    const GridOracleResult g = rd_grid_oracle(inst, alice, eps, {}, OracleObjective::kl_to_prior, prior);
    EXPECT_NEAR(g.rate, solve_rd_with_prior(inst, alice, prior, eps).rate, 1e-4);
  }
}

TEST(GridOracle, Preconditions) {
  Rng rng(94);
  const ProblemInstance inst = two_by_two(rng);
  const Posterior alice = random_posterior(rng, inst);
  const EpsilonRange r = epsilon_range(inst, alice);
  EXPECT_THROW(rd_grid_oracle(inst, alice, r.min_epsilon - 0.1), ValidationError);
  EXPECT_THROW(rd_grid_oracle(inst, alice, 0.0, {}, OracleObjective::kl_to_prior), ValidationError);

  RandomInstanceOptions big;
  big.min_samples = big.max_samples = 3;
  big.min_m = big.max_m = 2;
  big.min_hypotheses = big.max_hypotheses = 3;
  const ProblemInstance wide = random_instance(rng, big);
  EXPECT_THROW(rd_grid_oracle(wide, random_posterior(rng, wide), 0.0), EnumerationTooLarge);
}

}  // namespace
}  // namespace semcom
