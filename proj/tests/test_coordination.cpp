#include "semcom/coordination.hpp"
#include "semcom/random_instance.hpp"

#include <gtest/gtest.h>

namespace semcom {
namespace {

TEST(Example1, ClosedForms) {
  for (Index n = 2; n <= 50; ++n) {
    const Example1Report r = run_example_1(n);
    const double expected = n % 2 == 0 ? 0.0 : 1.0 / (2.0 * static_cast<double>(n));
    EXPECT_NEAR(r.d_avg, expected, 1e-15) << "n=" << n;
    EXPECT_EQ(r.d_max, 0.5) << "n=" << n;
  }
  EXPECT_THROW(run_example_1(1), ValidationError);
}

TEST(Example1, ScheduleTypeIsAliceForEvenN) {
  const ProblemInstance inst = example1_instance();
  for (Index n : {2, 4, 10}) {
    const auto schedule = example1_schedule(inst, n);
    const Posterior t = schedule_type(schedule);
    EXPECT_LT((t.rows().array() - 0.5).abs().maxCoeff(), 1e-15);
    const Example1Report r = run_example_1(n, 3);
    const Vector h_marginal = r.trace.joint_type.colwise().sum().transpose();
    EXPECT_NEAR(h_marginal(0), 0.5, 1e-15);
  }
}

TEST(EmpiricalDeterministic, ConstantScheduleIsSigned) {
  const ProblemInstance inst = example1_instance();
  const Posterior alice = example1_alice(inst);
  const std::vector<Posterior> schedule(6, Posterior::constant(inst, Distribution::point_mass(2, 0)));
  const SequenceTrace t = simulate_empirical_deterministic(inst, alice, schedule, 6);
  for (double d : per_position_d_sem(t.alice_rows, t.bob_rows, inst)) EXPECT_DOUBLE_EQ(d, -0.5);
  EXPECT_DOUBLE_EQ(d_avg_seq(t.alice_rows, t.bob_rows, inst), -0.5);
}

TEST(EmpiricalDeterministic, SinglePositionIsPointMass) {
  const ProblemInstance inst = example1_instance();
  const auto schedule = example1_schedule(inst, 1);
  const SequenceTrace t = simulate_empirical_deterministic(inst, example1_alice(inst), schedule, 1);
  EXPECT_EQ(t.joint_type.maxCoeff(), 1.0);
  EXPECT_EQ(t.joint_type.sum(), 1.0);
}

TEST(EmpiricalDeterministic, RejectsSoftRows) {
  const ProblemInstance inst = example1_instance();
  const std::vector<Posterior> schedule(2, example1_alice(inst));
  EXPECT_THROW(simulate_empirical_deterministic(inst, example1_alice(inst), schedule, 2), ValidationError);
}

TEST(SequenceDistortion, LengthMismatchThrows) {
  const ProblemInstance inst = example1_instance();
  const std::vector<Posterior> a(3, example1_alice(inst)), b(2, example1_alice(inst));
  EXPECT_THROW(d_avg_seq(a, b, inst), ValidationError);
  EXPECT_THROW(d_max_seq(a, b, inst), ValidationError);
}

TEST(SequenceDistortion, RandomScheduleProperties) {
  Rng rng(71);
  for (int trial = 0; trial < 100; ++trial) {
    const ProblemInstance inst = random_instance(rng);
    const Posterior alice = random_posterior(rng, inst, 0.2);
    const Index n = rng.integer(1, 20);
    const auto schedule = random_deterministic_schedule(rng, inst, n);
    const SequenceTrace t = simulate_empirical_deterministic(inst, alice, schedule, n, trial);
    const double avg = d_avg_seq(t.alice_rows, t.bob_rows, inst);
    EXPECT_GE(d_max_seq(t.alice_rows, t.bob_rows, inst), avg);
    EXPECT_NEAR(avg, d_sem(alice, schedule_type(schedule), inst), 1e-10);
    EXPECT_NEAR(t.joint_type.sum(), 1.0, 1e-12);
    EXPECT_LT((t.joint_type * static_cast<double>(n) - (t.joint_type * static_cast<double>(n)).array().round().matrix())
                  .cwiseAbs()
                  .maxCoeff(),
              1e-9);
    const std::vector<Posterior> same(static_cast<std::size_t>(n), alice);
    EXPECT_EQ(d_avg_seq(same, same, inst), 0.0);
    EXPECT_EQ(d_max_seq(same, same, inst), 0.0);
  }
}

TEST(Strong, Example1ReachesTargetAtZeroBits) {
  const ProblemInstance inst = example1_instance();
  const Posterior alice = example1_alice(inst);
  StrongOptions opts;
  opts.trials = 10000;
  const StrongReport r = simulate_strong(inst, alice, 4, CommonRandomness(1), opts);
  EXPECT_LT(r.bits_per_symbol, 0.05);
  EXPECT_LT(r.d_max, 0.02);
  EXPECT_LT(r.tv_max, 0.03);
}

TEST(Strong, RandomTwoByTwoApproachesTarget) {
  Rng rng(72);
  RandomInstanceOptions o;
  o.min_concepts = o.max_concepts = 2;
  o.min_samples = o.max_samples = 2;
  o.min_m = o.max_m = 1;
  o.min_hypotheses = o.max_hypotheses = 2;
  for (int t = 0; t < 3; ++t) {
    const ProblemInstance inst = random_instance(rng, o);
    const Posterior q = random_posterior(rng, inst);
    StrongOptions opts;
    opts.trials = 10000;
    const StrongReport r = simulate_strong(inst, q, 3, CommonRandomness(10 + t), opts);
    for (double tv : r.tv_position) EXPECT_LT(tv, 0.05);
  }
}

TEST(Strong, BitsWithinInterval) {
  Rng rng(73);
  for (int t = 0; t < 5; ++t) {
    const ProblemInstance inst = random_instance(rng);
    const Posterior q = random_posterior(rng, inst);
    const Index n = 4;
    StrongOptions opts;
    opts.trials = 2000;
    const StrongReport r = simulate_strong(inst, q, n, CommonRandomness(20 + t), opts);
    const double mi = mutual_information(q);
    const double nn = static_cast<double>(n);
    EXPECT_GE(r.bits_per_symbol, mi - 0.01);
    EXPECT_LE(r.bits_per_symbol, mi + opts.coding.slack + (std::log2(nn * mi + 1.0) + 4.0) / nn);
  }
}

TEST(Strong, DeterministicForSeed) {
  const ProblemInstance inst = example1_instance();
  StrongOptions opts;
  opts.trials = 200;
  const StrongReport a = simulate_strong(inst, example1_alice(inst), 3, CommonRandomness(5), opts);
  const StrongReport b = simulate_strong(inst, example1_alice(inst), 3, CommonRandomness(5), opts);
  EXPECT_EQ(a.d_sem_position, b.d_sem_position);
  EXPECT_EQ(a.trace.hypotheses, b.trace.hypotheses);
}

}  // namespace
}  // namespace semcom
