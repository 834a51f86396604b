#include "semcom/coordination.hpp"

#include <algorithm>
#include <cmath>

namespace semcom {

namespace {

void require_same_length(std::span<const Posterior> alice, std::span<const Posterior> bob) {
  if (alice.size() != bob.size()) {
    throw ValidationError("sequence lengths differ: alice has " + std::to_string(alice.size()) +
                          " positions, bob " + std::to_string(bob.size()));
  }
  if (alice.empty()) throw ValidationError("empty sequence");
}

Index argmax_row(const Posterior& q, Index s) {
  Index best = 0;
  q.rows().row(s).maxCoeff(&best);
  return best;
}

void require_deterministic(const Posterior& q, Index position) {
  for (Index s = 0; s < q.num_datasets(); ++s) {
    const Index h = argmax_row(q, s);
    if (q.rows()(s, h) != 1.0) {
      throw ValidationError("schedule row " + std::to_string(s) + " at position " + std::to_string(position) +
                            " is not a point mass");
    }
  }
}

}  // namespace

std::vector<double> per_position_d_sem(std::span<const Posterior> alice, std::span<const Posterior> bob,
                                       const ProblemInstance& instance) {
  require_same_length(alice, bob);
  std::vector<double> out(alice.size());
  for (std::size_t i = 0; i < alice.size(); ++i) out[i] = d_sem(alice[i], bob[i], instance);
  return out;
}

double d_avg_seq(std::span<const Posterior> alice, std::span<const Posterior> bob,
                 const ProblemInstance& instance) {
  const auto d = per_position_d_sem(alice, bob, instance);
  double total = 0.0;
  for (double x : d) total += x;
  return total / static_cast<double>(d.size());
}

double d_max_seq(std::span<const Posterior> alice, std::span<const Posterior> bob,
                 const ProblemInstance& instance) {
  const auto d = per_position_d_sem(alice, bob, instance);
  return *std::max_element(d.begin(), d.end());
}

Posterior schedule_type(std::span<const Posterior> bob) {
  if (bob.empty()) throw ValidationError("schedule_type: empty schedule");
  Matrix sum = Matrix::Zero(bob[0].num_datasets(), bob[0].num_hypotheses());
  for (const auto& q : bob) {
    if (q.rows().rows() != sum.rows() || q.rows().cols() != sum.cols()) {
      throw ValidationError("schedule_type: positions over different spaces");
    }
    sum += q.rows();
  }
  return Posterior(sum / static_cast<double>(bob.size()), bob[0].source());
}

Matrix joint_type_of(std::span<const Index> datasets, std::span<const Index> hypotheses, Index num_datasets,
                     Index num_hypotheses) {
  if (datasets.size() != hypotheses.size()) throw ValidationError("joint_type_of: length mismatch");
  if (datasets.empty()) throw ValidationError("joint_type_of: empty sequence");
  Matrix t = Matrix::Zero(num_datasets, num_hypotheses);
  for (std::size_t i = 0; i < datasets.size(); ++i) t(datasets[i], hypotheses[i]) += 1.0;
  return t / static_cast<double>(datasets.size());
}

// ---------------------------------------------------------------------------

ProblemInstance example1_instance() {
  Matrix law(2, 2);
  law << 0.75, 0.25,
         0.25, 0.75;
  ConceptSpace concepts({"c0", "c1"}, {"z0", "z1"}, Distribution(Vector::Constant(2, 0.5)), law);
  Matrix loss(2, 2);
  loss << 0.0, 0.0,
          1.0, 1.0;
  HypothesisSpace hypotheses({"h0", "h1"}, {loss, loss}, 1.0);
  return ProblemInstance(std::move(concepts), std::move(hypotheses), 2);
}

Posterior example1_alice(const ProblemInstance& instance) {
  return Posterior::constant(instance, Distribution::uniform(instance.num_hypotheses()));
}

std::vector<Posterior> example1_schedule(const ProblemInstance& instance, Index n) {
  std::vector<Posterior> out;
  out.reserve(static_cast<std::size_t>(n));
  const Posterior h0 = Posterior::constant(instance, Distribution::point_mass(2, 0));
  const Posterior h1 = Posterior::constant(instance, Distribution::point_mass(2, 1));
  for (Index i = 1; i <= n; ++i) out.push_back(i % 2 == 1 ? h1 : h0);
  return out;
}

Example1Report run_example_1(Index n, std::uint64_t seed) {
  if (n < 2) throw ValidationError("example1 needs n >= 2");
  const ProblemInstance instance = example1_instance();
  const Posterior alice = example1_alice(instance);
  const auto schedule = example1_schedule(instance, n);
  Example1Report out;
  out.trace = simulate_empirical_deterministic(instance, alice, schedule, n, seed);
  out.d_avg = d_avg_seq(out.trace.alice_rows, out.trace.bob_rows, instance);
  out.d_max = d_max_seq(out.trace.alice_rows, out.trace.bob_rows, instance);
  return out;
}

// ---------------------------------------------------------------------------

SequenceTrace simulate_empirical_deterministic(const ProblemInstance& instance, const Posterior& alice,
                                               std::span<const Posterior> schedule, Index n,
                                               std::uint64_t seed) {
  if (n < 1) throw ValidationError("simulate_empirical_deterministic: n must be >= 1");
  if (static_cast<Index>(schedule.size()) != n) {
    throw ValidationError("schedule has " + std::to_string(schedule.size()) + " positions, expected " +
                          std::to_string(n));
  }
  SequenceTrace t;
  t.n = n;
  CommonRandomness data(seed);
  for (Index i = 0; i < n; ++i) {
    const Posterior& bob = schedule[static_cast<std::size_t>(i)];
    if (bob.num_datasets() != instance.num_datasets() || bob.num_hypotheses() != instance.num_hypotheses()) {
      throw ValidationError("schedule position " + std::to_string(i) + " is not over the instance's spaces");
    }
    require_deterministic(bob, i);
    const Index s = data.next_categorical(instance.datasets().marginal.probs());
    t.datasets.push_back(s);
    t.hypotheses.push_back(argmax_row(bob, s));
    t.alice_rows.push_back(alice);
    t.bob_rows.push_back(bob);
  }
  t.joint_type = joint_type_of(t.datasets, t.hypotheses, instance.num_datasets(), instance.num_hypotheses());
  return t;
}

StrongReport simulate_strong(const ProblemInstance& instance, const Posterior& q_target, Index n,
                             const CommonRandomness& cr, const StrongOptions& opts) {
  if (n < 1) throw ValidationError("simulate_strong: n must be >= 1");
  if (opts.trials < 1) throw ValidationError("simulate_strong: trials must be >= 1");
  if (q_target.num_datasets() != instance.num_datasets() ||
      q_target.num_hypotheses() != instance.num_hypotheses()) {
    throw ValidationError("simulate_strong: target is not over the instance's spaces");
  }
  const Posterior& alice = opts.reference ? *opts.reference : q_target;
  const EffectiveDistortion ed = effective_distortion_matrix(instance, alice);
  const Distribution& source = instance.datasets().marginal;
  const Distribution& prior = q_target.marginal();
  const Index ns = instance.num_datasets();
  const Index nh = instance.num_hypotheses();
  const auto nn = static_cast<std::size_t>(n);

  std::vector<Matrix> counts(nn, Matrix::Zero(ns, nh));
  std::vector<double> sum(nn, 0.0), sum_sq(nn, 0.0);
  double bits = 0.0;

  StrongReport out;
  out.trials = opts.trials;
  for (long trial = 0; trial < opts.trials; ++trial) {
    const CommonRandomness root = cr.derive(static_cast<std::uint64_t>(trial));
    CommonRandomness data = root.derive(0);
    std::vector<Index> s(nn);
    for (auto& x : s) x = data.next_categorical(source.probs());
    const SequenceCode code = code_sequence(q_target, prior, s, root.derive(1), opts.mode, opts.coding);
    bits += code.total_bits / static_cast<double>(n);
    for (std::size_t i = 0; i < nn; ++i) {
      const Index h = code.reconstructed[i];
      counts[i](s[i], h) += 1.0;
      const double d = ed.distortion(s[i], h);
      sum[i] += d;
      sum_sq[i] += d * d;
    }
    if (trial == 0) {
      out.trace.n = n;
      out.trace.datasets = s;
      out.trace.hypotheses = code.reconstructed;
      out.trace.bits_used = code.total_bits;
      out.trace.cr_bits = code.cr_bits;
      out.trace.joint_type = joint_type_of(s, code.reconstructed, ns, nh);
    }
  }

  const auto t = static_cast<double>(opts.trials);
  const Matrix target = q_target.joint();
  out.bits_per_symbol = bits / t;
  for (std::size_t i = 0; i < nn; ++i) {
    const double mean = sum[i] / t;
    const double var = opts.trials > 1 ? std::max(0.0, (sum_sq[i] - t * mean * mean) / (t - 1.0)) : 0.0;
    out.d_sem_position.push_back(mean - ed.baseline);
    out.ci_half_width.push_back(1.96 * std::sqrt(var / t));
    const Matrix law = counts[i] / t;
    out.tv_position.push_back(0.5 * (law - target).cwiseAbs().sum());

    // Estimated conditional; unseen datasets fall back to the position's
    // overall hypothesis frequencies.
    const Vector overall = law.colwise().sum().transpose();
    Matrix rows(ns, nh);
    for (Index r = 0; r < ns; ++r) {
      const double c = counts[i].row(r).sum();
      if (c > 0.0) {
        rows.row(r) = counts[i].row(r) / c;
      } else {
        rows.row(r) = overall.transpose();
      }
    }
    out.trace.bob_rows.emplace_back(std::move(rows), source);
    out.trace.alice_rows.push_back(alice);
  }
  double total = 0.0;
  for (double d : out.d_sem_position) total += d;
  out.d_avg = total / static_cast<double>(n);
  out.d_max = *std::max_element(out.d_sem_position.begin(), out.d_sem_position.end());
  out.tv_max = *std::max_element(out.tv_position.begin(), out.tv_position.end());
  return out;
}

}  // namespace semcom
