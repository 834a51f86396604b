// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include "../tools/cli.hpp"
#include "semcom/oracle.hpp"
#include "semcom/random_instance.hpp"
#include "semcom/schemes.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

namespace fs = std::filesystem;
using namespace semcom;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

int failures = 0;

void criterion(int id, const std::string& name, double limit_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool in_time = secs < limit_s;
  const bool pass = o.pass && in_time;
  if (!pass) ++failures;
  std::printf("%s [%d] %s: %s (%.2f s, limit %.0f s%s)\n", pass ? "PASS" : "FAIL", id, name.c_str(),
              o.detail.c_str(), secs, limit_s, in_time ? "" : ", over time");
  std::fflush(stdout);
}

double eps_at(const EpsilonRange& r, double frac) {
  return r.min_epsilon + frac * (r.zero_rate_epsilon - r.min_epsilon);
}

// |S|, |H| <= 3 and small enough for the grid oracle.
ProblemInstance oracle_sized_instance(Rng& rng) {
  RandomInstanceOptions o;
  o.max_datasets = 3;
  o.max_hypotheses = 3;
  for (;;) {
    ProblemInstance inst = random_instance(rng, o);
    if (inst.num_datasets() * (inst.num_hypotheses() - 1) <= 4) return inst;
  }
}

Outcome example1_exact() {
  double worst_avg = 0.0;
  bool dmax_exact = true;
  for (Index n = 2; n <= 50; ++n) {
    const Example1Report r = run_example_1(n);
    const double expected = n % 2 == 0 ? 0.0 : 1.0 / (2.0 * static_cast<double>(n));
    worst_avg = std::max(worst_avg, std::abs(r.d_avg - expected));
    dmax_exact &= r.d_max == 0.5;
  }
  return {worst_avg <= 1e-15 && dmax_exact,
          "n=2..50, max |d_avg - closed form| = " + fmt_double(worst_avg) + ", d_max == 1/2 at every n: " +
              (dmax_exact ? "yes" : "no")};
}

Outcome rd_oracle() {
  Rng rng(1);
  const int instances = 60;
  double worst = 0.0;
  int points = 0;
  for (int t = 0; t < instances; ++t) {
    const ProblemInstance inst = oracle_sized_instance(rng);
    const Posterior alice = random_posterior(rng, inst, 0.2);
    const EpsilonRange r = epsilon_range(inst, alice);
    for (double frac : {0.05, 0.5, 0.95}) {
      const double eps = eps_at(r, frac);
      const double rd = solve_rd(inst, alice, eps).rate;
      const GridOracleResult g = rd_grid_oracle(inst, alice, eps, OracleBudget{10'000'000, 1e-3});
      worst = std::max(worst, std::abs(rd - g.rate));
      ++points;
    }
  }
  return {worst <= 1e-3, std::to_string(instances) + " instances, " + std::to_string(points) +
                             " budgets, max |solve_rd - grid oracle| = " + fmt_double(worst) + " bits (tol 1e-3)"};
}

Outcome kl_identities() {
  Rng rng(2);
  double worst_mi = 0.0, worst_split = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const ProblemInstance inst = random_instance(rng);
    const Posterior q = random_posterior(rng, inst, 0.3);
    const Distribution prior = random_distribution(rng, inst.num_hypotheses());
    const double mi = mutual_information(q);
    worst_mi = std::max(worst_mi, std::abs(kl_rate(q, q.marginal(), inst) - mi));
    worst_split = std::max(worst_split,
                           std::abs(kl_rate(q, prior, inst) - (mi + kl_divergence(q.marginal(), prior))));
  }
  return {worst_mi <= 1e-10 && worst_split <= 1e-10,
          "1000 pairs, max |kl_rate(marginal) - I| = " + fmt_double(worst_mi) +
              ", max |kl_rate(P) - I - D(Q_H||P)| = " + fmt_double(worst_split) + " (tol 1e-10)"};
}

Outcome coding_bits() {
  Rng rng(3);
  double worst_margin = std::numeric_limits<double>::infinity();
  StrongOptions opts;
  opts.trials = 10'000;
  for (int t = 0; t < 20; ++t) {
    const ProblemInstance inst = random_instance(rng);
    const Posterior q = random_posterior(rng, inst, 0.2);
    const double rate = kl_rate(q, q.marginal(), inst);
    const StrongReport r = simulate_strong(inst, q, 1, CommonRandomness(100 + t), opts);
    const double limit = rate + std::log2(rate + 1.0) + 4.0 + opts.coding.slack;
    worst_margin = std::min(worst_margin, limit - r.bits_per_symbol);
  }
  double worst_k1 = 0.0;
  for (int t = 0; t < 200; ++t) {
    const Index n = rng.integer(2, 5);
    const Distribution q = random_distribution(rng, n, 0.3);
    const Distribution p = random_distribution(rng, n);
    worst_k1 = std::max(worst_k1, (induced_distribution_exact(q, p, 1).probs() - p.probs()).cwiseAbs().maxCoeff());
    worst_k1 = std::max(worst_k1, (mrc_enumeration_oracle(q, p, 1).probs() - p.probs()).cwiseAbs().maxCoeff());
  }
  return {worst_margin >= 0.0 && worst_k1 <= 1e-15,
          "20 instances x 1e4 trials, min (R + log2(R+1) + 4 + slack - bits) = " + fmt_double(worst_margin) +
              " bits; K=1 max |law - prior| = " + fmt_double(worst_k1)};
}

Outcome strong_separation() {
  const ProblemInstance inst = example1_instance();
  const Index n = 10;
  StrongOptions opts;
  opts.trials = 10'000;
  const StrongReport strong = simulate_strong(inst, example1_alice(inst), n, CommonRandomness(5), opts);
  const Example1Report det = run_example_1(n);
  const bool pass = strong.d_max < 0.02 && strong.bits_per_symbol < 0.05 && det.d_max == 0.5;
  return {pass, "n=10, 1e4 trials: strong d_max = " + fmt_double(strong.d_max) + " at " +
                    fmt_double(strong.bits_per_symbol) + " bits/model; deterministic d_max = " +
                    fmt_double(det.d_max)};
}

Outcome bound_sweep() {
  Rng rng(6);
  int violations = 0, rows = 0, active = 0;
  double min_slack = std::numeric_limits<double>::infinity();
  auto run = [&](const ProblemInstance& inst, const Posterior& alice, const Distribution& prior,
                 const std::vector<double>& eps) {
    try {
      for (const BoundRow& r : verify_bound(inst, alice, prior, eps)) {
        ++rows;
        active += r.delta_r > 1e-9;
        min_slack = std::min(min_slack, r.slack);
      }
    } catch (const InvariantViolation& e) {
      ++violations;
      std::fprintf(stderr, "bound violation: %s\n%s\n", e.what(), e.repro().c_str());
    }
  };
  for (int t = 0; t < 200; ++t) {
    const ProblemInstance inst = random_instance(rng);
    // fitted beliefs make eps = 0 bind; random ones mostly do not
    const Posterior alice = t % 2 == 0 ? fit(random_rule(rng, inst), inst) : random_posterior(rng, inst, 0.2);
    const Distribution prior = random_distribution(rng, inst.num_hypotheses());
    const EpsilonRange r = epsilon_range(inst, alice);
    const double top = std::max(r.zero_rate_epsilon, 0.0) + 0.05;
    std::vector<double> eps;
    for (int k = 0; k <= 10; ++k) eps.push_back(top * k / 10.0);
    run(inst, alice, prior, eps);
  }
  const ProblemInstance e1 = example1_instance();
  std::vector<double> eps;
  for (int k = 0; k <= 50; ++k) eps.push_back(0.02 * k);
  run(e1, example1_alice(e1), Distribution::uniform(2), eps);
  return {violations == 0, "200 random instances + example1 grid, " + std::to_string(rows) +
                               " rows (" + std::to_string(active) + " with Delta_R > 0), violations = " + std::to_string(violations) +
                               ", min slack = " + fmt_double(min_slack)};
}

Outcome scheme_decomposition() {
  Rng rng(7);
  RandomInstanceOptions o;
  o.max_datasets = 4;
  int runs = 0, checked = 0, violations = 0, feasible = 0, boundary = 0;
  double worst_chain = 0.0;
  for (int t = 0; t < 40; ++t) {
    const ProblemInstance inst = random_instance(rng, o);
    const LearningRule rule = random_rule(rng, inst);
    const Posterior alice = fit(rule, inst);
    const double r0 = solve_rd(inst, alice, 0.0).rate;
    for (const Compressor& rho : enumerate_compressors(inst.num_datasets())) {
      Vector cells = Vector::Zero(rho.num_symbols());
      for (Index s = 0; s < inst.num_datasets(); ++s) {
        cells(rho.map[static_cast<std::size_t>(s)]) += inst.datasets().marginal[s];
      }
      try {
        const SchemeReport r = compare_schemes(inst, rule, alice, std::min(entropy(cells), r0), rho);
        worst_chain = std::max(worst_chain, r.chain_rule_error);
        checked += r.inequality_checked;
        feasible += r.feasible2;
        boundary += r.boundary_holds;
      } catch (const InvariantViolation& e) {
        ++violations;
        std::fprintf(stderr, "scheme violation: %s\n", e.what());
      }
      ++runs;
    }
  }
  return {violations == 0 && worst_chain <= 1e-8,
          std::to_string(runs) + " compressor runs, max chain-rule error = " + fmt_double(worst_chain) +
              ", scheme 2 feasible on " + std::to_string(feasible) + ", scheme 1 on boundary on " +
              std::to_string(boundary) + ", inequality asserted on " + std::to_string(checked) +
              ", violations = " + std::to_string(violations)};
}

Outcome type_identity() {
  Rng rng(8);
  double worst = 0.0, worst_oracle = 0.0;
  for (int t = 0; t < 100; ++t) {
    const ProblemInstance inst = random_instance(rng);
    const Posterior alice = random_posterior(rng, inst, 0.2);
    const Index n = rng.integer(1, 30);
    const auto schedule = random_deterministic_schedule(rng, inst, n);
    const SequenceTrace tr = simulate_empirical_deterministic(inst, alice, schedule, n, t);
    const double avg = d_avg_seq(tr.alice_rows, tr.bob_rows, inst);
    worst = std::max(worst, std::abs(avg - d_sem(alice, schedule_type(schedule), inst)));
    worst_oracle = std::max(worst_oracle, std::abs(avg - sequence_distortion_oracle(tr, inst).d_avg));
  }
  return {worst <= 1e-10 && worst_oracle <= 1e-10,
          "100 schedules, max |d_avg - d_sem(type)| = " + fmt_double(worst) +
              ", max |d_avg - oracle| = " + fmt_double(worst_oracle)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  const std::vector<std::vector<std::string>> cases{
      {"rd-curve", "--epsilons", "-0.5,-0.25,0", "--with-oracle", "--plot-data"},
      {"code", "--trials", "500"},
      {"coordinate", "--n", "2:5", "--trials", "500"},
      {"example1", "--n", "2:6", "--trials", "500"},
      {"compare-schemes", "--with-oracle"},
      {"verify-bound", "--world", "random", "--instances", "3"},
      {"audit", "--instances", "3"},
  };
  const fs::path root = fs::temp_directory_path() / "semcom_acceptance";
  fs::remove_all(root);
  int files = 0;
  std::vector<std::string> bad;
  for (const auto& c : cases) {
    std::vector<fs::path> dirs;
    for (int rep = 0; rep < 2; ++rep) {
      const fs::path dir = root / (c[0] + "_" + std::to_string(rep));
      std::vector<std::string> args = c;
      args.insert(args.end(), {"--seed", "17", "--out", dir.string()});
      std::ostringstream out, err;
      if (cli::run(args, out, err) != cli::kExitOk) bad.push_back(c[0] + " (exit)");
      dirs.push_back(dir);
    }
    for (const auto& entry : fs::directory_iterator(dirs[0])) {
      ++files;
      const fs::path other = dirs[1] / entry.path().filename();
      if (!fs::exists(other) || slurp(entry.path()) != slurp(other)) bad.push_back(c[0] + "/" + entry.path().filename().string());
    }
  }
  std::string detail = std::to_string(cases.size()) + " subcommands, " + std::to_string(files) + " files compared";
  for (const auto& b : bad) detail += ", differs: " + b;
  return {bad.empty(), detail};
}

}  // namespace

int main() {
  criterion(1, "example1 closed forms", 1, example1_exact);
  criterion(2, "rate-distortion vs grid oracle", 300, rd_oracle);
  criterion(3, "KL rate identities", 10, kl_identities);
  criterion(4, "per-symbol coding bits and K=1 law", 300, coding_bits);
  criterion(5, "strong vs deterministic coordination", 120, strong_separation);
  criterion(6, "distortion-rate bound sweep", 600, bound_sweep);
  criterion(7, "scheme decomposition over all compressors", 120, scheme_decomposition);
  criterion(8, "sequence average vs schedule type", 60, type_identity);
  criterion(9, "byte-identical reruns", 600, determinism);
  std::printf("%d of 9 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
