#include "semcom/oracle.hpp"

#include <array>
#include <cmath>
#include <limits>

namespace semcom {

namespace {

constexpr int kMaxHypotheses = 5;
constexpr double kFeasibilitySlack = 1e-12;
using Acc = std::array<double, kMaxHypotheses>;

// P_S and D[s][h] = sum_c P(c|s) sum_z p_c(z) l[c](h, z) from the raw tensors.
struct RawModel {
  Vector ps;
  Matrix d;
};

RawModel raw_model(const ProblemInstance& instance) {
  const auto& cs = instance.concepts();
  const auto& loss = instance.hypotheses().loss;
  const auto& tuples = instance.datasets().tuples;
  const Index nc = instance.num_concepts();
  const Index n = tuples.rows();
  const Index nh = instance.num_hypotheses();

  Matrix joint(n, nc);  // P(s, c)
  for (Index s = 0; s < n; ++s) {
    for (Index c = 0; c < nc; ++c) {
      double p = cs.prior[c];
      for (Index j = 0; j < tuples.cols(); ++j) p *= cs.data_law(c, tuples(s, j));
      joint(s, c) = p;
    }
  }
  RawModel out;
  out.ps = Vector::Zero(n);
  out.d = Matrix::Zero(n, nh);
  for (Index s = 0; s < n; ++s) {
    double ps = 0.0;
    for (Index c = 0; c < nc; ++c) ps += joint(s, c);
    out.ps(s) = ps;
    if (ps <= 0.0) continue;
    for (Index c = 0; c < nc; ++c) {
      const double w = joint(s, c) / ps;
      for (Index h = 0; h < nh; ++h) {
        double l = 0.0;
        for (Index z = 0; z < cs.data_law.cols(); ++z) l += cs.data_law(c, z) * loss[c](h, z);
        out.d(s, h) += w * l;
      }
    }
  }
  return out;
}

double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

// One dataset's conditional on the lattice: `parts` counts summing to k.
// part_hyp[i] is the hypothesis of part i, or -1 for the line-searched pair.
struct Block {
  Index s = 0;
  double weight = 0.0;  // P_S(s)
  std::vector<int> part_hyp;
  std::vector<int> comps;  // flattened compositions
  int parts() const { return static_cast<int>(part_hyp.size()); }
  std::size_t count() const { return comps.size() / part_hyp.size(); }
};

void compositions(int k, int parts, const std::vector<int>& lo, const std::vector<int>& hi, std::vector<int>& out) {
  std::vector<int> cur(static_cast<std::size_t>(parts), 0);
  auto rec = [&](auto&& self, int i, int remaining) -> void {
    if (i == parts - 1) {
      cur[static_cast<std::size_t>(i)] = remaining;
      out.insert(out.end(), cur.begin(), cur.end());
      return;
    }
    const int top = std::min(hi[static_cast<std::size_t>(i)], remaining);
    for (int v = std::max(0, lo[static_cast<std::size_t>(i)]); v <= top; ++v) {
      cur[static_cast<std::size_t>(i)] = v;
      self(self, i + 1, remaining - v);
    }
  };
  rec(rec, 0, k);
}

double composition_count(int k, int parts) {
  double c = 1.0;
  for (int i = 1; i < parts; ++i) c = c * (k + i) / i;
  return c;
}

class GridSearch {
 public:
  GridSearch(const RawModel& raw, std::vector<Index> eff, Index star, Index a, Index b, double cap,
             OracleObjective objective, Vector log_prior)
      : raw_(raw), eff_(std::move(eff)), star_(star), a_(a), b_(b), cap_(cap), objective_(objective),
        log_prior_(std::move(log_prior)), nh_(raw.d.cols()) {
    for (Index s : eff_) {
      Block blk;
      blk.s = s;
      blk.weight = raw.ps(s);
      for (Index h = 0; h < nh_; ++h) {
        if (s == star_ && (h == a_ || h == b_)) continue;
        blk.part_hyp.push_back(static_cast<int>(h));
      }
      if (s == star_) blk.part_hyp.push_back(-1);
      blocks_.push_back(std::move(blk));
    }
  }

  int free_dims() const {
    int d = 0;
    for (const auto& blk : blocks_) d += blk.parts() - 1;
    return d;
  }

  double full_count(int k) const {
    double c = 1.0;
    for (const auto& blk : blocks_) c *= composition_count(k, blk.parts());
    return c;
  }

  // Exhaustive pass over every lattice point at resolution k.
  void exhaustive(int k) {
    for (auto& blk : blocks_) {
      blk.comps.clear();
      const std::vector<int> lo(static_cast<std::size_t>(blk.parts()), 0);
      const std::vector<int> hi(static_cast<std::size_t>(blk.parts()), k);
      compositions(k, blk.parts(), lo, hi, blk.comps);
    }
    run(k);
  }

  // Exhaustive pass over a box of half-width r around the incumbent at resolution k.
  // Returns true when the incumbent ends on an edge of the box that is not also
  // an edge of the simplex.
  bool box(int k, int r) {
    std::vector<std::vector<int>> centre;
    for (std::size_t j = 0; j < blocks_.size(); ++j) {
      auto& blk = blocks_[j];
      std::vector<int> lo(static_cast<std::size_t>(blk.parts())), hi(lo.size()), c(lo.size());
      for (int i = 0; i + 1 < blk.parts(); ++i) {
        c[static_cast<std::size_t>(i)] = static_cast<int>(std::lround(best_q_[j][static_cast<std::size_t>(i)] * k));
        lo[static_cast<std::size_t>(i)] = c[static_cast<std::size_t>(i)] - r;
        hi[static_cast<std::size_t>(i)] = c[static_cast<std::size_t>(i)] + r;
      }
      centre.push_back(c);
      blk.comps.clear();
      compositions(k, blk.parts(), lo, hi, blk.comps);
    }
    run(k);
    for (std::size_t j = 0; j < blocks_.size(); ++j) {
      for (int i = 0; i + 1 < blocks_[j].parts(); ++i) {
        const int v = static_cast<int>(std::lround(best_q_[j][static_cast<std::size_t>(i)] * k));
        const int c = centre[j][static_cast<std::size_t>(i)];
        if ((v == c - r && v > 0) || (v == c + r && v < k)) return true;
      }
    }
    return false;
  }

  bool found() const { return std::isfinite(best_f_); }
  double best_value() const { return best_f_; }
  std::uint64_t states() const { return states_; }

  Matrix best_conditional() const {
    const Index n = raw_.ps.size();
    Matrix q = Matrix::Zero(n, nh_);
    for (std::size_t j = 0; j < blocks_.size(); ++j) {
      const auto& blk = blocks_[j];
      for (int i = 0; i < blk.parts(); ++i) {
        const int h = blk.part_hyp[static_cast<std::size_t>(i)];
        const double v = best_q_[j][static_cast<std::size_t>(i)];
        if (h >= 0) {
          q(blk.s, h) = v;
        } else {
          q(blk.s, a_) = best_t_;
          q(blk.s, b_) = std::max(0.0, v - best_t_);
        }
      }
    }
    Vector marg = Vector::Zero(nh_);
    for (Index s = 0; s < n; ++s) marg += raw_.ps(s) * q.row(s).transpose();
    for (Index s = 0; s < n; ++s) {
      if (raw_.ps(s) <= 0.0) q.row(s) = marg.transpose();
    }
    return q;
  }

 private:
  struct Partial {
    double obj = 0.0;
    double dist = 0.0;
    Acc marg{};
    double pair_mass = 0.0;
  };

  void run(int k) {
    k_ = k;
    inv_k_ = 1.0 / k;
    table_.assign(static_cast<std::size_t>(k) + 1, 0.0);
    for (int i = 0; i <= k; ++i) table_[static_cast<std::size_t>(i)] = xlogx(i * inv_k_);
    choice_.assign(blocks_.size(), 0);
    descend(0, Partial{});
  }

  void descend(std::size_t j, const Partial& acc) {
    if (j == blocks_.size()) {
      leaf(acc);
      return;
    }
    const Block& blk = blocks_[j];
    const double w = blk.weight;
    const auto np = static_cast<std::size_t>(blk.parts());
    for (std::size_t c = 0; c < blk.count(); ++c) {
      const int* counts = blk.comps.data() + c * np;
      Partial next = acc;
      for (std::size_t i = 0; i < np; ++i) {
        const int h = blk.part_hyp[i];
        const double q = counts[i] * inv_k_;
        if (h < 0) {
          next.pair_mass = q;
          continue;
        }
        double term = table_[static_cast<std::size_t>(counts[i])];
        if (objective_ == OracleObjective::kl_to_prior) term -= q * log_prior_(h);
        next.obj += w * term;
        next.marg[static_cast<std::size_t>(h)] += w * q;
        next.dist += w * q * raw_.d(blk.s, h);
      }
      choice_[j] = c;
      descend(j + 1, next);
    }
  }

  void leaf(const Partial& acc) {
    ++states_;
    const double ws = raw_.ps(star_);
    const double m = acc.pair_mass;
    const double da = raw_.d(star_, a_), db = raw_.d(star_, b_);
    // Constraint: acc.dist + ws (da t + db (m - t)) <= cap.
    const double coef = ws * (da - db);
    const double rhs = cap_ - acc.dist - ws * db * m;
    double lo = 0.0, hi = m;
    if (coef > 0.0) {
      hi = std::min(hi, rhs / coef);
    } else if (coef < 0.0) {
      lo = std::max(lo, rhs / coef);
    } else if (rhs < 0.0) {
      return;
    }
    if (lo > hi) return;

    double f = acc.obj;
    double t = 0.0;
    if (objective_ == OracleObjective::mutual_information) {
      for (Index h = 0; h < nh_; ++h) {
        if (h != a_ && h != b_) f -= xlogx(acc.marg[static_cast<std::size_t>(h)]);
      }
      const double ma = acc.marg[static_cast<std::size_t>(a_)];
      const double mb = acc.marg[static_cast<std::size_t>(b_)];
      // d/dt [ws (t ln t + (m-t) ln(m-t)) - (A + ws t) ln(A + ws t) - (B + ws(m-t)) ln(...)]
      // vanishes at t = m A / (A + B).
      t = ma + mb > 0.0 ? m * ma / (ma + mb) : 0.5 * m;
      t = std::clamp(t, lo, hi);
      f += ws * (xlogx(t) + xlogx(m - t)) - xlogx(ma + ws * t) - xlogx(mb + ws * (m - t));
    } else {
      const double pa = std::exp(log_prior_(a_)), pb = std::exp(log_prior_(b_));
      t = std::clamp(m * pa / (pa + pb), lo, hi);
      const double u = std::max(0.0, m - t);
      f += ws * (xlogx(t) - t * log_prior_(a_) + xlogx(u) - u * log_prior_(b_));
    }
    if (f < best_f_) {
      best_f_ = f;
      best_t_ = t;
      best_q_.resize(blocks_.size());
      for (std::size_t j = 0; j < blocks_.size(); ++j) {
        const auto np = static_cast<std::size_t>(blocks_[j].parts());
        best_q_[j].resize(np);
        const int* counts = blocks_[j].comps.data() + choice_[j] * np;
        for (std::size_t i = 0; i < np; ++i) best_q_[j][i] = counts[i] * inv_k_;
      }
    }
  }

  const RawModel& raw_;
  std::vector<Index> eff_;
  Index star_, a_, b_;
  double cap_;
  OracleObjective objective_;
  Vector log_prior_;
  Index nh_;
  std::vector<Block> blocks_;

  int k_ = 1;
  double inv_k_ = 1.0;
  std::vector<double> table_;
  std::vector<std::size_t> choice_;
  std::uint64_t states_ = 0;
  double best_f_ = std::numeric_limits<double>::infinity();
  double best_t_ = 0.0;
  std::vector<std::vector<double>> best_q_;
};

}  // namespace

GridOracleResult rd_grid_oracle(const ProblemInstance& instance, const Posterior& alice, double epsilon,
                                const OracleBudget& budget, OracleObjective objective,
                                const std::optional<Distribution>& prior) {
  if (budget.max_states < 1 || !(budget.grid_step > 0.0 && budget.grid_step <= 1.0)) {
    throw ValidationError("oracle budget: max_states must be >= 1 and grid_step in (0, 1]");
  }
  const Index nh = instance.num_hypotheses();
  const Index n = instance.num_datasets();
  if (alice.num_datasets() != n || alice.num_hypotheses() != nh) {
    throw ValidationError("rd_grid_oracle: alice is not over the instance's spaces");
  }
  Vector log_prior = Vector::Zero(nh);
  if (objective == OracleObjective::kl_to_prior) {
    if (!prior || prior->size() != nh) throw ValidationError("rd_grid_oracle: the KL objective needs a prior over H");
    for (Index h = 0; h < nh; ++h) {
      if ((*prior)[h] <= 0.0) throw ValidationError("rd_grid_oracle: the prior must have full support");
      log_prior(h) = std::log((*prior)[h]);
    }
  }

  const RawModel raw = raw_model(instance);
  std::vector<Index> eff;
  for (Index s = 0; s < n; ++s) {
    if (raw.ps(s) > 0.0) eff.push_back(s);
  }
  const auto dims = static_cast<Index>(eff.size()) * (nh - 1);
  if (dims > 4 || nh > kMaxHypotheses) {
    throw EnumerationTooLarge("rd_grid_oracle: " + std::to_string(eff.size()) + " datasets x " +
                              std::to_string(nh - 1) + " free coordinates exceeds 4 grid dimensions");
  }

  double baseline = 0.0, floor = 0.0;
  for (Index s : eff) {
    for (Index h = 0; h < nh; ++h) baseline += raw.ps(s) * alice.rows()(s, h) * raw.d(s, h);
    floor += raw.ps(s) * raw.d.row(s).minCoeff();
  }
  const double cap = baseline + epsilon;
  if (floor > cap + kFeasibilitySlack) {
    throw ValidationError("rd_grid_oracle: epsilon " + std::to_string(epsilon) + " is below the feasible minimum " +
                          std::to_string(floor - baseline));
  }

  GridOracleResult out;
  if (nh == 1) {
    out.q = Matrix::Ones(n, 1);
    return out;
  }

  // Line-search the pair with the steepest effect on the constraint.
  Index star = eff.front(), a = 0, b = 1;
  double steep = -1.0;
  for (Index s : eff) {
    for (Index i = 0; i < nh; ++i) {
      for (Index j = i + 1; j < nh; ++j) {
        const double v = raw.ps(s) * std::abs(raw.d(s, i) - raw.d(s, j));
        if (v > steep) {
          steep = v;
          star = s;
          a = i;
          b = j;
        }
      }
    }
  }

  GridSearch search(raw, eff, star, a, b, cap + kFeasibilitySlack, objective, log_prior);
  const int k_final = static_cast<int>(std::lround(1.0 / budget.grid_step));
  const auto max_states = static_cast<double>(budget.max_states);
  if (search.full_count(k_final) <= max_states) {
    search.exhaustive(k_final);
  } else {
    out.exhaustive = false;
    int k0 = 1;
    for (int lo = 1, hi = k_final; lo <= hi;) {
      const int mid = lo + (hi - lo) / 2;
      if (search.full_count(mid) <= max_states) {
        k0 = mid;
        lo = mid + 1;
      } else {
        hi = mid - 1;
      }
    }
    search.exhaustive(k0);
    if (!search.found()) throw ValidationError("rd_grid_oracle: no feasible grid point");
    const int d = search.free_dims();
    int r = 1;
    while (std::pow(2.0 * (r + 1) + 1.0, d) <= max_states / 4 && r < k_final) ++r;
    for (int moves = 0; moves < 1000 && search.box(k_final, r); ++moves) {
    }
  }
  if (!search.found()) throw ValidationError("rd_grid_oracle: no feasible grid point");
  out.states = search.states();
  out.q = search.best_conditional();
  out.rate = search.best_value() / std::numbers::ln2;
  if (objective == OracleObjective::mutual_information || out.rate < 0.0) out.rate = std::max(0.0, out.rate);
  return out;
}

// ---------------------------------------------------------------------------

Distribution mrc_enumeration_oracle(const Distribution& q, const Distribution& p, Index n_candidates,
                                    std::uint64_t max_states) {
  if (q.size() != p.size()) throw ValidationError("mrc_enumeration_oracle: alphabets differ");
  if (n_candidates < 1) throw ValidationError("mrc_enumeration_oracle: need K >= 1");
  const Index nh = p.size();
  if (std::pow(static_cast<double>(nh), static_cast<double>(n_candidates)) > static_cast<double>(max_states)) {
    throw EnumerationTooLarge("mrc_enumeration_oracle: |H|^K exceeds the budget");
  }
  Vector out = Vector::Zero(nh);
  std::vector<Index> tuple(static_cast<std::size_t>(n_candidates));
  auto rec = [&](auto&& self, std::size_t i, double prob) -> void {
    if (i == tuple.size()) {
      double total = 0.0;
      for (Index h : tuple) total += q[h] / p[h];
      for (Index h : tuple) {
        out(h) += total > 0.0 ? prob * (q[h] / p[h]) / total : prob / static_cast<double>(tuple.size());
      }
      return;
    }
    for (Index h = 0; h < nh; ++h) {
      if (p[h] <= 0.0) continue;
      tuple[i] = h;
      self(self, i + 1, prob * p[h]);
    }
  };
  rec(rec, 0, 1.0);
  return Distribution(out);
}

SequenceDistortion sequence_distortion_oracle(const SequenceTrace& trace, const ProblemInstance& instance) {
  if (trace.alice_rows.size() != trace.bob_rows.size() || trace.alice_rows.empty()) {
    throw ValidationError("sequence_distortion_oracle: trace needs equal, non-empty alice and bob rows");
  }
  const auto& cs = instance.concepts();
  const auto& loss = instance.hypotheses().loss;
  const auto& tuples = instance.datasets().tuples;
  const Index nc = instance.num_concepts();
  const Index nz = instance.num_samples();
  const Index nh = instance.num_hypotheses();

  SequenceDistortion out;
  out.d_max = -std::numeric_limits<double>::infinity();
  double total = 0.0;
  for (std::size_t i = 0; i < trace.bob_rows.size(); ++i) {
    const Matrix& alice = trace.alice_rows[i].rows();
    const Matrix& bob = trace.bob_rows[i].rows();
    double d = 0.0;
    for (Index c = 0; c < nc; ++c) {
      for (Index s = 0; s < tuples.rows(); ++s) {
        double p = cs.prior[c];
        for (Index j = 0; j < tuples.cols(); ++j) p *= cs.data_law(c, tuples(s, j));
        if (p == 0.0) continue;
        for (Index h = 0; h < nh; ++h) {
          const double diff = bob(s, h) - alice(s, h);
          if (diff == 0.0) continue;
          for (Index z = 0; z < nz; ++z) d += p * diff * cs.data_law(c, z) * loss[c](h, z);
        }
      }
    }
    total += d;
    out.d_max = std::max(out.d_max, d);
  }
  out.d_avg = total / static_cast<double>(trace.bob_rows.size());
  return out;
}

}  // namespace semcom
