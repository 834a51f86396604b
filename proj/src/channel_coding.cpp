#include "semcom/channel_coding.hpp"

#include <cmath>
#include <limits>

namespace semcom {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;
constexpr std::uint64_t kKeySalt = 0x6A09E667F3BCC909ull;
constexpr std::uint64_t kChildSalt = 0xBB67AE8584CAA73Bull;
constexpr std::uint64_t kPrivateSalt = 0x3C6EF372FE94F82Bull;
constexpr double kExactMatchKl = 1e-12;

void require_coding_pair(const Distribution& q, const Distribution& p) {
  if (q.size() != p.size()) throw ValidationError("MRC: q and p over different alphabets");
  for (Index h = 0; h < q.size(); ++h) {
    if (q[h] > 0.0 && p[h] <= 0.0) {
      throw SupportError("MRC: q puts mass on symbol " + std::to_string(h) + " outside the prior's support");
    }
  }
}

std::vector<Index> draw_candidates(const Distribution& p, CommonRandomness& cr, Index k) {
  std::vector<Index> out(static_cast<std::size_t>(k));
  for (auto& h : out) h = cr.next_categorical(p.probs());
  return out;
}

}  // namespace

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

CommonRandomness::CommonRandomness(std::uint64_t seed) : seed_(seed), key_(mix64(seed ^ kKeySalt)) {}

std::uint64_t CommonRandomness::next_u64() {
  ++counter_;
  return mix64(key_ + counter_ * kGolden);
}

double CommonRandomness::next_uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

Index CommonRandomness::next_categorical(const Vector& p) {
  const double u = next_uniform();
  double cum = 0.0;
  Index last = -1;
  for (Index i = 0; i < p.size(); ++i) {
    if (p(i) <= 0.0) continue;
    cum += p(i);
    last = i;
    if (u < cum) return i;
  }
  if (last < 0) throw ValidationError("categorical draw from an all-zero vector");
  return last;
}

CommonRandomness CommonRandomness::derive(std::uint64_t index) const {
  return CommonRandomness(mix64(key_ ^ mix64(index + kChildSalt)));
}

CommonRandomness CommonRandomness::private_stream() const {
  return CommonRandomness(mix64(key_ + kPrivateSalt) ^ mix64(counter_ ^ kPrivateSalt));
}

// ---------------------------------------------------------------------------

CodeRecord encode_mrc(const Distribution& q, const Distribution& p, CommonRandomness& cr,
                      Index n_candidates) {
  require_coding_pair(q, p);
  if (n_candidates < 1) throw ValidationError("MRC: need at least one candidate");
  const auto candidates = draw_candidates(p, cr, n_candidates);
  std::vector<double> weights(candidates.size());
  double total = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    weights[i] = q[candidates[i]] / p[candidates[i]];
    total += weights[i];
  }
  CommonRandomness local = cr.private_stream();
  const double u = local.next_uniform();

  CodeRecord rec;
  rec.n_candidates = n_candidates;
  rec.index_bits = std::log2(static_cast<double>(n_candidates));
  rec.target_kl = kl_divergence(q, p);
  if (total <= 0.0) {
    rec.fallback = true;
    rec.index = std::min<Index>(static_cast<Index>(u * static_cast<double>(n_candidates)), n_candidates - 1);
  } else {
    const double threshold = u * total;
    double cum = 0.0;
    rec.index = -1;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (weights[i] <= 0.0) continue;
      cum += weights[i];
      rec.index = static_cast<Index>(i);
      if (threshold < cum) break;
    }
  }
  rec.sample = candidates[static_cast<std::size_t>(rec.index)];
  return rec;
}

Index decode_mrc(Index index, const Distribution& p, CommonRandomness& cr, Index n_candidates) {
  if (n_candidates < 1) throw ValidationError("MRC: need at least one candidate");
  if (index < 0 || index >= n_candidates) {
    throw ValidationError("MRC: index " + std::to_string(index) + " out of range for K = " +
                          std::to_string(n_candidates));
  }
  const auto candidates = draw_candidates(p, cr, n_candidates);
  return candidates[static_cast<std::size_t>(index)];
}

Index decode_mrc(const CodeRecord& record, const Distribution& p, CommonRandomness& cr,
                 Index n_candidates) {
  if (record.generator_id != cr.generator_id()) {
    throw ValidationError("MRC: record was coded with generator '" + std::string(record.generator_id) +
                          "', decoder uses '" + std::string(cr.generator_id()) + "'");
  }
  if (record.n_candidates != n_candidates) {
    throw ValidationError("MRC: encoder used K = " + std::to_string(record.n_candidates) +
                          ", decoder K = " + std::to_string(n_candidates));
  }
  return decode_mrc(record.index, p, cr, n_candidates);
}

// ---------------------------------------------------------------------------

namespace {

// Number of count vectors (n_1..n_H) summing to K, saturating at cap + 1.
std::uint64_t composition_count(Index k, Index h, std::uint64_t cap) {
  // C(K + H - 1, H - 1) computed incrementally; each prefix is an integer.
  std::uint64_t c = 1;
  for (Index i = 1; i < h; ++i) {
    const auto num = static_cast<std::uint64_t>(k + i);
    if (c > (cap + 1) / num + 1) return cap + 1;
    c = c * num / static_cast<std::uint64_t>(i);
    if (c > cap) return cap + 1;
  }
  return c;
}

}  // namespace

Distribution induced_distribution_exact(const Distribution& q, const Distribution& p,
                                        Index n_candidates, std::uint64_t cap) {
  require_coding_pair(q, p);
  if (n_candidates < 1) throw ValidationError("MRC: need at least one candidate");
  const Index nh = p.size();
  const Index k = n_candidates;
  if (composition_count(k, nh, cap) > cap) {
    throw EnumerationTooLarge("induced_distribution_exact: too many candidate count vectors for K = " +
                              std::to_string(k) + "; use induced_distribution_estimate");
  }
  Vector w(nh);
  Vector log_p(nh);
  for (Index h = 0; h < nh; ++h) {
    w(h) = p[h] > 0.0 ? q[h] / p[h] : 0.0;
    log_p(h) = p[h] > 0.0 ? std::log(p[h]) : -std::numeric_limits<double>::infinity();
  }
  const double log_k_fact = std::lgamma(static_cast<double>(k) + 1.0);

  Vector out = Vector::Zero(nh);
  std::vector<Index> counts(static_cast<std::size_t>(nh), 0);
  // Depth-first over count vectors.
  auto visit = [&](auto&& self, Index h, Index remaining) -> void {
    if (h == nh - 1) {
      counts[static_cast<std::size_t>(h)] = remaining;
      double log_prob = log_k_fact;
      double weight_sum = 0.0;
      for (Index g = 0; g < nh; ++g) {
        const Index n = counts[static_cast<std::size_t>(g)];
        if (n == 0) continue;
        if (p[g] <= 0.0) return;  // impossible tuple
        log_prob += static_cast<double>(n) * log_p(g) - std::lgamma(static_cast<double>(n) + 1.0);
        weight_sum += static_cast<double>(n) * w(g);
      }
      const double prob = std::exp(log_prob);
      for (Index g = 0; g < nh; ++g) {
        const auto n = static_cast<double>(counts[static_cast<std::size_t>(g)]);
        if (n == 0.0) continue;
        out(g) += weight_sum > 0.0 ? prob * n * w(g) / weight_sum : prob * n / static_cast<double>(k);
      }
      return;
    }
    for (Index n = 0; n <= remaining; ++n) {
      counts[static_cast<std::size_t>(h)] = n;
      self(self, h + 1, remaining - n);
    }
  };
  visit(visit, 0, k);
  return Distribution(out);
}

Distribution induced_distribution_estimate(const Distribution& q, const Distribution& p,
                                           Index n_candidates, long trials, std::uint64_t seed) {
  if (trials < 1) throw ValidationError("induced_distribution_estimate: need at least one trial");
  const CommonRandomness root(seed);
  Vector counts = Vector::Zero(p.size());
  for (long t = 0; t < trials; ++t) {
    CommonRandomness cr = root.derive(static_cast<std::uint64_t>(t));
    counts(encode_mrc(q, p, cr, n_candidates).sample) += 1.0;
  }
  return Distribution(counts / static_cast<double>(trials));
}

InducedTv induced_tv(const Distribution& q, const Distribution& p, Index n_candidates, long mc_trials,
                     std::uint64_t seed, std::uint64_t cap) {
  try {
    return {total_variation(induced_distribution_exact(q, p, n_candidates, cap), q), true};
  } catch (const EnumerationTooLarge&) {
    return {total_variation(induced_distribution_estimate(q, p, n_candidates, mc_trials, seed), q), false};
  }
}

SingleShotBounds single_shot_bounds(double kl_bits, double harsha_constant) {
  if (!(kl_bits >= 0.0)) throw ValidationError("single_shot_bounds: rate must be >= 0");
  const double lg = std::log2(kl_bits + 1.0);
  return {kl_bits, kl_bits + 2.0 * lg + harsha_constant, kl_bits + lg + 4.0};
}

Index candidate_count(double kl_bits, const CodingOptions& opts) {
  if (kl_bits <= kExactMatchKl) return 1;
  const double k = std::ceil(std::exp2(kl_bits + opts.slack));
  if (!(k <= static_cast<double>(opts.max_candidates))) {
    throw EnumerationTooLarge("per-symbol K = 2^(" + std::to_string(kl_bits) + " + " +
                              std::to_string(opts.slack) + ") exceeds the candidate cap " +
                              std::to_string(opts.max_candidates));
  }
  return static_cast<Index>(k);
}

// ---------------------------------------------------------------------------

namespace {

SequenceCode code_per_symbol(const Posterior& posterior, const Distribution& prior,
                             std::span<const Index> datasets, const CommonRandomness& cr,
                             const CodingOptions& opts) {
  SequenceCode out;
  for (std::size_t i = 0; i < datasets.size(); ++i) {
    const Distribution q = posterior.row(datasets[i]);
    const Index k = candidate_count(kl_divergence(q, prior), opts);
    CommonRandomness enc = cr.derive(i);
    CommonRandomness dec = cr.derive(i);
    CodeRecord rec = encode_mrc(q, prior, enc, k);
    const Index decoded = decode_mrc(rec, prior, dec, k);
    if (decoded != rec.sample) {
      throw InvariantViolation("per-symbol MRC: decoder disagrees with encoder at position " + std::to_string(i));
    }
    out.total_bits += rec.index_bits;
    out.cr_bits += dec.bits_consumed();
    out.reconstructed.push_back(decoded);
    out.records.push_back(rec);
  }
  return out;
}

SequenceCode code_block(const Posterior& posterior, const Distribution& prior,
                        std::span<const Index> datasets, const CommonRandomness& cr,
                        const CodingOptions& opts) {
  const auto n = static_cast<Index>(datasets.size());
  SequenceCode out;
  if (n == 0) return out;
  std::vector<Distribution> qs;
  double total_kl = 0.0;
  for (Index ds : datasets) {
    qs.push_back(posterior.row(ds));
    require_coding_pair(qs.back(), prior);
    total_kl += kl_divergence(qs.back(), prior);
  }
  const Index k = candidate_count(total_kl, opts);
  if (static_cast<std::uint64_t>(k) * static_cast<std::uint64_t>(n) > opts.max_block_draws) {
    throw EnumerationTooLarge("block MRC: K * n = " + std::to_string(k) + " * " + std::to_string(n) +
                              " exceeds the draw cap " + std::to_string(opts.max_block_draws));
  }
  auto draw = [&](CommonRandomness& stream) {
    std::vector<Index> tuples(static_cast<std::size_t>(k * n));
    for (auto& h : tuples) h = stream.next_categorical(prior.probs());
    return tuples;
  };
  CommonRandomness enc = cr;
  const auto tuples = draw(enc);

  std::vector<double> log_w(static_cast<std::size_t>(k), 0.0);
  double best = -std::numeric_limits<double>::infinity();
  for (Index j = 0; j < k; ++j) {
    double lw = 0.0;
    for (Index i = 0; i < n; ++i) {
      const Index h = tuples[static_cast<std::size_t>(j * n + i)];
      const double qh = qs[static_cast<std::size_t>(i)][h];
      if (qh <= 0.0) {
        lw = -std::numeric_limits<double>::infinity();
        break;
      }
      lw += std::log(qh / prior[h]);
    }
    log_w[static_cast<std::size_t>(j)] = lw;
    best = std::max(best, lw);
  }
  CommonRandomness local = enc.private_stream();
  const double u = local.next_uniform();
  Index chosen = 0;
  bool fallback = false;
  if (std::isinf(best)) {
    fallback = true;
    chosen = std::min<Index>(static_cast<Index>(u * static_cast<double>(k)), k - 1);
  } else {
    double total = 0.0;
    for (double lw : log_w) total += std::exp(lw - best);
    const double threshold = u * total;
    double cum = 0.0;
    for (Index j = 0; j < k; ++j) {
      const double wj = std::exp(log_w[static_cast<std::size_t>(j)] - best);
      if (wj <= 0.0) continue;
      cum += wj;
      chosen = j;
      if (threshold < cum) break;
    }
  }

  CommonRandomness dec = cr;
  const auto replay = draw(dec);
  const double bits = std::log2(static_cast<double>(k));
  out.total_bits = bits;
  out.cr_bits = dec.bits_consumed();
  for (Index i = 0; i < n; ++i) {
    const Index h = replay[static_cast<std::size_t>(chosen * n + i)];
    if (h != tuples[static_cast<std::size_t>(chosen * n + i)]) {
      throw InvariantViolation("block MRC: decoder disagrees with encoder");
    }
    CodeRecord rec;
    rec.index = chosen;
    rec.n_candidates = k;
    rec.index_bits = bits / static_cast<double>(n);
    rec.sample = h;
    rec.target_kl = kl_divergence(qs[static_cast<std::size_t>(i)], prior);
    rec.fallback = fallback;
    out.records.push_back(rec);
    out.reconstructed.push_back(h);
  }
  return out;
}

}  // namespace

SequenceCode code_sequence(const Posterior& posterior, const Distribution& prior,
                           std::span<const Index> datasets, const CommonRandomness& cr, CodingMode mode,
                           const CodingOptions& opts) {
  if (prior.size() != posterior.num_hypotheses()) throw ValidationError("code_sequence: prior over the wrong alphabet");
  for (Index ds : datasets) {
    if (ds < 0 || ds >= posterior.num_datasets()) throw ValidationError("code_sequence: dataset index out of range");
  }
  return mode == CodingMode::per_symbol ? code_per_symbol(posterior, prior, datasets, cr, opts)
                                        : code_block(posterior, prior, datasets, cr, opts);
}

}  // namespace semcom
