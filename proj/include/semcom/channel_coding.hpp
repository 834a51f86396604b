#pragma once

// Channel simulation with common randomness by minimal random coding (MRC):
// encoder and decoder draw the same K candidates from the coding prior p,
// the encoder picks one with probability proportional to q(h)/p(h) and sends
// only its index, log2 K bits.

#include "semcom/learning.hpp"

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace semcom {

/// Shared random source. The stream is SplitMix64 read as a counter-based
/// generator: word k (k = 1, 2, ...) is mix64(key + k * 0x9E3779B97F4A7C15)
/// with key = mix64(seed ^ 0x6A09E667F3BCC909) and mix64 the SplitMix64
/// finalizer. Identical seeds give bit-identical streams on both sides.
class CommonRandomness {
 public:
  static constexpr std::string_view kGeneratorId = "splitmix64-counter/v1";

  explicit CommonRandomness(std::uint64_t seed);

  std::uint64_t seed() const noexcept { return seed_; }
  std::string_view generator_id() const noexcept { return kGeneratorId; }
  std::uint64_t counter() const noexcept { return counter_; }
  std::uint64_t bits_consumed() const noexcept { return 64 * counter_; }

  std::uint64_t next_u64();
  /// Uniform on [0, 1) from the top 53 bits of one word.
  double next_uniform();
  /// Inverse-CDF draw; never returns a zero-probability symbol.
  Index next_categorical(const Vector& p);

  /// Independent child stream, e.g. one per sequence position.
  CommonRandomness derive(std::uint64_t index) const;
  /// Encoder-only stream keyed by the current counter. Reading it does not
  /// advance this stream and the decoder never needs it.
  CommonRandomness private_stream() const;

 private:
  std::uint64_t seed_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

std::uint64_t mix64(std::uint64_t z);

struct CodeRecord {
  Index index = 0;
  Index n_candidates = 1;
  double index_bits = 0.0;  // log2 K, fixed-length index
  Index sample = 0;
  double target_kl = 0.0;   // D_KL(q || p), bits
  bool fallback = false;    // all importance weights vanished; index chosen uniformly
  std::string_view generator_id = CommonRandomness::kGeneratorId;
};

CodeRecord encode_mrc(const Distribution& q, const Distribution& p, CommonRandomness& cr,
                      Index n_candidates);

Index decode_mrc(Index index, const Distribution& p, CommonRandomness& cr, Index n_candidates);
/// Also checks the record's generator and candidate count against the
/// decoder's.
Index decode_mrc(const CodeRecord& record, const Distribution& p, CommonRandomness& cr,
                 Index n_candidates);

inline constexpr std::uint64_t kDefaultInducedCap = 10'000'000;

/// Exact law of encode_mrc's output. Accumulates over candidate count vectors
/// (the selection law depends on the tuple only through its counts).
/// EnumerationTooLarge when the number of count vectors exceeds `cap`; use
/// induced_distribution_estimate instead.
Distribution induced_distribution_exact(const Distribution& q, const Distribution& p,
                                        Index n_candidates, std::uint64_t cap = kDefaultInducedCap);

/// Monte Carlo estimate of the same law from `trials` encodings.
Distribution induced_distribution_estimate(const Distribution& q, const Distribution& p,
                                           Index n_candidates, long trials, std::uint64_t seed);

struct InducedTv {
  double tv = 0.0;
  bool exact = true;
};

/// TV(induced law, q): exact when enumerable, otherwise estimated.
InducedTv induced_tv(const Distribution& q, const Distribution& p, Index n_candidates,
                     long mc_trials, std::uint64_t seed, std::uint64_t cap = kDefaultInducedCap);

struct SingleShotBounds {
  double lower = 0.0;
  double upper_harsha = 0.0;  // R + 2 log2(R+1) + C, with C unknown (configurable)
  double upper_theis = 0.0;   // R + log2(R+1) + 4
};

SingleShotBounds single_shot_bounds(double kl_bits, double harsha_constant = 0.0);

enum class CodingMode { per_symbol, block };

struct CodingOptions {
  double slack = 4.0;                     // bits added to D_KL when sizing K
  Index max_candidates = Index{1} << 22;  // per_symbol cap on K
  std::uint64_t max_block_draws = 1u << 24;  // block cap on K * n
};

/// Per position: K = ceil(2^(D_KL(q_i || p) + slack)), or K = 1 when
/// q_i equals p (D_KL <= 1e-12), where MRC is exact without an index.
Index candidate_count(double kl_bits, const CodingOptions& opts);

struct SequenceCode {
  std::vector<CodeRecord> records;  // one per position
  double total_bits = 0.0;
  std::vector<Index> reconstructed;
  std::uint64_t cr_bits = 0;        // common-randomness bits read
};

/// Code datasets[i] -> hypothesis with Q = posterior.row(datasets[i]) against
/// `prior`. per_symbol codes each position from child stream cr.derive(i);
/// block draws whole candidate tuples from prior^n with one index for the
/// sequence (each record then carries that index and log2 K / n bits).
SequenceCode code_sequence(const Posterior& posterior, const Distribution& prior,
                           std::span<const Index> datasets, const CommonRandomness& cr,
                           CodingMode mode, const CodingOptions& opts = {});

}  // namespace semcom
