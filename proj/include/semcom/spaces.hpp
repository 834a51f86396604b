#pragma once

// Finite probability spaces: distributions over finite alphabets, the
// concept / dataset / hypothesis spaces of one experiment world, and the
// exact discrete information measures everything else is built on.
//
// All logarithms are base 2. 0 log 0 and 0 log(0/0) are 0; x log(x/0) for
// x > 0 raises SupportError rather than returning +inf.

#include "semcom/errors.hpp"
#include "semcom/types.hpp"

#include <json.hpp>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace semcom {

inline constexpr double kNormalizationTolerance = 1e-12;
inline constexpr double kRenormalizeLimit = 1e-9;
inline constexpr std::uint64_t kDefaultEnumerationCap = 1'000'000;

/// Probability vector over a finite alphabet.
///
/// Construction validates: entries must be non-negative and sum to one. A sum
/// that drifts from one by at most 1e-9 is renormalized; anything larger is a
/// modelling bug and throws ValidationError.
template <typename Scalar>
class BasicDistribution {
 public:
  using VectorType = VectorX<Scalar>;

  explicit BasicDistribution(VectorType probs) : probs_(std::move(probs)) {
    if (probs_.size() == 0) throw ValidationError("distribution over an empty alphabet");
    for (Index i = 0; i < probs_.size(); ++i) {
      Scalar& x = probs_(i);
      // float dust from subtraction
      if (x < Scalar(0) && x >= Scalar(-1e-15)) x = Scalar(0);
      if (!(x >= Scalar(0))) {
        throw ValidationError("distribution entry " + std::to_string(i) + " is negative or NaN");
      }
    }
    const Scalar total = probs_.sum();
    const Scalar drift = std::abs(total - Scalar(1));
    if (drift > Scalar(kRenormalizeLimit)) {
      throw ValidationError("distribution sums to " + std::to_string(double(total)));
    }
    if (drift > Scalar(0)) probs_ /= total;
  }

  static BasicDistribution uniform(Index n) {
    return BasicDistribution(VectorType::Constant(n, Scalar(1) / Scalar(n)));
  }

  static BasicDistribution point_mass(Index n, Index k) {
    VectorType v = VectorType::Zero(n);
    v(k) = Scalar(1);
    return BasicDistribution(std::move(v));
  }

  const VectorType& probs() const noexcept { return probs_; }
  Index size() const noexcept { return probs_.size(); }
  Scalar operator[](Index i) const { return probs_(i); }

 private:
  VectorType probs_;
};

using Distribution = BasicDistribution<double>;

// ---------------------------------------------------------------------------
// Information measures. Templated on Eigen expressions so they accept
// vectors, rows, columns and maps alike.

template <typename Derived>
typename Derived::Scalar entropy(const Eigen::MatrixBase<Derived>& p) {
  using Scalar = typename Derived::Scalar;
  Scalar h(0);
  for (Index i = 0; i < p.size(); ++i) {
    const Scalar x = p.derived().coeff(i);
    if (x > Scalar(0)) h -= x * std::log2(x);
  }
  return h < Scalar(0) ? Scalar(0) : h;
}

template <typename DerivedP, typename DerivedQ>
typename DerivedP::Scalar total_variation(const Eigen::MatrixBase<DerivedP>& p,
                                          const Eigen::MatrixBase<DerivedQ>& q) {
  if (p.size() != q.size()) throw ValidationError("total_variation: alphabet mismatch");
  return (p.derived().array() - q.derived().array()).abs().sum() / 2;
}

/// D_KL(p || q) in bits. Requires support(p) within support(q).
template <typename DerivedP, typename DerivedQ>
typename DerivedP::Scalar kl_divergence(const Eigen::MatrixBase<DerivedP>& p,
                                        const Eigen::MatrixBase<DerivedQ>& q) {
  using Scalar = typename DerivedP::Scalar;
  if (p.size() != q.size()) throw ValidationError("kl_divergence: alphabet mismatch");
  Scalar d(0);
  for (Index i = 0; i < p.size(); ++i) {
    const Scalar pi = p.derived().coeff(i);
    if (pi <= Scalar(0)) continue;
    const Scalar qi = q.derived().coeff(i);
    if (qi <= Scalar(0)) {
      throw SupportError("kl_divergence: infinite divergence, p(" + std::to_string(i) +
                         ") > 0 where q vanishes");
    }
    d += pi * std::log2(pi / qi);
  }
  // Per-term rounding can leave -1e-17 for p == q.
  return d < Scalar(0) ? Scalar(0) : d;
}

/// I(S;H) in bits from a joint matrix with rows indexed by S, columns by H.
template <typename Derived>
typename Derived::Scalar mutual_information(const Eigen::MatrixBase<Derived>& joint) {
  using Scalar = typename Derived::Scalar;
  const auto& j = joint.derived();
  if ((j.array() < Scalar(0)).any()) throw ValidationError("mutual_information: negative joint entry");
  if (std::abs(j.sum() - Scalar(1)) > Scalar(kRenormalizeLimit)) {
    throw ValidationError("mutual_information: joint does not sum to one");
  }
  const VectorX<Scalar> rows = j.rowwise().sum();
  const VectorX<Scalar> cols = j.colwise().sum().transpose();
  Scalar mi(0);
  for (Index s = 0; s < j.rows(); ++s) {
    for (Index h = 0; h < j.cols(); ++h) {
      const Scalar x = j(s, h);
      if (x > Scalar(0)) mi += x * std::log2(x / (rows(s) * cols(h)));
    }
  }
  return mi < Scalar(0) ? Scalar(0) : mi;
}

template <typename Scalar>
Scalar entropy(const BasicDistribution<Scalar>& p) {
  return entropy(p.probs());
}
template <typename Scalar>
Scalar total_variation(const BasicDistribution<Scalar>& p, const BasicDistribution<Scalar>& q) {
  return total_variation(p.probs(), q.probs());
}
template <typename Scalar>
Scalar kl_divergence(const BasicDistribution<Scalar>& p, const BasicDistribution<Scalar>& q) {
  return kl_divergence(p.probs(), q.probs());
}

// ---------------------------------------------------------------------------
// Experiment world.

/// Concepts with their prior and a per-concept law over the flattened sample
/// alphabet z = (x, y).
struct ConceptSpace {
  std::vector<std::string> concept_names;
  std::vector<std::string> sample_names;
  Distribution prior;
  Matrix data_law;  // |C| x |Z|, one distribution per row

  ConceptSpace(std::vector<std::string> concepts, std::vector<std::string> samples,
               Distribution prior, Matrix data_law);

  Index num_concepts() const { return prior.size(); }
  Index num_samples() const { return data_law.cols(); }
};

/// Per-sample losses l[c](h, z) bounded by l_max.
struct HypothesisSpace {
  std::vector<std::string> hypothesis_names;
  std::vector<Matrix> loss;  // loss[c] is |H| x |Z|
  double l_max = 1.0;

  HypothesisSpace(std::vector<std::string> names, std::vector<Matrix> loss, double l_max = 1.0);

  Index num_hypotheses() const { return static_cast<Index>(hypothesis_names.size()); }
};

/// All ordered m-tuples of samples with their exact laws.
struct DatasetSpace {
  Index m = 0;
  Index num_samples = 0;
  Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> tuples;  // N x m
  Matrix conditional;    // |C| x N, P(s | c)
  Distribution marginal; // P_S
  Matrix posterior;      // N x |C|, P(c | s)

  Index size() const { return tuples.rows(); }
  std::span<const int> tuple(Index s) const {
    return {tuples.data() + s * m, static_cast<std::size_t>(m)};
  }
  /// Dataset index of a tuple; the first sample is the most significant digit.
  Index index_of(std::span<const int> tuple) const;
};

/// Enumerate Z^m. Throws EnumerationTooLarge when |Z|^m exceeds `cap`.
DatasetSpace enumerate_datasets(const ConceptSpace& concepts, Index m,
                                std::uint64_t cap = kDefaultEnumerationCap);

class ProblemInstance {
 public:
  ProblemInstance(ConceptSpace concepts, HypothesisSpace hypotheses, Index m,
                  std::uint64_t cap = kDefaultEnumerationCap);

  const ConceptSpace& concepts() const noexcept { return concepts_; }
  const HypothesisSpace& hypotheses() const noexcept { return hypotheses_; }
  const DatasetSpace& datasets() const noexcept { return datasets_; }

  Index num_concepts() const { return concepts_.num_concepts(); }
  Index num_samples() const { return concepts_.num_samples(); }
  Index num_hypotheses() const { return hypotheses_.num_hypotheses(); }
  Index num_datasets() const { return datasets_.size(); }
  Index m() const { return datasets_.m; }
  double l_max() const { return hypotheses_.l_max; }

  /// P(c, s) as a |C| x N matrix.
  Matrix concept_dataset_joint() const;

 private:
  ConceptSpace concepts_;
  HypothesisSpace hypotheses_;
  DatasetSpace datasets_;
};

/// Parse the instance JSON document. Errors carry JSON-pointer paths.
ProblemInstance instance_from_json(const nlohmann::json& doc,
                                   std::uint64_t cap = kDefaultEnumerationCap);
nlohmann::json instance_to_json(const ProblemInstance& instance);
ProblemInstance load_instance(const std::string& path);

}  // namespace semcom
