#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <numbers>

namespace semcom {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using Vector = VectorX<double>;
using Matrix = MatrixX<double>;
using Index = Eigen::Index;

// Information quantities carry their unit in the type. Solvers work in bits;
// bound formulas with natural exponentials take nats.
struct Nats;

struct Bits {
  double value = 0.0;
  constexpr Nats to_nats() const;
};

struct Nats {
  double value = 0.0;
  constexpr Bits to_bits() const { return Bits{value / std::numbers::ln2}; }
};

constexpr Nats Bits::to_nats() const { return Nats{value * std::numbers::ln2}; }

}  // namespace semcom
