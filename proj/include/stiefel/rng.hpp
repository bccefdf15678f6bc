#pragma once

#include <cstdint>
#include <optional>
#include <random>

#include <Eigen/Dense>

namespace stiefel {

/// Seedable random stream.
///
/// Bits come from std::mt19937_64, whose output sequence is fixed by the C++
/// standard. Uniform doubles take the top 53 bits; normals use the Box-Muller
/// transform (both values of each pair are consumed). The standard library's
/// distribution objects are avoided because their output is implementation
/// defined. Same seed gives a bit-identical stream on a given platform/libm.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1).
  double uniform();

  /// Standard normal.
  double normal();

  /// Child stream seeded from this one; advances this stream by one draw.
  Rng fork();

 private:
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

/// i.i.d. standard normal entries, drawn in row-major order.
template <typename Scalar = double>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> gaussian_matrix(Eigen::Index rows,
                                                                      Eigen::Index cols,
                                                                      Rng& rng) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) out(i, j) = static_cast<Scalar>(rng.normal());
  return out;
}

}  // namespace stiefel
