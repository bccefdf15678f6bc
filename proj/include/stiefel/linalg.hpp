#pragma once

// Dense small-matrix kernels: the Newton-Schulz matrix root, Cayley map,
// exponential of skew matrices and orthogonal initialization. Everything is
// templated on the scalar type; `Matrix` is the double-precision default.

#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "stiefel/error.hpp"
#include "stiefel/rng.hpp"

namespace stiefel {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using Matrix = Mat<double>;
using Index = Eigen::Index;

template <typename Scalar>
constexpr Scalar default_sqrt_tol() {
  if constexpr (std::is_same_v<Scalar, double>) return Scalar(1e-14);
  return Scalar(64) * std::numeric_limits<Scalar>::epsilon();
}

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  return m.allFinite();
}

template <typename Derived>
void require_square(const Eigen::MatrixBase<Derived>& m, const char* what) {
  if (m.rows() != m.cols() || m.rows() < 1)
    throw Error(ErrorCode::DimensionMismatch, std::string(what) + " must be square and non-empty");
}

/// (A - A^T) / 2.
template <typename Derived>
Mat<typename Derived::Scalar> skew_part(const Eigen::MatrixBase<Derived>& a) {
  require_square(a, "skew_part input");
  using S = typename Derived::Scalar;
  return (S(0.5) * (a - a.transpose())).eval();
}

template <typename Scalar>
struct MatrixRoot {
  Mat<Scalar> sqrt;
  Mat<Scalar> inv_sqrt;
  int iters = 0;
  /// ||Y_k^2 - A||_F for k = 0..iters.
  std::vector<Scalar> residuals;
};

/// Coupled Newton-Schulz iteration for A^{1/2} and A^{-1/2}:
///   Y_{k+1} = Y_k (3I - Z_k Y_k) / 2,  Z_{k+1} = (3I - Z_k Y_k) Z_k / 2,
/// from Y_0 = A, Z_0 = I, stopping once ||Y_k^2 - A||_F < tol.
///
/// Converges quadratically when the spectral radius of A - I is below 1.
/// Throws DIVERGED if the residual grows on two consecutive iterations or
/// max_iter is reached without meeting tol.
template <typename Scalar>
MatrixRoot<Scalar> inv_sqrt_newton_schulz(const Mat<Scalar>& a,
                                          Scalar tol = default_sqrt_tol<Scalar>(),
                                          int max_iter = 20) {
  require_square(a, "Newton-Schulz input");
  const Index m = a.rows();
  const Mat<Scalar> eye = Mat<Scalar>::Identity(m, m);

  MatrixRoot<Scalar> out;
  Mat<Scalar> y = a;
  Mat<Scalar> z = eye;
  Scalar residual = (y * y - a).norm();
  out.residuals.push_back(residual);
  int growth = 0;
  while (!(residual < tol)) {
    if (out.iters >= max_iter || !std::isfinite(residual))
      throw Error(ErrorCode::Diverged, "Newton-Schulz did not reach tolerance");
    const Mat<Scalar> t = Scalar(3) * eye - z * y;
    y = (Scalar(0.5) * (y * t)).eval();
    z = (Scalar(0.5) * (t * z)).eval();
    ++out.iters;
    const Scalar next = (y * y - a).norm();
    out.residuals.push_back(next);
    growth = next > residual ? growth + 1 : 0;
    residual = next;
    if (growth >= 2) throw Error(ErrorCode::Diverged, "Newton-Schulz residual grew twice in a row");
  }
  out.sqrt = std::move(y);
  out.inv_sqrt = std::move(z);
  return out;
}

/// A^{1/2}, A^{-1/2} from a symmetric eigendecomposition. Used when the
/// Newton-Schulz precondition fails.
template <typename Scalar>
MatrixRoot<Scalar> inv_sqrt_eigen(const Mat<Scalar>& a) {
  require_square(a, "eigen root input");
  Eigen::SelfAdjointEigenSolver<Mat<Scalar>> eig(a);
  if (eig.info() != Eigen::Success || eig.eigenvalues().minCoeff() <= Scalar(0))
    throw Error(ErrorCode::RankDeficient, "matrix is not positive definite");
  const auto& vecs = eig.eigenvectors();
  const auto root = eig.eigenvalues().cwiseSqrt();
  MatrixRoot<Scalar> out;
  out.sqrt = vecs * root.asDiagonal() * vecs.transpose();
  out.inv_sqrt = vecs * root.cwiseInverse().asDiagonal() * vecs.transpose();
  return out;
}

/// Newton-Schulz with eigendecomposition fallback on DIVERGED.
template <typename Scalar>
Mat<Scalar> inv_sqrt_spd(const Mat<Scalar>& a, Scalar tol = default_sqrt_tol<Scalar>(),
                         int max_iter = 20) {
  try {
    return inv_sqrt_newton_schulz<Scalar>(a, tol, max_iter).inv_sqrt;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::Diverged) throw;
    return inv_sqrt_eigen<Scalar>(a).inv_sqrt;
  }
}

/// X (X^T X)^{-1/2}.
template <typename Scalar>
Mat<Scalar> polar_retract(const Mat<Scalar>& x) {
  if (!x.allFinite()) throw Error(ErrorCode::NonFinite, "retraction input is not finite");
  const Mat<Scalar> gram = x.transpose() * x;
  return x * inv_sqrt_spd<Scalar>(gram);
}

namespace detail {

// (I - W/2)^{-1} (I + W/2) for any square W with I - W/2 invertible.
template <typename Scalar>
Mat<Scalar> cayley_unchecked(const Mat<Scalar>& w) {
  const Index m = w.rows();
  const Mat<Scalar> eye = Mat<Scalar>::Identity(m, m);
  const Mat<Scalar> half = Scalar(0.5) * w;
  Mat<Scalar> out = (eye - half).partialPivLu().solve(eye + half);
  if (!out.allFinite()) throw Error(ErrorCode::NonFinite, "Cayley map produced non-finite entries");
  return out;
}

// Scaling and squaring around a truncated Taylor series; the scaled matrix
// has 1-norm at most 1/2 so ~18 terms reach double precision.
template <typename Scalar>
Mat<Scalar> expm_general(const Mat<Scalar>& w) {
  require_square(w, "expm input");
  if (!w.allFinite()) throw Error(ErrorCode::NonFinite, "expm input is not finite");
  const Index m = w.rows();
  const Scalar norm1 = w.cwiseAbs().colwise().sum().maxCoeff();
  int squarings = 0;
  if (norm1 > Scalar(0.5)) squarings = static_cast<int>(std::ceil(std::log2(norm1 / Scalar(0.5))));
  const Mat<Scalar> b = w / std::ldexp(Scalar(1), squarings);

  Mat<Scalar> sum = Mat<Scalar>::Identity(m, m);
  Mat<Scalar> term = Mat<Scalar>::Identity(m, m);
  const Scalar eps = std::numeric_limits<Scalar>::epsilon();
  for (int k = 1; k <= 30; ++k) {
    term = (term * b / Scalar(k)).eval();
    sum += term;
    if (term.norm() <= eps * Scalar(1e-2)) break;
  }
  for (int s = 0; s < squarings; ++s) sum = (sum * sum).eval();
  if (!sum.allFinite()) throw Error(ErrorCode::NonFinite, "expm overflowed");
  return sum;
}

template <typename Scalar>
void require_skew(const Mat<Scalar>& w, const char* what) {
  require_square(w, what);
  const Scalar tol = std::is_same_v<Scalar, double> ? Scalar(1e-12)
                                                     : Scalar(1e3) * std::numeric_limits<Scalar>::epsilon();
  if ((w + w.transpose()).norm() > tol * std::max(Scalar(1), w.norm()))
    throw Error(ErrorCode::InvalidArgument, std::string(what) + " must be skew-symmetric");
}

}  // namespace detail

/// Cayley(hW) = (I - hW/2)^{-1} (I + hW/2); orthogonal for skew W.
template <typename Scalar>
Mat<Scalar> cayley(const Mat<Scalar>& w, Scalar h) {
  detail::require_skew(w, "Cayley argument");
  return detail::cayley_unchecked<Scalar>((h * w).eval());
}

/// Matrix exponential of a skew matrix.
template <typename Scalar>
Mat<Scalar> expm_skew(const Mat<Scalar>& w) {
  detail::require_skew(w, "expm_skew argument");
  return detail::expm_general<Scalar>(w);
}

/// Random point on St(n, m): QR of a Gaussian n x m draw with the column
/// signs fixed so that R has a positive diagonal (X = Q sign(diag R)).
/// The distribution is invariant under left multiplication by orthogonal
/// matrices.
template <typename Scalar = double>
Mat<Scalar> orthogonal_init(Index n, Index m, Rng& rng) {
  if (n < m || m < 1) throw Error(ErrorCode::InvalidArgument, "orthogonal_init needs n >= m >= 1");
  for (int attempt = 0; attempt < 2; ++attempt) {
    const Matrix draw = gaussian_matrix<double>(n, m, rng);
    Eigen::HouseholderQR<Matrix> qr(draw);
    const Matrix r = qr.matrixQR().topRows(m).template triangularView<Eigen::Upper>();
    const double scale = draw.norm();
    bool deficient = false;
    for (Index i = 0; i < m; ++i) deficient |= std::abs(r(i, i)) <= 1e-10 * scale;
    if (deficient) continue;
    Matrix q = qr.householderQ() * Matrix::Identity(n, m);
    for (Index j = 0; j < m; ++j)
      if (r(j, j) < 0) q.col(j) = -q.col(j);
    return q.template cast<Scalar>();
  }
  throw Error(ErrorCode::RankDeficient, "Gaussian draw was numerically rank deficient twice");
}

}  // namespace stiefel
