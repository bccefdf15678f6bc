#pragma once

// Geometry of St(n, m) = {X : X^T X = I} under the canonical-type metric
// g_X(D1, D2) = Tr(D1^T (I - a X X^T) D2).

#include <limits>

#include "stiefel/linalg.hpp"

namespace stiefel {

/// Metric parameter a < 1; b = a / (a - 1) is always derived from a.
template <typename Scalar = double>
class MetricParams {
 public:
  explicit MetricParams(Scalar a = Scalar(0.5)) : a_(a) {
    if (!(a < Scalar(1))) throw Error(ErrorCode::InvalidArgument, "metric parameter a must be < 1");
  }

  Scalar a() const { return a_; }
  Scalar b() const { return a_ / (a_ - Scalar(1)); }

 private:
  Scalar a_;
};

template <typename Scalar>
constexpr Scalar feasibility_tol() {
  if constexpr (std::is_same_v<Scalar, double>) return Scalar(1e-8);
  return Scalar(1e-4);
}

/// Position on the Stiefel manifold. The checked constructor rejects points
/// with ||X^T X - I||_F above feasibility_tol; `unchecked` accepts any full
/// rank matrix (the optimizers re-orthonormalize on their first step).
template <typename Scalar = double>
class StiefelPoint {
 public:
  explicit StiefelPoint(Mat<Scalar> x) : x_(std::move(x)) {
    if (x_.rows() < x_.cols() || x_.cols() < 1)
      throw Error(ErrorCode::DimensionMismatch, "Stiefel point needs n >= m >= 1");
    const Scalar feas = (x_.transpose() * x_ - Mat<Scalar>::Identity(x_.cols(), x_.cols())).norm();
    if (!(feas <= feasibility_tol<Scalar>()))
      throw Error(ErrorCode::NotFeasible, "||X^T X - I||_F exceeds feasibility tolerance");
  }

  static StiefelPoint unchecked(Mat<Scalar> x) { return StiefelPoint(std::move(x), Unchecked{}); }

  const Mat<Scalar>& matrix() const { return x_; }
  Index n() const { return x_.rows(); }
  Index m() const { return x_.cols(); }

 private:
  struct Unchecked {};
  StiefelPoint(Mat<Scalar> x, Unchecked) : x_(std::move(x)) {}
  Mat<Scalar> x_;
};

/// Tangent vector in (Y skew m x m, V perpendicular n x m) coordinates:
/// Q = X Y + V with X^T V = 0.
template <typename Scalar = double>
struct TangentYV {
  Mat<Scalar> Y;
  Mat<Scalar> V;
};

template <typename Scalar>
Scalar metric_inner(const StiefelPoint<Scalar>& x, const Mat<Scalar>& d1, const Mat<Scalar>& d2,
                    const MetricParams<Scalar>& mp) {
  const auto& X = x.matrix();
  if (d1.rows() != X.rows() || d1.cols() != X.cols() || d2.rows() != X.rows() ||
      d2.cols() != X.cols())
    throw Error(ErrorCode::DimensionMismatch, "metric_inner operands must match X");
  // Tr(D1^T D2) - a Tr((X^T D1)^T (X^T D2)), never forming the n x n projector.
  const Mat<Scalar> xd1 = X.transpose() * d1;
  const Mat<Scalar> xd2 = X.transpose() * d2;
  return d1.cwiseProduct(d2).sum() - mp.a() * xd1.cwiseProduct(xd2).sum();
}

/// Y = X^T Q, V = Q - X Y. Throws NOT_TANGENT if Y is not skew within 1e-8.
template <typename Scalar>
TangentYV<Scalar> decompose_tangent(const StiefelPoint<Scalar>& x, const Mat<Scalar>& q) {
  const auto& X = x.matrix();
  if (q.rows() != X.rows() || q.cols() != X.cols())
    throw Error(ErrorCode::DimensionMismatch, "tangent must have the shape of X");
  TangentYV<Scalar> t;
  t.Y = X.transpose() * q;
  if ((t.Y + t.Y.transpose()).norm() > Scalar(1e-8))
    throw Error(ErrorCode::NotTangent, "X^T Q + Q^T X is not zero");
  t.V = q - X * t.Y;
  return t;
}

template <typename Scalar>
Mat<Scalar> compose_tangent(const StiefelPoint<Scalar>& x, const TangentYV<Scalar>& t) {
  return x.matrix() * t.Y + t.V;
}

/// The two "gradients" the optimizers consume.
template <typename Scalar>
struct GradientTerms {
  Mat<Scalar> fY;  ///< (1-b)/2 (X^T G - G^T X), skew
  Mat<Scalar> gV;  ///< (I - X X^T) G
};

template <typename Scalar>
GradientTerms<Scalar> gradient_terms(const Mat<Scalar>& X, const Mat<Scalar>& G,
                                     const MetricParams<Scalar>& mp) {
  if (G.rows() != X.rows() || G.cols() != X.cols())
    throw Error(ErrorCode::DimensionMismatch, "gradient must have the shape of X");
  const Mat<Scalar> xg = X.transpose() * G;
  GradientTerms<Scalar> out;
  // Formed from one product and its transpose, so fY is skew bit-for-bit.
  out.fY = ((Scalar(1) - mp.b()) / Scalar(2)) * (xg - xg.transpose());
  if (X.rows() == X.cols()) {
    // (I - X X^T) vanishes identically on St(n, n).
    out.gV = Mat<Scalar>::Zero(X.rows(), X.cols());
  } else {
    out.gV = G - X * xg;
  }
  return out;
}

template <typename Scalar>
GradientTerms<Scalar> gradient_terms(const StiefelPoint<Scalar>& x, const Mat<Scalar>& G,
                                     const MetricParams<Scalar>& mp) {
  return gradient_terms<Scalar>(x.matrix(), G, mp);
}

template <typename Scalar>
struct StructureErrors {
  Scalar feas;  ///< ||X^T X - I||_F
  Scalar skew;  ///< ||Z + Z^T||_F
  Scalar perp;  ///< ||X^T U||_F
};

template <typename Scalar>
StructureErrors<Scalar> structure_errors(const Mat<Scalar>& X, const Mat<Scalar>& Z,
                                         const Mat<Scalar>& U) {
  if (Z.rows() != X.cols() || Z.cols() != X.cols() || U.rows() != X.rows() || U.cols() != X.cols())
    throw Error(ErrorCode::DimensionMismatch, "structure_errors expects n x m, m x m, n x m");
  const Index m = X.cols();
  return {(X.transpose() * X - Mat<Scalar>::Identity(m, m)).norm(), (Z + Z.transpose()).norm(),
          (X.transpose() * U).norm()};
}

}  // namespace stiefel
