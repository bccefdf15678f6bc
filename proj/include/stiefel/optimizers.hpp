#pragma once

// Structure-preserving momentum SGD and Adam on St(n, m), their SO(n)
// specializations and a momentumless Cayley baseline.
//
// Momentum is stored in rescaled coordinates: Z (m x m, skew) for the
// rotational part and U (n x m, X^T U = 0) for the perpendicular part. One SGD
// step is the composition phi3_bar o phi1_tilde o phi2_bar of the split maps,
// with both gradient terms evaluated once at the incoming X.

#include <cmath>
#include <concepts>
#include <functional>

#include "stiefel/linalg.hpp"
#include "stiefel/manifold.hpp"

namespace stiefel {

enum class Phi1Mode { ForwardEuler, Cayley, Expm };
enum class Phi2Mode { ForwardEuler, Cayley, Exact };

/// Order of the split maps inside one step, written as a composition: the
/// rightmost map is applied first. P3P1P2 is phi3 o phi1 o phi2.
enum class SplitOrder { P3P1P2, P3P2P1, P1P3P2, P1P2P3, P2P1P3, P2P3P1 };

template <typename Scalar = double>
using GradientOracle = std::function<Mat<Scalar>(const Mat<Scalar>&)>;

/// Learning rate and momentum from a friction gamma and ODE step h:
/// eta = (1 - e^{-gamma h}) / gamma * h, mu = e^{-gamma h}. `scale` is the
/// factor (1 - e^{-gamma h}) / gamma relating (Y, V) to (Z, U).
template <typename Scalar = double>
struct FrictionRescaling {
  Scalar eta;
  Scalar mu;
  Scalar scale;

  static FrictionRescaling from_friction(Scalar gamma, Scalar h) {
    if (!(gamma > 0) || !(h > 0)) throw Error(ErrorCode::InvalidArgument, "gamma and h must be > 0");
    const Scalar scale = -std::expm1(-gamma * h) / gamma;
    return {scale * h, std::exp(-gamma * h), scale};
  }
};

template <typename Scalar = double>
struct SgdHyper {
  Scalar eta = Scalar(0.1);
  Scalar mu = Scalar(0.9);
  MetricParams<Scalar> metric{};
  Phi1Mode phi1 = Phi1Mode::ForwardEuler;
  Phi2Mode phi2 = Phi2Mode::ForwardEuler;
  /// Drive the X-update of phi1 with the updated momentum instead of Z_i.
  bool use_updated_z = false;
  SplitOrder order = SplitOrder::P3P1P2;

  void validate() const {
    if (!(eta > 0)) throw Error(ErrorCode::InvalidArgument, "eta must be > 0");
    if (!(mu >= 0 && mu < 1)) throw Error(ErrorCode::InvalidArgument, "mu must lie in [0, 1)");
    if (phi2 != Phi2Mode::ForwardEuler && !(mu > 0))
      throw Error(ErrorCode::InvalidArgument, "Cayley/exact phi2 need mu > 0");
  }
};

template <typename Scalar = double>
struct AdamHyper {
  Scalar eta = Scalar(1e-3);
  Scalar beta1 = Scalar(0.9);
  Scalar beta2 = Scalar(0.999);
  Scalar eps = Scalar(1e-8);
  MetricParams<Scalar> metric{};

  void validate() const {
    if (!(eta > 0)) throw Error(ErrorCode::InvalidArgument, "eta must be > 0");
    if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1))
      throw Error(ErrorCode::InvalidArgument, "beta1, beta2 must lie in [0, 1)");
    if (!(eps > 0)) throw Error(ErrorCode::InvalidArgument, "eps must be > 0");
  }
};

template <typename Scalar = double>
struct SgdState {
  Mat<Scalar> X;
  Mat<Scalar> Z;
  Mat<Scalar> U;

  static SgdState at_rest(Mat<Scalar> x) {
    const Index n = x.rows(), m = x.cols();
    return {std::move(x), Mat<Scalar>::Zero(m, m), Mat<Scalar>::Zero(n, m)};
  }
};

template <typename Scalar = double>
struct AdamState {
  Mat<Scalar> X;
  Mat<Scalar> Z;
  Mat<Scalar> U;
  Mat<Scalar> p;  ///< second moment of fY, symmetric
  Mat<Scalar> q;  ///< second moment of gV
  long step_index = 0;

  static AdamState at_rest(Mat<Scalar> x) {
    const Index n = x.rows(), m = x.cols();
    return {std::move(x), Mat<Scalar>::Zero(m, m), Mat<Scalar>::Zero(n, m),
            Mat<Scalar>::Zero(m, m), Mat<Scalar>::Zero(n, m), 0};
  }
};

/// SO(n) momentum SGD state: X orthogonal, Y skew.
template <typename Scalar = double>
struct SonState {
  Mat<Scalar> X;
  Mat<Scalar> Y;

  static SonState at_rest(Mat<Scalar> x) {
    const Index m = x.cols();
    return {std::move(x), Mat<Scalar>::Zero(m, m)};
  }
};

template <typename Scalar = double>
struct SonAdamState {
  Mat<Scalar> X;
  Mat<Scalar> Y;
  Mat<Scalar> p;
  long step_index = 0;

  static SonAdamState at_rest(Mat<Scalar> x) {
    const Index m = x.cols();
    return {std::move(x), Mat<Scalar>::Zero(m, m), Mat<Scalar>::Zero(m, m), 0};
  }
};

// ---------------------------------------------------------------------------
// Split maps

/// phi2_bar: only U changes.
///   FORWARD_EULER  U <- mu U + (3a-2)/2 eta U Z - gV
///   CAYLEY         U <- U Cayley(W) - gV
///   EXACT          U <- U expm(W) + (h/c) gV W^{-1} (I - expm(W))
/// with W = ln(mu) I + (3a-2)/2 eta Z and h/c = -ln(mu) / (1 - mu).
template <typename Scalar>
SgdState<Scalar> phi2_bar(SgdState<Scalar> s, const Mat<Scalar>& gV, const SgdHyper<Scalar>& hp) {
  const Scalar k = (Scalar(3) * hp.metric.a() - Scalar(2)) / Scalar(2);
  switch (hp.phi2) {
    case Phi2Mode::ForwardEuler: {
      s.U = (hp.mu * s.U + (k * hp.eta) * (s.U * s.Z) - gV).eval();
      break;
    }
    case Phi2Mode::Cayley: {
      const Index m = s.Z.cols();
      const Mat<Scalar> w = std::log(hp.mu) * Mat<Scalar>::Identity(m, m) + (k * hp.eta) * s.Z;
      s.U = (s.U * detail::cayley_unchecked<Scalar>(w) - gV).eval();
      break;
    }
    case Phi2Mode::Exact: {
      const Index m = s.Z.cols();
      const Scalar log_mu = std::log(hp.mu);
      const Mat<Scalar> eye = Mat<Scalar>::Identity(m, m);
      const Mat<Scalar> w = log_mu * eye + (k * hp.eta) * s.Z;
      const Mat<Scalar> ew = hp.mu * expm_skew<Scalar>(((k * hp.eta) * s.Z).eval());
      const Mat<Scalar> forcing = w.partialPivLu().solve(eye - ew);
      const Scalar h_over_c = -log_mu / (Scalar(1) - hp.mu);
      s.U = (s.U * ew + h_over_c * (gV * forcing)).eval();
      break;
    }
  }
  return s;
}

/// phi1_tilde: Z <- mu Z - fY, then X moves along X Z' where Z' is Z_i by
/// default or the updated Z with use_updated_z. The X-update is
/// X + eta X Z' (FORWARD_EULER), X Cayley(eta Z') or X expm(eta Z').
template <typename Scalar>
SgdState<Scalar> phi1_tilde(SgdState<Scalar> s, const Mat<Scalar>& fY, const SgdHyper<Scalar>& hp) {
  Mat<Scalar> z_new = hp.mu * s.Z - fY;
  const Mat<Scalar>& drive = hp.use_updated_z ? z_new : s.Z;
  switch (hp.phi1) {
    case Phi1Mode::ForwardEuler:
      s.X = (s.X + hp.eta * (s.X * drive)).eval();
      break;
    case Phi1Mode::Cayley:
      s.X = (s.X * cayley<Scalar>(drive, hp.eta)).eval();
      break;
    case Phi1Mode::Expm:
      s.X = (s.X * expm_skew<Scalar>((hp.eta * drive).eval())).eval();
      break;
  }
  s.Z = std::move(z_new);
  return s;
}

/// phi3_bar:
///   X_dag = X + eta U X^T X,  X <- X_dag (X_dag^T X_dag)^{-1/2},
///   U <- U - eta X U^T U   (with the pre-retraction X).
/// The X^T X factor keeps X^T U = 0 after the step even if X was infeasible.
template <typename Scalar>
SgdState<Scalar> phi3_bar(SgdState<Scalar> s, const SgdHyper<Scalar>& hp) {
  const Mat<Scalar> gram = s.X.transpose() * s.X;
  const Mat<Scalar> x_dag = s.X + hp.eta * (s.U * gram);
  const Mat<Scalar> utu = s.U.transpose() * s.U;
  s.U = (s.U - hp.eta * (s.X * utu)).eval();
  s.X = polar_retract<Scalar>(x_dag);
  return s;
}

/// One step given the ambient gradient at state.X.
template <typename Scalar>
SgdState<Scalar> sgd_step_with_gradient(SgdState<Scalar> s, const Mat<Scalar>& G,
                                        const SgdHyper<Scalar>& hp) {
  const auto terms = gradient_terms<Scalar>(s.X, G, hp.metric);
  auto p1 = [&](SgdState<Scalar> x) { return phi1_tilde<Scalar>(std::move(x), terms.fY, hp); };
  auto p2 = [&](SgdState<Scalar> x) { return phi2_bar<Scalar>(std::move(x), terms.gV, hp); };
  auto p3 = [&](SgdState<Scalar> x) { return phi3_bar<Scalar>(std::move(x), hp); };
  switch (hp.order) {
    case SplitOrder::P3P1P2: return p3(p1(p2(std::move(s))));
    case SplitOrder::P3P2P1: return p3(p2(p1(std::move(s))));
    case SplitOrder::P1P3P2: return p1(p3(p2(std::move(s))));
    case SplitOrder::P1P2P3: return p1(p2(p3(std::move(s))));
    case SplitOrder::P2P1P3: return p2(p1(p3(std::move(s))));
    case SplitOrder::P2P3P1: return p2(p3(p1(std::move(s))));
  }
  return s;
}

template <typename Scalar, typename Oracle>
  requires std::invocable<Oracle&, const Mat<Scalar>&>
SgdState<Scalar> sgd_step(SgdState<Scalar> s, Oracle&& oracle, const SgdHyper<Scalar>& hp) {
  const Mat<Scalar> G = oracle(s.X);
  return sgd_step_with_gradient<Scalar>(std::move(s), G, hp);
}

namespace detail {

template <typename Scalar>
Mat<Scalar> adaptive_scale(const Mat<Scalar>& momentum, const Mat<Scalar>& second, Scalar eps) {
  return momentum.cwiseQuotient((second.cwiseSqrt().array() + eps).matrix());
}

template <typename Scalar>
Scalar bias_factor(Scalar beta2, long step_index) {
  return std::sqrt(Scalar(1) - std::pow(beta2, static_cast<Scalar>(step_index + 1)));
}

}  // namespace detail

/// Stiefel Adam. Second-moment bias factor sqrt(1 - beta2^{i+1}) only; there
/// is no first-moment bias correction.
template <typename Scalar>
AdamState<Scalar> adam_step_with_gradient(AdamState<Scalar> s, const Mat<Scalar>& G,
                                          const AdamHyper<Scalar>& hp) {
  const auto terms = gradient_terms<Scalar>(s.X, G, hp.metric);
  const Scalar b1 = hp.beta1, b2 = hp.beta2;
  const Scalar k = (Scalar(3) * hp.metric.a() - Scalar(2)) / Scalar(2);

  s.p = (b2 * s.p + (Scalar(1) - b2) * terms.fY.cwiseProduct(terms.fY)).eval();
  s.q = (b2 * s.q + (Scalar(1) - b2) * terms.gV.cwiseProduct(terms.gV)).eval();

  // phi2_hat
  const Mat<Scalar> u_half = b1 * s.U + (k * hp.eta) * (s.U * s.Z) - (Scalar(1) - b1) * terms.gV;
  // phi1_hat
  s.Z = (b1 * s.Z - (Scalar(1) - b1) * terms.fY).eval();
  const Scalar bias = detail::bias_factor(b2, s.step_index);
  const Mat<Scalar> x_half =
      s.X + (hp.eta * bias) * (s.X * detail::adaptive_scale<Scalar>(s.Z, s.p, hp.eps));
  // phi3_hat
  const Mat<Scalar> gram = x_half.transpose() * x_half;
  const Mat<Scalar> scaled_u = detail::adaptive_scale<Scalar>(u_half, s.q, hp.eps);
  const Mat<Scalar> u_tilde =
      bias * (scaled_u - x_half * gram.llt().solve(x_half.transpose() * scaled_u));
  const Mat<Scalar> x_dag = x_half + hp.eta * (u_tilde * gram);
  s.U = u_half - hp.eta * (x_half * (u_tilde.transpose() * u_half));
  s.X = polar_retract<Scalar>(x_dag);
  ++s.step_index;
  if (!s.X.allFinite() || !s.U.allFinite() || !s.Z.allFinite())
    throw Error(ErrorCode::NonFinite, "Adam step produced non-finite state");
  return s;
}

template <typename Scalar, typename Oracle>
  requires std::invocable<Oracle&, const Mat<Scalar>&>
AdamState<Scalar> adam_step(AdamState<Scalar> s, Oracle&& oracle, const AdamHyper<Scalar>& hp) {
  const Mat<Scalar> G = oracle(s.X);
  return adam_step_with_gradient<Scalar>(std::move(s), G, hp);
}

// ---------------------------------------------------------------------------
// SO(n)

template <typename Scalar>
SonState<Scalar> son_sgd_step_with_gradient(SonState<Scalar> s, const Mat<Scalar>& G,
                                            const SgdHyper<Scalar>& hp) {
  require_square(s.X, "SO(n) point");
  const auto terms = gradient_terms<Scalar>(s.X, G, hp.metric);
  s.Y = (hp.mu * s.Y - terms.fY).eval();
  const Mat<Scalar> x_dag = s.X * expm_skew<Scalar>((hp.eta * s.Y).eval());
  s.X = polar_retract<Scalar>(x_dag);
  return s;
}

template <typename Scalar, typename Oracle>
  requires std::invocable<Oracle&, const Mat<Scalar>&>
SonState<Scalar> son_sgd_step(SonState<Scalar> s, Oracle&& oracle, const SgdHyper<Scalar>& hp) {
  const Mat<Scalar> G = oracle(s.X);
  return son_sgd_step_with_gradient<Scalar>(std::move(s), G, hp);
}

template <typename Scalar>
SonAdamState<Scalar> son_adam_step_with_gradient(SonAdamState<Scalar> s, const Mat<Scalar>& G,
                                                 const AdamHyper<Scalar>& hp) {
  require_square(s.X, "SO(n) point");
  const auto terms = gradient_terms<Scalar>(s.X, G, hp.metric);
  s.p = (hp.beta2 * s.p + (Scalar(1) - hp.beta2) * terms.fY.cwiseProduct(terms.fY)).eval();
  s.Y = (hp.beta1 * s.Y - (Scalar(1) - hp.beta1) * terms.fY).eval();
  const Scalar bias = detail::bias_factor(hp.beta2, s.step_index);
  // Skew / symmetric entrywise is skew; no re-skewing.
  const Mat<Scalar> direction = (hp.eta * bias) * detail::adaptive_scale<Scalar>(s.Y, s.p, hp.eps);
  const Mat<Scalar> x_dag = s.X * expm_skew<Scalar>(direction);
  s.X = polar_retract<Scalar>(x_dag);
  ++s.step_index;
  return s;
}

template <typename Scalar, typename Oracle>
  requires std::invocable<Oracle&, const Mat<Scalar>&>
SonAdamState<Scalar> son_adam_step(SonAdamState<Scalar> s, Oracle&& oracle,
                                   const AdamHyper<Scalar>& hp) {
  const Mat<Scalar> G = oracle(s.X);
  return son_adam_step_with_gradient<Scalar>(std::move(s), G, hp);
}

// ---------------------------------------------------------------------------
// Baseline

/// Momentumless Cayley gradient step X <- (I + eta/2 W)^{-1} (I - eta/2 W) X
/// with W = G X^T - X G^T, applied through the rank-2m Woodbury form
///   X - eta L (I + eta/2 R^T L)^{-1} R^T X,  L = [G, X], R = [X, -G],
/// so the cost is O(n m^2).
template <typename Scalar>
StiefelPoint<Scalar> momentumless_cayley_step(const StiefelPoint<Scalar>& x, const Mat<Scalar>& G,
                                              Scalar eta) {
  const Mat<Scalar>& X = x.matrix();
  if (G.rows() != X.rows() || G.cols() != X.cols())
    throw Error(ErrorCode::DimensionMismatch, "gradient must have the shape of X");
  const Index n = X.rows(), m = X.cols();
  Mat<Scalar> left(n, 2 * m), right(n, 2 * m);
  left << G, X;
  right << X, -G;
  Mat<Scalar> inner = Mat<Scalar>::Identity(2 * m, 2 * m) + (eta / Scalar(2)) * (right.transpose() * left);
  const Mat<Scalar> rhs = right.transpose() * X;
  const auto lu = inner.partialPivLu();
  Mat<Scalar> next = X - eta * (left * lu.solve(rhs));
  if (!next.allFinite()) throw Error(ErrorCode::NonFinite, "Cayley step produced non-finite entries");
  return StiefelPoint<Scalar>::unchecked(std::move(next));
}

}  // namespace stiefel
