#pragma once

// Continuous-time optimization dynamics on the tangent bundle of St(n, m),
// used as the reference the discrete optimizers are checked against.
//
//   XQ form:   X' = Q,
//              Q' = -gamma Q - X Q^T Q - (3a/2)(I - XX^T) Q Q^T X
//                   - G + (1+b)/2 X X^T G + (1-b)/2 X G^T X
//   XYV form:  X' = X Y + V,
//              Y' = -gamma Y - (1-b)/2 (X^T G - G^T X),
//              V' = -gamma V + (3a-2)/2 V Y - X V^T V - (I - X X^T) G
//
// with G = df/dX(X) and constant friction gamma > 0.

#include <cmath>
#include <cstddef>
#include <functional>
#include <type_traits>
#include <utility>
#include <vector>

#include "stiefel/linalg.hpp"
#include "stiefel/manifold.hpp"
#include "stiefel/optimizers.hpp"

namespace stiefel {

struct OdeStateXQ {
  Matrix X;
  Matrix Q;
};

struct OdeStateXYV {
  Matrix X;
  Matrix Y;
  Matrix V;
};

inline OdeStateXQ operator+(const OdeStateXQ& a, const OdeStateXQ& b) { return {a.X + b.X, a.Q + b.Q}; }
inline OdeStateXQ operator*(double s, const OdeStateXQ& a) { return {s * a.X, s * a.Q}; }
inline OdeStateXYV operator+(const OdeStateXYV& a, const OdeStateXYV& b) {
  return {a.X + b.X, a.Y + b.Y, a.V + b.V};
}
inline OdeStateXYV operator*(double s, const OdeStateXYV& a) { return {s * a.X, s * a.Y, s * a.V}; }

inline bool is_finite(double x) { return std::isfinite(x); }
inline bool is_finite(const Matrix& m) { return m.allFinite(); }
inline bool is_finite(const OdeStateXQ& s) { return s.X.allFinite() && s.Q.allFinite(); }
inline bool is_finite(const OdeStateXYV& s) {
  return s.X.allFinite() && s.Y.allFinite() && s.V.allFinite();
}

struct FrictionSpec {
  double gamma = 1.0;

  void validate() const {
    if (!(gamma > 0)) throw Error(ErrorCode::InvalidArgument, "friction gamma must be > 0");
  }
};

using GradientFn = std::function<Matrix(const Matrix&)>;

OdeStateXQ xq_field(const OdeStateXQ& s, const Matrix& G, double gamma, const MetricParams<double>& mp);
OdeStateXYV xyv_field(const OdeStateXYV& s, const Matrix& G, double gamma,
                      const MetricParams<double>& mp);

/// One of the three summands of the XYV field (k = 1, 2, 3):
///   1: X' = XY,  Y' = -gamma Y - (1-b)/2 (X^T G - G^T X),  V' = 0
///   2: X' = 0,   Y' = 0,  V' = -gamma V + (3a-2)/2 V Y - (I - XX^T) G
///   3: X' = V,   Y' = 0,  V' = -X V^T V
OdeStateXYV split_field(int k, const OdeStateXYV& s, const Matrix& G, double gamma,
                        const MetricParams<double>& mp);

/// Exact time-t flow of split 2. With M = gamma I - (3a-2)/2 Y (Y from the
/// initial condition, constant along the flow):
///   V(t) = V(0) expm(-M t) - (I - X X^T) G M^{-1} (I - expm(-M t)).
/// Throws SINGULAR_M if M is not invertible.
OdeStateXYV phi2_exact(const OdeStateXYV& s, const Matrix& G, double gamma,
                       const MetricParams<double>& mp, double t);

/// E(X, Q) = 1/2 Tr(Q^T (I - a X X^T) Q) + f(X).
double energy(const OdeStateXQ& s, double f_value, const MetricParams<double>& mp);

/// Vector fields with the gradient bound in.
std::function<OdeStateXQ(const OdeStateXQ&)> xq_vector_field(GradientFn grad, double gamma,
                                                             MetricParams<double> mp);
std::function<OdeStateXYV(const OdeStateXYV&)> xyv_vector_field(GradientFn grad, double gamma,
                                                                MetricParams<double> mp);

/// (X, Y, V) <-> (X, Z, U) with Y = scale Z, V = scale U.
SgdState<double> to_rescaled(const OdeStateXYV& s, double scale);
OdeStateXYV from_rescaled(const SgdState<double>& s, double scale);

/// The composed SGD step read as an integrator of the XYV system: for step h
/// the state is rescaled to (X, Z, U), advanced by one sgd step with
/// (eta, mu) from the friction rescaling, and mapped back. Modes, metric and
/// split order come from `base`; its eta and mu are ignored.
std::function<OdeStateXYV(const OdeStateXYV&, double)> discrete_sgd_map(GradientFn grad, double gamma,
                                                                       SgdHyper<double> base);

/// Constraint residuals of an XYV state: (||X^T X - I||, ||Y + Y^T||, ||X^T V||).
StructureErrors<double> xyv_constraints(const OdeStateXYV& s);
/// (||X^T X - I||, ||X^T Q + Q^T X||).
std::pair<double, double> xq_constraints(const OdeStateXQ& s);

/// One classical fourth-order Runge-Kutta step.
template <typename State, typename Field>
State rk4_step(const Field& field, const State& s, double dt) {
  const State k1 = field(s);
  const State k2 = field(s + (0.5 * dt) * k1);
  const State k3 = field(s + (0.5 * dt) * k2);
  const State k4 = field(s + dt * k3);
  return s + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// Fixed-step RK4 from 0 to T; the last step is shortened to land on T.
/// `observe(t, state)` is called after every step when given.
template <typename State, typename Field, typename Observer = std::nullptr_t>
State reference_integrate(const Field& field, State s, double T, double dt,
                          const Observer& observe = nullptr) {
  if (!(dt > 0) || !(T >= 0)) throw Error(ErrorCode::InvalidArgument, "need dt > 0 and T >= 0");
  const long steps = static_cast<long>(std::ceil(T / dt - 1e-9));
  double t = 0;
  for (long i = 0; i < steps; ++i) {
    const double h = (i + 1 == steps) ? T - t : dt;
    s = rk4_step(field, s, h);
    t = (i + 1 == steps) ? T : t + dt;
    if (!is_finite(s)) throw Error(ErrorCode::NonFinite, "reference trajectory blew up");
    if constexpr (!std::is_same_v<Observer, std::nullptr_t>) observe(t, s);
  }
  return s;
}

/// Least-squares slope of log(err) against log(h).
double fit_loglog_slope(const std::vector<double>& h, const std::vector<double>& err);

struct OrderEstimate {
  double slope = 0;
  std::vector<double> errors;
};

/// Global error at time T of `step_map(state, h)` iterated T/h times against
/// an RK4 reference of `field`, for each h; returns the fitted order. The
/// reference step defaults to min(1e-4, 10 h_min^2).
template <typename State, typename StepMap, typename Field, typename Distance>
OrderEstimate estimate_order(const StepMap& step_map, const Field& field, const State& s0,
                             const std::vector<double>& h_list, double T, const Distance& distance,
                             double reference_dt = 0) {
  if (h_list.size() < 3) throw Error(ErrorCode::InvalidArgument, "need at least three step sizes");
  for (std::size_t i = 1; i < h_list.size(); ++i)
    if (!(h_list[i] < h_list[i - 1]))
      throw Error(ErrorCode::InvalidArgument, "step sizes must be decreasing");
  if (reference_dt <= 0) reference_dt = std::min(1e-4, 10.0 * h_list.back() * h_list.back());
  const State reference = reference_integrate(field, s0, T, reference_dt);

  OrderEstimate out;
  for (double h : h_list) {
    const long n = std::lround(T / h);
    if (n < 1 || std::abs(n * h - T) > 1e-9 * T)
      throw Error(ErrorCode::InvalidArgument, "T must be a multiple of every step size");
    State s = s0;
    for (long i = 0; i < n; ++i) s = step_map(s, h);
    out.errors.push_back(distance(s, reference));
  }
  out.slope = fit_loglog_slope(h_list, out.errors);
  return out;
}

}  // namespace stiefel
