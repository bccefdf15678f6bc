#include "stiefel/dynamics.hpp"

#include <numeric>

namespace stiefel {

namespace {

void check_shapes(const Matrix& X, const Matrix& other, const Matrix& G) {
  if (other.rows() != X.rows() || other.cols() != X.cols() || G.rows() != X.rows() ||
      G.cols() != X.cols())
    throw Error(ErrorCode::DimensionMismatch, "ODE state and gradient shapes disagree");
}

void check_xyv(const OdeStateXYV& s, const Matrix& G) {
  check_shapes(s.X, s.V, G);
  if (s.Y.rows() != s.X.cols() || s.Y.cols() != s.X.cols())
    throw Error(ErrorCode::DimensionMismatch, "Y must be m x m");
}

}  // namespace

OdeStateXQ xq_field(const OdeStateXQ& s, const Matrix& G, double gamma,
                    const MetricParams<double>& mp) {
  check_shapes(s.X, s.Q, G);
  const Matrix& X = s.X;
  const Matrix& Q = s.Q;
  const double a = mp.a(), b = mp.b();
  const Matrix qtq = Q.transpose() * Q;
  const Matrix qtx = Q.transpose() * X;
  const Matrix qqtx = Q * qtx;
  const Matrix proj_qqtx = qqtx - X * (X.transpose() * qqtx);
  const Matrix xtg = X.transpose() * G;
  OdeStateXQ d;
  d.X = Q;
  d.Q = -gamma * Q - X * qtq - (1.5 * a) * proj_qqtx - G + (0.5 * (1 + b)) * (X * xtg) +
        (0.5 * (1 - b)) * (X * xtg.transpose());
  return d;
}

OdeStateXYV xyv_field(const OdeStateXYV& s, const Matrix& G, double gamma,
                      const MetricParams<double>& mp) {
  check_xyv(s, G);
  OdeStateXYV d = split_field(1, s, G, gamma, mp);
  const OdeStateXYV d2 = split_field(2, s, G, gamma, mp);
  const OdeStateXYV d3 = split_field(3, s, G, gamma, mp);
  d.X += d2.X + d3.X;
  d.Y += d2.Y + d3.Y;
  d.V += d2.V + d3.V;
  return d;
}

OdeStateXYV split_field(int k, const OdeStateXYV& s, const Matrix& G, double gamma,
                        const MetricParams<double>& mp) {
  check_xyv(s, G);
  const Index n = s.X.rows(), m = s.X.cols();
  OdeStateXYV d{Matrix::Zero(n, m), Matrix::Zero(m, m), Matrix::Zero(n, m)};
  switch (k) {
    case 1: {
      const Matrix xtg = s.X.transpose() * G;
      d.X = s.X * s.Y;
      d.Y = -gamma * s.Y - (0.5 * (1 - mp.b())) * (xtg - xtg.transpose());
      break;
    }
    case 2: {
      const Matrix perp_g = G - s.X * (s.X.transpose() * G);
      d.V = -gamma * s.V + (0.5 * (3 * mp.a() - 2)) * (s.V * s.Y) - perp_g;
      break;
    }
    case 3: {
      d.X = s.V;
      d.V = -(s.X * (s.V.transpose() * s.V));
      break;
    }
    default:
      throw Error(ErrorCode::InvalidArgument, "split index must be 1, 2 or 3");
  }
  return d;
}

OdeStateXYV phi2_exact(const OdeStateXYV& s, const Matrix& G, double gamma,
                       const MetricParams<double>& mp, double t) {
  check_xyv(s, G);
  const Index m = s.X.cols();
  const Matrix eye = Matrix::Identity(m, m);
  const double k = 0.5 * (3 * mp.a() - 2);
  const Matrix M = gamma * eye - k * s.Y;
  const Eigen::FullPivLU<Matrix> lu(M);
  if (!lu.isInvertible()) throw Error(ErrorCode::SingularM, "gamma I - (3a-2)/2 Y is singular");
  // expm(-M t) = e^{-gamma t} expm(k t Y); the second factor is orthogonal for skew Y
  const Matrix flow = std::exp(-gamma * t) * detail::expm_general<double>((k * t) * s.Y);
  const Matrix perp_g = G - s.X * (s.X.transpose() * G);
  OdeStateXYV out = s;
  out.V = s.V * flow - perp_g * lu.solve(eye - flow);
  return out;
}

double energy(const OdeStateXQ& s, double f_value, const MetricParams<double>& mp) {
  const Matrix xq = s.X.transpose() * s.Q;
  return 0.5 * (s.Q.squaredNorm() - mp.a() * xq.squaredNorm()) + f_value;
}

std::function<OdeStateXQ(const OdeStateXQ&)> xq_vector_field(GradientFn grad, double gamma,
                                                             MetricParams<double> mp) {
  return [grad = std::move(grad), gamma, mp](const OdeStateXQ& s) {
    return xq_field(s, grad(s.X), gamma, mp);
  };
}

std::function<OdeStateXYV(const OdeStateXYV&)> xyv_vector_field(GradientFn grad, double gamma,
                                                                MetricParams<double> mp) {
  return [grad = std::move(grad), gamma, mp](const OdeStateXYV& s) {
    return xyv_field(s, grad(s.X), gamma, mp);
  };
}

SgdState<double> to_rescaled(const OdeStateXYV& s, double scale) {
  return {s.X, s.Y / scale, s.V / scale};
}

OdeStateXYV from_rescaled(const SgdState<double>& s, double scale) {
  return {s.X, scale * s.Z, scale * s.U};
}

std::function<OdeStateXYV(const OdeStateXYV&, double)> discrete_sgd_map(GradientFn grad, double gamma,
                                                                       SgdHyper<double> base) {
  FrictionSpec{gamma}.validate();
  return [grad = std::move(grad), gamma, base](const OdeStateXYV& s, double h) {
    const auto r = FrictionRescaling<double>::from_friction(gamma, h);
    SgdHyper<double> hp = base;
    hp.eta = r.eta;
    hp.mu = r.mu;
    const SgdState<double> next = sgd_step_with_gradient(to_rescaled(s, r.scale), grad(s.X), hp);
    return from_rescaled(next, r.scale);
  };
}

StructureErrors<double> xyv_constraints(const OdeStateXYV& s) {
  return structure_errors<double>(s.X, s.Y, s.V);
}

std::pair<double, double> xq_constraints(const OdeStateXQ& s) {
  const Index m = s.X.cols();
  const Matrix xq = s.X.transpose() * s.Q;
  return {(s.X.transpose() * s.X - Matrix::Identity(m, m)).norm(), (xq + xq.transpose()).norm()};
}

double fit_loglog_slope(const std::vector<double>& h, const std::vector<double>& err) {
  if (h.size() != err.size() || h.size() < 2)
    throw Error(ErrorCode::DegenerateFit, "need matching h and error lists of length >= 2");
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (!(h[i] > 0) || !(err[i] > 0) || !std::isfinite(err[i]))
      throw Error(ErrorCode::DegenerateFit, "errors must be positive and finite");
    lx.push_back(std::log(h[i]));
    ly.push_back(std::log(err[i]));
  }
  const double n = static_cast<double>(lx.size());
  const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / n;
  const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / n;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  if (sxx == 0) throw Error(ErrorCode::DegenerateFit, "step sizes are all equal");
  return sxy / sxx;
}

}  // namespace stiefel
