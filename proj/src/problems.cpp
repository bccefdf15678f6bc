#include "stiefel/problems.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

namespace stiefel {

// ---------------------------------------------------------------------------

LevProblem lev_generate(Index n, Index m, Rng& rng) {
  if (n < m || m < 1) throw Error(ErrorCode::InvalidArgument, "need n >= m >= 1");
  const Matrix xi = gaussian_matrix<double>(n, n, rng);
  const double scale = 1.0 / (2.0 * std::sqrt(static_cast<double>(n)));
  LevProblem p;
  p.A = Matrix(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j <= i; ++j) p.A(i, j) = p.A(j, i) = (xi(i, j) + xi(j, i)) * scale;
  p.m = m;
  return p;
}

ValueGrad lev_value_grad(const LevProblem& p, const Matrix& X) {
  if (X.rows() != p.A.rows())
    throw Error(ErrorCode::DimensionMismatch, "X must have as many rows as A");
  const Matrix ax = p.A * X;
  return {-X.cwiseProduct(ax).sum(), -2.0 * ax};
}

double lev_optimum(const LevProblem& p) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(p.A, Eigen::EigenvaluesOnly);
  const Vector& ev = eig.eigenvalues();  // ascending
  return -ev.tail(p.m).sum();
}

// ---------------------------------------------------------------------------

namespace {

void check_weights(const Vector& w, Index expected, const char* name) {
  if (w.size() != expected)
    throw Error(ErrorCode::DimensionMismatch, std::string(name) + " has the wrong length");
  if (!(w.minCoeff() > 0))
    throw Error(ErrorCode::InvalidArgument, std::string(name) + " must be strictly positive");
  if (std::abs(w.sum() - 1.0) > 1e-9)
    throw Error(ErrorCode::InvalidArgument, std::string(name) + " must sum to 1");
}

double median(Matrix m) {
  const Index size = m.size();
  double* data = m.data();
  std::nth_element(data, data + size / 2, data + size);
  return data[size / 2];
}

double marginal_residual(const Matrix& plan, const Vector& r, const Vector& c) {
  const double row = (plan.rowwise().sum() - r).cwiseAbs().maxCoeff();
  const double col = (plan.colwise().sum().transpose() - c).cwiseAbs().maxCoeff();
  return std::max(row, col);
}

// log(sum_j exp(v_j)) stabilized by the maximum.
template <typename Derived>
double log_sum_exp(const Eigen::MatrixBase<Derived>& v) {
  const double mx = v.maxCoeff();
  if (!std::isfinite(mx)) return mx;
  return mx + std::log((v.array() - mx).exp().sum());
}

SinkhornResult sinkhorn_log(const Matrix& C, const Vector& r, const Vector& c, double reg,
                            const SinkhornOptions& opts) {
  const Index n = C.rows(), k = C.cols();
  Vector f = Vector::Zero(n), g = Vector::Zero(k);
  const Vector log_r = r.array().log(), log_c = c.array().log();
  SinkhornResult out;
  out.log_domain = true;
  auto plan = [&] {
    Matrix p(n, k);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < k; ++j) p(i, j) = std::exp((f(i) + g(j) - C(i, j)) / reg);
    return p;
  };
  for (out.iterations = 1; out.iterations <= opts.max_iter; ++out.iterations) {
    for (Index i = 0; i < n; ++i)
      f(i) = reg * log_r(i) - reg * log_sum_exp((g.transpose() - C.row(i)) / reg);
    for (Index j = 0; j < k; ++j)
      g(j) = reg * log_c(j) - reg * log_sum_exp((f - C.col(j)) / reg);
    if (opts.record_dual) out.dual.push_back(sinkhorn_dual(C, f, g, r, c, reg));
    out.plan = plan();
    out.residual = marginal_residual(out.plan, r, c);
    if (out.residual <= opts.tol) {
      out.converged = true;
      return out;
    }
  }
  out.iterations = opts.max_iter;
  return out;
}

}  // namespace

double sinkhorn_dual(const Matrix& C, const Vector& f, const Vector& g, const Vector& r,
                     const Vector& c, double reg) {
  double mass = 0;
  for (Index i = 0; i < C.rows(); ++i)
    for (Index j = 0; j < C.cols(); ++j) mass += std::exp((f(i) + g(j) - C(i, j)) / reg);
  return f.dot(r) + g.dot(c) - reg * mass;
}

SinkhornResult sinkhorn(const Matrix& C, const Vector& r, const Vector& c, double reg,
                        const SinkhornOptions& opts) {
  check_weights(r, C.rows(), "row weights");
  check_weights(c, C.cols(), "column weights");
  if (!(reg > 0)) throw Error(ErrorCode::InvalidArgument, "regularization must be > 0");
  if (!C.allFinite()) throw Error(ErrorCode::NonFinite, "cost matrix is not finite");

  if (reg < opts.log_domain_ratio * median(C)) return sinkhorn_log(C, r, c, reg, opts);

  const Matrix K = (-C / reg).array().exp();
  if (!(K.rowwise().sum().minCoeff() > 0) || !(K.colwise().sum().minCoeff() > 0))
    return sinkhorn_log(C, r, c, reg, opts);

  Vector u = Vector::Ones(C.rows()), v = Vector::Ones(C.cols());
  SinkhornResult out;
  for (out.iterations = 1; out.iterations <= opts.max_iter; ++out.iterations) {
    u = r.cwiseQuotient(K * v);
    v = c.cwiseQuotient(K.transpose() * u);
    if (!u.allFinite() || !v.allFinite() || !(u.minCoeff() > 0) || !(v.minCoeff() > 0))
      return sinkhorn_log(C, r, c, reg, opts);
    if (opts.record_dual)
      out.dual.push_back(sinkhorn_dual(C, reg * u.array().log().matrix(),
                                       reg * v.array().log().matrix(), r, c, reg));
    // columns are exact after the v-update; rows carry the residual
    out.residual = (u.cwiseProduct(K * v) - r).cwiseAbs().maxCoeff();
    if (out.residual <= opts.tol) {
      out.converged = true;
      break;
    }
  }
  if (!out.converged) out.iterations = opts.max_iter;
  out.plan = u.asDiagonal() * K * v.asDiagonal();
  out.residual = marginal_residual(out.plan, r, c);
  return out;
}

// ---------------------------------------------------------------------------

void PrwProblem::validate() const {
  if (xs.cols() != ys.cols()) throw Error(ErrorCode::DimensionMismatch, "point dimensions differ");
  if (!(k >= 1 && k <= xs.cols())) throw Error(ErrorCode::InvalidArgument, "need d >= k >= 1");
  if (!(reg > 0)) throw Error(ErrorCode::InvalidArgument, "regularization must be > 0");
  check_weights(r, xs.rows(), "source weights");
  check_weights(c, ys.rows(), "target weights");
}

PrwProblem make_prw_problem(Matrix xs, Matrix ys, Index k, double reg) {
  PrwProblem p;
  p.r = Vector::Constant(xs.rows(), 1.0 / static_cast<double>(xs.rows()));
  p.c = Vector::Constant(ys.rows(), 1.0 / static_cast<double>(ys.rows()));
  p.xs = std::move(xs);
  p.ys = std::move(ys);
  p.k = k;
  p.reg = reg;
  p.validate();
  return p;
}

PrwProblem prw_two_gaussians(Index d, Index n_points, Rng& rng, double reg, double shift,
                             double stretch) {
  if (d < 2) throw Error(ErrorCode::InvalidArgument, "two-Gaussian instance needs d >= 2");
  Matrix xs = gaussian_matrix<double>(n_points, d, rng);
  Matrix ys = gaussian_matrix<double>(n_points, d, rng);
  ys.col(0).array() += shift;
  ys.col(1) *= stretch;
  return make_prw_problem(std::move(xs), std::move(ys), 2, reg);
}

Matrix prw_cost(const PrwProblem& p, const Matrix& U) {
  const Matrix px = p.xs * U;
  const Matrix py = p.ys * U;
  Matrix C = -2.0 * px * py.transpose();
  C.colwise() += px.rowwise().squaredNorm();
  C.rowwise() += py.rowwise().squaredNorm().transpose();
  return C.cwiseMax(0.0);
}

Matrix prw_displacement_moment(const PrwProblem& p, const Matrix& pi) {
  const Vector rows = pi.rowwise().sum();
  const Vector cols = pi.colwise().sum().transpose();
  const Matrix cross = p.xs.transpose() * pi * p.ys;
  return p.xs.transpose() * rows.asDiagonal() * p.xs + p.ys.transpose() * cols.asDiagonal() * p.ys -
         cross - cross.transpose();
}

ValueGrad prw_value_grad(const PrwProblem& p, const Matrix& U, const Matrix& pi) {
  if (U.rows() != p.xs.cols()) throw Error(ErrorCode::DimensionMismatch, "U must be d x k");
  if (pi.rows() != p.xs.rows() || pi.cols() != p.ys.rows())
    throw Error(ErrorCode::DimensionMismatch, "plan must be N x N'");
  const Matrix vu = prw_displacement_moment(p, pi) * U;
  return {U.cwiseProduct(vu).sum(), 2.0 * vu};
}

double prw_value(const PrwProblem& p, const Matrix& U, const SinkhornOptions& opts) {
  const auto sk = sinkhorn(prw_cost(p, U), p.r, p.c, p.reg, opts);
  return prw_value_grad(p, U, sk.plan).f;
}

PrwResult prw_solve(const PrwProblem& p, Matrix U0, const PrwSolveOptions& opts) {
  p.validate();
  if (U0.rows() != p.xs.cols() || U0.cols() != p.k)
    throw Error(ErrorCode::DimensionMismatch, "initial projection must be d x k");
  if (opts.kind == OptimizerKind::SonSgd || opts.kind == OptimizerKind::SonAdam)
    throw Error(ErrorCode::InvalidArgument, "PRW needs a Stiefel optimizer");
  if (opts.n_outer < 0 || opts.inner_steps < 1)
    throw Error(ErrorCode::InvalidArgument, "n_outer >= 0 and inner_steps >= 1 required");

  OptimizerState state = initial_state(opts.kind, std::move(U0));
  PrwResult out;
  std::int64_t elapsed = 0;
  using clock = std::chrono::steady_clock;

  auto solve_plan = [&](const Matrix& U) {
    auto sk = sinkhorn(prw_cost(p, U), p.r, p.c, p.reg, opts.sinkhorn);
    out.marginal_residuals.push_back(sk.residual);
    return std::move(sk.plan);
  };
  auto record = [&](long iter, const Matrix& U, const Matrix& plan) {
    const auto err = state_structure(state);
    out.trace.push_back({iter, prw_value_grad(p, U, plan).f, err.feas, err.skew, err.perp, elapsed});
  };

  Matrix plan = solve_plan(position(state));
  record(0, position(state), plan);
  for (long it = 1; it <= opts.n_outer; ++it) {
    const auto t0 = clock::now();
    for (int inner = 0; inner < opts.inner_steps; ++inner) {
      // ascent on f == descent on -f with the plan frozen
      const Matrix G = -prw_value_grad(p, position(state), plan).G;
      state = step_with_gradient(state, G, opts.hyper);
      if (!position(state).allFinite()) throw Error(ErrorCode::NonFinite, "PRW projection blew up");
    }
    plan = solve_plan(position(state));
    elapsed += std::chrono::duration_cast<std::chrono::nanoseconds>(clock::now() - t0).count();
    record(it, position(state), plan);
  }
  out.U = position(state);
  out.value = prw_value_grad(p, out.U, plan).f;
  out.plan = std::move(plan);
  return out;
}

double prw_random_search(const PrwProblem& p, int samples, Rng& rng, const SinkhornOptions& opts) {
  double best = -std::numeric_limits<double>::infinity();
  for (int s = 0; s < samples; ++s)
    best = std::max(best, prw_value(p, orthogonal_init<double>(p.xs.cols(), p.k, rng), opts));
  return best;
}

// ---------------------------------------------------------------------------

ValueGrad procrustes_value_grad(const Matrix& D, const Matrix& X) {
  if (D.rows() != X.rows() || D.cols() != X.cols())
    throw Error(ErrorCode::DimensionMismatch, "D and X shapes differ");
  return {-D.cwiseProduct(X).sum(), -D};
}

ValueGrad quadratic_value_grad(const Matrix& D, const Matrix& X) {
  if (D.rows() != X.rows() || D.cols() != X.cols())
    throw Error(ErrorCode::DimensionMismatch, "D and X shapes differ");
  const Matrix diff = X - D;
  return {0.5 * diff.squaredNorm(), diff};
}

double CoupledToy::value(const Matrix& X, const Matrix& w) const {
  const Matrix residual = w - X * (X.transpose() * b);
  return -X.cwiseProduct(A * X).sum() + 0.5 * residual.squaredNorm();
}

std::vector<Matrix> CoupledToy::gradient(const Matrix& X, const Matrix& w) const {
  const Matrix xtb = X.transpose() * b;
  const Matrix residual = w - X * xtb;
  Matrix gx = -2.0 * (A * X) - residual * xtb.transpose() - b * (residual.transpose() * X);
  return {std::move(gx), residual};
}

Matrix finite_diff_grad(const std::function<double(const Matrix&)>& f, const Matrix& X, double h) {
  if (!(h > 0)) throw Error(ErrorCode::InvalidArgument, "finite-difference step must be > 0");
  Matrix g(X.rows(), X.cols());
  Matrix probe = X;
  for (Index i = 0; i < X.rows(); ++i)
    for (Index j = 0; j < X.cols(); ++j) {
      const double orig = probe(i, j);
      probe(i, j) = orig + h;
      const double up = f(probe);
      probe(i, j) = orig - h;
      const double down = f(probe);
      probe(i, j) = orig;
      g(i, j) = (up - down) / (2 * h);
    }
  return g;
}

}  // namespace stiefel
