#pragma once

// Objectives with analytic gradients: leading eigenvalues, Projection Robust
// Wasserstein (with Sinkhorn), and small toys. Every objective is minimized;
// gradients are ambient Euclidean gradients dF/dX.

#include <functional>
#include <vector>

#include "stiefel/linalg.hpp"
#include "stiefel/rng.hpp"
#include "stiefel/run.hpp"
#include "stiefel/trace.hpp"

namespace stiefel {

using Vector = Eigen::VectorXd;

struct ValueGrad {
  double f = 0;
  Matrix G;
};

// --- leading eigenvalue -----------------------------------------------------

/// min_X -Tr(X^T A X) over St(n, m), A symmetric.
struct LevProblem {
  Matrix A;
  Index m = 1;
};

/// A = (Xi + Xi^T) / 2 / sqrt(n), Xi i.i.d. standard normal (row-major draw).
LevProblem lev_generate(Index n, Index m, Rng& rng);

ValueGrad lev_value_grad(const LevProblem& p, const Matrix& X);

/// Optimal value -(sum of the m largest eigenvalues), from a dense
/// symmetric eigendecomposition.
double lev_optimum(const LevProblem& p);

// --- Sinkhorn -----------------------------------------------------------------

struct SinkhornOptions {
  double tol = 1e-6;  ///< max absolute marginal residual
  int max_iter = 1000;
  /// Use the log-domain iteration when reg < ratio * median(C).
  double log_domain_ratio = 0.05;
  /// Record the dual objective after every sweep.
  bool record_dual = false;
};

struct SinkhornResult {
  Matrix plan;
  double residual = 0;
  int iterations = 0;
  bool converged = false;
  bool log_domain = false;
  std::vector<double> dual;
};

/// Entropic optimal transport by alternating scaling on K = exp(-C / reg).
/// Weights must be strictly positive and each sum to 1. Falls back to the
/// log-domain iteration when the plain kernel underflows. A run that hits
/// max_iter returns its last plan with converged = false.
SinkhornResult sinkhorn(const Matrix& C, const Vector& r, const Vector& c, double reg,
                        const SinkhornOptions& opts = {});

/// Dual objective <f, r> + <g, c> - reg sum exp((f_i + g_j - C_ij) / reg).
double sinkhorn_dual(const Matrix& C, const Vector& f, const Vector& g, const Vector& r,
                     const Vector& c, double reg);

// --- Projection Robust Wasserstein ------------------------------------------

struct PrwProblem {
  Matrix xs;  ///< N x d, one point per row
  Matrix ys;  ///< N' x d
  Vector r;   ///< N weights
  Vector c;   ///< N' weights
  Index k = 2;
  double reg = 1.0;  ///< entropic regularization strength

  void validate() const;
};

/// Uniform-weight problem from two point clouds.
PrwProblem make_prw_problem(Matrix xs, Matrix ys, Index k, double reg);

/// Two Gaussian clouds in R^d that differ only in coordinates 0 and 1: the
/// second cloud is shifted by `shift` along coordinate 0 and stretched by
/// `stretch` along coordinate 1. The best 2-plane is span(e_0, e_1).
PrwProblem prw_two_gaussians(Index d, Index n_points, Rng& rng, double reg, double shift = 4.0,
                             double stretch = 3.0);

/// C_ij = ||U^T (x_i - y_j)||^2.
Matrix prw_cost(const PrwProblem& p, const Matrix& U);

/// V_pi = sum_ij pi_ij (x_i - y_j)(x_i - y_j)^T.
Matrix prw_displacement_moment(const PrwProblem& p, const Matrix& pi);

/// f = sum_ij pi_ij ||U^T (x_i - y_j)||^2 (transport term only) and
/// G = 2 V_pi U.
ValueGrad prw_value_grad(const PrwProblem& p, const Matrix& U, const Matrix& pi);

/// Transport term of the Sinkhorn plan for projection U.
double prw_value(const PrwProblem& p, const Matrix& U, const SinkhornOptions& opts = {});

struct PrwSolveOptions {
  OptimizerKind kind = OptimizerKind::Sgd;
  HyperSet hyper{};
  long n_outer = 100;
  int inner_steps = 1;
  SinkhornOptions sinkhorn{};
};

struct PrwResult {
  Matrix U;
  Matrix plan;
  double value = 0;
  Trace trace;                       ///< objective column = PRW value
  std::vector<double> marginal_residuals;  ///< Sinkhorn residual per outer iteration
};

/// Alternates a full Sinkhorn solve for the current projection with
/// `inner_steps` Stiefel ascent steps on the projection (the optimizer
/// minimizes -f with the plan held fixed). Runs exactly n_outer outer
/// iterations; trace row i is the value at the i-th projection.
PrwResult prw_solve(const PrwProblem& p, Matrix U0, const PrwSolveOptions& opts);

/// Largest Sinkhorn transport value over `samples` random projections.
double prw_random_search(const PrwProblem& p, int samples, Rng& rng,
                         const SinkhornOptions& opts = {});

// --- toys -------------------------------------------------------------------

/// f = -Tr(D^T X), G = -D. On SO(n) the minimizer is the polar factor of D.
ValueGrad procrustes_value_grad(const Matrix& D, const Matrix& X);

/// f = 1/2 ||X - D||^2, G = X - D.
ValueGrad quadratic_value_grad(const Matrix& D, const Matrix& X);

/// Two-block toy coupling a Stiefel block X (n x m) and a Euclidean block w
/// (n x 1):  f(X, w) = -Tr(X^T A X) + 1/2 ||w - X X^T b||^2.
/// The joint minimum is the top-m eigenspace of A with w = X X^T b.
struct CoupledToy {
  Matrix A;
  Matrix b;

  double value(const Matrix& X, const Matrix& w) const;
  std::vector<Matrix> gradient(const Matrix& X, const Matrix& w) const;
};

/// Central differences, entrywise.
Matrix finite_diff_grad(const std::function<double(const Matrix&)>& f, const Matrix& X, double h);

}  // namespace stiefel
