// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero if any criterion fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/SVD>

#include "stiefel/bench.hpp"
#include "stiefel/dynamics.hpp"
#include "stiefel/mixed.hpp"
#include "stiefel/problems.hpp"
#include "stiefel/run.hpp"

using namespace stiefel;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

Outcome structure_preservation() {
  Rng rng(101);
  const LevProblem p = lev_generate(100, 10, rng);
  const Matrix x0 = orthogonal_init<double>(100, 10, rng);
  auto grad = [&](const Matrix& X) { return lev_value_grad(p, X).G; };
  auto value = [&](const Matrix& X) { return lev_value_grad(p, X).f; };
  HyperSet hp;
  hp.sgd.eta = 0.1;
  hp.sgd.mu = 0.9;
  hp.adam.eta = 1e-3;
  RunOptions opts;
  opts.n_iters = 5000;
  double feas = 0, skew = 0, perp = 0;
  bool aborted = false;
  for (auto kind : {OptimizerKind::Sgd, OptimizerKind::Adam}) {
    const auto r = run(kind, initial_state(kind, x0), grad, value, hp, opts);
    aborted = aborted || r.aborted;
    for (const auto& row : r.trace) {
      feas = std::max(feas, row.feas);
      skew = std::max(skew, row.skew);
      perp = std::max(perp, row.perp);
    }
  }
  return {!aborted && feas <= 1e-10 && skew <= 1e-12 && perp <= 1e-10,
          fmt("feas=%.3g", feas) + fmt(" skew=%.3g", skew) + fmt(" perp=%.3g", perp)};
}

Outcome newton_schulz() {
  Rng rng(102);
  int worst_iters = 0;
  double worst_res = 0;
  bool quadratic = true;
  for (int t = 0; t < 100; ++t) {
    const Matrix g = gaussian_matrix<double>(10, 10, rng);
    Matrix s = g + g.transpose();
    s /= s.norm();
    const auto r = inv_sqrt_newton_schulz<double>((Matrix::Identity(10, 10) + 0.1 * s).eval());
    worst_iters = std::max(worst_iters, r.iters);
    worst_res = std::max(worst_res, r.residuals.back());
    // e_{k+1} <= C e_k^2 once in the basin, C = 2
    for (std::size_t k = 0; k + 1 < r.residuals.size(); ++k)
      if (r.residuals[k] < 0.5 && r.residuals[k + 1] > 1e-14 && r.residuals[k + 1] > 2.0 * r.residuals[k] * r.residuals[k])
        quadratic = false;
  }
  return {worst_iters <= 8 && worst_res <= 1e-14 && quadratic,
          "max_iters=" + std::to_string(worst_iters) + fmt(" max_residual=%.3g", worst_res) +
              (quadratic ? " quadratic" : " not-quadratic")};
}

Outcome first_order() {
  const auto rep = run_ode_checks(20, 5, 103, {1.0}, 1.0, 1e-3, 1.0, 0.5);
  return {rep.order >= 0.8 && rep.order <= 1.2, fmt("order=%.4f", rep.order)};
}

Outcome continuous_invariants() {
  const auto rep = run_ode_checks(20, 5, 104, {0.5, 1.0, 5.0}, 5.0, 1e-3, 1.0, 0.5);
  return {rep.max_drift <= 1e-8 && rep.max_energy_increase <= 1e-8,
          fmt("drift=%.3g", rep.max_drift) + fmt(" energy_increase=%.3g", rep.max_energy_increase)};
}

long iterations_to_gap(OptimizerKind kind, const LevProblem& p, const Matrix& x0, double eta, double tol,
                       long cap) {
  const double opt = lev_optimum(p);
  HyperSet hp;
  hp.sgd.eta = eta;
  OptimizerState s = initial_state(kind, x0);
  for (long it = 0; it <= cap; ++it) {
    const auto vg = lev_value_grad(p, position(s));
    if (vg.f - opt <= tol) return it;
    s = step_with_gradient(s, vg.G, hp);
  }
  return cap + 1;
}

Outcome lev_optimality() {
  Rng rng(105);
  const LevProblem p = lev_generate(500, 5, rng);
  const Matrix x0 = orthogonal_init<double>(500, 5, rng);
  HyperSet hp;
  RunOptions opts;
  opts.n_iters = 3000;
  opts.trace_every = 3000;
  const auto r = run(OptimizerKind::Sgd, initial_state(OptimizerKind::Sgd, x0),
                     [&](const Matrix& X) { return lev_value_grad(p, X).G; },
                     [&](const Matrix& X) { return lev_value_grad(p, X).f; }, hp, opts);
  const double gap = r.trace.back().objective - lev_optimum(p);

  std::string race;
  bool faster = true;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rs(5000 + seed);
    const LevProblem q = lev_generate(500, 5, rs);
    const Matrix y0 = orthogonal_init<double>(500, 5, rs);
    const long sgd = iterations_to_gap(OptimizerKind::Sgd, q, y0, 0.1, 1e-4, 20000);
    const long cay = iterations_to_gap(OptimizerKind::CayleyGd, q, y0, 0.1, 1e-4, 20000);
    faster = faster && sgd < cay;
    race += " " + std::to_string(sgd) + "<" + std::to_string(cay);
  }
  return {!r.aborted && gap <= 1e-6 && faster, fmt("gap=%.3g", gap) + " iters(sgd<cayley):" + race};
}

Outcome complexity() {
  HyperSet hp;
  std::vector<double> ns, ts;
  std::string detail;
  for (Index n : {250, 500, 1000, 2000}) {
    const double t = time_lev_steps(OptimizerKind::Sgd, n, 10, 200, 5, 106, hp);
    ns.push_back(static_cast<double>(n));
    ts.push_back(t);
    detail += " " + std::to_string(n) + ":" + fmt("%.0fns", t);
  }
  const double slope = fit_loglog_slope(ns, ts);
  return {slope >= 0.8 && slope <= 1.2, fmt("slope=%.3f", slope) + detail};
}

Outcome prw() {
  Rng rng(107);
  const PrwProblem p = prw_two_gaussians(10, 200, rng, 1.0);
  PrwSolveOptions opts;
  opts.hyper.sgd.eta = 3e-3;
  opts.n_outer = 500;
  const auto r = prw_solve(p, orthogonal_init<double>(10, 2, rng), opts);
  double worst = 0;
  for (double x : r.marginal_residuals) worst = std::max(worst, x);
  Rng search(108);
  const double best = prw_random_search(p, 1000, search);
  return {r.value >= 0.95 * best && worst <= 1e-6,
          fmt("value=%.6g", r.value) + fmt(" random_best=%.6g", best) + fmt(" max_residual=%.3g", worst)};
}

double rel_gap(const Matrix& fd, const Matrix& g) { return (fd - g).norm() / std::max(1e-300, g.norm()); }

Outcome gradients() {
  Rng rng(109);
  const double h = 1e-5;
  double worst = 0;
  const LevProblem lev = lev_generate(20, 4, rng);
  const PrwProblem pw = prw_two_gaussians(6, 30, rng, 1.0);
  const Matrix D = gaussian_matrix<double>(6, 3, rng);
  const Matrix Ds = gaussian_matrix<double>(4, 4, rng);
  const Matrix Ac = gaussian_matrix<double>(7, 7, rng);
  const CoupledToy toy{(Ac + Ac.transpose()) / 2, gaussian_matrix<double>(7, 1, rng)};
  for (int t = 0; t < 20; ++t) {
    const Matrix X = orthogonal_init<double>(20, 4, rng);
    worst = std::max(worst, rel_gap(finite_diff_grad([&](const Matrix& m) { return lev_value_grad(lev, m).f; }, X, h),
                                    lev_value_grad(lev, X).G));

    const Matrix U = orthogonal_init<double>(6, 2, rng);
    const Matrix pi = sinkhorn(prw_cost(pw, U), pw.r, pw.c, pw.reg).plan;
    worst = std::max(worst, rel_gap(finite_diff_grad([&](const Matrix& m) { return prw_value_grad(pw, m, pi).f; }, U, h),
                                    prw_value_grad(pw, U, pi).G));

    const Matrix Y = orthogonal_init<double>(6, 3, rng);
    worst = std::max(worst, rel_gap(finite_diff_grad([&](const Matrix& m) { return procrustes_value_grad(D, m).f; }, Y, h),
                                    procrustes_value_grad(D, Y).G));
    worst = std::max(worst, rel_gap(finite_diff_grad([&](const Matrix& m) { return quadratic_value_grad(D, m).f; }, Y, h),
                                    quadratic_value_grad(D, Y).G));
    const Matrix S = orthogonal_init<double>(4, 4, rng);
    worst = std::max(worst, rel_gap(finite_diff_grad([&](const Matrix& m) { return procrustes_value_grad(Ds, m).f; }, S, h),
                                    procrustes_value_grad(Ds, S).G));

    const Matrix Xc = orthogonal_init<double>(7, 2, rng);
    const Matrix w = gaussian_matrix<double>(7, 1, rng);
    const auto g = toy.gradient(Xc, w);
    worst = std::max(worst, rel_gap(finite_diff_grad([&](const Matrix& m) { return toy.value(m, w); }, Xc, h), g[0]));
    worst = std::max(worst, rel_gap(finite_diff_grad([&](const Matrix& m) { return toy.value(Xc, m); }, w, h), g[1]));
  }
  return {worst <= 1e-5, fmt("max_rel_err=%.3g", worst)};
}

Outcome square_case() {
  Rng rng(110);
  // n = m: U starts at zero and must stay exactly zero
  const Matrix Dq = gaussian_matrix<double>(6, 6, rng);
  auto s = SgdState<double>::at_rest(orthogonal_init<double>(6, 6, rng));
  bool u_zero = true;
  for (int i = 0; i < 1000; ++i) {
    s = sgd_step_with_gradient(s, procrustes_value_grad(Dq, s.X).G, SgdHyper<double>());
    u_zero = u_zero && s.U.cwiseAbs().maxCoeff() == 0.0;
  }

  // n = 4 Procrustes toy; D with det > 0 so the optimum lies in SO(4)
  Matrix D = gaussian_matrix<double>(4, 4, rng);
  if (D.determinant() < 0) D.col(0) *= -1;
  Eigen::JacobiSVD<Matrix> svd(D, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Matrix polar = svd.matrixU() * svd.matrixV().transpose();
  Matrix x0 = orthogonal_init<double>(4, 4, rng);
  if (x0.determinant() < 0) x0.col(0) *= -1;
  auto grad = [&](const Matrix& X) { return procrustes_value_grad(D, X).G; };

  double orth = 0;
  auto track = [&](const Matrix& X) { orth = std::max(orth, (X.transpose() * X - Matrix::Identity(4, 4)).norm()); };
  SgdHyper<double> hs;
  hs.eta = 0.05;
  auto a = SonState<double>::at_rest(x0);
  for (int i = 0; i < 5000; ++i) {
    a = son_sgd_step(a, grad, hs);
    track(a.X);
  }
  AdamHyper<double> ha;
  ha.eta = 1e-2;
  auto b = SonAdamState<double>::at_rest(x0);
  for (int i = 0; i < 5000; ++i) {
    b = son_adam_step(b, grad, ha);
    track(b.X);
  }
  // decay the Adam rate to settle inside the tolerance
  ha.eta = 1e-4;
  for (int i = 0; i < 5000; ++i) {
    b = son_adam_step(b, grad, ha);
    track(b.X);
  }
  const double da = (a.X - polar).norm(), db = (b.X - polar).norm();
  return {u_zero && orth <= 1e-12 && da <= 1e-6 && db <= 1e-6,
          std::string(u_zero ? "U=0" : "U!=0") + fmt(" orth=%.3g", orth) + fmt(" sgd_dist=%.3g", da) +
              fmt(" adam_dist=%.3g", db)};
}

Outcome mixed_groups() {
  Rng rng(111);
  const Index n = 10, m = 3;
  const Matrix g = gaussian_matrix<double>(n, n, rng);
  const CoupledToy toy{(g + g.transpose()) / (2 * std::sqrt(double(n))), gaussian_matrix<double>(n, 1, rng)};
  SharedHyper hp;
  hp.eta = 0.1;
  MixedOptimizer opt({{orthogonal_init<double>(n, m, rng), GroupKind::StiefelSgd}, {Matrix::Zero(n, 1), GroupKind::EuclideanSgd}},
                     hp);
  for (int i = 0; i < 5000; ++i)
    opt.step([&](const std::vector<Matrix>& ps) { return toy.gradient(ps[0], ps[1]); });
  const auto ps = opt.parameters();

  Eigen::SelfAdjointEigenSolver<Matrix> eig(toy.A);
  const Matrix top = eig.eigenvectors().rightCols(m);
  const double f_star = -eig.eigenvalues().tail(m).sum();
  const double gap = toy.value(ps[0], ps[1]) - f_star;
  const double subspace = (ps[0] * ps[0].transpose() - top * top.transpose()).norm();
  const double w_err = (ps[1] - top * top.transpose() * toy.b).norm();
  return {std::abs(gap) <= 1e-6 && subspace <= 1e-6 && w_err <= 1e-6,
          fmt("value_gap=%.3g", gap) + fmt(" subspace=%.3g", subspace) + fmt(" w_err=%.3g", w_err)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"structure preservation", structure_preservation},
      {"newton-schulz convergence", newton_schulz},
      {"first-order integrator", first_order},
      {"continuous-dynamics invariants", continuous_invariants},
      {"lev optimality", lev_optimality},
      {"complexity scaling", complexity},
      {"prw", prw},
      {"gradient correctness", gradients},
      {"square-case coherence", square_case},
      {"mixed parameter groups", mixed_groups},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s %zu %s: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str(), secs);
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
