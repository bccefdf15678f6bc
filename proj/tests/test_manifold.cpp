#include "doctest.h"
#include "oracles.hpp"
#include "stiefel/manifold.hpp"
#include "stiefel/problems.hpp"
#include "stiefel/run.hpp"

using namespace stiefel;

namespace {

struct Fixture {
  Rng rng{21};
  Index n = 9, m = 4;
  Matrix X = orthogonal_init<double>(n, m, rng);
  StiefelPoint<double> x{X};
};

}  // namespace

TEST_CASE("metric parameters") {
  CHECK(MetricParams<double>(0.0).b() == 0.0);
  CHECK(MetricParams<double>(0.5).b() == -1.0);
  CHECK(MetricParams<double>().a() == 0.5);
  CHECK_THROWS_AS(MetricParams<double>(1.0), Error);
  CHECK_THROWS_AS(MetricParams<double>(2.0), Error);
}

TEST_CASE("stiefel point construction") {
  Fixture f;
  CHECK(f.x.n() == 9);
  CHECK(f.x.m() == 4);
  CHECK_THROWS_AS(StiefelPoint<double>(Matrix(2 * f.X)), Error);
  CHECK_NOTHROW(StiefelPoint<double>::unchecked(2 * f.X));
  CHECK_THROWS_AS(StiefelPoint<double>(Matrix(2, 3)), Error);
}

TEST_CASE("metric inner product") {
  Fixture f;
  const Matrix d1 = gaussian_matrix<double>(f.n, f.m, f.rng);
  const Matrix d2 = gaussian_matrix<double>(f.n, f.m, f.rng);
  CHECK(std::abs(metric_inner(f.x, d1, d2, MetricParams<double>(0.0)) - (d1.transpose() * d2).trace()) <
        1e-12);
  CHECK(metric_inner(f.x, Matrix::Zero(f.n, f.m).eval(), Matrix::Zero(f.n, f.m).eval(),
                     MetricParams<double>()) == 0);
  // symmetric in its arguments, and equal to Tr(D1^T (I - a X X^T) D2)
  const MetricParams<double> mp(0.3);
  CHECK(std::abs(metric_inner(f.x, d1, d2, mp) - metric_inner(f.x, d2, d1, mp)) < 1e-12);
  const Matrix P = Matrix::Identity(f.n, f.n) - 0.3 * f.X * f.X.transpose();
  CHECK(std::abs(metric_inner(f.x, d1, d2, mp) - (d1.transpose() * P * d2).trace()) < 1e-12);

  for (double a : {0.5, 0.0, -1.0, 0.9}) {
    for (int t = 0; t < 10; ++t) {
      const Matrix Y = oracle::random_skew(f.m, f.rng);
      const Matrix V = oracle::random_perp(f.X, f.rng);
      const Matrix D = f.X * Y + V;
      const double g = metric_inner(f.x, D, D, MetricParams<double>(a));
      CHECK(std::abs(g - ((1 - a) * (Y.transpose() * Y).trace() + (V.transpose() * V).trace())) <=
            1e-10 * std::max(1.0, g));
      CHECK(g >= (1 - std::max(a, 0.0)) * D.squaredNorm() - 1e-10);
    }
  }
  CHECK_THROWS_AS(metric_inner(f.x, Matrix(3, 3), d2, mp), Error);
}

TEST_CASE("tangent decomposition round trips") {
  Fixture f;
  const auto zero = decompose_tangent(f.x, Matrix::Zero(f.n, f.m).eval());
  CHECK(zero.Y.norm() == 0);
  CHECK(zero.V.norm() == 0);

  const Matrix S = oracle::random_skew(f.m, f.rng);
  const auto rot = decompose_tangent(f.x, (f.X * S).eval());
  CHECK((rot.Y - S).norm() < 1e-12);
  CHECK(rot.V.norm() < 1e-12);

  for (int t = 0; t < 10; ++t) {
    const Matrix Y0 = oracle::random_skew(f.m, f.rng);
    const Matrix R = gaussian_matrix<double>(f.n, f.m, f.rng);
    const Matrix V0 = (Matrix::Identity(f.n, f.n) - f.X * f.X.transpose()) * R;
    const Matrix Q = f.X * Y0 + V0;
    const auto yv = decompose_tangent(f.x, Q);
    CHECK((yv.Y - Y0).norm() < 1e-12);
    CHECK((yv.V - V0).norm() < 1e-12);
    const Matrix back = compose_tangent(f.x, yv);
    CHECK((back - Q).norm() < 1e-12);
    CHECK((f.X.transpose() * back + back.transpose() * f.X).norm() < 1e-10);
    const auto again = decompose_tangent(f.x, compose_tangent(f.x, TangentYV<double>{Y0, V0}));
    CHECK((again.Y - Y0).norm() < 1e-12);
    CHECK((again.V - V0).norm() < 1e-12);
  }
  CHECK(compose_tangent(f.x, TangentYV<double>{Matrix::Zero(f.m, f.m), Matrix::Zero(f.n, f.m)}).norm() ==
        0);
  CHECK((compose_tangent(f.x, TangentYV<double>{S, Matrix::Zero(f.n, f.m)}) - f.X * S).norm() == 0);

  const Matrix not_tangent = f.X * Matrix::Identity(f.m, f.m);
  try {
    decompose_tangent(f.x, not_tangent);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotTangent);
  }
}

TEST_CASE("gradient terms") {
  Fixture f;
  const MetricParams<double> mp;
  const auto z = gradient_terms(f.x, Matrix::Zero(f.n, f.m).eval(), mp);
  CHECK(z.fY.norm() == 0);
  CHECK(z.gV.norm() == 0);

  const Matrix Ssym = oracle::random_symmetric(f.m, f.rng);
  const auto normal = gradient_terms(f.x, (f.X * Ssym).eval(), mp);
  CHECK(normal.fY.norm() < 1e-13);
  CHECK(normal.gV.norm() < 1e-13);

  for (int t = 0; t < 20; ++t) {
    const Matrix G = 10 * gaussian_matrix<double>(f.n, f.m, f.rng);
    const auto g = gradient_terms(f.x, G, MetricParams<double>(t % 2 ? 0.0 : 0.5));
    CHECK((g.fY + g.fY.transpose()).norm() == 0);
    CHECK((f.X.transpose() * g.gV).norm() < 1e-12);
  }

  // square case: gV is identically zero
  Rng rng(1);
  const Matrix Q = orthogonal_init<double>(5, 5, rng);
  CHECK(gradient_terms<double>(Q, gaussian_matrix<double>(5, 5, rng), mp).gV.norm() == 0);

  // at a converged LEV run both terms vanish
  Rng r2(6);
  const LevProblem p = lev_generate(30, 3, r2);
  RunOptions opts;
  opts.n_iters = 3000;
  opts.trace_every = 3000;
  const auto res = run(OptimizerKind::Sgd, initial_state(OptimizerKind::Sgd, orthogonal_init<double>(30, 3, r2)),
                       [&](const Matrix& X) { return lev_value_grad(p, X).G; },
                       [&](const Matrix& X) { return lev_value_grad(p, X).f; }, HyperSet{}, opts);
  const Matrix& Xc = position(res.state);
  const auto g = gradient_terms<double>(Xc, lev_value_grad(p, Xc).G, mp);
  CHECK(g.fY.norm() + g.gV.norm() <= 1e-6);
}

TEST_CASE("structure errors") {
  Fixture f;
  const Matrix Z = oracle::random_skew(f.m, f.rng);
  const Matrix U = oracle::random_perp(f.X, f.rng);
  const auto e = structure_errors<double>(f.X, Z, U);
  CHECK(e.feas <= 1e-12);
  CHECK(e.skew <= 1e-15);
  CHECK(e.perp <= 1e-12);
  const auto s = structure_errors<double>((2 * f.X).eval(), Z, U);
  CHECK(std::abs(s.feas - 3 * std::sqrt(double(f.m))) < 1e-12);
  CHECK_THROWS_AS(structure_errors<double>(f.X, U, Z), Error);
}
