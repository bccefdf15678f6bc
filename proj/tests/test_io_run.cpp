#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
#include "stiefel/matrix_io.hpp"
#include "stiefel/problems.hpp"
#include "stiefel/run.hpp"

using namespace stiefel;

namespace fs = std::filesystem;

TEST_CASE("matrix text format round trips bit for bit") {
  Rng rng(1);
  Matrix m = gaussian_matrix<double>(4, 3, rng);
  m(0, 0) = 1e-300;
  m(1, 1) = -0.1;
  std::stringstream ss;
  write_matrix(ss, m);
  CHECK(read_matrix(ss) == m);

  std::stringstream empty("0 0\n");
  CHECK_THROWS_AS(read_matrix(empty), Error);

  std::stringstream bad("2 2\n1 2\n3");
  CHECK_THROWS_AS(read_matrix(bad), Error);
  std::stringstream junk("1 1\nabc");
  CHECK_THROWS_AS(read_matrix(junk), Error);
  std::stringstream inf("1 1\ninf");
  CHECK_THROWS_AS(read_matrix(inf), Error);

  const fs::path dir = fs::temp_directory_path() / "stiefel_io_test";
  fs::create_directories(dir);
  save_matrix(dir / "m.txt", m);
  CHECK(load_matrix(dir / "m.txt") == m);
  try {
    load_matrix(dir / "missing.txt");
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Io);
  }
  fs::remove_all(dir);
}

TEST_CASE("trace csv") {
  Trace t{{0, -1.5, 1e-16, 0, 2e-15, 0}, {10, -2.25, 3e-16, 0, 1e-15, 12345}};
  std::stringstream ss;
  write_trace_csv(ss, t);
  CHECK(ss.str().rfind(kTraceHeader, 0) == 0);
  const Trace back = read_trace_csv(ss);
  REQUIRE(back.size() == 2);
  CHECK(back[1].iter == 10);
  CHECK(back[1].objective == -2.25);
  CHECK(back[0].perp == 2e-15);
  CHECK(back[1].wall_ns == 12345);

  std::stringstream wrong("a,b,c\n");
  CHECK_THROWS_AS(read_trace_csv(wrong), Error);
}

TEST_CASE("state snapshots") {
  Rng rng(2);
  const Matrix X = orthogonal_init<double>(6, 2, rng);
  SgdState<double> s{X, oracle::random_skew(2, rng), oracle::random_perp(X, rng)};
  std::stringstream ss;
  write_state(ss, s);
  const auto back = read_sgd_state(ss);
  CHECK(back.X == s.X);
  CHECK(back.Z == s.Z);
  CHECK(back.U == s.U);

  AdamState<double> a = AdamState<double>::at_rest(X);
  a = adam_step_with_gradient(a, gaussian_matrix<double>(6, 2, rng), AdamHyper<double>());
  std::stringstream sa;
  write_state(sa, a);
  const auto ab = read_adam_state(sa);
  CHECK(ab.p == a.p);
  CHECK(ab.q == a.q);
  CHECK(ab.step_index == 1);

  std::stringstream trunc("X\n1 1\n1\n");
  CHECK_THROWS_AS(read_sgd_state(trunc), Error);
}

TEST_CASE("optimizer kind names") {
  for (auto k : {OptimizerKind::Sgd, OptimizerKind::Adam, OptimizerKind::SonSgd, OptimizerKind::SonAdam,
                 OptimizerKind::CayleyGd})
    CHECK(parse_optimizer_kind(to_string(k)) == k);
  CHECK_THROWS_AS(parse_optimizer_kind("rmsprop"), Error);
  CHECK_THROWS_AS(initial_state(OptimizerKind::SonSgd, Matrix::Identity(4, 2)), Error);
}

TEST_CASE("run driver") {
  Rng rng(3);
  const LevProblem p = lev_generate(20, 3, rng);
  const Matrix x0 = orthogonal_init<double>(20, 3, rng);
  auto grad = [&](const Matrix& X) { return lev_value_grad(p, X).G; };
  auto value = [&](const Matrix& X) { return lev_value_grad(p, X).f; };

  RunOptions opts;
  opts.n_iters = 25;
  opts.trace_every = 10;
  const auto res = run(OptimizerKind::Sgd, initial_state(OptimizerKind::Sgd, x0), grad, value, HyperSet{}, opts);
  REQUIRE(res.trace.size() == 4);
  CHECK(res.trace[0].iter == 0);
  CHECK(res.trace[0].wall_ns == 0);
  CHECK(res.trace[1].iter == 10);
  CHECK(res.trace[3].iter == 25);
  CHECK(res.trace[3].wall_ns >= res.trace[2].wall_ns);
  CHECK(res.trace[3].objective == doctest::Approx(value(position(res.state))));
  CHECK(!res.aborted);

  // same result as stepping by hand
  auto s = SgdState<double>::at_rest(x0);
  for (int i = 0; i < 25; ++i) s = sgd_step_with_gradient(s, grad(s.X), SgdHyper<double>());
  CHECK(std::get<SgdState<double>>(res.state).X == s.X);

  RunOptions none;
  const auto idle = run(OptimizerKind::Adam, initial_state(OptimizerKind::Adam, x0), grad, value, HyperSet{}, none);
  CHECK(idle.trace.size() == 1);

  for (auto k : {OptimizerKind::Adam, OptimizerKind::CayleyGd}) {
    opts.n_iters = 200;
    const auto r = run(k, initial_state(k, x0), grad, value, HyperSet{}, opts);
    CHECK(r.trace.back().objective < r.trace.front().objective);
    CHECK(r.trace.back().feas <= 1e-12);
  }

  CHECK_THROWS_AS(run(OptimizerKind::Adam, initial_state(OptimizerKind::Sgd, x0), grad, value, HyperSet{}, opts),
                  Error);
  RunOptions bad = opts;
  bad.trace_every = 0;
  CHECK_THROWS_AS(run(OptimizerKind::Sgd, initial_state(OptimizerKind::Sgd, x0), grad, value, HyperSet{}, bad),
                  Error);
  HyperSet hp;
  hp.sgd.eta = -1;
  CHECK_THROWS_AS(run(OptimizerKind::Sgd, initial_state(OptimizerKind::Sgd, x0), grad, value, hp, opts), Error);
}

TEST_CASE("run aborts on a non-finite state and keeps the partial trace") {
  Rng rng(4);
  const Matrix x0 = orthogonal_init<double>(8, 2, rng);
  int calls = 0;
  auto grad = [&](const Matrix& X) -> Matrix {
    if (++calls > 5) return Matrix::Constant(X.rows(), X.cols(), std::numeric_limits<double>::quiet_NaN());
    return -X;
  };
  auto value = [](const Matrix&) { return 0.0; };
  RunOptions opts;
  opts.n_iters = 20;
  const auto r = run(OptimizerKind::Sgd, initial_state(OptimizerKind::Sgd, x0), grad, value, HyperSet{}, opts);
  CHECK(r.aborted);
  CHECK(!r.abort_reason.empty());
  CHECK(r.trace.size() == 6);
  CHECK(r.trace.back().iter == 5);
  CHECK(position(r.state).allFinite());
}

TEST_CASE("momentum scrub keeps Z skew") {
  Rng rng(5);
  RunOptions opts;
  opts.n_iters = 50;
  opts.skew_scrub_interval = 7;
  const auto r = run(OptimizerKind::SonSgd, initial_state(OptimizerKind::SonSgd, orthogonal_init<double>(4, 4, rng)),
                     [](const Matrix& X) { return (-X.transpose()).eval(); },
                     [](const Matrix& X) { return X.trace(); }, HyperSet{}, opts);
  CHECK(state_structure(r.state).skew == 0);
  CHECK(state_structure(r.state).feas <= 1e-12);
}
