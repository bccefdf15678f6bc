#include "stiefel/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>
#include <thread>

#include "stiefel/dynamics.hpp"
#include "stiefel/matrix_io.hpp"
#include "stiefel/problems.hpp"

namespace stiefel {

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::Config:
    case ErrorCode::InvalidArgument:
    case ErrorCode::DimensionMismatch:
      return kExitConfig;
    case ErrorCode::Io:
      return kExitIo;
    default:
      return kExitNumeric;
  }
}

Phi1Mode parse_phi1(std::string_view s) {
  if (s == "euler") return Phi1Mode::ForwardEuler;
  if (s == "cayley") return Phi1Mode::Cayley;
  if (s == "expm") return Phi1Mode::Expm;
  throw Error(ErrorCode::Config, "unknown phi1 mode '" + std::string(s) + "'");
}

Phi2Mode parse_phi2(std::string_view s) {
  if (s == "euler") return Phi2Mode::ForwardEuler;
  if (s == "cayley") return Phi2Mode::Cayley;
  if (s == "exact") return Phi2Mode::Exact;
  throw Error(ErrorCode::Config, "unknown phi2 mode '" + std::string(s) + "'");
}

std::string_view to_string(Phi1Mode m) {
  switch (m) {
    case Phi1Mode::ForwardEuler: return "euler";
    case Phi1Mode::Cayley: return "cayley";
    case Phi1Mode::Expm: return "expm";
  }
  return "?";
}

std::string_view to_string(Phi2Mode m) {
  switch (m) {
    case Phi2Mode::ForwardEuler: return "euler";
    case Phi2Mode::Cayley: return "cayley";
    case Phi2Mode::Exact: return "exact";
  }
  return "?";
}

HyperSet RunConfig::hyper(double default_sgd_eta, double default_adam_eta) const {
  HyperSet hp;
  hp.sgd.eta = eta.value_or(default_sgd_eta);
  hp.sgd.mu = mu;
  hp.sgd.metric = MetricParams<double>(a);
  hp.sgd.phi1 = phi1;
  hp.sgd.phi2 = phi2;
  hp.adam.eta = eta.value_or(default_adam_eta);
  hp.adam.beta1 = beta1;
  hp.adam.beta2 = beta2;
  hp.adam.eps = eps;
  hp.adam.metric = MetricParams<double>(a);
  return hp;
}

void RunConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::Config, msg); };
  if (m < 1 || n < m) fail("need n >= m >= 1");
  if (k < 1 || d < k) fail("need d >= k >= 1");
  if (points < 1) fail("points must be >= 1");
  if (!(reg > 0)) fail("reg must be > 0");
  if (inner_steps < 1) fail("inner-steps must be >= 1");
  if (iters < 0) fail("iters must be >= 0");
  if (trace_every < 1) fail("trace-every must be >= 1");
  if (!(a < 1)) fail("metric parameter a must be < 1");
  if (eta && !(*eta > 0)) fail("eta must be > 0");
  if (!(mu >= 0 && mu < 1)) fail("mu must lie in [0, 1)");
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) fail("betas must lie in [0, 1)");
  if (!(eps > 0)) fail("eps must be > 0");
  if (out.empty()) fail("out path must not be empty");
}

// ---------------------------------------------------------------------------

namespace {

struct LevSetup {
  LevProblem problem;
  Matrix x0;
  double optimum;
};

LevSetup lev_setup(Index n, Index m, std::uint64_t seed) {
  Rng rng(seed);
  LevSetup s;
  s.problem = lev_generate(n, m, rng);
  s.x0 = orthogonal_init<double>(n, m, rng);
  s.optimum = lev_optimum(s.problem);
  return s;
}

bool square_kind(OptimizerKind k) { return k == OptimizerKind::SonSgd || k == OptimizerKind::SonAdam; }

struct LevOutcome {
  RunResult result;
  double optimum = 0;
};

LevOutcome lev_run(const RunConfig& cfg) {
  if (square_kind(cfg.opt) && cfg.n != cfg.m)
    throw Error(ErrorCode::Config, "SO(n) optimizers need n == m");
  const LevSetup s = lev_setup(cfg.n, cfg.m, cfg.seed);
  const LevProblem& p = s.problem;
  RunOptions opts;
  opts.n_iters = cfg.iters;
  opts.trace_every = cfg.trace_every;
  auto result = run(
      cfg.opt, initial_state(cfg.opt, s.x0), [&](const Matrix& X) { return lev_value_grad(p, X).G; },
      [&](const Matrix& X) { return lev_value_grad(p, X).f; }, cfg.hyper(0.1, 1e-3), opts);
  return {std::move(result), s.optimum};
}

struct TraceMax {
  double feas = 0, skew = 0, perp = 0;
};

TraceMax trace_max(const Trace& t) {
  TraceMax m;
  for (const auto& r : t) {
    m.feas = std::max(m.feas, r.feas);
    m.skew = std::max(m.skew, r.skew);
    m.perp = std::max(m.perp, r.perp);
  }
  return m;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw Error(ErrorCode::Io, "cannot open '" + path + "' for writing");
  f << text;
  if (!f) throw Error(ErrorCode::Io, "failed writing '" + path + "'");
}

std::string lev_summary(const RunConfig& cfg, const LevOutcome& o) {
  const auto& last = o.result.trace.back();
  const auto mx = trace_max(o.result.trace);
  std::ostringstream s;
  s << "lev n=" << cfg.n << " m=" << cfg.m << " opt=" << to_string(cfg.opt) << " iters=" << last.iter
    << " objective=" << format_real(last.objective) << " optimum=" << format_real(o.optimum)
    << " gap=" << format_real(last.objective - o.optimum) << " max_feas=" << format_real(mx.feas)
    << " max_skew=" << format_real(mx.skew) << " max_perp=" << format_real(mx.perp)
    << " aborted=" << (o.result.aborted ? 1 : 0) << '\n';
  return s.str();
}

int lev_timing(const RunConfig& cfg, std::ostream& out) {
  const HyperSet hp = cfg.hyper(0.1, 1e-3);
  std::vector<double> ns, ls;
  std::ostringstream csv;
  csv << "n,m,ns_per_iter\n";
  for (Index n : cfg.sweep_n) {
    if (n < cfg.m) throw Error(ErrorCode::Config, "sweep-n entries must be >= m");
    const double t = time_lev_steps(cfg.opt, n, cfg.m, std::max(1L, cfg.iters), 5, cfg.seed, hp);
    ns.push_back(static_cast<double>(n));
    ls.push_back(t);
    csv << n << ',' << cfg.m << ',' << format_real(t) << '\n';
    out << "timing n=" << n << " m=" << cfg.m << " ns_per_iter=" << format_real(t) << '\n';
  }
  write_text(cfg.out, csv.str());
  if (ns.size() >= 2) out << "timing slope=" << format_real(fit_loglog_slope(ns, ls)) << '\n';
  return kExitOk;
}

}  // namespace

double time_lev_steps(OptimizerKind kind, Index n, Index m, long iters, int repeats,
                      std::uint64_t seed, const HyperSet& hp) {
  if (iters < 1 || repeats < 1) throw Error(ErrorCode::InvalidArgument, "iters, repeats >= 1");
  const LevSetup s = lev_setup(n, m, seed);
  using clock = std::chrono::steady_clock;
  std::vector<double> means;
  for (int r = 0; r < repeats; ++r) {
    OptimizerState state = initial_state(kind, s.x0);
    std::int64_t total = 0;
    for (long i = 0; i < iters; ++i) {
      const Matrix G = lev_value_grad(s.problem, position(state)).G;
      // the gradient product streams A through the cache; the step itself is
      // timed warm, as the fastest of a few identical evaluations
      std::int64_t best = std::numeric_limits<std::int64_t>::max();
      OptimizerState next;
      for (int w = 0; w < 3; ++w) {
        const auto t0 = clock::now();
        next = step_with_gradient(state, G, hp);
        best = std::min<std::int64_t>(
            best, std::chrono::duration_cast<std::chrono::nanoseconds>(clock::now() - t0).count());
      }
      total += best;
      state = std::move(next);
    }
    means.push_back(static_cast<double>(total) / static_cast<double>(iters));
  }
  std::nth_element(means.begin(), means.begin() + means.size() / 2, means.end());
  return means[means.size() / 2];
}

int cmd_lev(const RunConfig& cfg, std::ostream& out) {
  cfg.validate();
  if (!cfg.sweep_n.empty()) return lev_timing(cfg, out);
  const LevOutcome o = lev_run(cfg);
  save_trace_csv(cfg.out, o.result.trace);
  const std::string summary = lev_summary(cfg, o);
  write_text(cfg.out + ".summary", summary);
  out << summary;
  if (o.result.aborted) {
    out << "aborted: " << o.result.abort_reason << '\n';
    return kExitNumeric;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

int cmd_prw(const RunConfig& cfg, std::ostream& out) {
  cfg.validate();
  if (square_kind(cfg.opt)) throw Error(ErrorCode::Config, "PRW needs a Stiefel optimizer");
  Rng rng(cfg.seed);
  PrwProblem p;
  if (!cfg.xs_path.empty() || !cfg.ys_path.empty()) {
    if (cfg.xs_path.empty() || cfg.ys_path.empty())
      throw Error(ErrorCode::Config, "both xs and ys point files are required");
    p = make_prw_problem(load_matrix(cfg.xs_path), load_matrix(cfg.ys_path), cfg.k, cfg.reg);
  } else {
    if (cfg.k != 2) throw Error(ErrorCode::Config, "the generated instance has k = 2");
    p = prw_two_gaussians(cfg.d, cfg.points, rng, cfg.reg);
  }
  PrwSolveOptions opts;
  opts.kind = cfg.opt;
  opts.hyper = cfg.hyper(3e-3, 1e-2);
  opts.n_outer = cfg.iters;
  opts.inner_steps = cfg.inner_steps;
  const PrwResult r = prw_solve(p, orthogonal_init<double>(p.xs.cols(), p.k, rng), opts);

  save_trace_csv(cfg.out, r.trace);
  const double worst = *std::max_element(r.marginal_residuals.begin(), r.marginal_residuals.end());
  const auto mx = trace_max(r.trace);
  std::ostringstream s;
  s << "prw d=" << p.xs.cols() << " k=" << p.k << " points=" << p.xs.rows() << " opt="
    << to_string(cfg.opt) << " outer=" << cfg.iters << " value=" << format_real(r.value)
    << " max_marginal_residual=" << format_real(worst) << " max_feas=" << format_real(mx.feas) << '\n';
  write_text(cfg.out + ".summary", s.str());
  out << s.str();
  return worst <= opts.sinkhorn.tol ? kExitOk : kExitNumeric;
}

// ---------------------------------------------------------------------------

OdeCheckReport run_ode_checks(Index n, Index m, std::uint64_t seed, const std::vector<double>& gammas,
                              double horizon, double dt, double order_gamma, double a) {
  if (gammas.empty()) throw Error(ErrorCode::InvalidArgument, "need at least one gamma");
  for (double g : gammas) FrictionSpec{g}.validate();
  FrictionSpec{order_gamma}.validate();
  const MetricParams<double> mp(a);

  Rng rng(seed);
  const LevProblem p = lev_generate(n, m, rng);
  const Matrix X0 = orthogonal_init<double>(n, m, rng);
  const Matrix Y0 = skew_part(gaussian_matrix<double>(m, m, rng));
  const Matrix raw = gaussian_matrix<double>(n, m, rng);
  const Matrix V0 = raw - X0 * (X0.transpose() * raw);
  const GradientFn grad = [&p](const Matrix& X) { return lev_value_grad(p, X).G; };
  const OdeStateXYV s0{X0, Y0, V0};
  const OdeStateXQ q0{X0, X0 * Y0 + V0};

  OdeCheckReport rep;

  SgdHyper<double> base;
  base.metric = mp;
  const auto distance = [](const OdeStateXYV& u, const OdeStateXYV& v) {
    return std::sqrt((u.X - v.X).squaredNorm() + (u.Y - v.Y).squaredNorm() + (u.V - v.V).squaredNorm());
  };
  const auto est = estimate_order(discrete_sgd_map(grad, order_gamma, base),
                                  xyv_vector_field(grad, order_gamma, mp), s0, {1e-2, 5e-3, 2.5e-3},
                                  1.0, distance);
  rep.order = est.slope;
  rep.order_errors = est.errors;

  for (double gamma : gammas) {
    double prev = energy(q0, lev_value_grad(p, X0).f, mp);
    reference_integrate(xq_vector_field(grad, gamma, mp), q0, horizon, dt,
                        [&](double, const OdeStateXQ& s) {
                          const auto [feas, tangent] = xq_constraints(s);
                          rep.max_drift = std::max({rep.max_drift, feas, tangent});
                          const double e = energy(s, lev_value_grad(p, s.X).f, mp);
                          rep.max_energy_increase = std::max(rep.max_energy_increase, e - prev);
                          prev = e;
                        });
    reference_integrate(xyv_vector_field(grad, gamma, mp), s0, horizon, dt,
                        [&](double, const OdeStateXYV& s) {
                          const auto e = xyv_constraints(s);
                          rep.max_drift = std::max({rep.max_drift, e.feas, e.skew, e.perp});
                        });
  }

  const auto q1 = reference_integrate(xq_vector_field(grad, order_gamma, mp), q0, 1.0, dt);
  const auto s1 = reference_integrate(xyv_vector_field(grad, order_gamma, mp), s0, 1.0, dt);
  rep.xq_xyv_mismatch = (q1.Q - (s1.X * s1.Y + s1.V)).norm();
  return rep;
}

int cmd_ode_check(const RunConfig& cfg, std::ostream& out) {
  cfg.validate();
  for (double g : cfg.gammas)
    if (!(g > 0)) throw Error(ErrorCode::Config, "friction gamma must be > 0");
  if (cfg.gammas.empty()) throw Error(ErrorCode::Config, "need at least one gamma");
  if (!(cfg.order_gamma > 0)) throw Error(ErrorCode::Config, "order-gamma must be > 0");
  if (!(cfg.horizon > 0) || !(cfg.dt > 0)) throw Error(ErrorCode::Config, "horizon and dt must be > 0");

  const auto rep = run_ode_checks(cfg.n, cfg.m, cfg.seed, cfg.gammas, cfg.horizon, cfg.dt,
                                  cfg.order_gamma, cfg.a);
  const bool order_ok = rep.order >= 0.8 && rep.order <= 1.2;
  const bool drift_ok = rep.max_drift <= 1e-8;
  const bool energy_ok = rep.max_energy_increase <= 1e-8;
  const bool match_ok = rep.xq_xyv_mismatch <= 1e-6;
  auto flag = [](bool ok) { return ok ? "ok" : "FAIL"; };
  out << "order " << format_real(rep.order) << ' ' << flag(order_ok) << '\n';
  out << "max_constraint_drift " << format_real(rep.max_drift) << ' ' << flag(drift_ok) << '\n';
  out << "max_energy_increase " << format_real(rep.max_energy_increase) << ' ' << flag(energy_ok) << '\n';
  out << "xq_xyv_mismatch " << format_real(rep.xq_xyv_mismatch) << ' ' << flag(match_ok) << '\n';
  return order_ok && drift_ok && energy_ok && match_ok ? kExitOk : kExitNumeric;
}

// ---------------------------------------------------------------------------

namespace {

std::string cell_path(const std::string& out, double a, Phi1Mode phi1) {
  std::filesystem::path p(out);
  std::string stem = p.stem().string();
  std::string ext = p.extension().string();
  if (ext.empty()) ext = ".csv";
  stem += "_a" + format_real(a) + "_" + std::string(to_string(phi1));
  return (p.parent_path() / (stem + ext)).string();
}

unsigned thread_cap() {
  unsigned cap = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("STIEFEL_OPT_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) cap = static_cast<unsigned>(v);
  }
  return cap;
}

}  // namespace

int cmd_sweep(const RunConfig& cfg, std::ostream& out) {
  cfg.validate();
  if (cfg.a_values.empty() || cfg.phi1_values.empty())
    throw Error(ErrorCode::Config, "sweep grid is empty");
  for (double a : cfg.a_values)
    if (!(a < 1)) throw Error(ErrorCode::Config, "metric parameter a must be < 1");

  std::vector<RunConfig> cells;
  for (double a : cfg.a_values)
    for (Phi1Mode mode : cfg.phi1_values) {
      RunConfig c = cfg;
      c.a = a;
      c.phi1 = mode;
      cells.push_back(std::move(c));
    }

  // every cell rebuilds its problem from the shared seed, so cells are
  // independent and the output order is the grid order whatever the threading
  std::vector<std::optional<LevOutcome>> results(cells.size());
  std::vector<std::optional<Error>> errors(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      try {
        results[i] = lev_run(cells[i]);
      } catch (const Error& e) {
        errors[i] = e;
      }
    }
  };
  const unsigned n_threads = std::min<unsigned>(thread_cap(), static_cast<unsigned>(cells.size()));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  for (const auto& e : errors)
    if (e) throw *e;

  std::ostringstream table;
  table << "a,phi1,final_objective,gap,iters_to_tol,max_feas\n";
  int status = kExitOk;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto& o = *results[i];
    const auto& trace = o.result.trace;
    save_trace_csv(cell_path(cfg.out, cells[i].a, cells[i].phi1), trace);
    std::string to_tol = "-";
    for (const auto& r : trace)
      if (r.objective - o.optimum <= cfg.gap_tol) {
        to_tol = std::to_string(r.iter);
        break;
      }
    table << format_real(cells[i].a) << ',' << to_string(cells[i].phi1) << ','
          << format_real(trace.back().objective) << ',' << format_real(trace.back().objective - o.optimum)
          << ',' << to_tol << ',' << format_real(trace_max(trace).feas) << '\n';
    if (o.result.aborted) status = kExitNumeric;
  }
  write_text(cfg.out + ".summary", table.str());
  out << table.str();
  return status;
}

}  // namespace stiefel
