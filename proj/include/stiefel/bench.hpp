#pragma once

// Benchmark commands behind the stiefel_bench executable. Each command takes
// a fully parsed RunConfig, writes its traces and returns a process exit
// status: 0 success, 2 config error, 3 numeric failure, 4 I/O failure.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "stiefel/optimizers.hpp"
#include "stiefel/run.hpp"

namespace stiefel {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumeric = 3;
inline constexpr int kExitIo = 4;

int exit_code_for(ErrorCode code);

struct RunConfig {
  // lev / sweep
  Index n = 100;
  Index m = 10;
  // prw
  Index d = 10;
  Index k = 2;
  Index points = 200;
  double reg = 1.0;
  int inner_steps = 1;
  std::string xs_path, ys_path;  ///< point clouds; generated when empty

  std::uint64_t seed = 7;
  OptimizerKind opt = OptimizerKind::Sgd;
  std::optional<double> eta;  ///< default depends on optimizer and command
  double mu = 0.9;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  double a = 0.5;
  Phi1Mode phi1 = Phi1Mode::ForwardEuler;
  Phi2Mode phi2 = Phi2Mode::ForwardEuler;
  long iters = 3000;
  long trace_every = 1;
  std::string out = "trace.csv";

  // lev timing sweep: fixed iters, varying n
  std::vector<Index> sweep_n;

  // ode-check
  std::vector<double> gammas{0.5, 1.0, 5.0};
  double horizon = 5.0;
  double dt = 1e-3;
  double order_gamma = 1.0;

  // sweep
  std::vector<double> a_values{0.0, 0.5};
  std::vector<Phi1Mode> phi1_values{Phi1Mode::ForwardEuler, Phi1Mode::Cayley, Phi1Mode::Expm};
  double gap_tol = 1e-6;

  HyperSet hyper(double default_sgd_eta, double default_adam_eta) const;
  void validate() const;
};

Phi1Mode parse_phi1(std::string_view s);
Phi2Mode parse_phi2(std::string_view s);
std::string_view to_string(Phi1Mode m);
std::string_view to_string(Phi2Mode m);

int cmd_lev(const RunConfig& cfg, std::ostream& out);
int cmd_prw(const RunConfig& cfg, std::ostream& out);
int cmd_ode_check(const RunConfig& cfg, std::ostream& out);
int cmd_sweep(const RunConfig& cfg, std::ostream& out);

/// Results of the dynamics self-checks, shared with the test suites.
struct OdeCheckReport {
  double order = 0;
  std::vector<double> order_errors;
  double max_drift = 0;           ///< worst constraint residual over all trajectories
  double max_energy_increase = 0; ///< worst E(t_{k+1}) - E(t_k), clipped below at 0
  double xq_xyv_mismatch = 0;     ///< ||Q - (XY + V)|| at T = 1
};

/// LEV-driven checks on St(n, m): first-order estimate of the composed SGD
/// map at friction order_gamma, constraint drift of both ODE forms and energy
/// monotonicity for every gamma, over [0, horizon] with RK4 step dt.
OdeCheckReport run_ode_checks(Index n, Index m, std::uint64_t seed, const std::vector<double>& gammas,
                              double horizon, double dt, double order_gamma, double a);

/// Per-step optimizer wall time in nanoseconds on a LEV instance of size
/// n x m: the median over `repeats` runs of the mean time of `iters` steps.
/// Gradient evaluation is excluded so the figure is the optimizer's own cost,
/// and each step is timed as the fastest of three identical evaluations.
double time_lev_steps(OptimizerKind kind, Index n, Index m, long iters, int repeats,
                      std::uint64_t seed, const HyperSet& hp);

/// Entry point of the CLI: `stiefel_bench <lev|prw|ode-check|sweep> [flags]`.
/// A --config file of `key = value` lines is applied before the command-line
/// flags, so explicit flags win.
int bench_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace stiefel
