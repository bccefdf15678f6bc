#include <cctype>
#include <fstream>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "stiefel/bench.hpp"

namespace stiefel {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// `key = value` lines become `--key value` arguments; '#' starts a comment.
std::vector<std::string> config_args(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::Io, "cannot open config '" + path + "'");
  std::vector<std::string> args;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorCode::Config, path + ":" + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::replace(key.begin(), key.end(), '_', '-');
    if (key.empty() || key == "config")
      throw Error(ErrorCode::Config, path + ":" + std::to_string(lineno) + ": bad key");
    args.push_back("--" + key);
    args.push_back(trim(line.substr(eq + 1)));
  }
  return args;
}

template <typename T>
std::vector<T> parse_list(const std::string& text, const char* what) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    std::istringstream is(item);
    T v{};
    if (!(is >> v) || !is.eof())
      throw Error(ErrorCode::Config, std::string("bad entry '") + item + "' in " + what);
    out.push_back(v);
  }
  return out;
}

struct RawOptions {
  std::string opt = "sgd", phi1 = "euler", phi2 = "euler";
  std::optional<std::string> sweep_n, gammas, a_values, phi1_values;
  std::string config;
};

void add_common(CLI::App* sub, RunConfig& cfg, RawOptions& raw) {
  sub->add_option("--n", cfg.n, "rows of X");
  sub->add_option("--m", cfg.m, "columns of X");
  sub->add_option("--seed", cfg.seed, "random seed");
  sub->add_option("--opt", raw.opt, "sgd | adam | son-sgd | son-adam | cayley-gd");
  sub->add_option("--eta", cfg.eta, "learning rate");
  sub->add_option("--mu", cfg.mu, "momentum");
  sub->add_option("--beta1", cfg.beta1);
  sub->add_option("--beta2", cfg.beta2);
  sub->add_option("--eps", cfg.eps);
  sub->add_option("--a", cfg.a, "metric parameter, a < 1");
  sub->add_option("--phi1", raw.phi1, "euler | cayley | expm");
  sub->add_option("--phi2", raw.phi2, "euler | cayley | exact");
  sub->add_option("--iters", cfg.iters, "iterations (outer iterations for prw)");
  sub->add_option("--trace-every", cfg.trace_every);
  sub->add_option("--out", cfg.out, "trace path");
  sub->add_option("--config", raw.config, "key = value file, overridden by flags");
}

RunConfig finish(RunConfig cfg, const RawOptions& raw) {
  cfg.opt = parse_optimizer_kind(raw.opt);
  cfg.phi1 = parse_phi1(raw.phi1);
  cfg.phi2 = parse_phi2(raw.phi2);
  if (raw.sweep_n) cfg.sweep_n = parse_list<Index>(*raw.sweep_n, "sweep-n");
  if (raw.gammas) cfg.gammas = parse_list<double>(*raw.gammas, "gammas");
  if (raw.a_values) cfg.a_values = parse_list<double>(*raw.a_values, "a-values");
  if (raw.phi1_values) {
    cfg.phi1_values.clear();
    std::stringstream ss(*raw.phi1_values);
    std::string item;
    while (std::getline(ss, item, ','))
      if (!trim(item).empty()) cfg.phi1_values.push_back(parse_phi1(trim(item)));
  }
  return cfg;
}

// Pulls --config PATH / --config=PATH out of the arguments after the
// subcommand and splices the file's options in front of the remaining flags.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  if (args.size() < 2) return args;
  std::vector<std::string> rest;
  std::string path;
  for (std::size_t i = 2; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
    } else {
      rest.push_back(args[i]);
    }
  }
  std::vector<std::string> out{args[0], args[1]};
  if (!path.empty()) {
    const auto from_file = config_args(path);
    out.insert(out.end(), from_file.begin(), from_file.end());
  }
  out.insert(out.end(), rest.begin(), rest.end());
  return out;
}

}  // namespace

int bench_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  RawOptions raw;

  CLI::App app{"Stiefel-manifold optimizer benchmarks", "stiefel_bench"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);

  auto* lev = app.add_subcommand("lev", "leading eigenvalue run or timing sweep");
  add_common(lev, cfg, raw);
  lev->add_option("--sweep-n", raw.sweep_n, "comma list of n for a timing sweep");

  auto* prw = app.add_subcommand("prw", "Projection Robust Wasserstein run");
  add_common(prw, cfg, raw);
  prw->add_option("--d", cfg.d, "ambient dimension of the generated instance");
  prw->add_option("--k", cfg.k, "projection dimension");
  prw->add_option("--points", cfg.points, "points per cloud in the generated instance");
  prw->add_option("--reg", cfg.reg, "entropic regularization");
  prw->add_option("--inner-steps", cfg.inner_steps, "Stiefel steps per Sinkhorn solve");
  prw->add_option("--xs", cfg.xs_path, "source point cloud (matrix text format)");
  prw->add_option("--ys", cfg.ys_path, "target point cloud (matrix text format)");

  auto* ode = app.add_subcommand("ode-check", "continuous-dynamics self-checks");
  add_common(ode, cfg, raw);
  ode->add_option("--gammas", raw.gammas, "comma list of frictions");
  ode->add_option("--order-gamma", cfg.order_gamma, "friction for the order estimate");
  ode->add_option("--horizon", cfg.horizon, "integration time");
  ode->add_option("--dt", cfg.dt, "RK4 step");

  auto* sweep = app.add_subcommand("sweep", "metric x phi1-mode grid of LEV runs");
  add_common(sweep, cfg, raw);
  sweep->add_option("--a-values", raw.a_values, "comma list of metric parameters");
  sweep->add_option("--phi1-values", raw.phi1_values, "comma list of phi1 modes");
  sweep->add_option("--gap-tol", cfg.gap_tol, "gap defining iterations-to-tolerance");

  try {
    std::vector<std::string> args(argv, argv + argc);
    args = expand_config(args);
    // CLI11 consumes arguments in reverse order
    std::vector<std::string> reversed(args.rbegin(), args.rend() - 1);
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  }

  try {
    const RunConfig final_cfg = finish(cfg, raw);
    if (lev->parsed()) return cmd_lev(final_cfg, out);
    if (prw->parsed()) return cmd_prw(final_cfg, out);
    if (ode->parsed()) return cmd_ode_check(final_cfg, out);
    return cmd_sweep(final_cfg, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumeric;
  }
}

}  // namespace stiefel
