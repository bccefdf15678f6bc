#include "stiefel/run.hpp"

#include <chrono>
#include <istream>
#include <ostream>

#include "stiefel/matrix_io.hpp"

namespace stiefel {

OptimizerKind parse_optimizer_kind(std::string_view name) {
  if (name == "sgd") return OptimizerKind::Sgd;
  if (name == "adam") return OptimizerKind::Adam;
  if (name == "son-sgd") return OptimizerKind::SonSgd;
  if (name == "son-adam") return OptimizerKind::SonAdam;
  if (name == "cayley-gd") return OptimizerKind::CayleyGd;
  throw Error(ErrorCode::Config, "unknown optimizer '" + std::string(name) + "'");
}

std::string_view to_string(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::Sgd: return "sgd";
    case OptimizerKind::Adam: return "adam";
    case OptimizerKind::SonSgd: return "son-sgd";
    case OptimizerKind::SonAdam: return "son-adam";
    case OptimizerKind::CayleyGd: return "cayley-gd";
  }
  return "?";
}

OptimizerState initial_state(OptimizerKind kind, Matrix x0) {
  switch (kind) {
    case OptimizerKind::Sgd: return SgdState<double>::at_rest(std::move(x0));
    case OptimizerKind::Adam: return AdamState<double>::at_rest(std::move(x0));
    case OptimizerKind::SonSgd:
      require_square(x0, "SO(n) initial point");
      return SonState<double>::at_rest(std::move(x0));
    case OptimizerKind::SonAdam:
      require_square(x0, "SO(n) initial point");
      return SonAdamState<double>::at_rest(std::move(x0));
    case OptimizerKind::CayleyGd: return StiefelPoint<double>::unchecked(std::move(x0));
  }
  throw Error(ErrorCode::InvalidArgument, "unknown optimizer kind");
}

const Matrix& position(const OptimizerState& state) {
  return std::visit(
      [](const auto& s) -> const Matrix& {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, StiefelPoint<double>>)
          return s.matrix();
        else
          return s.X;
      },
      state);
}

StructureErrors<double> state_structure(const OptimizerState& state) {
  return std::visit(
      [](const auto& s) -> StructureErrors<double> {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, SgdState<double>> || std::is_same_v<T, AdamState<double>>) {
          return structure_errors<double>(s.X, s.Z, s.U);
        } else if constexpr (std::is_same_v<T, StiefelPoint<double>>) {
          const Matrix& x = s.matrix();
          return {(x.transpose() * x - Matrix::Identity(x.cols(), x.cols())).norm(), 0.0, 0.0};
        } else {
          const Index m = s.X.cols();
          return {(s.X.transpose() * s.X - Matrix::Identity(m, m)).norm(),
                  (s.Y + s.Y.transpose()).norm(), 0.0};
        }
      },
      state);
}

OptimizerState step_with_gradient(const OptimizerState& state, const Matrix& G, const HyperSet& hp) {
  return std::visit(
      [&](const auto& s) -> OptimizerState {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, SgdState<double>>)
          return sgd_step_with_gradient<double>(s, G, hp.sgd);
        else if constexpr (std::is_same_v<T, AdamState<double>>)
          return adam_step_with_gradient<double>(s, G, hp.adam);
        else if constexpr (std::is_same_v<T, SonState<double>>)
          return son_sgd_step_with_gradient<double>(s, G, hp.sgd);
        else if constexpr (std::is_same_v<T, SonAdamState<double>>)
          return son_adam_step_with_gradient<double>(s, G, hp.adam);
        else
          return momentumless_cayley_step<double>(s, G, hp.sgd.eta);
      },
      state);
}

namespace {

void scrub_momentum(OptimizerState& state) {
  std::visit(
      [](auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, SgdState<double>> || std::is_same_v<T, AdamState<double>>)
          s.Z = skew_part(s.Z);
        else if constexpr (std::is_same_v<T, SonState<double>> ||
                           std::is_same_v<T, SonAdamState<double>>)
          s.Y = skew_part(s.Y);
      },
      state);
}

bool state_finite(const OptimizerState& state) {
  return std::visit(
      [](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, SgdState<double>> || std::is_same_v<T, AdamState<double>>)
          return s.X.allFinite() && s.Z.allFinite() && s.U.allFinite();
        else if constexpr (std::is_same_v<T, StiefelPoint<double>>)
          return s.matrix().allFinite();
        else
          return s.X.allFinite() && s.Y.allFinite();
      },
      state);
}

TraceRow make_row(long iter, const OptimizerState& state, const ValueFn& value, std::int64_t ns) {
  const auto err = state_structure(state);
  return {iter, value(position(state)), err.feas, err.skew, err.perp, ns};
}

bool kind_matches(OptimizerKind kind, const OptimizerState& state) {
  switch (kind) {
    case OptimizerKind::Sgd: return std::holds_alternative<SgdState<double>>(state);
    case OptimizerKind::Adam: return std::holds_alternative<AdamState<double>>(state);
    case OptimizerKind::SonSgd: return std::holds_alternative<SonState<double>>(state);
    case OptimizerKind::SonAdam: return std::holds_alternative<SonAdamState<double>>(state);
    case OptimizerKind::CayleyGd: return std::holds_alternative<StiefelPoint<double>>(state);
  }
  return false;
}

}  // namespace

RunResult run(OptimizerKind kind, OptimizerState state, const GradientOracle<double>& oracle,
              const ValueFn& value, const HyperSet& hp, const RunOptions& opts) {
  if (!kind_matches(kind, state))
    throw Error(ErrorCode::InvalidArgument, "state does not match optimizer kind");
  if (opts.n_iters < 0 || opts.trace_every < 1)
    throw Error(ErrorCode::InvalidArgument, "n_iters >= 0 and trace_every >= 1 required");
  if (kind == OptimizerKind::Adam || kind == OptimizerKind::SonAdam)
    hp.adam.validate();
  else
    hp.sgd.validate();

  RunResult out{state, {}, false, {}};
  std::int64_t elapsed = 0;
  out.trace.push_back(make_row(0, out.state, value, 0));
  using clock = std::chrono::steady_clock;
  for (long it = 1; it <= opts.n_iters; ++it) {
    const auto t0 = clock::now();
    try {
      const Matrix G = oracle(position(out.state));
      OptimizerState next = step_with_gradient(out.state, G, hp);
      if (opts.skew_scrub_interval > 0 && it % opts.skew_scrub_interval == 0) scrub_momentum(next);
      if (!state_finite(next)) throw Error(ErrorCode::NonFinite, "optimizer state is not finite");
      out.state = std::move(next);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NonFinite) throw;
      out.aborted = true;
      out.abort_reason = e.what();
      return out;
    }
    elapsed += std::chrono::duration_cast<std::chrono::nanoseconds>(clock::now() - t0).count();
    if (it % opts.trace_every == 0 || it == opts.n_iters)
      out.trace.push_back(make_row(it, out.state, value, elapsed));
  }
  return out;
}

namespace {

void write_block(std::ostream& os, const char* name, const Matrix& m) {
  os << name << '\n';
  write_matrix(os, m);
}

Matrix read_block(std::istream& is, const char* name) {
  std::string tag;
  if (!(is >> tag) || tag != name)
    throw Error(ErrorCode::Io, std::string("expected state block '") + name + "'");
  return read_matrix(is);
}

}  // namespace

void write_state(std::ostream& os, const SgdState<double>& s) {
  write_block(os, "X", s.X);
  write_block(os, "Z", s.Z);
  write_block(os, "U", s.U);
}

void write_state(std::ostream& os, const AdamState<double>& s) {
  write_block(os, "X", s.X);
  write_block(os, "Z", s.Z);
  write_block(os, "U", s.U);
  write_block(os, "p", s.p);
  write_block(os, "q", s.q);
  os << "step_index " << s.step_index << '\n';
}

SgdState<double> read_sgd_state(std::istream& is) {
  SgdState<double> s;
  s.X = read_block(is, "X");
  s.Z = read_block(is, "Z");
  s.U = read_block(is, "U");
  return s;
}

AdamState<double> read_adam_state(std::istream& is) {
  AdamState<double> s;
  s.X = read_block(is, "X");
  s.Z = read_block(is, "Z");
  s.U = read_block(is, "U");
  s.p = read_block(is, "p");
  s.q = read_block(is, "q");
  std::string tag;
  if (!(is >> tag >> s.step_index) || tag != "step_index")
    throw Error(ErrorCode::Io, "expected step_index line");
  return s;
}

}  // namespace stiefel
