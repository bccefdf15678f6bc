#pragma once

// Iteration driver shared by the CLI and the acceptance suite.

#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <variant>

#include "stiefel/optimizers.hpp"
#include "stiefel/trace.hpp"

namespace stiefel {

enum class OptimizerKind { Sgd, Adam, SonSgd, SonAdam, CayleyGd };

OptimizerKind parse_optimizer_kind(std::string_view name);
std::string_view to_string(OptimizerKind kind);

using OptimizerState =
    std::variant<SgdState<double>, AdamState<double>, SonState<double>, SonAdamState<double>,
                 StiefelPoint<double>>;

using ValueFn = std::function<double(const Matrix&)>;

struct HyperSet {
  SgdHyper<double> sgd{};  ///< sgd, son-sgd; cayley-gd uses sgd.eta
  AdamHyper<double> adam{};
};

struct RunOptions {
  long n_iters = 0;
  long trace_every = 1;
  /// Z (or Y) is replaced by skew_part(Z) every this many steps; 0 disables.
  long skew_scrub_interval = 1000;
};

struct RunResult {
  OptimizerState state;
  Trace trace;
  bool aborted = false;
  std::string abort_reason;
};

OptimizerState initial_state(OptimizerKind kind, Matrix x0);
const Matrix& position(const OptimizerState& state);
StructureErrors<double> state_structure(const OptimizerState& state);

/// One optimizer step of whichever kind `state` holds, given the gradient at
/// its current position.
OptimizerState step_with_gradient(const OptimizerState& state, const Matrix& G, const HyperSet& hp);

/// Runs n_iters steps. Trace rows are written at iteration 0, every
/// trace_every iterations and at the final iteration; wall_ns is cumulative
/// stepping time. A NONFINITE state aborts the run with the partial trace.
RunResult run(OptimizerKind kind, OptimizerState state, const GradientOracle<double>& oracle,
              const ValueFn& value, const HyperSet& hp, const RunOptions& opts);

/// State snapshot: one header line naming each block ("X", "Z", "U", "p",
/// "q") followed by the block in matrix text format, and a final
/// "step_index N" line for Adam states.
void write_state(std::ostream& os, const SgdState<double>& s);
void write_state(std::ostream& os, const AdamState<double>& s);
SgdState<double> read_sgd_state(std::istream& is);
AdamState<double> read_adam_state(std::istream& is);

}  // namespace stiefel
