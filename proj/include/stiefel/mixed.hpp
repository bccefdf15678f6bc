#pragma once

// Joint optimization of Stiefel and Euclidean parameter blocks with a single
// shared learning rate.

#include <functional>
#include <utility>
#include <variant>
#include <vector>

#include "stiefel/optimizers.hpp"

namespace stiefel {

enum class GroupKind { StiefelSgd, StiefelAdam, EuclideanSgd, EuclideanAdam };

struct SharedHyper {
  double eta = 0.1;
  double mu = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  MetricParams<double> metric{};
};

/// Gradient of the joint objective with respect to every block, in order.
using JointGradient = std::function<std::vector<Matrix>(const std::vector<Matrix>&)>;

class MixedOptimizer {
 public:
  MixedOptimizer(std::vector<std::pair<Matrix, GroupKind>> groups, SharedHyper hp);

  /// One step of every group; the joint gradient is evaluated once at the
  /// current parameters.
  void step(const JointGradient& gradient);

  std::vector<Matrix> parameters() const;
  std::size_t size() const { return groups_.size(); }

 private:
  struct HeavyBall {
    Matrix x, v;
  };
  struct EuclideanAdam {
    Matrix x, m, v;
    long t = 0;
  };
  using GroupState = std::variant<SgdState<double>, AdamState<double>, HeavyBall, EuclideanAdam>;

  std::vector<GroupState> groups_;
  SharedHyper hp_;
};

}  // namespace stiefel
