#include "stiefel/mixed.hpp"

#include <cmath>

namespace stiefel {

MixedOptimizer::MixedOptimizer(std::vector<std::pair<Matrix, GroupKind>> groups, SharedHyper hp)
    : hp_(std::move(hp)) {
  if (groups.empty()) throw Error(ErrorCode::InvalidArgument, "no parameter groups");
  for (auto& [value, kind] : groups) {
    switch (kind) {
      case GroupKind::StiefelSgd:
        groups_.emplace_back(SgdState<double>::at_rest(std::move(value)));
        break;
      case GroupKind::StiefelAdam:
        groups_.emplace_back(AdamState<double>::at_rest(std::move(value)));
        break;
      case GroupKind::EuclideanSgd: {
        Matrix v = Matrix::Zero(value.rows(), value.cols());
        groups_.emplace_back(HeavyBall{std::move(value), std::move(v)});
        break;
      }
      case GroupKind::EuclideanAdam: {
        Matrix z = Matrix::Zero(value.rows(), value.cols());
        groups_.emplace_back(EuclideanAdam{std::move(value), z, z, 0});
        break;
      }
    }
  }
}

std::vector<Matrix> MixedOptimizer::parameters() const {
  std::vector<Matrix> out;
  out.reserve(groups_.size());
  for (const auto& g : groups_)
    std::visit(
        [&](const auto& s) {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, HeavyBall> || std::is_same_v<T, EuclideanAdam>)
            out.push_back(s.x);
          else
            out.push_back(s.X);
        },
        g);
  return out;
}

void MixedOptimizer::step(const JointGradient& gradient) {
  const std::vector<Matrix> grads = gradient(parameters());
  if (grads.size() != groups_.size())
    throw Error(ErrorCode::DimensionMismatch, "joint gradient has wrong number of blocks");

  SgdHyper<double> sgd;
  sgd.eta = hp_.eta;
  sgd.mu = hp_.mu;
  sgd.metric = hp_.metric;
  AdamHyper<double> adam{hp_.eta, hp_.beta1, hp_.beta2, hp_.eps, hp_.metric};

  for (std::size_t i = 0; i < groups_.size(); ++i) {
    const Matrix& G = grads[i];
    std::visit(
        [&](auto& s) {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, SgdState<double>>) {
            s = sgd_step_with_gradient<double>(std::move(s), G, sgd);
          } else if constexpr (std::is_same_v<T, AdamState<double>>) {
            s = adam_step_with_gradient<double>(std::move(s), G, adam);
          } else if constexpr (std::is_same_v<T, HeavyBall>) {
            // same rescaled convention as the Stiefel blocks: v <- mu v - g, x <- x + eta v
            s.v = hp_.mu * s.v - G;
            s.x += hp_.eta * s.v;
          } else {
            ++s.t;
            s.m = hp_.beta1 * s.m + (1 - hp_.beta1) * G;
            s.v = hp_.beta2 * s.v + (1 - hp_.beta2) * G.cwiseProduct(G);
            const double c1 = 1 - std::pow(hp_.beta1, static_cast<double>(s.t));
            const double c2 = 1 - std::pow(hp_.beta2, static_cast<double>(s.t));
            s.x -= hp_.eta *
                   ((s.m / c1).array() / ((s.v / c2).array().sqrt() + hp_.eps)).matrix();
          }
        },
        groups_[i]);
  }
}

}  // namespace stiefel
