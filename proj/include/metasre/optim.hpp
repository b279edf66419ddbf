#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "metasre/networks.hpp"

namespace metasre {

enum class OptimizerKind { Adam, Sgd };

/// Adaptive-moment (or plain descent) state for one parameter set.
struct OptimState {
  OptimizerKind kind = OptimizerKind::Adam;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
  std::uint64_t step = 0;
};

OptimState make_optim_state(const ClassifierParams& p, OptimizerKind kind, double lr);

/// One update with bias-corrected moments (Adam) or p - lr g (Sgd). Returns
/// the new parameters and advances `state`. ShapeError on mismatched
/// gradients, NonFiniteGradient on NaN/Inf gradients or parameters.
ClassifierParams sgd_adam_step(const ClassifierParams& p, std::span<const Tensor> grads,
                               OptimState& state);

}  // namespace metasre
