#include "metasre/optim.hpp"

#include <cmath>

#include "metasre/error.hpp"

namespace metasre {

OptimState make_optim_state(const ClassifierParams& p, OptimizerKind kind, double lr) {
  if (!(lr > 0.0)) fail(ErrorKind::ConfigError, "learning rate must be positive");
  OptimState s;
  s.kind = kind;
  s.lr = lr;
  for (const Tensor& t : p.flatten()) {
    s.first_moment.emplace_back(t.rows(), t.cols());
    s.second_moment.emplace_back(t.rows(), t.cols());
  }
  return s;
}

ClassifierParams sgd_adam_step(const ClassifierParams& p, std::span<const Tensor> grads,
                               OptimState& state) {
  std::vector<Tensor> params = p.flatten();
  if (grads.size() != params.size() || state.first_moment.size() != params.size()) {
    fail(ErrorKind::ShapeError, "gradient count does not match parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!grads[i].same_shape(params[i]) || !state.first_moment[i].same_shape(params[i])) {
      fail(ErrorKind::ShapeError, "gradient shape mismatch for " + std::string(kParamNames[i]));
    }
    if (!grads[i].all_finite()) {
      fail(ErrorKind::NonFiniteGradient, "non-finite gradient for " + std::string(kParamNames[i]));
    }
  }

  ++state.step;
  if (state.kind == OptimizerKind::Sgd) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      for (std::size_t j = 0; j < params[i].size(); ++j) params[i][j] -= state.lr * grads[i][j];
    }
  } else {
    const double t = static_cast<double>(state.step);
    const double correct1 = 1.0 - std::pow(state.beta1, t);
    const double correct2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
      Tensor& m = state.first_moment[i];
      Tensor& v = state.second_moment[i];
      for (std::size_t j = 0; j < params[i].size(); ++j) {
        const double g = grads[i][j];
        m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g;
        v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g * g;
        const double m_hat = m[j] / correct1;
        const double v_hat = v[j] / correct2;
        params[i][j] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
      }
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].all_finite()) {
      fail(ErrorKind::NonFiniteGradient, "update overflowed " + std::string(kParamNames[i]));
    }
  }
  ClassifierParams out = p;
  out.assign(std::move(params));
  return out;
}

}  // namespace metasre
