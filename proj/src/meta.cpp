#include "metasre/meta.hpp"

#include <cmath>
#include <cstdio>
#include <random>

#include "metasre/error.hpp"
#include "metasre/training.hpp"

namespace metasre {

void MetaConfig::validate() const {
  if (!(inner_lr >= 0.0)) fail(ErrorKind::ConfigError, "inner_lr must be non-negative");
  if (!(outer_lr > 0.0)) fail(ErrorKind::ConfigError, "outer_lr must be positive");
  if (labeled_batch == 0 || unlabeled_batch == 0) {
    fail(ErrorKind::ConfigError, "meta batch sizes must be positive");
  }
}

ClassifierNodes inner_update(const ClassifierNodes& tau, const ad::Node& inner_loss, double alpha) {
  const auto leaves = flatten(tau);
  const auto grads = ad::grad(inner_loss, leaves, true);
  std::vector<ad::Node> updated;
  updated.reserve(leaves.size());
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    updated.push_back(alpha == 0.0 ? leaves[i] : ad::sub(leaves[i], ad::scale(grads[i], alpha)));
  }
  return unflatten(updated);
}

ad::Node meta_loss(const ClassifierNodes& tau_plus, std::span<const LabeledExample> labeled) {
  if (labeled.empty()) fail(ErrorKind::EmptyBatch, "meta loss needs labeled examples");
  return classification_loss(labeled, {}, tau_plus);
}

MetaObjective build_meta_objective(const ClassifierParams& tau, const ClassifierNodes& eta,
                                   std::span<const LabeledExample> labeled,
                                   std::span<const MarkedSequence> unlabeled, double alpha,
                                   double weight_multiplier) {
  if (labeled.empty() || unlabeled.empty()) {
    fail(ErrorKind::EmptyBatch, "meta step needs labeled and unlabeled examples");
  }
  MetaObjective obj;
  const ad::Node probs = classify(unlabeled, eta);
  const std::size_t k = probs.cols();
  std::vector<WeightedExample> pseudo;
  pseudo.reserve(unlabeled.size());
  for (std::size_t m = 0; m < unlabeled.size(); ++m) {
    const auto label = static_cast<int>(argmax(probs.value().values().subspan(m * k, k)));
    obj.pseudo_labels.push_back(label);
    pseudo.push_back({unlabeled[m], label, 1.0});
  }
  // w_m: the probability at the (constant) argmax, differentiable in eta.
  const ad::Node picked = ad::mul(probs, ad::constant(ad::one_hot(obj.pseudo_labels, k)));
  obj.pseudo_weights = ad::matmul(picked, ad::constant(Tensor(k, 1, 1.0)));
  const ad::Node weights = weight_multiplier == 1.0
                               ? obj.pseudo_weights
                               : ad::scale(obj.pseudo_weights, weight_multiplier);

  const ClassifierNodes tau_leaves = as_nodes(tau, true);
  obj.inner_loss = classification_loss(labeled, pseudo, weights, tau_leaves);
  obj.tau_plus = inner_update(tau_leaves, obj.inner_loss, alpha);
  obj.meta_loss = meta_loss(obj.tau_plus, labeled);
  return obj;
}

MetaGradient meta_gradient(const ClassifierParams& tau, const ClassifierParams& eta,
                           std::span<const LabeledExample> labeled,
                           std::span<const MarkedSequence> unlabeled, double alpha,
                           double weight_multiplier) {
  const ClassifierNodes eta_nodes = as_nodes(eta, true);
  const MetaObjective obj =
      build_meta_objective(tau, eta_nodes, labeled, unlabeled, alpha, weight_multiplier);
  const auto leaves = flatten(eta_nodes);
  MetaGradient out;
  double norm2 = 0.0;
  for (const auto& g : ad::grad(obj.meta_loss, leaves, false)) {
    out.grads.push_back(g.value());
    for (double v : g.value().values()) norm2 += v * v;
  }
  out.trace.inner_loss = obj.inner_loss.value().item();
  out.trace.meta_loss = obj.meta_loss.value().item();
  out.trace.grad_norm = std::sqrt(norm2);
  out.trace.pseudo_count = unlabeled.size();
  if (!std::isfinite(norm2) || !std::isfinite(out.trace.meta_loss)) {
    fail(ErrorKind::NonFiniteGradient, "meta gradient is not finite");
  }
  return out;
}

MetaStepResult meta_step(const ClassifierParams& tau, const ClassifierParams& eta,
                         std::span<const LabeledExample> labeled,
                         std::span<const MarkedSequence> unlabeled, const MetaConfig& cfg,
                         OptimState& eta_state) {
  cfg.validate();
  MetaGradient mg = meta_gradient(tau, eta, labeled, unlabeled, cfg.inner_lr);
  return {sgd_adam_step(eta, mg.grads, eta_state), mg.trace};
}

ClassifierParams supervised_warmup(const ClassifierParams& eta,
                                   std::span<const LabeledExample> labeled, std::size_t epochs,
                                   std::size_t batch_size, OptimState& state,
                                   std::uint64_t seed) {
  if (labeled.empty()) fail(ErrorKind::EmptyBatch, "warm-up needs labeled examples");
  std::mt19937_64 rng(seed);
  ClassifierParams current = eta;
  for (std::size_t e = 0; e < epochs; ++e) {
    current = train_epoch(current, labeled, {}, batch_size, state, rng).params;
  }
  return current;
}

void write_trace_header(std::ostream& out) {
  out << "iteration,inner_loss,meta_loss,grad_norm,pseudo_count\n";
}

void write_trace_row(std::ostream& out, std::size_t iteration, const MetaStepTrace& t) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%zu\n", iteration, t.inner_loss,
                t.meta_loss, t.grad_norm, t.pseudo_count);
  out << buf;
}

}  // namespace metasre
