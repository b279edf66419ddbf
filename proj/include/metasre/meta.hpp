#pragma once

#include <cstdint>
#include <ostream>
#include <span>
#include <vector>

#include "metasre/networks.hpp"
#include "metasre/optim.hpp"

namespace metasre {

struct MetaConfig {
  /// alpha: step size of the differentiable inner descent step.
  double inner_lr = 1e-4;
  /// Learning rate of the adaptive optimizer applied to the generator.
  double outer_lr = 1e-4;
  /// Supervised cross-entropy warm-up of the generator before meta updates.
  bool supervised_warmup = true;
  std::size_t warmup_epochs = 1;
  std::size_t labeled_batch = 16;
  std::size_t unlabeled_batch = 16;

  void validate() const;
};

struct MetaStepTrace {
  double inner_loss = 0.0;
  double meta_loss = 0.0;
  double grad_norm = 0.0;
  std::size_t pseudo_count = 0;
};

/// tau+ = tau - alpha * d inner_loss / d tau, kept differentiable with
/// respect to every upstream leaf (including the generator's parameters
/// when the inner loss contains generator-weighted terms).
ClassifierNodes inner_update(const ClassifierNodes& tau, const ad::Node& inner_loss, double alpha);

/// Sum of labeled cross-entropies under the updated classifier.
/// EmptyBatch on empty input.
ad::Node meta_loss(const ClassifierNodes& tau_plus, std::span<const LabeledExample> labeled);

/// The full bilevel graph for one meta step.
struct MetaObjective {
  ad::Node inner_loss;
  ClassifierNodes tau_plus;
  ad::Node meta_loss;
  /// Generator confidences (max probability) on the unlabeled batch, [M x 1].
  ad::Node pseudo_weights;
  std::vector<int> pseudo_labels;
};

/// Builds inner loss = golden terms + w_m-weighted pseudo terms from the
/// generator's argmax labels and max-probability weights on `unlabeled`,
/// takes the inner step and evaluates the meta loss. `weight_multiplier`
/// scales every w_m (1 in normal use; 0 severs the generator path).
MetaObjective build_meta_objective(const ClassifierParams& tau, const ClassifierNodes& eta,
                                   std::span<const LabeledExample> labeled,
                                   std::span<const MarkedSequence> unlabeled, double alpha,
                                   double weight_multiplier = 1.0);

struct MetaGradient {
  std::vector<Tensor> grads;  // d meta_loss / d eta, in parameter order
  MetaStepTrace trace;
};

MetaGradient meta_gradient(const ClassifierParams& tau, const ClassifierParams& eta,
                           std::span<const LabeledExample> labeled,
                           std::span<const MarkedSequence> unlabeled, double alpha,
                           double weight_multiplier = 1.0);

struct MetaStepResult {
  ClassifierParams eta;
  MetaStepTrace trace;
};

/// One generator update through the second-order path. `tau` is read only.
/// EmptyBatch on empty batches, NonFiniteGradient on divergence.
MetaStepResult meta_step(const ClassifierParams& tau, const ClassifierParams& eta,
                         std::span<const LabeledExample> labeled,
                         std::span<const MarkedSequence> unlabeled, const MetaConfig& cfg,
                         OptimState& eta_state);

/// Plain cross-entropy training of the generator on labeled data only.
ClassifierParams supervised_warmup(const ClassifierParams& eta,
                                   std::span<const LabeledExample> labeled, std::size_t epochs,
                                   std::size_t batch_size, OptimState& state,
                                   std::uint64_t seed);

/// CSV diagnostics stream: iteration,inner_loss,meta_loss,grad_norm,pseudo_count
void write_trace_header(std::ostream& out);
void write_trace_row(std::ostream& out, std::size_t iteration, const MetaStepTrace& t);

}  // namespace metasre
