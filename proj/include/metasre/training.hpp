#pragma once

#include <random>
#include <span>

#include "metasre/networks.hpp"
#include "metasre/optim.hpp"

namespace metasre {

/// Minibatch layout for one epoch over golden and pseudo examples. Both
/// lists are shuffled independently, then split into
/// ceil(|golden| / golden_per_batch) batches with each list divided as
/// evenly as possible, so every batch carries golden examples and the
/// pseudo examples are spread across all of them.
struct EpochPlan {
  std::vector<std::vector<std::size_t>> golden;  // per batch, indices into golden
  std::vector<std::vector<std::size_t>> pseudo;  // per batch, indices into pseudo
};

EpochPlan plan_epoch(std::size_t golden_count, std::size_t pseudo_count,
                     std::size_t golden_per_batch, std::mt19937_64& rng);

struct EpochResult {
  ClassifierParams params;
  /// Sum of the per-batch losses seen during the epoch.
  double loss = 0.0;
};

/// One optimizer step per planned batch on classification_loss.
/// Throws NonFiniteGradient if a gradient blows up.
EpochResult train_epoch(const ClassifierParams& p, std::span<const LabeledExample> golden,
                        std::span<const WeightedExample> pseudo, std::size_t golden_per_batch,
                        OptimState& state, std::mt19937_64& rng);

/// Gradient of classification_loss over the whole given batch.
std::vector<Tensor> loss_gradient(const ClassifierParams& p,
                                  std::span<const LabeledExample> golden,
                                  std::span<const WeightedExample> pseudo, double* loss = nullptr);

/// Seed derivation for independent streams (splitmix64 finalizer).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace metasre
