#include "metasre/training.hpp"

#include <algorithm>
#include <numeric>

#include "metasre/error.hpp"

namespace metasre {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

EpochPlan plan_epoch(std::size_t golden_count, std::size_t pseudo_count,
                     std::size_t golden_per_batch, std::mt19937_64& rng) {
  if (golden_count == 0) fail(ErrorKind::EmptyBatch, "an epoch needs golden examples");
  if (golden_per_batch == 0) fail(ErrorKind::ConfigError, "golden_per_batch must be positive");
  std::vector<std::size_t> g(golden_count), q(pseudo_count);
  std::iota(g.begin(), g.end(), 0);
  std::iota(q.begin(), q.end(), 0);
  std::shuffle(g.begin(), g.end(), rng);
  std::shuffle(q.begin(), q.end(), rng);
  const std::size_t batches = (golden_count + golden_per_batch - 1) / golden_per_batch;
  EpochPlan plan;
  plan.golden.resize(batches);
  plan.pseudo.resize(batches);
  for (std::size_t b = 0; b < batches; ++b) {
    const std::size_t g0 = b * golden_count / batches;
    const std::size_t g1 = (b + 1) * golden_count / batches;
    const std::size_t q0 = b * pseudo_count / batches;
    const std::size_t q1 = (b + 1) * pseudo_count / batches;
    plan.golden[b].assign(g.begin() + static_cast<std::ptrdiff_t>(g0),
                          g.begin() + static_cast<std::ptrdiff_t>(g1));
    plan.pseudo[b].assign(q.begin() + static_cast<std::ptrdiff_t>(q0),
                          q.begin() + static_cast<std::ptrdiff_t>(q1));
  }
  return plan;
}

std::vector<Tensor> loss_gradient(const ClassifierParams& p,
                                  std::span<const LabeledExample> golden,
                                  std::span<const WeightedExample> pseudo, double* loss) {
  const ClassifierNodes nodes = as_nodes(p, true);
  const ad::Node objective = classification_loss(golden, pseudo, nodes);
  if (loss) *loss = objective.value().item();
  const auto leaves = flatten(nodes);
  std::vector<Tensor> grads;
  for (const auto& g : ad::grad(objective, leaves, false)) grads.push_back(g.value());
  return grads;
}

EpochResult train_epoch(const ClassifierParams& p, std::span<const LabeledExample> golden,
                        std::span<const WeightedExample> pseudo, std::size_t golden_per_batch,
                        OptimState& state, std::mt19937_64& rng) {
  const EpochPlan plan = plan_epoch(golden.size(), pseudo.size(), golden_per_batch, rng);
  EpochResult result{p, 0.0};
  std::vector<LabeledExample> g;
  std::vector<WeightedExample> q;
  for (std::size_t b = 0; b < plan.golden.size(); ++b) {
    g.clear();
    q.clear();
    for (std::size_t i : plan.golden[b]) g.push_back(golden[i]);
    for (std::size_t i : plan.pseudo[b]) q.push_back(pseudo[i]);
    double loss = 0.0;
    const auto grads = loss_gradient(result.params, g, q, &loss);
    result.params = sgd_adam_step(result.params, grads, state);
    result.loss += loss;
  }
  return result;
}

}  // namespace metasre
