#include "metasre/selftrain.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "metasre/error.hpp"
#include "metasre/training.hpp"

namespace metasre {

void SelfTrainConfig::validate() const {
  if (!(z_percent > 0.0 && z_percent <= 100.0)) fail(ErrorKind::ConfigError, "Z% must lie in (0, 100]");
  if (num_batches == 0) fail(ErrorKind::ConfigError, "need at least one unlabeled batch");
  if (golden_per_batch == 0) fail(ErrorKind::ConfigError, "golden_per_batch must be positive");
  if (!(rcn_lr > 0.0)) fail(ErrorKind::ConfigError, "rcn_lr must be positive");
}

std::vector<PseudoLabel> generate_pseudo_labels(const ClassifierParams& labeler,
                                                std::span<const MarkedSequence> batch) {
  if (batch.empty()) fail(ErrorKind::EmptyBatch, "no mentions to pseudo-label");
  const Tensor probs = predict_probabilities(batch, labeler);
  const std::size_t k = probs.cols();
  std::vector<PseudoLabel> out(batch.size());
  for (std::size_t m = 0; m < batch.size(); ++m) {
    const auto row = probs.values().subspan(m * k, k);
    const std::size_t best = argmax(row);
    out[m] = {m, static_cast<int>(best), row[best]};
  }
  return out;
}

std::size_t selection_size(std::size_t count, double z_percent) {
  const double exact = z_percent * static_cast<double>(count) / 100.0;
  return std::min(count, static_cast<std::size_t>(std::ceil(exact - 1e-9)));
}

Metrics pseudo_label_f1(std::span<const PseudoLabel> pseudo, const ShadowLabels& shadow,
                        std::optional<int> no_relation_index) {
  std::vector<int> predicted, gold;
  for (const auto& p : pseudo) {
    predicted.push_back(p.label);
    gold.push_back(shadow.at(p.mention_index));
  }
  return micro_prf(predicted, gold, no_relation_index);
}

std::vector<PseudoLabel> select_top(std::span<const PseudoLabel> labels, double z_percent) {
  if (labels.empty()) fail(ErrorKind::EmptyBatch, "nothing to select from");
  if (!(z_percent > 0.0 && z_percent <= 100.0)) fail(ErrorKind::ConfigError, "Z% must lie in (0, 100]");
  std::vector<PseudoLabel> sorted(labels.begin(), labels.end());
  std::sort(sorted.begin(), sorted.end(), [](const PseudoLabel& a, const PseudoLabel& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    return a.mention_index < b.mention_index;
  });
  sorted.resize(selection_size(labels.size(), z_percent));
  return sorted;
}

std::vector<WeightedExample> exploit(std::span<const PseudoLabel> selected,
                                     std::span<const MarkedSequence> pool, bool uniform_weights) {
  std::vector<WeightedExample> out;
  out.reserve(selected.size());
  for (const auto& p : selected) {
    if (p.mention_index >= pool.size()) {
      fail(ErrorKind::IndexError, "pseudo label refers to mention " +
                                      std::to_string(p.mention_index) + " of " +
                                      std::to_string(pool.size()));
    }
    out.push_back({pool[p.mention_index], p.label, uniform_weights ? 1.0 : p.confidence});
  }
  return out;
}

namespace {

Metrics evaluate(const IncrementalInputs& in, const ClassifierParams& tau) {
  if (in.test_inputs.empty()) return micro_prf({}, {}, in.no_relation_index);
  const auto predictions = predict_labels(in.test_inputs, tau);
  return micro_prf(predictions, in.test_golds, in.no_relation_index);
}

MetaStepTrace mean_trace(std::span<const MetaStepTrace> traces) {
  MetaStepTrace m;
  if (traces.empty()) return m;
  for (const auto& t : traces) {
    m.inner_loss += t.inner_loss;
    m.meta_loss += t.meta_loss;
    m.grad_norm += t.grad_norm;
    m.pseudo_count += t.pseudo_count;
  }
  const auto n = static_cast<double>(traces.size());
  m.inner_loss /= n;
  m.meta_loss /= n;
  m.grad_norm /= n;
  m.pseudo_count /= traces.size();
  return m;
}

/// One pass of meta steps: shuffled labeled chunks, each paired with the
/// next chunk of the (cyclically traversed, shuffled) unlabeled batch.
std::vector<MetaStepTrace> meta_pass(const ClassifierParams& tau, ClassifierParams& eta,
                                     std::span<const LabeledExample> labeled,
                                     std::span<const MarkedSequence> batch,
                                     const MetaConfig& cfg, OptimState& state,
                                     std::mt19937_64& rng) {
  std::vector<std::size_t> lab(labeled.size()), unl(batch.size());
  std::iota(lab.begin(), lab.end(), 0);
  std::iota(unl.begin(), unl.end(), 0);
  std::shuffle(lab.begin(), lab.end(), rng);
  std::shuffle(unl.begin(), unl.end(), rng);
  std::vector<MetaStepTrace> traces;
  std::size_t cursor = 0;
  std::vector<LabeledExample> l;
  std::vector<MarkedSequence> u;
  for (std::size_t start = 0; start < lab.size(); start += cfg.labeled_batch) {
    l.clear();
    u.clear();
    for (std::size_t i = start; i < std::min(lab.size(), start + cfg.labeled_batch); ++i) {
      l.push_back(labeled[lab[i]]);
    }
    for (std::size_t j = 0; j < std::min(cfg.unlabeled_batch, unl.size()); ++j) {
      u.push_back(batch[unl[cursor++ % unl.size()]]);
    }
    MetaStepResult r = meta_step(tau, eta, l, u, cfg, state);
    eta = std::move(r.eta);
    traces.push_back(r.trace);
  }
  return traces;
}

}  // namespace

TrainReport run_incremental(const IncrementalInputs& in, ClassifierParams tau,
                            ClassifierParams eta, const SelfTrainConfig& cfg,
                            const MetaConfig& meta_cfg, const RunOptions& options) {
  cfg.validate();
  meta_cfg.validate();
  if (in.labeled.empty()) fail(ErrorKind::EmptyBatch, "incremental training needs labeled data");
  if (in.unlabeled_batches.size() != cfg.num_batches || in.shadow.size() != cfg.num_batches) {
    fail(ErrorKind::ConfigError, "expected " + std::to_string(cfg.num_batches) +
                                     " unlabeled batches with shadow labels");
  }

  TrainReport report;
  std::mt19937_64 rcn_rng(derive_seed(cfg.seed, 1));
  std::mt19937_64 meta_rng(derive_seed(cfg.seed, 2));
  OptimState tau_state = make_optim_state(tau, cfg.optimizer, cfg.rcn_lr);
  auto snapshot = [&] {
    if (options.record_trajectory) report.tau_trajectory.push_back(tau);
  };

  try {
    snapshot();
    for (std::size_t e = 0; e < cfg.initial_epochs; ++e) {
      tau = train_epoch(tau, in.labeled, {}, cfg.golden_per_batch, tau_state, rcn_rng).params;
      snapshot();
    }
    report.supervised = evaluate(in, tau);

    OptimState eta_state = make_optim_state(eta, OptimizerKind::Adam, meta_cfg.outer_lr);
    if (!cfg.no_meta && meta_cfg.supervised_warmup && meta_cfg.warmup_epochs > 0) {
      OptimState warm = make_optim_state(eta, cfg.optimizer, cfg.rcn_lr);
      eta = supervised_warmup(eta, in.labeled, meta_cfg.warmup_epochs, meta_cfg.labeled_batch,
                              warm, derive_seed(cfg.seed, 3));
    }

    std::vector<WeightedExample> pseudo_pool;
    for (std::size_t b = 0; b < cfg.num_batches; ++b) {
      const auto& batch = in.unlabeled_batches[b];
      IterationRecord rec;
      rec.iteration = b + 1;

      if (!cfg.no_meta) {
        for (std::size_t pass = 0; pass < cfg.meta_passes_per_batch; ++pass) {
          auto traces = meta_pass(tau, eta, in.labeled, batch, meta_cfg, eta_state, meta_rng);
          rec.meta_traces.insert(rec.meta_traces.end(), traces.begin(), traces.end());
        }
        rec.meta_steps = rec.meta_traces.size();
        rec.meta_mean = mean_trace(rec.meta_traces);
      }

      const ClassifierParams& labeler = cfg.no_meta ? tau : eta;
      const auto labels = generate_pseudo_labels(labeler, batch);
      // Without selection the pool keeps generation order, as plain self-training does.
      const auto selected = cfg.no_selection ? labels : select_top(labels, cfg.z_percent);
      const auto weighted = exploit(selected, batch, cfg.no_exploitation);
      pseudo_pool.insert(pseudo_pool.end(), weighted.begin(), weighted.end());

      for (std::size_t e = 0; e < cfg.rcn_epochs_per_batch; ++e) {
        auto r = train_epoch(tau, in.labeled, pseudo_pool, cfg.golden_per_batch, tau_state, rcn_rng);
        tau = std::move(r.params);
        rec.rcn_loss = r.loss;
        snapshot();
      }

      // Diagnostics only: shadow golds never reach the training calls above.
      const ShadowLabels& shadow = in.shadow[b];
      std::vector<int> generated, generated_gold;
      for (const auto& p : labels) {
        generated.push_back(p.label);
        generated_gold.push_back(shadow.at(p.mention_index));
      }
      double weight_total = 0.0;
      for (const auto& w : weighted) weight_total += w.weight;
      rec.test = evaluate(in, tau);
      rec.pseudo_all = pseudo_label_f1(labels, shadow, in.no_relation_index);
      rec.pseudo_selected = pseudo_label_f1(selected, shadow, in.no_relation_index);
      rec.offered = batch.size();
      rec.selected = selected.size();
      rec.pseudo_pool = pseudo_pool.size();
      rec.mean_weight = selected.empty() ? 0.0 : weight_total / static_cast<double>(selected.size());
      const auto pseudo_dist = label_distribution(generated, in.num_classes);
      const auto gold_dist = label_distribution(generated_gold, in.num_classes);
      rec.distribution_l1 = distribution_l1(pseudo_dist, gold_dist);
      rec.pseudo_distribution = pseudo_dist.probs;
      rec.gold_distribution = gold_dist.probs;
      report.iterations.push_back(std::move(rec));
    }
    report.completed = true;
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::NonFiniteGradient) throw;
    report.error = e.what();
  }
  report.tau = std::move(tau);
  report.eta = std::move(eta);
  return report;
}

}  // namespace metasre
