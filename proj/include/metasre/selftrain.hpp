#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "metasre/data.hpp"
#include "metasre/eval.hpp"
#include "metasre/meta.hpp"
#include "metasre/networks.hpp"
#include "metasre/optim.hpp"

namespace metasre {

struct PseudoLabel {
  std::size_t mention_index = 0;
  int label = 0;
  double confidence = 0.0;

  friend bool operator==(const PseudoLabel&, const PseudoLabel&) = default;
};

struct SelfTrainConfig {
  double z_percent = 90.0;
  std::size_t num_batches = 10;
  /// Supervised epochs of the classifier before the first batch.
  std::size_t initial_epochs = 20;
  std::size_t rcn_epochs_per_batch = 3;
  std::size_t meta_passes_per_batch = 1;
  std::size_t golden_per_batch = 16;
  OptimizerKind optimizer = OptimizerKind::Adam;
  double rcn_lr = 1e-4;
  /// Ablation switches.
  bool no_meta = false;          // current classifier labels its own data
  bool no_selection = false;     // keep every pseudo label, in generation order
  bool no_exploitation = false;  // every pseudo weight is 1
  std::uint64_t seed = 0;

  void validate() const;
};

/// One label per mention: argmax of the labeler's distribution (ties to the
/// lowest class) with its probability as confidence. EmptyBatch if empty.
std::vector<PseudoLabel> generate_pseudo_labels(const ClassifierParams& labeler,
                                                std::span<const MarkedSequence> batch);

/// ceil(Z/100 * n) labels by descending confidence, ties by ascending
/// mention index. EmptyBatch on empty input, ConfigError unless 0 < Z <= 100.
std::vector<PseudoLabel> select_top(std::span<const PseudoLabel> labels, double z_percent);

std::size_t selection_size(std::size_t count, double z_percent);

/// Frozen weighted examples for the classifier. Weights equal the
/// confidences, or 1 when `uniform_weights`. IndexError on a dangling index.
std::vector<WeightedExample> exploit(std::span<const PseudoLabel> selected,
                                     std::span<const MarkedSequence> pool,
                                     bool uniform_weights = false);

/// Micro P/R/F1 of pseudo labels against the batch's hidden golds.
/// DiagnosticsError when a label points past the shadow set.
Metrics pseudo_label_f1(std::span<const PseudoLabel> pseudo, const ShadowLabels& shadow,
                        std::optional<int> no_relation_index);

struct IterationRecord {
  std::size_t iteration = 0;  // 1-based
  Metrics test;
  Metrics pseudo_all;       // every generated label vs shadow gold
  Metrics pseudo_selected;  // the selected subset
  std::size_t offered = 0;
  std::size_t selected = 0;
  std::size_t pseudo_pool = 0;  // accumulated pseudo examples after this batch
  double mean_weight = 0.0;
  double distribution_l1 = 0.0;  // generated labels vs batch gold histogram
  std::vector<double> pseudo_distribution;
  std::vector<double> gold_distribution;
  double rcn_loss = 0.0;  // summed loss of the last classifier epoch
  std::size_t meta_steps = 0;
  MetaStepTrace meta_mean;
  std::vector<MetaStepTrace> meta_traces;
};

struct TrainReport {
  Metrics supervised;  // classifier after training on labeled data only
  std::vector<IterationRecord> iterations;
  bool completed = false;
  std::string error;
  ClassifierParams tau;
  ClassifierParams eta;
  /// Every classifier snapshot, in order (opt-in; for equivalence checks).
  std::vector<ClassifierParams> tau_trajectory;
};

/// Everything the driver trains on, plus held-out diagnostics data. Shadow
/// golds are read only when scoring pseudo labels for the report.
struct IncrementalInputs {
  std::vector<LabeledExample> labeled;
  std::vector<std::vector<MarkedSequence>> unlabeled_batches;
  std::vector<ShadowLabels> shadow;
  std::vector<MarkedSequence> test_inputs;
  std::vector<int> test_golds;
  std::size_t num_classes = 0;
  std::optional<int> no_relation_index;
};

struct RunOptions {
  bool record_trajectory = false;
};

/// Incremental self-training. The classifier first trains on labeled data
/// alone. Each unlabeled batch then gets generator meta steps, pseudo labels
/// from the generator with top-Z selection, and classifier epochs on labeled
/// data plus every pseudo label kept so far. Divergence stops the loop and
/// returns the partial report (completed = false).
TrainReport run_incremental(const IncrementalInputs& inputs, ClassifierParams tau,
                            ClassifierParams eta, const SelfTrainConfig& cfg,
                            const MetaConfig& meta_cfg, const RunOptions& options = {});

}  // namespace metasre
