#pragma once

#include <optional>
#include <span>
#include <vector>

namespace metasre {

struct ClassCounts {
  std::size_t true_positive = 0;
  std::size_t false_positive = 0;
  std::size_t false_negative = 0;
};

struct Metrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t correct = 0;    // correct predictions of a real relation
  std::size_t predicted = 0;  // predictions other than no_relation
  std::size_t gold = 0;       // golds other than no_relation
  std::vector<ClassCounts> per_class;
  /// Set when the metrics summarize an empty input.
  bool empty = false;
};

/// Micro precision/recall/F1 where correct no_relation predictions do not
/// count. Zero denominators give 0. ShapeError on length mismatch.
Metrics micro_prf(std::span<const int> predictions, std::span<const int> golds,
                  std::optional<int> no_relation_index);

/// Normalized histogram over K classes.
struct LabelDistribution {
  std::vector<double> probs;
};

LabelDistribution label_distribution(std::span<const int> labels, std::size_t num_classes);

/// Sum of absolute differences, in [0, 2]. ShapeError when K differs.
double distribution_l1(const LabelDistribution& a, const LabelDistribution& b);

}  // namespace metasre
