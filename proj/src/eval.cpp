#include "metasre/eval.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "metasre/error.hpp"

namespace metasre {

Metrics micro_prf(std::span<const int> predictions, std::span<const int> golds,
                  std::optional<int> no_relation_index) {
  if (predictions.size() != golds.size()) {
    fail(ErrorKind::ShapeError, std::to_string(predictions.size()) + " predictions vs " +
                                    std::to_string(golds.size()) + " golds");
  }
  Metrics m;
  m.empty = predictions.empty();
  int classes = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (predictions[i] < 0 || golds[i] < 0) fail(ErrorKind::IndexError, "negative class index");
    classes = std::max({classes, predictions[i] + 1, golds[i] + 1});
  }
  m.per_class.resize(static_cast<std::size_t>(classes));
  const auto is_negative = [&](int c) { return no_relation_index && c == *no_relation_index; };
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const int p = predictions[i];
    const int g = golds[i];
    if (!is_negative(p)) ++m.predicted;
    if (!is_negative(g)) ++m.gold;
    if (p == g && !is_negative(p)) {
      ++m.correct;
      ++m.per_class[static_cast<std::size_t>(p)].true_positive;
    } else {
      if (!is_negative(p)) ++m.per_class[static_cast<std::size_t>(p)].false_positive;
      if (!is_negative(g)) ++m.per_class[static_cast<std::size_t>(g)].false_negative;
    }
  }
  if (m.predicted > 0) m.precision = static_cast<double>(m.correct) / static_cast<double>(m.predicted);
  if (m.gold > 0) m.recall = static_cast<double>(m.correct) / static_cast<double>(m.gold);
  if (m.precision + m.recall > 0.0) {
    m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  }
  return m;
}

LabelDistribution label_distribution(std::span<const int> labels, std::size_t num_classes) {
  LabelDistribution d{std::vector<double>(num_classes, 0.0)};
  if (labels.empty()) return d;
  for (int l : labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= num_classes) {
      fail(ErrorKind::IndexError, "label " + std::to_string(l) + " outside the histogram");
    }
    d.probs[static_cast<std::size_t>(l)] += 1.0;
  }
  for (double& p : d.probs) p /= static_cast<double>(labels.size());
  return d;
}

double distribution_l1(const LabelDistribution& a, const LabelDistribution& b) {
  if (a.probs.size() != b.probs.size()) {
    fail(ErrorKind::ShapeError, "distributions over different class counts");
  }
  double total = 0.0;
  for (std::size_t k = 0; k < a.probs.size(); ++k) total += std::abs(a.probs[k] - b.probs[k]);
  return total;
}

}  // namespace metasre
