#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "metasre/encoder.hpp"

namespace metasre {

inline constexpr const char* kNoRelation = "no_relation";

struct Dataset {
  std::vector<RelationMention> mentions;
  std::vector<std::string> label_names;
  std::optional<int> no_relation_index;

  std::size_t num_classes() const noexcept { return label_names.size(); }
  /// Throws LabelError unless every gold label is < K and names are unique.
  void validate() const;
  std::vector<std::size_t> class_histogram() const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Index of "no_relation" in `names`, if present.
std::optional<int> find_no_relation(std::span<const std::string> names);

/// Hidden gold labels of unlabeled mentions. Only diagnostics read them;
/// the training entry points accept bare mentions and never see this type.
class ShadowLabels {
 public:
  ShadowLabels() = default;
  explicit ShadowLabels(std::vector<int> golds) : golds_(std::move(golds)) {}

  std::size_t size() const noexcept { return golds_.size(); }
  int at(std::size_t i) const;
  std::span<const int> all() const noexcept { return golds_; }

  friend bool operator==(const ShadowLabels&, const ShadowLabels&) = default;

 private:
  std::vector<int> golds_;
};

/// Unlabeled mentions (label field stripped) with their shadow golds.
struct UnlabeledSet {
  std::vector<RelationMention> mentions;
  ShadowLabels shadow;
};

/// Strips labels into the shadow field. Every mention must carry a label.
UnlabeledSet make_unlabeled(const Dataset& d);

// JSONL: one object per line,
//   {"tokens": [...], "e1": [begin, end], "e2": [begin, end], "relation": "name"}
// with "relation" optional. Lines are UTF-8; blank lines are skipped.

/// Loads mentions; relation names must appear in `label_names` (LabelError
/// otherwise). ParseError carries the 1-based line number.
Dataset load_jsonl(const std::string& path, const std::vector<std::string>& label_names);
/// Same, with label names taken as the sorted set of names in the file.
Dataset load_jsonl(const std::string& path);
Dataset parse_jsonl(const std::string& text, const std::vector<std::string>& label_names);
std::string to_jsonl(const Dataset& d);
void save_jsonl(const Dataset& d, const std::string& path);

struct SplitSpec {
  double labeled_fraction = 0.05;
  double unlabeled_fraction = 0.5;
  std::uint64_t seed = 0;
};

struct SplitResult {
  Dataset labeled;
  UnlabeledSet unlabeled;
  Dataset rest;
};

/// Per-class proportional allocation with largest-remainder rounding. Each
/// class must receive at least one labeled mention and fit both parts, else
/// SplitError. Deterministic in the seed and in the input's multiset.
SplitResult stratified_split(const Dataset& d, const SplitSpec& spec);

/// Largest-remainder apportionment of round(fraction * sum(counts)).
std::vector<std::size_t> largest_remainder(std::span<const std::size_t> counts, double fraction);

/// B disjoint batches stratified by shadow label with sizes differing by at
/// most one. SplitError when B is zero or exceeds the pool.
std::vector<UnlabeledSet> partition_unlabeled(const UnlabeledSet& pool, std::size_t batches,
                                              std::uint64_t seed);

/// Canonical ordering used to make splits independent of input order.
bool mention_less(const RelationMention& a, const RelationMention& b);

}  // namespace metasre
