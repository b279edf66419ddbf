#pragma once

#include <cstdint>
#include <vector>

#include "metasre/data.hpp"

namespace metasre {

/// Parameters of the seeded template corpus
///   <noise>* <E1> <trigger phrase of the class> <E2> <noise>*
/// Relation classes own disjoint trigger phrases and preferred entity words;
/// no_relation uses neutral filler between the entities.
struct SynthSpec {
  std::size_t num_classes = 10;  // K, including no_relation when its share > 0
  std::size_t num_mentions = 2000;
  /// Share of no_relation mentions; 0 means every class is a relation.
  double no_relation_share = 0.174;
  /// Optional explicit per-class shares (size K, summing to 1). Overrides
  /// no_relation_share when non-empty; class 0 is no_relation if its
  /// share is positive and no_relation_share > 0.
  std::vector<double> class_shares;
  /// Probability that a mention's trigger is swapped for another class's.
  double ambiguity_rate = 0.25;
  std::size_t noise_vocab = 200;
  std::size_t triggers_per_class = 3;
  std::size_t entity_words_per_class = 4;
  std::size_t generic_entity_words = 40;
  /// Probability that an entity word is drawn from its class's own pool.
  double entity_cue_rate = 0.65;
  std::size_t min_noise = 0;  // noise tokens before E1 and after E2, each side
  std::size_t max_noise = 1;
  std::uint64_t seed = 1;
};

/// Throws ConfigError for infeasible specs.
void validate(const SynthSpec& spec);

/// Per-class mention counts: no_relation gets round(share * N), the
/// remainder is apportioned evenly by largest remainder.
std::vector<std::size_t> synth_class_counts(const SynthSpec& spec);

Dataset synth_generate(const SynthSpec& spec);

/// `train` then `test` mentions from one stream, so both share the lexicon
/// and class proportions.
struct SynthCorpus {
  Dataset train;
  Dataset test;
};
SynthCorpus synth_generate_with_test(const SynthSpec& spec, std::size_t test_mentions);

}  // namespace metasre
