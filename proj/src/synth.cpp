#include "metasre/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "metasre/error.hpp"

namespace metasre {

namespace {

struct Lexicon {
  std::vector<std::string> noise;
  std::vector<std::string> neutral;
  std::vector<std::vector<std::vector<std::string>>> triggers;  // per class, per phrase
  std::vector<std::vector<std::string>> head_entities;          // per class
  std::vector<std::vector<std::string>> tail_entities;
  std::vector<std::string> generic_entities;
};

bool has_no_relation(const SynthSpec& s) {
  if (!s.class_shares.empty()) return s.no_relation_share > 0.0 && s.class_shares[0] > 0.0;
  return s.no_relation_share > 0.0;
}

std::size_t pick(std::mt19937_64& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

Lexicon build_lexicon(const SynthSpec& s, std::mt19937_64& rng) {
  Lexicon lx;
  for (std::size_t i = 0; i < s.noise_vocab; ++i) lx.noise.push_back("w" + std::to_string(i));
  for (std::size_t i = 0; i < 12; ++i) lx.neutral.push_back("and" + std::to_string(i));
  for (std::size_t i = 0; i < s.generic_entity_words; ++i) {
    lx.generic_entities.push_back("ent" + std::to_string(i));
  }
  lx.triggers.resize(s.num_classes);
  lx.head_entities.resize(s.num_classes);
  lx.tail_entities.resize(s.num_classes);
  const bool nr = has_no_relation(s);
  for (std::size_t c = 0; c < s.num_classes; ++c) {
    const std::string tag = "c" + std::to_string(c);
    for (std::size_t e = 0; e < s.entity_words_per_class; ++e) {
      lx.head_entities[c].push_back(tag + "h" + std::to_string(e));
      lx.tail_entities[c].push_back(tag + "t" + std::to_string(e));
    }
    if (nr && c == 0) continue;
    for (std::size_t p = 0; p < s.triggers_per_class; ++p) {
      // One or two class-owned words, optionally followed by a shared word.
      std::vector<std::string> phrase{tag + "v" + std::to_string(p)};
      if (pick(rng, 2) == 1) phrase.push_back(tag + "p" + std::to_string(p));
      if (pick(rng, 2) == 1) phrase.push_back(lx.neutral[pick(rng, lx.neutral.size())]);
      lx.triggers[c].push_back(std::move(phrase));
    }
  }
  return lx;
}

std::vector<std::string> connector(const Lexicon& lx, std::size_t cls, bool nr,
                                   std::mt19937_64& rng) {
  if (nr && cls == 0) {
    std::vector<std::string> filler;
    const std::size_t n = 1 + pick(rng, 3);
    for (std::size_t i = 0; i < n; ++i) filler.push_back(lx.neutral[pick(rng, lx.neutral.size())]);
    return filler;
  }
  return lx.triggers[cls][pick(rng, lx.triggers[cls].size())];
}

}  // namespace

void validate(const SynthSpec& s) {
  if (s.num_classes < 2) fail(ErrorKind::ConfigError, "synthetic corpus needs K >= 2");
  if (s.num_mentions < s.num_classes) fail(ErrorKind::ConfigError, "fewer mentions than classes");
  if (!(s.ambiguity_rate >= 0.0 && s.ambiguity_rate < 1.0)) {
    fail(ErrorKind::ConfigError, "ambiguity rate must lie in [0, 1)");
  }
  if (!(s.no_relation_share >= 0.0 && s.no_relation_share < 1.0)) {
    fail(ErrorKind::ConfigError, "no_relation share must lie in [0, 1)");
  }
  if (!(s.entity_cue_rate >= 0.0 && s.entity_cue_rate <= 1.0)) {
    fail(ErrorKind::ConfigError, "entity cue rate must lie in [0, 1]");
  }
  if (!s.class_shares.empty()) {
    if (s.class_shares.size() != s.num_classes) {
      fail(ErrorKind::ConfigError, "class_shares needs one entry per class");
    }
    double total = 0.0;
    for (double v : s.class_shares) {
      if (!(v >= 0.0)) fail(ErrorKind::ConfigError, "class shares must be non-negative");
      total += v;
    }
    if (std::abs(total - 1.0) > 1e-9) {
      fail(ErrorKind::ConfigError, "class shares sum to " + std::to_string(total) + ", not 1");
    }
  }
  if (s.triggers_per_class == 0 || s.entity_words_per_class == 0 || s.generic_entity_words == 0 ||
      s.noise_vocab == 0) {
    fail(ErrorKind::ConfigError, "lexicon sizes must be positive");
  }
  if (s.min_noise > s.max_noise) fail(ErrorKind::ConfigError, "min_noise exceeds max_noise");
  if (2 * s.max_noise + 8 + 4 > kMaxSequenceLength) {
    fail(ErrorKind::ConfigError, "sentences would exceed the maximum sequence length");
  }
}

std::vector<std::size_t> synth_class_counts(const SynthSpec& s) {
  validate(s);
  const std::size_t k = s.num_classes;
  std::vector<std::size_t> counts(k, 0);
  if (!s.class_shares.empty()) {
    // Apportion N by the shares with largest remainder.
    std::vector<double> quota(k);
    std::size_t assigned = 0;
    for (std::size_t c = 0; c < k; ++c) {
      quota[c] = s.class_shares[c] * static_cast<double>(s.num_mentions);
      counts[c] = static_cast<std::size_t>(std::floor(quota[c] + 1e-9));
      assigned += counts[c];
    }
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return quota[a] - static_cast<double>(counts[a]) > quota[b] - static_cast<double>(counts[b]);
    });
    for (std::size_t i = 0; assigned < s.num_mentions; ++i, ++assigned) ++counts[order[i % k]];
    return counts;
  }
  std::size_t first_relation = 0;
  std::size_t remaining = s.num_mentions;
  if (has_no_relation(s)) {
    counts[0] = static_cast<std::size_t>(
        std::llround(s.no_relation_share * static_cast<double>(s.num_mentions)));
    remaining -= counts[0];
    first_relation = 1;
  }
  const std::size_t relations = k - first_relation;
  for (std::size_t c = first_relation; c < k; ++c) {
    counts[c] = remaining / relations + (c - first_relation < remaining % relations ? 1 : 0);
  }
  return counts;
}

namespace {

Dataset generate(const SynthSpec& s, std::size_t mentions, std::uint64_t stream) {
  SynthSpec sized = s;
  sized.num_mentions = mentions;
  const auto counts = synth_class_counts(sized);
  const bool nr = has_no_relation(s);
  std::mt19937_64 lexicon_rng(s.seed);
  const Lexicon lx = build_lexicon(s, lexicon_rng);
  std::mt19937_64 rng(s.seed * 0x9E3779B97F4A7C15ULL + stream + 1);

  Dataset d;
  for (std::size_t c = 0; c < s.num_classes; ++c) {
    d.label_names.push_back(nr && c == 0 ? std::string(kNoRelation) : "rel_" + std::to_string(c));
  }
  d.no_relation_index = find_no_relation(d.label_names);

  std::vector<int> labels;
  for (std::size_t c = 0; c < counts.size(); ++c) labels.insert(labels.end(), counts[c], static_cast<int>(c));
  std::shuffle(labels.begin(), labels.end(), rng);

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> noise_len(s.min_noise, s.max_noise);
  for (int label : labels) {
    const auto cls = static_cast<std::size_t>(label);
    RelationMention m;
    auto add_noise = [&] {
      const std::size_t n = noise_len(rng);
      for (std::size_t i = 0; i < n; ++i) m.tokens.push_back(lx.noise[pick(rng, lx.noise.size())]);
    };
    auto entity = [&](const std::vector<std::vector<std::string>>& pools) {
      if (unit(rng) < s.entity_cue_rate) return pools[cls][pick(rng, pools[cls].size())];
      return lx.generic_entities[pick(rng, lx.generic_entities.size())];
    };

    add_noise();
    m.e1 = {m.tokens.size(), m.tokens.size() + 1};
    m.tokens.push_back(entity(lx.head_entities));
    std::size_t shown = cls;
    if (unit(rng) < s.ambiguity_rate) {
      shown = (cls + 1 + pick(rng, s.num_classes - 1)) % s.num_classes;
    }
    for (auto& w : connector(lx, shown, nr, rng)) m.tokens.push_back(std::move(w));
    m.e2 = {m.tokens.size(), m.tokens.size() + 1};
    m.tokens.push_back(entity(lx.tail_entities));
    add_noise();
    m.label = label;
    d.mentions.push_back(std::move(m));
  }
  return d;
}

}  // namespace

Dataset synth_generate(const SynthSpec& spec) { return generate(spec, spec.num_mentions, 0); }

SynthCorpus synth_generate_with_test(const SynthSpec& spec, std::size_t test_mentions) {
  // Same lexicon, independent sampling stream.
  return {generate(spec, spec.num_mentions, 0), generate(spec, test_mentions, 1)};
}

}  // namespace metasre
