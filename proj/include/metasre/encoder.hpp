#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "metasre/autodiff.hpp"
#include "metasre/tensor.hpp"

namespace metasre {

/// Half-open token range [begin, end).
struct TokenSpan {
  std::size_t begin = 0;
  std::size_t end = 0;

  friend bool operator==(const TokenSpan&, const TokenSpan&) = default;
};

/// One sentence with two marked entities and, when known, its relation index.
struct RelationMention {
  std::vector<std::string> tokens;
  TokenSpan e1;
  TokenSpan e2;
  std::optional<int> label;

  friend bool operator==(const RelationMention&, const RelationMention&) = default;
};

/// Throws SpanError unless both spans are non-empty and in range, and do not overlap.
void validate_spans(const RelationMention& m);

inline constexpr int kE1Start = 0;
inline constexpr int kE1End = 1;
inline constexpr int kE2Start = 2;
inline constexpr int kE2End = 3;
inline constexpr int kUnknownId = 4;
inline constexpr int kReservedIds = 5;
inline constexpr std::size_t kMaxSequenceLength = 128;

class Vocabulary {
 public:
  /// Only the reserved ids.
  Vocabulary();
  /// Reserved ids followed by `tokens` in the given order.
  explicit Vocabulary(const std::vector<std::string>& tokens);

  int id(const std::string& token) const;
  const std::string& token(int id) const;
  std::size_t size() const noexcept { return tokens_.size(); }
  /// Non-reserved tokens in id order.
  std::vector<std::string> regular_tokens() const;

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::map<std::string, int, std::less<>> ids_;
};

/// Sorted unique tokens of the corpus after the reserved ids. EmptyCorpus on
/// an empty input.
Vocabulary build_vocab(std::span<const RelationMention> corpus);

/// Token ids with the four entity markers inserted around the spans.
struct MarkedSequence {
  std::vector<int> token_ids;
  std::size_t e1_start_pos = 0;
  std::size_t e2_start_pos = 0;

  friend bool operator==(const MarkedSequence&, const MarkedSequence&) = default;
};

MarkedSequence insert_entity_markers(const RelationMention& m, const Vocabulary& vocab);
std::vector<MarkedSequence> insert_entity_markers(std::span<const RelationMention> mentions,
                                                  const Vocabulary& vocab);

struct EncoderDims {
  std::size_t vocab_size = 0;
  std::size_t embed_dim = 16;
  /// h_R: width of one position's state, split evenly between directions.
  std::size_t hidden = 32;
};

/// Embedding table plus forward and backward recurrent context weights.
template <typename T>
struct EncoderWeights {
  T embedding;  // V x d_emb
  T fwd_wx;     // d_emb x h_R/2
  T fwd_wh;     // h_R/2 x h_R/2
  T fwd_b;      // 1 x h_R/2
  T bwd_wx;
  T bwd_wh;
  T bwd_b;
};

using EncoderParams = EncoderWeights<Tensor>;
using EncoderNodes = EncoderWeights<ad::Node>;

/// Checks dims (h_R even, sizes positive) and throws ConfigError otherwise.
void validate_dims(const EncoderDims& dims);

/// Pair representations [B x 2 h_R]: concatenated per-position states at the
/// two entity-start markers. Sequences of different lengths are padded;
/// padding never leaks into real positions, so each row equals encoding that
/// sequence alone.
ad::Node encode(std::span<const MarkedSequence> batch, const EncoderNodes& weights);

}  // namespace metasre
