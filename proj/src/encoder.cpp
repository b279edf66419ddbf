#include <algorithm>
#include <string>

#include "metasre/encoder.hpp"
#include "metasre/error.hpp"

namespace metasre {

void validate_spans(const RelationMention& m) {
  const std::size_t n = m.tokens.size();
  auto check = [n](const TokenSpan& s, const char* name) {
    if (s.begin >= s.end || s.end > n) {
      fail(ErrorKind::SpanError, std::string(name) + " span [" + std::to_string(s.begin) + ", " +
                                     std::to_string(s.end) + ") invalid for " +
                                     std::to_string(n) + " tokens");
    }
  };
  check(m.e1, "e1");
  check(m.e2, "e2");
  if (m.e1.begin < m.e2.end && m.e2.begin < m.e1.end) {
    fail(ErrorKind::SpanError, "entity spans overlap");
  }
}

MarkedSequence insert_entity_markers(const RelationMention& m, const Vocabulary& vocab) {
  validate_spans(m);
  if (m.tokens.size() + 4 > kMaxSequenceLength) {
    fail(ErrorKind::SpanError, "marked sequence longer than " +
                                   std::to_string(kMaxSequenceLength) + " tokens");
  }
  MarkedSequence out;
  out.token_ids.reserve(m.tokens.size() + 4);
  for (std::size_t i = 0; i < m.tokens.size(); ++i) {
    if (i == m.e1.begin) {
      out.e1_start_pos = out.token_ids.size();
      out.token_ids.push_back(kE1Start);
    }
    if (i == m.e2.begin) {
      out.e2_start_pos = out.token_ids.size();
      out.token_ids.push_back(kE2Start);
    }
    out.token_ids.push_back(vocab.id(m.tokens[i]));
    if (i + 1 == m.e1.end) out.token_ids.push_back(kE1End);
    if (i + 1 == m.e2.end) out.token_ids.push_back(kE2End);
  }
  return out;
}

std::vector<MarkedSequence> insert_entity_markers(std::span<const RelationMention> mentions,
                                                  const Vocabulary& vocab) {
  std::vector<MarkedSequence> out;
  out.reserve(mentions.size());
  for (const auto& m : mentions) out.push_back(insert_entity_markers(m, vocab));
  return out;
}

void validate_dims(const EncoderDims& dims) {
  if (dims.vocab_size < static_cast<std::size_t>(kReservedIds) || dims.embed_dim == 0 ||
      dims.hidden == 0 || dims.hidden % 2 != 0) {
    fail(ErrorKind::ConfigError, "encoder dims need V >= 5, d_emb > 0 and an even h_R > 0");
  }
}

ad::Node encode(std::span<const MarkedSequence> batch, const EncoderNodes& w) {
  if (batch.empty()) fail(ErrorKind::EmptyBatch, "encode of an empty batch");
  const std::size_t vocab = w.embedding.rows();
  const std::size_t rows = batch.size();
  const std::size_t half = w.fwd_wh.rows();
  std::size_t longest = 0;
  for (const auto& s : batch) {
    if (s.token_ids.empty()) fail(ErrorKind::SpanError, "empty marked sequence");
    for (int id : s.token_ids) {
      if (id < 0 || static_cast<std::size_t>(id) >= vocab) {
        fail(ErrorKind::VocabError, "token id " + std::to_string(id) + " outside vocabulary of " +
                                        std::to_string(vocab));
      }
    }
    if (s.e1_start_pos >= s.token_ids.size() || s.e2_start_pos >= s.token_ids.size()) {
      fail(ErrorKind::SpanError, "marker position outside sequence");
    }
    longest = std::max(longest, s.token_ids.size());
  }

  std::vector<ad::Node> inputs;
  std::vector<bool> padded(longest, false);
  inputs.reserve(longest);
  for (std::size_t t = 0; t < longest; ++t) {
    std::vector<std::size_t> ids(rows, 0);
    for (std::size_t i = 0; i < rows; ++i) {
      if (t < batch[i].token_ids.size()) {
        ids[i] = static_cast<std::size_t>(batch[i].token_ids[t]);
      } else {
        padded[t] = true;
      }
    }
    inputs.push_back(ad::index_select_rows(w.embedding, ids));
  }

  std::vector<ad::Node> forward(longest);
  for (std::size_t t = 0; t < longest; ++t) {
    ad::Node pre = ad::matmul(inputs[t], w.fwd_wx);
    if (t > 0) pre = ad::add(pre, ad::matmul(forward[t - 1], w.fwd_wh));
    forward[t] = ad::tanh(ad::add_row_broadcast(pre, w.fwd_b));
  }

  std::vector<ad::Node> backward(longest);
  for (std::size_t t = longest; t-- > 0;) {
    ad::Node pre = ad::matmul(inputs[t], w.bwd_wx);
    if (t + 1 < longest) pre = ad::add(pre, ad::matmul(backward[t + 1], w.bwd_wh));
    ad::Node state = ad::tanh(ad::add_row_broadcast(pre, w.bwd_b));
    if (padded[t]) {
      // Padded rows restart the right-to-left pass from zero.
      Tensor mask(rows, half);
      for (std::size_t i = 0; i < rows; ++i) {
        if (t < batch[i].token_ids.size()) std::fill_n(mask.data() + i * half, half, 1.0);
      }
      state = ad::mul(state, ad::constant(std::move(mask)));
    }
    backward[t] = state;
  }

  std::vector<ad::Node> states;
  states.reserve(longest);
  for (std::size_t t = 0; t < longest; ++t) {
    const ad::Node both[] = {forward[t], backward[t]};
    states.push_back(ad::concat_cols(both));
  }
  ad::Node stacked = ad::concat_rows(states);

  std::vector<std::size_t> first(rows), second(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    first[i] = batch[i].e1_start_pos * rows + i;
    second[i] = batch[i].e2_start_pos * rows + i;
  }
  const ad::Node pair[] = {ad::index_select_rows(stacked, first),
                           ad::index_select_rows(stacked, second)};
  return ad::concat_cols(pair);
}

}  // namespace metasre
