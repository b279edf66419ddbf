#include <doctest.h>

#include <algorithm>
#include <random>

#include "metasre/encoder.hpp"
#include "metasre/error.hpp"
#include "metasre/networks.hpp"
#include "support.hpp"

using namespace metasre;

namespace {

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::IoError;
}

EncoderParams random_encoder(std::mt19937_64& rng, const EncoderDims& d) {
  const std::size_t h = d.hidden / 2;
  using testing::random_tensor;
  return {random_tensor(rng, d.vocab_size, d.embed_dim, -0.5, 0.5),
          random_tensor(rng, d.embed_dim, h, -0.5, 0.5),
          random_tensor(rng, h, h, -0.5, 0.5),
          random_tensor(rng, 1, h, -0.5, 0.5),
          random_tensor(rng, d.embed_dim, h, -0.5, 0.5),
          random_tensor(rng, h, h, -0.5, 0.5),
          random_tensor(rng, 1, h, -0.5, 0.5)};
}

EncoderNodes encoder_nodes(const EncoderParams& p, bool trainable) {
  auto l = [&](const Tensor& t) { return ad::leaf(t, trainable); };
  return {l(p.embedding), l(p.fwd_wx), l(p.fwd_wh), l(p.fwd_b),
          l(p.bwd_wx),    l(p.bwd_wh), l(p.bwd_b)};
}

}  // namespace

TEST_CASE("markers wrap the entity spans of the example sentence") {
  RelationMention m;
  m.tokens = {"The", "song", "was", "composed", "for", "a", "famous", "Brazilian", "musician"};
  m.e1 = {1, 2};
  m.e2 = {8, 9};
  const Vocabulary v = build_vocab(std::vector<RelationMention>{m});
  const MarkedSequence s = insert_entity_markers(m, v);
  REQUIRE(s.token_ids.size() == m.tokens.size() + 4);
  CHECK(s.token_ids[1] == kE1Start);
  CHECK(v.token(s.token_ids[2]) == "song");
  CHECK(s.token_ids[3] == kE1End);
  CHECK(s.token_ids[10] == kE2Start);
  CHECK(v.token(s.token_ids[11]) == "musician");
  CHECK(s.token_ids[12] == kE2End);
  CHECK(s.e1_start_pos == 1);
  CHECK(s.e2_start_pos == 10);
}

TEST_CASE("minimal adjacent entities and reversed order") {
  const Vocabulary v({"A", "B"});
  RelationMention m{{"A", "B"}, {0, 1}, {1, 2}, std::nullopt};
  const MarkedSequence s = insert_entity_markers(m, v);
  CHECK(s.token_ids == std::vector<int>{kE1Start, v.id("A"), kE1End, kE2Start, v.id("B"), kE2End});
  // e2 before e1
  RelationMention r{{"A", "B"}, {1, 2}, {0, 1}, std::nullopt};
  const MarkedSequence t = insert_entity_markers(r, v);
  CHECK(t.token_ids == std::vector<int>{kE2Start, v.id("A"), kE2End, kE1Start, v.id("B"), kE1End});
  CHECK(t.e1_start_pos == 3);
  CHECK(t.e2_start_pos == 0);
}

TEST_CASE("span validation") {
  const Vocabulary v({"a", "b", "c"});
  RelationMention overlap{{"a", "b", "c"}, {0, 2}, {1, 3}, std::nullopt};
  CHECK(kind_of([&] { insert_entity_markers(overlap, v); }) == ErrorKind::SpanError);
  RelationMention empty{{"a", "b"}, {1, 1}, {0, 1}, std::nullopt};
  CHECK(kind_of([&] { insert_entity_markers(empty, v); }) == ErrorKind::SpanError);
  RelationMention outside{{"a", "b"}, {0, 1}, {1, 3}, std::nullopt};
  CHECK(kind_of([&] { insert_entity_markers(outside, v); }) == ErrorKind::SpanError);
  RelationMention too_long;
  too_long.tokens.assign(kMaxSequenceLength - 3, "a");
  too_long.e1 = {0, 1};
  too_long.e2 = {1, 2};
  CHECK(kind_of([&] { insert_entity_markers(too_long, v); }) == ErrorKind::SpanError);
  too_long.tokens.pop_back();
  CHECK_NOTHROW(insert_entity_markers(too_long, v));
}

TEST_CASE("removing the markers recovers the original ids") {
  std::mt19937_64 rng(31);
  const Vocabulary v = testing::tiny_vocab();
  for (const auto& m : testing::tiny_mentions(rng, 30, 3)) {
    const MarkedSequence s = insert_entity_markers(m, v);
    std::vector<int> stripped;
    for (int id : s.token_ids) {
      if (id > kE2End) stripped.push_back(id);
    }
    std::vector<int> original;
    for (const auto& t : m.tokens) original.push_back(v.id(t));
    CHECK(stripped == original);
    for (int marker = kE1Start; marker <= kE2End; ++marker) {
      CHECK(std::count(s.token_ids.begin(), s.token_ids.end(), marker) == 1);
    }
  }
}

TEST_CASE("vocabulary is sorted after the reserved ids") {
  RelationMention m{{"b", "a", "b"}, {0, 1}, {1, 2}, std::nullopt};
  const Vocabulary v = build_vocab(std::vector<RelationMention>{m});
  CHECK(v.size() == 7);
  CHECK(v.id("a") == 5);
  CHECK(v.id("b") == 6);
  CHECK(v.id("zzz") == kUnknownId);
  CHECK(v.token(kE1Start) == "[E1_start]");
  RelationMention m2{{"a", "b"}, {0, 1}, {1, 2}, std::nullopt};
  CHECK(build_vocab(std::vector<RelationMention>{m2}) == v);
  CHECK(kind_of([] { build_vocab(std::vector<RelationMention>{}); }) == ErrorKind::EmptyCorpus);
}

TEST_CASE("zero parameters encode to the zero vector") {
  const EncoderDims d{testing::tiny_vocab().size(), 3, 4};
  const EncoderParams zero = zero_params({d, 2}, Role::Classifier).weights.encoder;
  std::mt19937_64 rng(32);
  const auto batch = testing::marked(testing::tiny_mentions(rng, 3, 2), testing::tiny_vocab());
  const ad::Node h = encode(batch, encoder_nodes(zero, false));
  CHECK(h.rows() == 3);
  CHECK(h.cols() == 2 * d.hidden);
  CHECK(max_abs(h.value()) == 0.0);
}

TEST_CASE("encoding a batch equals encoding each sequence alone") {
  std::mt19937_64 rng(33);
  const EncoderDims d{testing::tiny_vocab().size(), 3, 6};
  const EncoderParams p = random_encoder(rng, d);
  const auto batch = testing::marked(testing::tiny_mentions(rng, 6, 2), testing::tiny_vocab());
  const Tensor together = encode(batch, encoder_nodes(p, false)).value();
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Tensor alone = encode(std::span(&batch[i], 1), encoder_nodes(p, false)).value();
    for (std::size_t j = 0; j < alone.cols(); ++j) CHECK(together(i, j) == alone(0, j));
  }
}

TEST_CASE("encoder gradient matches finite differences") {
  std::mt19937_64 rng(34);
  const EncoderDims d{testing::tiny_vocab().size(), 3, 8};
  const EncoderParams p = random_encoder(rng, d);
  RelationMention m{{"a", "b", "c", "d", "e", "f"}, {1, 2}, {4, 6}, std::nullopt};
  const std::vector<MarkedSequence> batch = {insert_entity_markers(m, testing::tiny_vocab())};
  const std::vector<Tensor> xs = {p.embedding, p.fwd_wx, p.fwd_wh, p.fwd_b,
                                  p.bwd_wx,    p.bwd_wh, p.bwd_b};
  const auto f = [&](const std::vector<ad::Node>& x) {
    return ad::sum_all(encode(batch, {x[0], x[1], x[2], x[3], x[4], x[5], x[6]}));
  };
  CHECK(testing::gradient_check(f, xs) < 1e-6);
}

TEST_CASE("states see the prefix forward and the suffix backward") {
  std::mt19937_64 rng(35);
  const Vocabulary v = testing::tiny_vocab();
  const EncoderDims d{v.size(), 3, 6};
  const EncoderParams p = random_encoder(rng, d);
  RelationMention m{{"a", "b", "c", "d", "e"}, {1, 2}, {3, 4}, std::nullopt};
  const MarkedSequence base = insert_entity_markers(m, v);
  const Tensor h0 = encode(std::span(&base, 1), encoder_nodes(p, false)).value();
  const std::size_t half = d.hidden / 2;
  // Changing the first token moves the forward half at E1_start; changing
  // the last moves the backward half.
  for (std::size_t pos : {std::size_t{0}, base.token_ids.size() - 1}) {
    MarkedSequence s = base;
    s.token_ids[pos] = v.id(s.token_ids[pos] == v.id("h") ? "g" : "h");
    const Tensor h = encode(std::span(&s, 1), encoder_nodes(p, false)).value();
    double fwd = 0.0, bwd = 0.0;
    for (std::size_t j = 0; j < half; ++j) fwd += std::abs(h(0, j) - h0(0, j));
    for (std::size_t j = half; j < 2 * half; ++j) bwd += std::abs(h(0, j) - h0(0, j));
    if (pos == 0) {
      CHECK(fwd > 0.0);
    } else {
      CHECK(bwd > 0.0);
    }
  }
}

TEST_CASE("encode rejects bad ids, empty batches and bad dims") {
  std::mt19937_64 rng(36);
  const EncoderDims d{testing::tiny_vocab().size(), 3, 4};
  const EncoderParams p = random_encoder(rng, d);
  MarkedSequence s{{kE1Start, 5, kE1End, kE2Start, 99, kE2End}, 0, 3};
  CHECK(kind_of([&] { encode(std::span(&s, 1), encoder_nodes(p, false)); }) ==
        ErrorKind::VocabError);
  CHECK(kind_of([&] { encode(std::span<const MarkedSequence>{}, encoder_nodes(p, false)); }) ==
        ErrorKind::EmptyBatch);
  CHECK(kind_of([] { validate_dims({10, 4, 5}); }) == ErrorKind::ConfigError);
}
