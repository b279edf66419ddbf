#include <algorithm>
#include <set>
#include <string>

#include "metasre/encoder.hpp"
#include "metasre/error.hpp"

namespace metasre {

namespace {

const std::vector<std::string> kReservedTokens = {"[E1_start]", "[E1_end]", "[E2_start]",
                                                  "[E2_end]", "[UNK]"};

}  // namespace

Vocabulary::Vocabulary() : Vocabulary(std::vector<std::string>{}) {}

Vocabulary::Vocabulary(const std::vector<std::string>& tokens) : tokens_(kReservedTokens) {
  for (std::size_t i = 0; i < tokens_.size(); ++i) ids_.emplace(tokens_[i], static_cast<int>(i));
  for (const auto& t : tokens) {
    if (ids_.contains(t)) fail(ErrorKind::VocabError, "duplicate or reserved token '" + t + "'");
    ids_.emplace(t, static_cast<int>(tokens_.size()));
    tokens_.push_back(t);
  }
}

int Vocabulary::id(const std::string& token) const {
  auto it = ids_.find(token);
  if (it == ids_.end() || it->second < kReservedIds) return kUnknownId;
  return it->second;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    fail(ErrorKind::VocabError, "id " + std::to_string(id) + " out of range");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

std::vector<std::string> Vocabulary::regular_tokens() const {
  return {tokens_.begin() + kReservedIds, tokens_.end()};
}

Vocabulary build_vocab(std::span<const RelationMention> corpus) {
  if (corpus.empty()) fail(ErrorKind::EmptyCorpus, "cannot build a vocabulary from no mentions");
  std::set<std::string> unique;
  for (const auto& m : corpus) unique.insert(m.tokens.begin(), m.tokens.end());
  for (const auto& r : kReservedTokens) unique.erase(r);
  return Vocabulary(std::vector<std::string>(unique.begin(), unique.end()));
}

}  // namespace metasre
