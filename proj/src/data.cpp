#include "metasre/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "metasre/error.hpp"

namespace metasre {

using nlohmann::json;

void Dataset::validate() const {
  std::set<std::string> unique(label_names.begin(), label_names.end());
  if (unique.size() != label_names.size()) fail(ErrorKind::LabelError, "duplicate label names");
  for (const auto& m : mentions) {
    if (m.label && (*m.label < 0 || static_cast<std::size_t>(*m.label) >= label_names.size())) {
      fail(ErrorKind::LabelError, "gold label " + std::to_string(*m.label) + " outside [0, " +
                                      std::to_string(label_names.size()) + ")");
    }
  }
}

std::vector<std::size_t> Dataset::class_histogram() const {
  std::vector<std::size_t> h(label_names.size(), 0);
  for (const auto& m : mentions) {
    if (m.label) ++h.at(static_cast<std::size_t>(*m.label));
  }
  return h;
}

std::optional<int> find_no_relation(std::span<const std::string> names) {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == kNoRelation) return static_cast<int>(i);
  }
  return std::nullopt;
}

int ShadowLabels::at(std::size_t i) const {
  if (i >= golds_.size()) fail(ErrorKind::DiagnosticsError, "no shadow gold for mention " + std::to_string(i));
  return golds_[i];
}

UnlabeledSet make_unlabeled(const Dataset& d) {
  UnlabeledSet out;
  std::vector<int> golds;
  golds.reserve(d.mentions.size());
  for (const auto& m : d.mentions) {
    if (!m.label) fail(ErrorKind::LabelError, "unlabeled pool needs shadow gold labels");
    golds.push_back(*m.label);
    RelationMention bare = m;
    bare.label.reset();
    out.mentions.push_back(std::move(bare));
  }
  out.shadow = ShadowLabels(std::move(golds));
  return out;
}

namespace {

TokenSpan parse_span(const json& j, std::size_t line) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number_unsigned() || !j[1].is_number_unsigned()) {
    fail(ErrorKind::ParseError, "line " + std::to_string(line) + ": span must be [begin, end]");
  }
  return {j[0].get<std::size_t>(), j[1].get<std::size_t>()};
}

}  // namespace

Dataset parse_jsonl(const std::string& text, const std::vector<std::string>& label_names) {
  Dataset d;
  d.label_names = label_names;
  d.no_relation_index = find_no_relation(label_names);
  std::map<std::string, int, std::less<>> index;
  for (std::size_t i = 0; i < label_names.size(); ++i) index[label_names[i]] = static_cast<int>(i);

  std::istringstream in(text);
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (raw.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "line " + std::to_string(line) + ": ";
    json obj;
    try {
      obj = json::parse(raw);
    } catch (const json::exception& e) {
      fail(ErrorKind::ParseError, where + e.what());
    }
    if (!obj.is_object() || !obj.contains("tokens") || !obj.contains("e1") || !obj.contains("e2")) {
      fail(ErrorKind::ParseError, where + "expected an object with tokens, e1 and e2");
    }
    RelationMention m;
    try {
      m.tokens = obj.at("tokens").get<std::vector<std::string>>();
    } catch (const json::exception&) {
      fail(ErrorKind::ParseError, where + "tokens must be a list of strings");
    }
    m.e1 = parse_span(obj.at("e1"), line);
    m.e2 = parse_span(obj.at("e2"), line);
    try {
      validate_spans(m);
    } catch (const Error& e) {
      fail(ErrorKind::ParseError, where + e.what());
    }
    if (obj.contains("relation") && !obj.at("relation").is_null()) {
      if (!obj.at("relation").is_string()) fail(ErrorKind::ParseError, where + "relation must be a string");
      const auto name = obj.at("relation").get<std::string>();
      auto it = index.find(name);
      if (it == index.end()) fail(ErrorKind::LabelError, where + "unknown relation '" + name + "'");
      m.label = it->second;
    }
    d.mentions.push_back(std::move(m));
  }
  return d;
}

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::IoError, "cannot read " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

}  // namespace

Dataset load_jsonl(const std::string& path, const std::vector<std::string>& label_names) {
  return parse_jsonl(read_file(path), label_names);
}

Dataset load_jsonl(const std::string& path) {
  const std::string text = read_file(path);
  std::set<std::string> names;
  std::istringstream in(text);
  std::string raw;
  while (std::getline(in, raw)) {
    if (raw.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json obj = json::parse(raw);
      if (obj.is_object() && obj.contains("relation") && obj.at("relation").is_string()) {
        names.insert(obj.at("relation").get<std::string>());
      }
    } catch (const json::exception&) {
      // Reported with its line number by parse_jsonl below.
    }
  }
  return parse_jsonl(text, std::vector<std::string>(names.begin(), names.end()));
}

std::string to_jsonl(const Dataset& d) {
  std::string out;
  for (const auto& m : d.mentions) {
    json obj;
    obj["tokens"] = m.tokens;
    obj["e1"] = {m.e1.begin, m.e1.end};
    obj["e2"] = {m.e2.begin, m.e2.end};
    if (m.label) obj["relation"] = d.label_names.at(static_cast<std::size_t>(*m.label));
    out += obj.dump();
    out += '\n';
  }
  return out;
}

void save_jsonl(const Dataset& d, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::IoError, "cannot write " + path);
  out << to_jsonl(d);
}

bool mention_less(const RelationMention& a, const RelationMention& b) {
  return std::tie(a.tokens, a.e1.begin, a.e1.end, a.e2.begin, a.e2.end, a.label) <
         std::tie(b.tokens, b.e1.begin, b.e1.end, b.e2.begin, b.e2.end, b.label);
}

std::vector<std::size_t> largest_remainder(std::span<const std::size_t> counts, double fraction) {
  const std::size_t total = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
  const auto target = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(total)));
  std::vector<std::size_t> out(counts.size());
  std::vector<double> remainder(counts.size());
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    const double quota = fraction * static_cast<double>(counts[c]);
    out[c] = std::min(counts[c], static_cast<std::size_t>(std::floor(quota + 1e-9)));
    remainder[c] = quota - static_cast<double>(out[c]);
    assigned += out[c];
  }
  std::vector<std::size_t> order(counts.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t k = 0; assigned < target && k < order.size(); ++k) {
    if (out[order[k]] < counts[order[k]]) {
      ++out[order[k]];
      ++assigned;
    }
  }
  return out;
}

SplitResult stratified_split(const Dataset& d, const SplitSpec& spec) {
  if (!(spec.labeled_fraction > 0.0 && spec.labeled_fraction <= 1.0) ||
      !(spec.unlabeled_fraction >= 0.0 && spec.unlabeled_fraction <= 1.0) ||
      spec.labeled_fraction + spec.unlabeled_fraction > 1.0 + 1e-12) {
    fail(ErrorKind::SplitError, "fractions must lie in (0, 1] and sum to at most 1");
  }
  d.validate();
  const std::size_t k = d.num_classes();
  std::vector<std::vector<std::size_t>> members(k);
  for (std::size_t i = 0; i < d.mentions.size(); ++i) {
    if (!d.mentions[i].label) fail(ErrorKind::SplitError, "splitting needs gold labels");
    members[static_cast<std::size_t>(*d.mentions[i].label)].push_back(i);
  }
  std::vector<std::size_t> counts(k);
  for (std::size_t c = 0; c < k; ++c) {
    if (members[c].empty()) {
      fail(ErrorKind::SplitError, "class '" + d.label_names[c] + "' has no mentions");
    }
    counts[c] = members[c].size();
  }
  const auto labeled = largest_remainder(counts, spec.labeled_fraction);
  const auto unlabeled = largest_remainder(counts, spec.unlabeled_fraction);

  std::mt19937_64 rng(spec.seed);
  Dataset lab{{}, d.label_names, d.no_relation_index};
  Dataset unl{{}, d.label_names, d.no_relation_index};
  Dataset rest{{}, d.label_names, d.no_relation_index};
  for (std::size_t c = 0; c < k; ++c) {
    if (labeled[c] == 0 || labeled[c] + unlabeled[c] > counts[c]) {
      fail(ErrorKind::SplitError, "class '" + d.label_names[c] + "' with " +
                                      std::to_string(counts[c]) +
                                      " mentions cannot honor the fractions");
    }
    auto& ids = members[c];
    std::stable_sort(ids.begin(), ids.end(), [&](std::size_t a, std::size_t b) {
      return mention_less(d.mentions[a], d.mentions[b]);
    });
    std::shuffle(ids.begin(), ids.end(), rng);
    for (std::size_t j = 0; j < ids.size(); ++j) {
      Dataset& part = j < labeled[c] ? lab : (j < labeled[c] + unlabeled[c] ? unl : rest);
      part.mentions.push_back(d.mentions[ids[j]]);
    }
  }
  std::shuffle(lab.mentions.begin(), lab.mentions.end(), rng);
  std::shuffle(unl.mentions.begin(), unl.mentions.end(), rng);
  std::shuffle(rest.mentions.begin(), rest.mentions.end(), rng);
  return {std::move(lab), make_unlabeled(unl), std::move(rest)};
}

std::vector<UnlabeledSet> partition_unlabeled(const UnlabeledSet& pool, std::size_t batches,
                                              std::uint64_t seed) {
  const std::size_t n = pool.mentions.size();
  if (pool.shadow.size() != n) fail(ErrorKind::SplitError, "shadow labels out of sync with pool");
  if (batches == 0 || batches > n) {
    fail(ErrorKind::SplitError, "cannot divide " + std::to_string(n) + " mentions into " +
                                    std::to_string(batches) + " batches");
  }
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < n; ++i) by_class[pool.shadow.at(i)].push_back(i);

  std::mt19937_64 rng(seed);
  std::vector<std::vector<std::size_t>> assigned(batches);
  std::size_t dealt = 0;
  for (auto& [label, ids] : by_class) {
    std::stable_sort(ids.begin(), ids.end(), [&](std::size_t a, std::size_t b) {
      return mention_less(pool.mentions[a], pool.mentions[b]);
    });
    std::shuffle(ids.begin(), ids.end(), rng);
    // Dealing continues across classes so batch sizes stay within one.
    for (std::size_t id : ids) assigned[dealt++ % batches].push_back(id);
  }

  std::vector<UnlabeledSet> out(batches);
  for (std::size_t b = 0; b < batches; ++b) {
    std::shuffle(assigned[b].begin(), assigned[b].end(), rng);
    std::vector<int> golds;
    for (std::size_t id : assigned[b]) {
      out[b].mentions.push_back(pool.mentions[id]);
      golds.push_back(pool.shadow.at(id));
    }
    out[b].shadow = ShadowLabels(std::move(golds));
  }
  return out;
}

}  // namespace metasre
