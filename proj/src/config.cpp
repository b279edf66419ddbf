#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "metasre/error.hpp"
#include "metasre/experiment.hpp"

namespace metasre {

using nlohmann::json;

namespace {

template <typename T>
void read(const json& obj, const char* key, T& into) {
  if (!obj.contains(key)) return;
  try {
    into = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    fail(ErrorKind::ConfigError, std::string("field '") + key + "': " + e.what());
  }
}

void check_keys(const json& obj, std::initializer_list<const char*> allowed, const char* where) {
  if (!obj.is_object()) fail(ErrorKind::ConfigError, std::string(where) + " must be an object");
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) fail(ErrorKind::ConfigError, std::string(where) + ": unknown field '" + key + "'");
  }
}

SynthSpec synth_from(const json& j) {
  check_keys(j,
             {"num_classes", "num_mentions", "no_relation_share", "class_shares", "ambiguity_rate",
              "noise_vocab", "triggers_per_class", "entity_words_per_class",
              "generic_entity_words", "entity_cue_rate", "min_noise", "max_noise", "seed"},
             "synth");
  SynthSpec s;
  read(j, "num_classes", s.num_classes);
  read(j, "num_mentions", s.num_mentions);
  read(j, "no_relation_share", s.no_relation_share);
  read(j, "class_shares", s.class_shares);
  read(j, "ambiguity_rate", s.ambiguity_rate);
  read(j, "noise_vocab", s.noise_vocab);
  read(j, "triggers_per_class", s.triggers_per_class);
  read(j, "entity_words_per_class", s.entity_words_per_class);
  read(j, "generic_entity_words", s.generic_entity_words);
  read(j, "entity_cue_rate", s.entity_cue_rate);
  read(j, "min_noise", s.min_noise);
  read(j, "max_noise", s.max_noise);
  read(j, "seed", s.seed);
  validate(s);
  return s;
}

json synth_to(const SynthSpec& s) {
  return {{"num_classes", s.num_classes},
          {"num_mentions", s.num_mentions},
          {"no_relation_share", s.no_relation_share},
          {"class_shares", s.class_shares},
          {"ambiguity_rate", s.ambiguity_rate},
          {"noise_vocab", s.noise_vocab},
          {"triggers_per_class", s.triggers_per_class},
          {"entity_words_per_class", s.entity_words_per_class},
          {"generic_entity_words", s.generic_entity_words},
          {"entity_cue_rate", s.entity_cue_rate},
          {"min_noise", s.min_noise},
          {"max_noise", s.max_noise},
          {"seed", s.seed}};
}

SplitSpec split_from(const json& j) {
  check_keys(j, {"labeled_fraction", "unlabeled_fraction", "seed"}, "split");
  SplitSpec s;
  read(j, "labeled_fraction", s.labeled_fraction);
  read(j, "unlabeled_fraction", s.unlabeled_fraction);
  read(j, "seed", s.seed);
  return s;
}

json parse_or_fail(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorKind::ConfigError, std::string("config is not valid JSON: ") + e.what());
  }
}

}  // namespace

void RunConfig::validate() const {
  if (!data.synth && data.train_path.empty()) {
    fail(ErrorKind::ConfigError, "config needs data.synth or data.train");
  }
  if (!(split.labeled_fraction > 0.0 && split.labeled_fraction <= 1.0) ||
      !(split.unlabeled_fraction > 0.0 && split.unlabeled_fraction <= 1.0) ||
      split.labeled_fraction + split.unlabeled_fraction > 1.0 + 1e-12) {
    fail(ErrorKind::ConfigError, "split fractions must lie in (0, 1] and sum to at most 1");
  }
  selftrain.validate();
  meta.validate();
  if (hidden == 0 || hidden % 2 != 0 || embed_dim == 0) {
    fail(ErrorKind::ConfigError, "network.hidden must be even and positive, embed_dim positive");
  }
  if (seeds.empty()) fail(ErrorKind::ConfigError, "seed list is empty");
  if (jobs < 1) fail(ErrorKind::ConfigError, "jobs must be at least 1");
}

SynthSpec parse_synth_spec(const std::string& text) { return synth_from(parse_or_fail(text)); }

SplitSpec parse_split_spec(const std::string& text) { return split_from(parse_or_fail(text)); }

RunConfig parse_run_config(const std::string& text) {
  const json doc = parse_or_fail(text);
  check_keys(doc, {"data", "split", "selftrain", "meta", "network", "seeds", "out_dir", "jobs"},
             "config");
  RunConfig cfg;
  if (doc.contains("data")) {
    const json& d = doc.at("data");
    check_keys(d, {"synth", "test_mentions", "train", "test", "labels"}, "data");
    if (d.contains("synth")) cfg.data.synth = synth_from(d.at("synth"));
    read(d, "test_mentions", cfg.data.synth_test_mentions);
    read(d, "train", cfg.data.train_path);
    read(d, "test", cfg.data.test_path);
    read(d, "labels", cfg.data.label_names);
  }
  if (doc.contains("split")) cfg.split = split_from(doc.at("split"));
  if (doc.contains("selftrain")) {
    const json& s = doc.at("selftrain");
    check_keys(s,
               {"z_percent", "num_batches", "initial_epochs", "rcn_epochs_per_batch",
                "meta_passes_per_batch", "golden_per_batch", "optimizer", "rcn_lr", "no_meta",
                "no_selection", "no_exploitation"},
               "selftrain");
    auto& st = cfg.selftrain;
    read(s, "z_percent", st.z_percent);
    read(s, "num_batches", st.num_batches);
    read(s, "initial_epochs", st.initial_epochs);
    read(s, "rcn_epochs_per_batch", st.rcn_epochs_per_batch);
    read(s, "meta_passes_per_batch", st.meta_passes_per_batch);
    read(s, "golden_per_batch", st.golden_per_batch);
    std::string opt = "adam";
    read(s, "optimizer", opt);
    if (opt != "adam" && opt != "sgd") fail(ErrorKind::ConfigError, "optimizer must be adam or sgd");
    st.optimizer = opt == "sgd" ? OptimizerKind::Sgd : OptimizerKind::Adam;
    read(s, "rcn_lr", st.rcn_lr);
    read(s, "no_meta", st.no_meta);
    read(s, "no_selection", st.no_selection);
    read(s, "no_exploitation", st.no_exploitation);
  }
  if (doc.contains("meta")) {
    const json& m = doc.at("meta");
    check_keys(m,
               {"inner_lr", "outer_lr", "supervised_warmup", "warmup_epochs", "labeled_batch",
                "unlabeled_batch"},
               "meta");
    read(m, "inner_lr", cfg.meta.inner_lr);
    read(m, "outer_lr", cfg.meta.outer_lr);
    read(m, "supervised_warmup", cfg.meta.supervised_warmup);
    read(m, "warmup_epochs", cfg.meta.warmup_epochs);
    read(m, "labeled_batch", cfg.meta.labeled_batch);
    read(m, "unlabeled_batch", cfg.meta.unlabeled_batch);
  }
  if (doc.contains("network")) {
    const json& n = doc.at("network");
    check_keys(n, {"hidden", "embed_dim"}, "network");
    read(n, "hidden", cfg.hidden);
    read(n, "embed_dim", cfg.embed_dim);
  }
  read(doc, "seeds", cfg.seeds);
  read(doc, "out_dir", cfg.out_dir);
  read(doc, "jobs", cfg.jobs);
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::ConfigError, "cannot read config " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_run_config(buffer.str());
}

std::string canonical_config(const RunConfig& cfg) {
  json data = {{"train", cfg.data.train_path},
               {"test", cfg.data.test_path},
               {"labels", cfg.data.label_names},
               {"test_mentions", cfg.data.synth_test_mentions}};
  if (cfg.data.synth) data["synth"] = synth_to(*cfg.data.synth);
  const auto& st = cfg.selftrain;
  json doc = {
      {"data", data},
      {"split", {{"labeled_fraction", cfg.split.labeled_fraction},
                 {"unlabeled_fraction", cfg.split.unlabeled_fraction}}},
      {"selftrain", {{"z_percent", st.z_percent},
                     {"num_batches", st.num_batches},
                     {"initial_epochs", st.initial_epochs},
                     {"rcn_epochs_per_batch", st.rcn_epochs_per_batch},
                     {"meta_passes_per_batch", st.meta_passes_per_batch},
                     {"golden_per_batch", st.golden_per_batch},
                     {"optimizer", st.optimizer == OptimizerKind::Sgd ? "sgd" : "adam"},
                     {"rcn_lr", st.rcn_lr},
                     {"no_meta", st.no_meta},
                     {"no_selection", st.no_selection},
                     {"no_exploitation", st.no_exploitation}}},
      {"meta", {{"inner_lr", cfg.meta.inner_lr},
                {"outer_lr", cfg.meta.outer_lr},
                {"supervised_warmup", cfg.meta.supervised_warmup},
                {"warmup_epochs", cfg.meta.warmup_epochs},
                {"labeled_batch", cfg.meta.labeled_batch},
                {"unlabeled_batch", cfg.meta.unlabeled_batch}}},
      {"network", {{"hidden", cfg.hidden}, {"embed_dim", cfg.embed_dim}}}};
  return doc.dump();
}

std::string config_hash(const RunConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical_config(cfg)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace metasre
