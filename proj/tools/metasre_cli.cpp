// metasre: data generation, splitting, training, ablations, sweeps and
// evaluation from one JSON config. Exit codes: 0 ok, 2 config error,
// 3 numeric divergence.
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "metasre/checkpoint.hpp"
#include "metasre/error.hpp"
#include "metasre/experiment.hpp"

namespace fs = std::filesystem;
using namespace metasre;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitDiverged = 3;

struct Overrides {
  std::string config;
  std::vector<std::uint64_t> seeds;
  int jobs = 0;
  std::string out;
  std::string mode;
  bool no_meta = false;
  bool no_selection = false;
  bool no_exploitation = false;
  double z_percent = 0.0;
  std::size_t batches = 0;
};

void add_common(CLI::App* cmd, Overrides& o, bool switches) {
  cmd->add_option("--config", o.config, "run config JSON")->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seeds, "seed(s), replacing the config's list");
  cmd->add_option("--jobs", o.jobs, "parallel runs")->check(CLI::PositiveNumber);
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--batches", o.batches, "unlabeled batches")->check(CLI::PositiveNumber);
  if (!switches) return;
  cmd->add_option("--mode", o.mode, "metasre or self_training")
      ->check(CLI::IsMember({"metasre", "self_training"}));
  cmd->add_flag("--no-meta", o.no_meta, "current classifier labels its own data");
  cmd->add_flag("--no-selection", o.no_selection, "keep every pseudo label");
  cmd->add_flag("--no-exploitation", o.no_exploitation, "unit pseudo-label weights");
  cmd->add_option("--z-percent", o.z_percent, "share of pseudo labels kept");
}

// Flags win over the file; the environment only supplies a default.
RunConfig resolve(const Overrides& o) {
  RunConfig cfg = load_run_config(o.config);
  if (!o.seeds.empty()) cfg.seeds = o.seeds;
  if (o.jobs > 0) cfg.jobs = o.jobs;
  if (o.batches > 0) cfg.selftrain.num_batches = o.batches;
  if (o.z_percent != 0.0) cfg.selftrain.z_percent = o.z_percent;
  if (o.mode == "self_training") {
    cfg.selftrain.no_meta = cfg.selftrain.no_selection = cfg.selftrain.no_exploitation = true;
  }
  cfg.selftrain.no_meta |= o.no_meta;
  cfg.selftrain.no_selection |= o.no_selection;
  cfg.selftrain.no_exploitation |= o.no_exploitation;
  if (!o.out.empty()) {
    cfg.out_dir = o.out;
  } else if (cfg.out_dir.empty()) {
    const char* env = std::getenv("METASRE_OUT_DIR");
    cfg.out_dir = env && *env ? env : ".";
  }
  cfg.validate();
  return cfg;
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::IoError, "cannot write " + path.string());
  out << text;
  if (!out) fail(ErrorKind::IoError, "write failed for " + path.string());
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::IoError, "cannot read " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::string mean_std(const Summary& s) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%.4f +- %.4f", s.mean_f1, s.std_f1);
  return buf;
}

int cmd_gen_data(const std::string& spec_path, const std::string& out, std::size_t test_n,
                 const std::string& test_out, std::optional<std::uint64_t> seed) {
  SynthSpec spec = parse_synth_spec(read_file(spec_path));
  if (seed) spec.seed = *seed;
  validate(spec);
  for (const fs::path p : {fs::path(out), fs::path(test_out)}) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
  }
  if (test_out.empty()) {
    save_jsonl(synth_generate(spec), out);
  } else {
    const SynthCorpus c = synth_generate_with_test(spec, test_n);
    save_jsonl(c.train, out);
    save_jsonl(c.test, test_out);
  }
  std::cout << "wrote " << spec.num_mentions << " mentions to " << out << "\n";
  return kExitOk;
}

int cmd_split(const Overrides& o) {
  const RunConfig cfg = resolve(o);
  const Corpus corpus = load_corpus(cfg.data);
  const fs::path dir = cfg.out_dir;
  const std::string hash = config_hash(cfg);
  for (std::uint64_t seed : cfg.seeds) {
    SplitSpec spec = cfg.split;
    spec.seed = seed;
    const SplitResult parts = stratified_split(corpus.train, spec);
    const std::string stem = "split_" + hash + "_s" + std::to_string(seed);
    Dataset unlabeled{parts.unlabeled.mentions, corpus.train.label_names,
                      corpus.train.no_relation_index};
    nlohmann::json shadow = nlohmann::json::array();
    for (std::size_t i = 0; i < parts.unlabeled.shadow.size(); ++i) {
      shadow.push_back(corpus.train.label_names[parts.unlabeled.shadow.at(i)]);
    }
    write_file(dir / (stem + "_labeled.jsonl"), to_jsonl(parts.labeled));
    write_file(dir / (stem + "_unlabeled.jsonl"), to_jsonl(unlabeled));
    write_file(dir / (stem + "_rest.jsonl"), to_jsonl(parts.rest));
    write_file(dir / (stem + "_shadow.json"), shadow.dump() + "\n");
    std::cout << "seed " << seed << ": " << parts.labeled.mentions.size() << " labeled, "
              << parts.unlabeled.mentions.size() << " unlabeled, " << parts.rest.mentions.size()
              << " held back\n";
  }
  return kExitOk;
}

int cmd_train(const Overrides& o) {
  const RunConfig cfg = resolve(o);
  const Corpus corpus = load_corpus(cfg.data);
  const std::vector<SeedRun> runs = run_seeds(corpus, cfg);
  const fs::path dir = cfg.out_dir;
  const std::string hash = config_hash(cfg);
  bool diverged = false, failed = false;
  for (const SeedRun& r : runs) {
    const std::string stem = "train_" + hash + "_s" + std::to_string(r.seed);
    if (r.failed) {
      std::cerr << "seed " << r.seed << ": " << r.error << "\n";
      failed = true;
      continue;
    }
    write_file(dir / (stem + ".json"), report_json(r.report, r.seed));
    write_file(dir / (stem + ".csv"), report_csv(r.report));
    write_file(dir / (stem + "_meta.csv"), meta_trace_csv(r.report));
    write_file(dir / (stem + "_rcn.ckpt.json"),
               checkpoint_to_json({r.report.tau, corpus.vocab, corpus.train.label_names}));
    if (!r.report.completed) {
      std::cerr << "seed " << r.seed << " diverged: " << r.report.error << "\n";
      diverged = true;
    }
  }
  const Summary s = summarize(hash, runs);
  write_file(dir / ("train_" + hash + "_summary.json"), summary_json(s));
  std::cout << "F1 " << mean_std(s) << " over " << s.runs_ok << " seed(s)  (supervised "
            << s.mean_supervised_f1 << ")\n";
  if (failed) return kExitConfig;
  return diverged ? kExitDiverged : kExitOk;
}

bool all_failed(const std::vector<Summary>& rows) {
  for (const auto& r : rows) {
    if (r.runs_ok > 0) return false;
  }
  return true;
}

int cmd_ablate(const Overrides& o) {
  const RunConfig cfg = resolve(o);
  const Corpus corpus = load_corpus(cfg.data);
  const AblationTable t = ablation_suite(corpus, cfg);
  const std::string stem = "ablate_" + config_hash(cfg);
  write_file(fs::path(cfg.out_dir) / (stem + ".csv"), ablation_csv(t));
  for (const auto& row : t.rows) {
    std::cout << row.label << ": F1 " << mean_std(row) << "\n";
  }
  return all_failed(t.rows) ? kExitConfig : kExitOk;
}

std::vector<double> parse_values(const std::string& text) {
  std::vector<double> values;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size()) fail(ErrorKind::ConfigError, "bad sweep value '" + item + "'");
    values.push_back(v);
  }
  return values;
}

int cmd_sweep(const Overrides& o, const std::string& axis_name, const std::string& values_text) {
  const RunConfig cfg = resolve(o);
  const SweepAxis axis = parse_sweep_axis(axis_name);
  const std::vector<double> values = parse_values(values_text);
  if (values.empty()) fail(ErrorKind::ConfigError, "sweep needs at least one value");
  const Corpus corpus = load_corpus(cfg.data);
  const SweepTable t = sweep(corpus, cfg, axis, values);
  const std::string stem = "sweep_" + axis_name + "_" + config_hash(cfg);
  write_file(fs::path(cfg.out_dir) / (stem + ".csv"), sweep_csv(t));
  for (const auto& row : t.rows) {
    std::cout << axis_name << "=" << row.label << ": F1 " << mean_std(row) << "\n";
  }
  return all_failed(t.rows) ? kExitConfig : kExitOk;
}

int cmd_eval(const std::string& ckpt_path, const std::string& data_path) {
  const Checkpoint ck = load_checkpoint(ckpt_path);
  const Dataset d = load_jsonl(data_path, ck.label_names);
  std::vector<MarkedSequence> inputs;
  std::vector<int> golds;
  for (const auto& m : d.mentions) {
    if (!m.label) continue;
    inputs.push_back(insert_entity_markers(m, ck.vocabulary));
    golds.push_back(*m.label);
  }
  if (inputs.empty()) fail(ErrorKind::EmptyCorpus, data_path + " has no labeled mentions");
  const std::vector<int> preds = predict_labels(inputs, ck.params);
  const Metrics m = micro_prf(preds, golds, d.no_relation_index);
  std::printf("precision %.6f\nrecall %.6f\nf1 %.6f\n(%zu correct, %zu predicted, %zu gold)\n",
              m.precision, m.recall, m.f1, m.correct, m.predicted, m.gold);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MetaSRE: meta-learned pseudo labels for relation classification"};
  app.require_subcommand(1);

  std::string spec_path, data_out, test_out;
  std::size_t test_n = 1000;
  std::optional<std::uint64_t> gen_seed;
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic corpus as JSONL");
  gen->add_option("spec", spec_path, "synthetic corpus spec JSON")
      ->required()
      ->check(CLI::ExistingFile);
  gen->add_option("--out", data_out, "train JSONL path")->required();
  gen->add_option("--test-out", test_out, "also write a held-out test JSONL here");
  gen->add_option("--test-mentions", test_n, "held-out size");
  gen->add_option("--seed", gen_seed, "overrides the spec's seed");

  Overrides split_o, train_o, ablate_o, sweep_o;
  auto* split = app.add_subcommand("split", "write the labeled/unlabeled split per seed");
  add_common(split, split_o, false);
  auto* train = app.add_subcommand("train", "incremental self-training per seed");
  add_common(train, train_o, true);
  auto* ablate = app.add_subcommand("ablate", "full model and the three ablations");
  add_common(ablate, ablate_o, false);
  ablate->add_option("--z-percent", ablate_o.z_percent, "share of pseudo labels kept");

  std::string axis, values;
  auto* sw = app.add_subcommand("sweep", "one run set per value of an axis");
  add_common(sw, sweep_o, true);
  sw->add_option("--axis", axis, "z_percent | unlabeled_fraction | labeled_fraction")->required();
  sw->add_option("--values", values, "comma-separated values")->required();

  std::string ckpt, eval_data;
  auto* ev = app.add_subcommand("eval", "score a checkpoint on a labeled JSONL file");
  ev->add_option("--checkpoint", ckpt)->required()->check(CLI::ExistingFile);
  ev->add_option("--data", eval_data)->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*gen) return cmd_gen_data(spec_path, data_out, test_n, test_out, gen_seed);
    if (*split) return cmd_split(split_o);
    if (*train) return cmd_train(train_o);
    if (*ablate) return cmd_ablate(ablate_o);
    if (*sw) return cmd_sweep(sweep_o, axis, values);
    if (*ev) return cmd_eval(ckpt, eval_data);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.kind() == ErrorKind::NonFiniteGradient ? kExitDiverged : kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitOk;
}
