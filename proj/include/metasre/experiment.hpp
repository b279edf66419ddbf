#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "metasre/data.hpp"
#include "metasre/meta.hpp"
#include "metasre/selftrain.hpp"
#include "metasre/synth.hpp"

namespace metasre {

/// Where training data comes from: a synthetic spec or JSONL files.
struct DataSource {
  std::optional<SynthSpec> synth;
  std::size_t synth_test_mentions = 1000;
  std::string train_path;
  std::string test_path;
  /// Relation names for JSONL input; inferred from the train file if empty.
  std::vector<std::string> label_names;
};

struct RunConfig {
  DataSource data;
  SplitSpec split;
  SelfTrainConfig selftrain;
  MetaConfig meta;
  std::size_t hidden = 32;
  std::size_t embed_dim = 16;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  std::string out_dir;
  int jobs = 1;

  void validate() const;
};

/// Train and test sets as loaded or generated, before splitting.
struct Corpus {
  Dataset train;
  Dataset test;
  Vocabulary vocab;
};

Corpus load_corpus(const DataSource& source);

/// Everything run_incremental needs for one seed, split and batched.
IncrementalInputs prepare_inputs(const Corpus& corpus, const RunConfig& cfg, std::uint64_t seed);

struct SeedRun {
  std::uint64_t seed = 0;
  TrainReport report;
  bool failed = false;  // a non-divergence error
  std::string error;
};

/// Full pipeline for one seed with the configured switches.
SeedRun run_seed(const Corpus& corpus, const RunConfig& cfg, std::uint64_t seed,
                 const RunOptions& options = {});

/// run_seed for every configured seed, up to cfg.jobs at a time.
std::vector<SeedRun> run_seeds(const Corpus& corpus, const RunConfig& cfg,
                               const RunOptions& options = {});

/// Final test F1 of a report (supervised F1 when no iteration finished).
double final_f1(const TrainReport& r);

struct Summary {
  std::string label;
  std::size_t runs_ok = 0;
  std::size_t runs_failed = 0;
  double mean_f1 = 0.0;
  double std_f1 = 0.0;
  double mean_supervised_f1 = 0.0;
  double mean_pseudo_f1_all = 0.0;
  double mean_pseudo_f1_selected = 0.0;
  double mean_distribution_l1 = 0.0;
  std::vector<double> f1s;
};

Summary summarize(const std::string& label, const std::vector<SeedRun>& runs);

enum class AblationMode { Full, NoMeta, NoSelection, NoExploitation };
std::string to_string(AblationMode m);
void apply_mode(AblationMode m, SelfTrainConfig& cfg);

struct AblationTable {
  std::vector<Summary> rows;
  std::vector<std::vector<SeedRun>> runs;  // per row, per seed
};

/// The full model and the three single-switch ablations over every seed.
AblationTable ablation_suite(const Corpus& corpus, const RunConfig& cfg,
                             const std::vector<AblationMode>& modes = {
                                 AblationMode::Full, AblationMode::NoMeta,
                                 AblationMode::NoSelection, AblationMode::NoExploitation});

enum class SweepAxis { ZPercent, UnlabeledFraction, LabeledFraction };
SweepAxis parse_sweep_axis(const std::string& name);
std::string to_string(SweepAxis a);

struct SweepTable {
  SweepAxis axis;
  std::vector<double> values;
  std::vector<Summary> rows;
};

SweepTable sweep(const Corpus& corpus, const RunConfig& cfg, SweepAxis axis,
                 const std::vector<double>& values);

// Serialization ------------------------------------------------------------

std::string report_json(const TrainReport& r, std::uint64_t seed);
/// Columns: iter,precision,recall,f1,pseudo_f1,selected_M,mean_w,distribution_l1
std::string report_csv(const TrainReport& r);
std::string meta_trace_csv(const TrainReport& r);
std::string ablation_csv(const AblationTable& t);
std::string sweep_csv(const SweepTable& t);
std::string summary_json(const Summary& s);

/// Canonical JSON of the settings that affect a single seed's results
/// (no seed list, out_dir or jobs; file names carry the seed separately).
std::string canonical_config(const RunConfig& cfg);
/// 16 hex digits of FNV-1a over canonical_config.
std::string config_hash(const RunConfig& cfg);

RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);
SynthSpec parse_synth_spec(const std::string& json_text);
SplitSpec parse_split_spec(const std::string& json_text);

}  // namespace metasre
