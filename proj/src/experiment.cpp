#include "metasre/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>

#include <json.hpp>

#include "metasre/error.hpp"
#include "metasre/training.hpp"

namespace metasre {

using nlohmann::json;

Corpus load_corpus(const DataSource& source) {
  Corpus c;
  if (source.synth) {
    SynthCorpus sc = synth_generate_with_test(*source.synth, source.synth_test_mentions);
    c.train = std::move(sc.train);
    c.test = std::move(sc.test);
  } else {
    if (source.train_path.empty()) fail(ErrorKind::ConfigError, "no training data configured");
    c.train = source.label_names.empty() ? load_jsonl(source.train_path)
                                         : load_jsonl(source.train_path, source.label_names);
    if (!source.test_path.empty()) c.test = load_jsonl(source.test_path, c.train.label_names);
  }
  c.train.validate();
  c.vocab = build_vocab(c.train.mentions);
  return c;
}

IncrementalInputs prepare_inputs(const Corpus& corpus, const RunConfig& cfg, std::uint64_t seed) {
  SplitSpec split = cfg.split;
  split.seed = seed;
  SplitResult parts = stratified_split(corpus.train, split);

  IncrementalInputs in;
  in.num_classes = corpus.train.num_classes();
  in.no_relation_index = corpus.train.no_relation_index;
  for (const auto& m : parts.labeled.mentions) {
    in.labeled.push_back({insert_entity_markers(m, corpus.vocab), *m.label});
  }
  const auto batches =
      partition_unlabeled(parts.unlabeled, cfg.selftrain.num_batches, derive_seed(seed, 20));
  for (const auto& b : batches) {
    in.unlabeled_batches.push_back(insert_entity_markers(b.mentions, corpus.vocab));
    in.shadow.push_back(b.shadow);
  }
  for (const auto& m : corpus.test.mentions) {
    if (!m.label) continue;
    in.test_inputs.push_back(insert_entity_markers(m, corpus.vocab));
    in.test_golds.push_back(*m.label);
  }
  return in;
}

SeedRun run_seed(const Corpus& corpus, const RunConfig& cfg, std::uint64_t seed,
                 const RunOptions& options) {
  SeedRun run;
  run.seed = seed;
  try {
    const IncrementalInputs in = prepare_inputs(corpus, cfg, seed);
    NetworkDims dims;
    dims.encoder = {corpus.vocab.size(), cfg.embed_dim, cfg.hidden};
    dims.num_classes = corpus.train.num_classes();
    SelfTrainConfig st = cfg.selftrain;
    st.seed = seed;
    run.report = run_incremental(in, init_params(derive_seed(seed, 21), dims, Role::Classifier),
                                 init_params(derive_seed(seed, 22), dims, Role::Generator), st,
                                 cfg.meta, options);
  } catch (const Error& e) {
    run.failed = true;
    run.error = e.what();
  }
  return run;
}

double final_f1(const TrainReport& r) {
  return r.iterations.empty() ? r.supervised.f1 : r.iterations.back().test.f1;
}

Summary summarize(const std::string& label, const std::vector<SeedRun>& runs) {
  Summary s;
  s.label = label;
  double pseudo_all = 0.0, pseudo_sel = 0.0, drift = 0.0;
  std::size_t iterations = 0;
  for (const auto& r : runs) {
    if (r.failed) {
      ++s.runs_failed;
      continue;
    }
    ++s.runs_ok;
    s.f1s.push_back(final_f1(r.report));
    s.mean_supervised_f1 += r.report.supervised.f1;
    for (const auto& it : r.report.iterations) {
      pseudo_all += it.pseudo_all.f1;
      pseudo_sel += it.pseudo_selected.f1;
      drift += it.distribution_l1;
      ++iterations;
    }
  }
  if (s.runs_ok == 0) return s;
  const auto n = static_cast<double>(s.runs_ok);
  s.mean_f1 = std::accumulate(s.f1s.begin(), s.f1s.end(), 0.0) / n;
  s.mean_supervised_f1 /= n;
  if (s.runs_ok > 1) {
    double ss = 0.0;
    for (double f : s.f1s) ss += (f - s.mean_f1) * (f - s.mean_f1);
    s.std_f1 = std::sqrt(ss / (n - 1.0));
  }
  if (iterations > 0) {
    const auto m = static_cast<double>(iterations);
    s.mean_pseudo_f1_all = pseudo_all / m;
    s.mean_pseudo_f1_selected = pseudo_sel / m;
    s.mean_distribution_l1 = drift / m;
  }
  return s;
}

std::string to_string(AblationMode m) {
  switch (m) {
    case AblationMode::Full: return "full";
    case AblationMode::NoMeta: return "no_meta";
    case AblationMode::NoSelection: return "no_selection";
    case AblationMode::NoExploitation: return "no_exploitation";
  }
  return "?";
}

void apply_mode(AblationMode m, SelfTrainConfig& cfg) {
  cfg.no_meta = m == AblationMode::NoMeta;
  cfg.no_selection = m == AblationMode::NoSelection;
  cfg.no_exploitation = m == AblationMode::NoExploitation;
}

namespace {

/// Runs every (cell, seed) pair, up to cfg.jobs at a time. Each job owns its
/// state, so the outcome does not depend on the job count.
std::vector<std::vector<SeedRun>> run_cells(const Corpus& corpus,
                                            const std::vector<RunConfig>& cells,
                                            const std::vector<std::uint64_t>& seeds, int jobs,
                                            const RunOptions& options = {}) {
  std::vector<std::vector<SeedRun>> out(cells.size(), std::vector<SeedRun>(seeds.size()));
  const auto total = static_cast<std::int64_t>(cells.size() * seeds.size());
#pragma omp parallel for schedule(dynamic) num_threads(std::max(1, jobs))
  for (std::int64_t job = 0; job < total; ++job) {
    const auto c = static_cast<std::size_t>(job) / seeds.size();
    const auto s = static_cast<std::size_t>(job) % seeds.size();
    out[c][s] = run_seed(corpus, cells[c], seeds[s], options);
  }
  return out;
}

}  // namespace

std::vector<SeedRun> run_seeds(const Corpus& corpus, const RunConfig& cfg,
                               const RunOptions& options) {
  if (cfg.seeds.empty()) fail(ErrorKind::ConfigError, "no seeds configured");
  return run_cells(corpus, {cfg}, cfg.seeds, cfg.jobs, options).front();
}

AblationTable ablation_suite(const Corpus& corpus, const RunConfig& cfg,
                             const std::vector<AblationMode>& modes) {
  if (cfg.seeds.empty()) fail(ErrorKind::ConfigError, "ablation needs at least one seed");
  std::vector<RunConfig> cells;
  for (AblationMode m : modes) {
    RunConfig c = cfg;
    apply_mode(m, c.selftrain);
    cells.push_back(std::move(c));
  }
  AblationTable t;
  t.runs = run_cells(corpus, cells, cfg.seeds, cfg.jobs);
  for (std::size_t i = 0; i < modes.size(); ++i) t.rows.push_back(summarize(to_string(modes[i]), t.runs[i]));
  return t;
}

SweepAxis parse_sweep_axis(const std::string& name) {
  if (name == "z_percent") return SweepAxis::ZPercent;
  if (name == "unlabeled_fraction") return SweepAxis::UnlabeledFraction;
  if (name == "labeled_fraction") return SweepAxis::LabeledFraction;
  fail(ErrorKind::ConfigError, "unknown sweep axis '" + name + "'");
}

std::string to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::ZPercent: return "z_percent";
    case SweepAxis::UnlabeledFraction: return "unlabeled_fraction";
    case SweepAxis::LabeledFraction: return "labeled_fraction";
  }
  return "?";
}

SweepTable sweep(const Corpus& corpus, const RunConfig& cfg, SweepAxis axis,
                 const std::vector<double>& values) {
  if (values.empty()) fail(ErrorKind::ConfigError, "sweep needs at least one value");
  if (cfg.seeds.empty()) fail(ErrorKind::ConfigError, "sweep needs at least one seed");
  std::vector<RunConfig> cells;
  for (double v : values) {
    RunConfig c = cfg;
    switch (axis) {
      case SweepAxis::ZPercent: c.selftrain.z_percent = v; break;
      case SweepAxis::UnlabeledFraction: c.split.unlabeled_fraction = v; break;
      case SweepAxis::LabeledFraction: c.split.labeled_fraction = v; break;
    }
    c.validate();
    cells.push_back(std::move(c));
  }
  SweepTable t{axis, values, {}};
  const auto runs = run_cells(corpus, cells, cfg.seeds, cfg.jobs);
  for (std::size_t i = 0; i < values.size(); ++i) {
    char label[64];
    std::snprintf(label, sizeof label, "%g", values[i]);
    t.rows.push_back(summarize(label, runs[i]));
  }
  return t;
}

namespace {

json metrics_json(const Metrics& m) {
  return {{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1},
          {"correct", m.correct},     {"predicted", m.predicted}, {"gold", m.gold},
          {"empty", m.empty}};
}

json trace_json(const MetaStepTrace& t) {
  return {{"inner_loss", t.inner_loss}, {"meta_loss", t.meta_loss},
          {"grad_norm", t.grad_norm}, {"pseudo_count", t.pseudo_count}};
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

std::string report_json(const TrainReport& r, std::uint64_t seed) {
  json doc;
  doc["seed"] = seed;
  doc["completed"] = r.completed;
  doc["error"] = r.error;
  doc["supervised"] = metrics_json(r.supervised);
  doc["final_f1"] = final_f1(r);
  json its = json::array();
  for (const auto& it : r.iterations) {
    its.push_back({{"iteration", it.iteration},
                   {"test", metrics_json(it.test)},
                   {"pseudo_all", metrics_json(it.pseudo_all)},
                   {"pseudo_selected", metrics_json(it.pseudo_selected)},
                   {"offered", it.offered},
                   {"selected", it.selected},
                   {"pseudo_pool", it.pseudo_pool},
                   {"mean_weight", it.mean_weight},
                   {"distribution_l1", it.distribution_l1},
                   {"pseudo_distribution", it.pseudo_distribution},
                   {"gold_distribution", it.gold_distribution},
                   {"rcn_loss", it.rcn_loss},
                   {"meta_steps", it.meta_steps},
                   {"meta_mean", trace_json(it.meta_mean)}});
  }
  doc["iterations"] = std::move(its);
  return doc.dump(2) + "\n";
}

std::string report_csv(const TrainReport& r) {
  std::string out = "iter,precision,recall,f1,pseudo_f1,selected_M,mean_w,distribution_l1\n";
  for (const auto& it : r.iterations) {
    out += std::to_string(it.iteration) + "," + fmt(it.test.precision) + "," +
           fmt(it.test.recall) + "," + fmt(it.test.f1) + "," + fmt(it.pseudo_selected.f1) + "," +
           std::to_string(it.selected) + "," + fmt(it.mean_weight) + "," +
           fmt(it.distribution_l1) + "\n";
  }
  return out;
}

std::string meta_trace_csv(const TrainReport& r) {
  std::string out = "iteration,inner_loss,meta_loss,grad_norm,pseudo_count\n";
  for (const auto& it : r.iterations) {
    for (const auto& t : it.meta_traces) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%zu\n", it.iteration, t.inner_loss,
                    t.meta_loss, t.grad_norm, t.pseudo_count);
      out += buf;
    }
  }
  return out;
}

namespace {

std::string summary_row(const Summary& s) {
  return s.label + "," + fmt(s.mean_f1) + "," + fmt(s.std_f1) + "," +
         fmt(s.mean_supervised_f1) + "," + fmt(s.mean_pseudo_f1_all) + "," +
         fmt(s.mean_pseudo_f1_selected) + "," + fmt(s.mean_distribution_l1) + "," +
         std::to_string(s.runs_ok) + "," + std::to_string(s.runs_failed) + "\n";
}

const char* kSummaryColumns =
    "mean_f1,std_f1,mean_supervised_f1,mean_pseudo_f1_all,mean_pseudo_f1_selected,"
    "mean_distribution_l1,runs_ok,runs_failed\n";

}  // namespace

std::string ablation_csv(const AblationTable& t) {
  std::string out = std::string("mode,") + kSummaryColumns;
  for (const auto& row : t.rows) out += summary_row(row);
  return out;
}

std::string sweep_csv(const SweepTable& t) {
  std::string out = to_string(t.axis) + "," + kSummaryColumns;
  for (const auto& row : t.rows) out += summary_row(row);
  return out;
}

std::string summary_json(const Summary& s) {
  json doc = {{"label", s.label},
              {"runs_ok", s.runs_ok},
              {"runs_failed", s.runs_failed},
              {"mean_f1", s.mean_f1},
              {"std_f1", s.std_f1},
              {"mean_supervised_f1", s.mean_supervised_f1},
              {"mean_pseudo_f1_all", s.mean_pseudo_f1_all},
              {"mean_pseudo_f1_selected", s.mean_pseudo_f1_selected},
              {"mean_distribution_l1", s.mean_distribution_l1},
              {"f1s", s.f1s}};
  return doc.dump(2) + "\n";
}

}  // namespace metasre
