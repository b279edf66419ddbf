#pragma once

// Shared helpers for the unit and acceptance tests. Finite differences and
// a tiny corpus over eight words.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "metasre/autodiff.hpp"
#include "metasre/data.hpp"
#include "metasre/encoder.hpp"
#include "metasre/experiment.hpp"
#include "metasre/meta.hpp"
#include "metasre/networks.hpp"

namespace testing {

using metasre::Tensor;

inline Tensor random_tensor(std::mt19937_64& rng, std::size_t rows, std::size_t cols,
                            double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(rows, cols);
  for (auto& v : t.values()) v = u(rng);
  return t;
}

// Error relative to the larger magnitude, with a floor so that entries
// which are zero up to rounding compare by absolute difference.
inline double rel_error(double a, double b, double floor = 1e-3) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

using ScalarFn = std::function<double(const std::vector<Tensor>&)>;

// Central differences of f at xs, one tensor per input.
inline std::vector<Tensor> numeric_gradient(const ScalarFn& f, std::vector<Tensor> xs,
                                            double step = 1e-5) {
  std::vector<Tensor> out;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    Tensor g(xs[k].rows(), xs[k].cols());
    for (std::size_t i = 0; i < xs[k].size(); ++i) {
      const double saved = xs[k][i];
      xs[k][i] = saved + step;
      const double up = f(xs);
      xs[k][i] = saved - step;
      const double down = f(xs);
      xs[k][i] = saved;
      g[i] = (up - down) / (2.0 * step);
    }
    out.push_back(std::move(g));
  }
  return out;
}

inline double max_rel_error(const std::vector<Tensor>& a, const std::vector<Tensor>& b,
                            double floor = 1e-3) {
  double worst = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    for (std::size_t i = 0; i < a[k].size(); ++i) {
      worst = std::max(worst, rel_error(a[k][i], b[k][i], floor));
    }
  }
  return worst;
}

// Analytic gradient of a graph-building objective at xs.
using GraphFn = std::function<metasre::ad::Node(const std::vector<metasre::ad::Node>&)>;

inline std::vector<Tensor> analytic_gradient(const GraphFn& f, const std::vector<Tensor>& xs) {
  std::vector<metasre::ad::Node> leaves;
  for (const auto& x : xs) leaves.push_back(metasre::ad::leaf(x, true));
  const auto grads = metasre::ad::grad(f(leaves), leaves, false);
  std::vector<Tensor> out;
  for (const auto& g : grads) out.push_back(g.value());
  return out;
}

inline double evaluate(const GraphFn& f, const std::vector<Tensor>& xs) {
  std::vector<metasre::ad::Node> leaves;
  for (const auto& x : xs) leaves.push_back(metasre::ad::constant(x));
  return f(leaves).value().item();
}

// Max relative error between the analytic and numeric gradient of f.
inline double gradient_check(const GraphFn& f, const std::vector<Tensor>& xs,
                             double step = 1e-5, double floor = 1e-3) {
  const auto numeric = numeric_gradient([&](const auto& v) { return evaluate(f, v); }, xs, step);
  return max_rel_error(analytic_gradient(f, xs), numeric, floor);
}

// A handful of short mentions over a small vocabulary.
inline std::vector<metasre::RelationMention> tiny_mentions(std::mt19937_64& rng, std::size_t n,
                                                           int num_classes) {
  static const std::vector<std::string> words = {"a", "b", "c", "d", "e", "f", "g", "h"};
  std::uniform_int_distribution<std::size_t> len(2, 5), word(0, words.size() - 1);
  std::uniform_int_distribution<int> label(0, num_classes - 1);
  std::vector<metasre::RelationMention> out;
  for (std::size_t i = 0; i < n; ++i) {
    metasre::RelationMention m;
    const std::size_t t = len(rng);
    for (std::size_t j = 0; j < t; ++j) m.tokens.push_back(words[word(rng)]);
    std::uniform_int_distribution<std::size_t> cut(1, t - 1);
    const std::size_t split = cut(rng);
    m.e1 = {0, split};
    m.e2 = {split, t};
    m.label = label(rng);
    out.push_back(std::move(m));
  }
  return out;
}

inline metasre::Vocabulary tiny_vocab() {
  return metasre::Vocabulary({"a", "b", "c", "d", "e", "f", "g", "h"});
}

inline std::vector<metasre::LabeledExample> labeled_examples(
    const std::vector<metasre::RelationMention>& ms, const metasre::Vocabulary& v) {
  std::vector<metasre::LabeledExample> out;
  for (const auto& m : ms) out.push_back({metasre::insert_entity_markers(m, v), *m.label});
  return out;
}

inline std::vector<metasre::MarkedSequence> marked(const std::vector<metasre::RelationMention>& ms,
                                                   const metasre::Vocabulary& v) {
  return metasre::insert_entity_markers(ms, v);
}

inline metasre::NetworkDims tiny_dims(std::size_t hidden = 4, std::size_t embed = 3,
                                      std::size_t classes = 2) {
  metasre::NetworkDims d;
  d.encoder = {tiny_vocab().size(), embed, hidden};
  d.num_classes = classes;
  return d;
}

// Parameters drawn wider than the default init so outputs are far from
// uniform and gradients are not vanishingly small.
inline metasre::ClassifierParams spread_params(std::uint64_t seed, const metasre::NetworkDims& dims,
                                               metasre::Role role, double scale = 8.0) {
  metasre::ClassifierParams p = metasre::init_params(seed, dims, role);
  auto tensors = p.flatten();
  for (auto& t : tensors) {
    for (auto& v : t.values()) v *= scale;
  }
  p.assign(std::move(tensors));
  return p;
}

// K=2, h_R=4 meta instance with a few labeled and unlabeled mentions.
struct MetaInstance {
  metasre::ClassifierParams tau, eta;
  std::vector<metasre::LabeledExample> labeled;
  std::vector<metasre::MarkedSequence> unlabeled;
};

inline MetaInstance meta_instance(std::uint64_t seed, std::size_t labeled = 4,
                                  std::size_t unlabeled = 2) {
  std::mt19937_64 rng(seed);
  const auto dims = tiny_dims(4, 3, 2);
  MetaInstance m{spread_params(seed * 2 + 1, dims, metasre::Role::Classifier),
                 spread_params(seed * 2 + 2, dims, metasre::Role::Generator),
                 {},
                 {}};
  const auto ms = tiny_mentions(rng, labeled + unlabeled, 2);
  m.labeled = labeled_examples({ms.begin(), ms.begin() + static_cast<long>(labeled)}, tiny_vocab());
  m.unlabeled = marked({ms.begin() + static_cast<long>(labeled), ms.end()}, tiny_vocab());
  return m;
}

// Central-difference estimate of d meta_loss / d eta.
inline std::vector<Tensor> numeric_meta_gradient(const MetaInstance& m, double alpha,
                                                 double step = 1e-4) {
  const auto f = [&](const std::vector<Tensor>& eta) {
    metasre::ClassifierParams e = m.eta;
    e.assign(eta);
    return metasre::build_meta_objective(m.tau, metasre::as_nodes(e, false), m.labeled, m.unlabeled,
                                         alpha)
        .meta_loss.value()
        .item();
  };
  return numeric_gradient(f, m.eta.flatten(), step);
}

// A small synthetic run: K=4 with no_relation, a few hundred mentions,
// short training. Fast enough for unit tests.
inline metasre::RunConfig small_config() {
  metasre::RunConfig cfg;
  metasre::SynthSpec spec;
  spec.num_classes = 4;
  spec.num_mentions = 240;
  spec.no_relation_share = 0.25;
  spec.seed = 3;
  cfg.data.synth = spec;
  cfg.data.synth_test_mentions = 80;
  cfg.split = {0.1, 0.5, 0};
  cfg.selftrain.initial_epochs = 3;
  cfg.selftrain.rcn_epochs_per_batch = 1;
  cfg.selftrain.rcn_lr = 0.01;
  cfg.meta.inner_lr = 0.01;
  cfg.meta.outer_lr = 0.001;
  cfg.meta.warmup_epochs = 2;
  cfg.hidden = 8;
  cfg.embed_dim = 4;
  cfg.seeds = {1};
  return cfg;
}

inline metasre::NetworkDims dims_for(const metasre::Corpus& c, const metasre::RunConfig& cfg) {
  metasre::NetworkDims d;
  d.encoder = {c.vocab.size(), cfg.embed_dim, cfg.hidden};
  d.num_classes = c.train.num_classes();
  return d;
}

}  // namespace testing
