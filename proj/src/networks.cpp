#include "metasre/networks.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "metasre/error.hpp"

namespace metasre {

std::string_view to_string(Role role) {
  return role == Role::Classifier ? "rcn" : "rlgn";
}

namespace {

std::array<std::array<std::size_t, 2>, 11> param_shapes(const NetworkDims& d) {
  const std::size_t v = d.encoder.vocab_size;
  const std::size_t e = d.encoder.embed_dim;
  const std::size_t h = d.encoder.hidden;
  const std::size_t half = h / 2;
  const std::size_t k = d.num_classes;
  return {{{v, e}, {e, half}, {half, half}, {1, half}, {e, half}, {half, half}, {1, half},
           {2 * h, h}, {1, h}, {h, k}, {1, k}}};
}

void validate(const NetworkDims& dims) {
  validate_dims(dims.encoder);
  if (dims.num_classes < 2) fail(ErrorKind::ConfigError, "need at least two relation classes");
}

}  // namespace

std::vector<Tensor> ClassifierParams::flatten() const {
  std::vector<Tensor> out;
  out.reserve(ClassifierWeights<Tensor>::kCount);
  for (const Tensor* t : weights.refs()) out.push_back(*t);
  return out;
}

void ClassifierParams::assign(std::vector<Tensor> tensors) {
  const auto shapes = param_shapes(dims);
  if (tensors.size() != shapes.size()) fail(ErrorKind::ShapeError, "parameter count mismatch");
  auto refs = weights.refs();
  for (std::size_t i = 0; i < refs.size(); ++i) {
    if (tensors[i].shape() != shapes[i]) {
      fail(ErrorKind::ShapeError, "parameter " + std::string(kParamNames[i]) + " has wrong shape");
    }
    *refs[i] = std::move(tensors[i]);
  }
}

ClassifierParams zero_params(const NetworkDims& dims, Role role) {
  validate(dims);
  ClassifierParams p;
  p.dims = dims;
  p.role = role;
  const auto shapes = param_shapes(dims);
  auto refs = p.weights.refs();
  for (std::size_t i = 0; i < refs.size(); ++i) *refs[i] = Tensor(shapes[i][0], shapes[i][1]);
  return p;
}

ClassifierParams init_params(std::uint64_t seed, const NetworkDims& dims, Role role) {
  ClassifierParams p = zero_params(dims, role);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(-0.1, 0.1);
  for (Tensor* t : p.weights.refs()) {
    for (double& v : t->values()) v = uniform(rng);
  }
  return p;
}

ClassifierNodes as_nodes(const ClassifierParams& p, bool trainable) {
  ClassifierNodes nodes;
  auto src = p.weights.refs();
  auto dst = nodes.refs();
  for (std::size_t i = 0; i < src.size(); ++i) *dst[i] = ad::leaf(*src[i], trainable);
  return nodes;
}

std::vector<ad::Node> flatten(const ClassifierNodes& nodes) {
  std::vector<ad::Node> out;
  for (const ad::Node* n : nodes.refs()) out.push_back(*n);
  return out;
}

ClassifierNodes unflatten(std::span<const ad::Node> nodes) {
  if (nodes.size() != ClassifierNodes::kCount) fail(ErrorKind::ShapeError, "node count mismatch");
  ClassifierNodes out;
  auto dst = out.refs();
  for (std::size_t i = 0; i < dst.size(); ++i) *dst[i] = nodes[i];
  return out;
}

ad::Node classify(std::span<const MarkedSequence> batch, const ClassifierNodes& w) {
  ad::Node pair = encode(batch, w.encoder);
  ad::Node hidden = ad::tanh(ad::add_row_broadcast(ad::matmul(pair, w.dense1_w), w.dense1_b));
  ad::Node logits = ad::add_row_broadcast(ad::matmul(hidden, w.dense2_w), w.dense2_b);
  // Finite but huge weights overflow here before any gradient does.
  for (double v : logits.value().values()) {
    if (!std::isfinite(v)) fail(ErrorKind::NonFiniteGradient, "forward pass overflowed the logits");
  }
  return ad::softmax_rows(logits);
}

std::vector<double> classify(const RelationMention& m, const Vocabulary& vocab,
                             const ClassifierParams& p) {
  const MarkedSequence seq = insert_entity_markers(m, vocab);
  Tensor probs = predict_probabilities(std::span(&seq, 1), p);
  return {probs.values().begin(), probs.values().end()};
}

Tensor predict_probabilities(std::span<const MarkedSequence> inputs, const ClassifierParams& p,
                             std::size_t chunk) {
  ad::NoGradGuard no_grad;
  const ClassifierNodes nodes = as_nodes(p, false);
  const std::size_t k = p.dims.num_classes;
  Tensor out(inputs.size(), k);
  for (std::size_t start = 0; start < inputs.size(); start += chunk) {
    const std::size_t n = std::min(chunk, inputs.size() - start);
    ad::Node probs = classify(inputs.subspan(start, n), nodes);
    std::copy_n(probs.value().data(), n * k, out.data() + start * k);
  }
  return out;
}

std::size_t argmax(std::span<const double> row) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < row.size(); ++j) {
    if (row[j] > row[best]) best = j;
  }
  return best;
}

std::vector<int> predict_labels(std::span<const MarkedSequence> inputs, const ClassifierParams& p) {
  const Tensor probs = predict_probabilities(inputs, p);
  std::vector<int> labels(inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    labels[i] = static_cast<int>(argmax(probs.values().subspan(i * probs.cols(), probs.cols())));
  }
  return labels;
}

namespace {

ad::Node weighted_loss(std::span<const LabeledExample> golden,
                       std::span<const WeightedExample> pseudo, const ad::Node& row_weights,
                       const ClassifierNodes& w) {
  std::vector<MarkedSequence> inputs;
  std::vector<int> labels;
  inputs.reserve(golden.size() + pseudo.size());
  for (const auto& g : golden) {
    inputs.push_back(g.input);
    labels.push_back(g.label);
  }
  for (const auto& q : pseudo) {
    inputs.push_back(q.input);
    labels.push_back(q.label);
  }
  const std::size_t k = w.dense2_b.cols();
  ad::Node per_row = ad::cross_entropy_rows(classify(inputs, w), ad::one_hot(labels, k));
  return ad::weighted_sum(per_row, row_weights);
}

}  // namespace

ad::Node classification_loss(std::span<const LabeledExample> golden,
                             std::span<const WeightedExample> pseudo, const ClassifierNodes& w) {
  if (golden.empty()) fail(ErrorKind::EmptyBatch, "classification loss needs golden examples");
  Tensor row_weights(golden.size() + pseudo.size(), 1, 1.0);
  for (std::size_t m = 0; m < pseudo.size(); ++m) {
    if (!(pseudo[m].weight >= 0.0 && pseudo[m].weight <= 1.0)) {
      fail(ErrorKind::InvalidValue, "pseudo weight outside [0, 1]");
    }
    row_weights[golden.size() + m] = pseudo[m].weight;
  }
  return weighted_loss(golden, pseudo, ad::constant(std::move(row_weights)), w);
}

ad::Node classification_loss(std::span<const LabeledExample> golden,
                             std::span<const WeightedExample> pseudo,
                             const ad::Node& pseudo_weights, const ClassifierNodes& w) {
  if (golden.empty()) fail(ErrorKind::EmptyBatch, "classification loss needs golden examples");
  if (pseudo.empty()) return classification_loss(golden, pseudo, w);
  if (pseudo_weights.rows() != pseudo.size() || pseudo_weights.cols() != 1) {
    fail(ErrorKind::ShapeError, "pseudo weights must be [M x 1]");
  }
  const ad::Node parts[] = {ad::constant(Tensor(golden.size(), 1, 1.0)), pseudo_weights};
  return weighted_loss(golden, pseudo, ad::concat_rows(parts), w);
}

}  // namespace metasre
