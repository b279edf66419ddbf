#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "metasre/autodiff.hpp"
#include "metasre/encoder.hpp"

namespace metasre {

enum class Role { Classifier, Generator };  // RCN (tau) and RLGN (eta)

std::string_view to_string(Role role);

struct NetworkDims {
  EncoderDims encoder;
  std::size_t num_classes = 2;  // K
};

/// Encoder plus the dense head 2h_R -> h_R -> K.
template <typename T>
struct ClassifierWeights {
  EncoderWeights<T> encoder;
  T dense1_w;  // 2h_R x h_R
  T dense1_b;  // 1 x h_R
  T dense2_w;  // h_R x K
  T dense2_b;  // 1 x K

  static constexpr std::size_t kCount = 11;

  std::array<T*, kCount> refs() {
    return {&encoder.embedding, &encoder.fwd_wx, &encoder.fwd_wh, &encoder.fwd_b,
            &encoder.bwd_wx,    &encoder.bwd_wh, &encoder.bwd_b,  &dense1_w,
            &dense1_b,          &dense2_w,       &dense2_b};
  }
  std::array<const T*, kCount> refs() const {
    auto r = const_cast<ClassifierWeights*>(this)->refs();
    std::array<const T*, kCount> out;
    for (std::size_t i = 0; i < kCount; ++i) out[i] = r[i];
    return out;
  }
};

inline constexpr std::array<std::string_view, 11> kParamNames = {
    "encoder.embedding", "encoder.fwd.wx", "encoder.fwd.wh", "encoder.fwd.b",
    "encoder.bwd.wx",    "encoder.bwd.wh", "encoder.bwd.b",  "head.dense1.w",
    "head.dense1.b",     "head.dense2.w",  "head.dense2.b"};

using ClassifierNodes = ClassifierWeights<ad::Node>;

struct ClassifierParams {
  NetworkDims dims;
  Role role = Role::Classifier;
  ClassifierWeights<Tensor> weights;

  std::vector<Tensor> flatten() const;
  /// Replaces every tensor; ShapeError on count or shape mismatch.
  void assign(std::vector<Tensor> tensors);

  friend bool operator==(const ClassifierParams& a, const ClassifierParams& b) {
    return a.role == b.role && a.flatten() == b.flatten();
  }
};

/// Uniform [-0.1, 0.1] initialization from `seed`. ConfigError when K < 2.
ClassifierParams init_params(std::uint64_t seed, const NetworkDims& dims, Role role);

/// Shape-checked zero parameters.
ClassifierParams zero_params(const NetworkDims& dims, Role role);

/// Wraps each tensor as a leaf (trainable or constant).
ClassifierNodes as_nodes(const ClassifierParams& p, bool trainable);
std::vector<ad::Node> flatten(const ClassifierNodes& nodes);
ClassifierNodes unflatten(std::span<const ad::Node> nodes);

/// Row-stochastic class probabilities [B x K].
ad::Node classify(std::span<const MarkedSequence> batch, const ClassifierNodes& weights);

/// One mention, evaluated without recording gradients.
std::vector<double> classify(const RelationMention& m, const Vocabulary& vocab,
                             const ClassifierParams& p);

/// Gradient-free probabilities for many sequences, in chunks.
Tensor predict_probabilities(std::span<const MarkedSequence> inputs, const ClassifierParams& p,
                             std::size_t chunk = 64);
std::vector<int> predict_labels(std::span<const MarkedSequence> inputs, const ClassifierParams& p);

/// Index of the largest entry; ties go to the lowest index.
std::size_t argmax(std::span<const double> row);

struct LabeledExample {
  MarkedSequence input;
  int label = 0;
};

struct WeightedExample {
  MarkedSequence input;
  int label = 0;
  double weight = 1.0;
};

/// Sum of golden cross-entropies plus weight-scaled pseudo cross-entropies.
/// Weights enter as frozen constants. EmptyBatch when golden is empty.
ad::Node classification_loss(std::span<const LabeledExample> golden,
                             std::span<const WeightedExample> pseudo,
                             const ClassifierNodes& weights);

/// Same loss with pseudo weights supplied as a differentiable [M x 1] node;
/// the `weight` field of each pseudo example is ignored.
ad::Node classification_loss(std::span<const LabeledExample> golden,
                             std::span<const WeightedExample> pseudo,
                             const ad::Node& pseudo_weights, const ClassifierNodes& weights);

}  // namespace metasre
