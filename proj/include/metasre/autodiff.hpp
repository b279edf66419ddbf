#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "metasre/tensor.hpp"

// Tape-free reverse-mode autodiff. Every Node owns its value and the parents
// it was computed from, so the graph is implicit in the shared pointers and
// released when the last handle goes away. Backward rules are written in
// terms of the same primitives, which makes gradients themselves
// differentiable when requested (create_graph).
namespace metasre::ad {

enum class Op {
  Leaf,
  Add,
  AddRowBroadcast,
  Sub,
  Scale,
  Mul,
  MatMul,
  Transpose,
  ConcatCols,
  ConcatRows,
  Slice,
  Embed,
  IndexSelectRows,
  ScatterAddRows,
  Tanh,
  SoftmaxRows,
  Log,
  MaskedReciprocal,
  SumAll,
  Expand,
  Mean,
};

namespace detail {
struct NodeImpl;
struct Access;
}  // namespace detail

class Node {
 public:
  Node() = default;

  const Tensor& value() const;
  Op op() const;
  bool requires_grad() const;
  bool is_leaf() const;
  bool trainable() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  const std::vector<Node>& parents() const;

  explicit operator bool() const noexcept { return impl_ != nullptr; }
  const void* id() const noexcept { return impl_.get(); }

 private:
  friend struct detail::Access;

  std::shared_ptr<const detail::NodeImpl> impl_;
};

using BackwardFn =
    std::function<std::vector<Node>(const std::vector<Node>& parents, const Node& out,
                                    const Node& grad_out)>;

/// Registers a new node. When gradient recording is off, or no parent needs
/// a gradient, the node is stored as a constant without parents.
Node make_node(Tensor value, Op op, std::vector<Node> parents, BackwardFn backward);

/// Is gradient recording enabled on this thread.
bool grad_enabled() noexcept;

/// Disables gradient recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Graph leaf. Trainable leaves always require gradients. Throws
/// InvalidValue on non-finite input.
Node leaf(Tensor values, bool trainable);
inline Node constant(Tensor values) { return leaf(std::move(values), false); }

Node add(const Node& a, const Node& b);
/// a [r x c] plus a row vector bias [1 x c] repeated over rows.
Node add_row_broadcast(const Node& a, const Node& bias);
Node sub(const Node& a, const Node& b);
Node scale(const Node& a, double factor);
/// Elementwise (Hadamard) product.
Node mul(const Node& a, const Node& b);
Node matmul(const Node& a, const Node& b);
Node transpose(const Node& a);
Node concat_cols(std::span<const Node> parts);
Node concat_rows(std::span<const Node> parts);
Node slice(const Node& a, std::size_t row0, std::size_t rows, std::size_t col0,
           std::size_t cols);
/// Places a into a zero tensor of shape [rows x cols] at (row0, col0).
Node embed(const Node& a, std::size_t rows, std::size_t cols, std::size_t row0,
           std::size_t col0);
Node index_select_rows(const Node& a, std::span<const std::size_t> rows);
/// out[rows[i]] += a[i]; out has out_rows rows.
Node scatter_add_rows(const Node& a, std::span<const std::size_t> rows, std::size_t out_rows);
Node tanh(const Node& a);
Node softmax_rows(const Node& a);
/// Natural log after clamping the input below at `floor`.
Node log(const Node& a, double floor = 1e-12);
/// 1/a where a > floor, 0 elsewhere.
Node masked_reciprocal(const Node& a, double floor);
Node sum_all(const Node& a);
Node expand(const Node& scalar, std::size_t rows, std::size_t cols);
Node mean(const Node& a);
/// sum_i values_i * weights_i over all entries.
Node weighted_sum(const Node& values, const Node& weights);

/// Probability clamp applied before the log in cross-entropy.
inline constexpr double kProbabilityFloor = 1e-12;

/// Per-row -log(p[target]) as a [B x 1] column. `targets` is one-hot [B x K].
Node cross_entropy_rows(const Node& probabilities, const Tensor& targets);
/// Mean over rows of cross_entropy_rows.
Node cross_entropy(const Node& probabilities, const Tensor& targets);

Tensor one_hot(std::span<const int> labels, std::size_t num_classes);

/// d objective / d wrt for each entry of wrt. Unreachable nodes get zeros of
/// their shape. With create_graph the returned gradients are themselves
/// differentiable with respect to every upstream leaf.
std::vector<Node> grad(const Node& objective, std::span<const Node> wrt, bool create_graph);

}  // namespace metasre::ad
