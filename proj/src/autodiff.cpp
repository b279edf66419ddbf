#include "metasre/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>

#include "metasre/error.hpp"
#include "metasre/kernels.hpp"

namespace metasre::ad {

namespace detail {

struct NodeImpl {
  Tensor value;
  Op op = Op::Leaf;
  bool requires_grad = false;
  bool trainable = false;
  std::vector<Node> parents;
  BackwardFn backward;
};

struct Access {
  static Node wrap(std::shared_ptr<const NodeImpl> impl) {
    Node n;
    n.impl_ = std::move(impl);
    return n;
  }
  static const NodeImpl& impl(const Node& n) {
    if (!n.impl_) fail(ErrorKind::InvalidValue, "use of an empty Node");
    return *n.impl_;
  }
};

}  // namespace detail

namespace {

using detail::Access;

thread_local bool t_grad_enabled = true;

std::string shape_str(const Tensor& t) {
  return "[" + std::to_string(t.rows()) + "x" + std::to_string(t.cols()) + "]";
}

void require_same_shape(const char* op, const Node& a, const Node& b) {
  if (!a.value().same_shape(b.value())) {
    fail(ErrorKind::ShapeError,
         std::string(op) + ": " + shape_str(a.value()) + " vs " + shape_str(b.value()));
  }
}

Node ones(std::size_t rows, std::size_t cols) { return constant(Tensor(rows, cols, 1.0)); }

class EnableGradGuard {
 public:
  EnableGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = true; }
  ~EnableGradGuard() { t_grad_enabled = previous_; }

 private:
  bool previous_;
};

}  // namespace

const Tensor& Node::value() const { return Access::impl(*this).value; }
Op Node::op() const { return Access::impl(*this).op; }
bool Node::requires_grad() const { return Access::impl(*this).requires_grad; }
bool Node::is_leaf() const { return Access::impl(*this).op == Op::Leaf; }
bool Node::trainable() const { return Access::impl(*this).trainable; }
const std::vector<Node>& Node::parents() const { return Access::impl(*this).parents; }

bool grad_enabled() noexcept { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

Node make_node(Tensor value, Op op, std::vector<Node> parents, BackwardFn backward) {
  auto impl = std::make_shared<detail::NodeImpl>();
  impl->value = std::move(value);
  impl->op = op;
  impl->requires_grad =
      t_grad_enabled &&
      std::any_of(parents.begin(), parents.end(), [](const Node& p) { return p.requires_grad(); });
  if (impl->requires_grad) {
    impl->parents = std::move(parents);
    impl->backward = std::move(backward);
  }
  return Access::wrap(std::move(impl));
}

Node leaf(Tensor values, bool trainable) {
  if (!values.all_finite()) fail(ErrorKind::InvalidValue, "leaf with non-finite values");
  auto impl = std::make_shared<detail::NodeImpl>();
  impl->value = std::move(values);
  impl->op = Op::Leaf;
  impl->trainable = trainable;
  impl->requires_grad = trainable;
  return Access::wrap(std::move(impl));
}

Node add(const Node& a, const Node& b) {
  require_same_shape("add", a, b);
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  return make_node(std::move(out), Op::Add, {a, b},
                   [](const std::vector<Node>&, const Node&, const Node& g) {
                     return std::vector<Node>{g, g};
                   });
}

Node add_row_broadcast(const Node& a, const Node& bias) {
  if (bias.rows() != 1 || bias.cols() != a.cols()) {
    fail(ErrorKind::ShapeError,
         "add_row_broadcast: " + shape_str(a.value()) + " + " + shape_str(bias.value()));
  }
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.rows(); ++i) {
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += bias.value()[j];
  }
  return make_node(std::move(out), Op::AddRowBroadcast, {a, bias},
                   [](const std::vector<Node>&, const Node&, const Node& g) {
                     return std::vector<Node>{g, matmul(ones(1, g.rows()), g)};
                   });
}

Node sub(const Node& a, const Node& b) {
  require_same_shape("sub", a, b);
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  return make_node(std::move(out), Op::Sub, {a, b},
                   [](const std::vector<Node>&, const Node&, const Node& g) {
                     return std::vector<Node>{g, scale(g, -1.0)};
                   });
}

Node scale(const Node& a, double factor) {
  Tensor out = a.value();
  for (double& v : out.values()) v *= factor;
  return make_node(std::move(out), Op::Scale, {a},
                   [factor](const std::vector<Node>&, const Node&, const Node& g) {
                     return std::vector<Node>{scale(g, factor)};
                   });
}

Node mul(const Node& a, const Node& b) {
  require_same_shape("mul", a, b);
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return make_node(std::move(out), Op::Mul, {a, b},
                   [](const std::vector<Node>& p, const Node&, const Node& g) {
                     return std::vector<Node>{mul(g, p[1]), mul(g, p[0])};
                   });
}

Node matmul(const Node& a, const Node& b) {
  if (a.cols() != b.rows()) {
    fail(ErrorKind::ShapeError,
         "matmul: " + shape_str(a.value()) + " * " + shape_str(b.value()));
  }
  return make_node(kernels::matmul(a.value(), b.value()), Op::MatMul, {a, b},
                   [](const std::vector<Node>& p, const Node&, const Node& g) {
                     return std::vector<Node>{matmul(g, transpose(p[1])),
                                              matmul(transpose(p[0]), g)};
                   });
}

Node transpose(const Node& a) {
  return make_node(kernels::transpose(a.value()), Op::Transpose, {a},
                   [](const std::vector<Node>&, const Node&, const Node& g) {
                     return std::vector<Node>{transpose(g)};
                   });
}

Node concat_cols(std::span<const Node> parts) {
  if (parts.empty()) fail(ErrorKind::ShapeError, "concat_cols of nothing");
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  for (const Node& p : parts) {
    if (p.rows() != rows) fail(ErrorKind::ShapeError, "concat_cols: row counts differ");
    cols += p.cols();
  }
  Tensor out(rows, cols);
  std::size_t offset = 0;
  for (const Node& p : parts) {
    for (std::size_t i = 0; i < rows; ++i) {
      std::copy_n(p.value().data() + i * p.cols(), p.cols(), out.data() + i * cols + offset);
    }
    offset += p.cols();
  }
  return make_node(std::move(out), Op::ConcatCols, {parts.begin(), parts.end()},
                   [](const std::vector<Node>& p, const Node&, const Node& g) {
                     std::vector<Node> grads;
                     std::size_t off = 0;
                     for (const Node& part : p) {
                       grads.push_back(slice(g, 0, g.rows(), off, part.cols()));
                       off += part.cols();
                     }
                     return grads;
                   });
}

Node concat_rows(std::span<const Node> parts) {
  if (parts.empty()) fail(ErrorKind::ShapeError, "concat_rows of nothing");
  const std::size_t cols = parts.front().cols();
  std::size_t rows = 0;
  for (const Node& p : parts) {
    if (p.cols() != cols) fail(ErrorKind::ShapeError, "concat_rows: column counts differ");
    rows += p.rows();
  }
  std::vector<double> values;
  values.reserve(rows * cols);
  for (const Node& p : parts) {
    values.insert(values.end(), p.value().values().begin(), p.value().values().end());
  }
  return make_node(Tensor(rows, cols, std::move(values)), Op::ConcatRows,
                   {parts.begin(), parts.end()},
                   [](const std::vector<Node>& p, const Node&, const Node& g) {
                     std::vector<Node> grads;
                     std::size_t off = 0;
                     for (const Node& part : p) {
                       grads.push_back(slice(g, off, part.rows(), 0, g.cols()));
                       off += part.rows();
                     }
                     return grads;
                   });
}

Node slice(const Node& a, std::size_t row0, std::size_t rows, std::size_t col0,
           std::size_t cols) {
  if (row0 + rows > a.rows() || col0 + cols > a.cols()) {
    fail(ErrorKind::ShapeError, "slice out of range of " + shape_str(a.value()));
  }
  Tensor out(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    std::copy_n(a.value().data() + (row0 + i) * a.cols() + col0, cols, out.data() + i * cols);
  }
  const std::size_t src_rows = a.rows();
  const std::size_t src_cols = a.cols();
  return make_node(std::move(out), Op::Slice, {a},
                   [=](const std::vector<Node>&, const Node&, const Node& g) {
                     return std::vector<Node>{embed(g, src_rows, src_cols, row0, col0)};
                   });
}

Node embed(const Node& a, std::size_t rows, std::size_t cols, std::size_t row0,
           std::size_t col0) {
  if (row0 + a.rows() > rows || col0 + a.cols() > cols) {
    fail(ErrorKind::ShapeError, "embed does not fit " + shape_str(a.value()));
  }
  Tensor out(rows, cols);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    std::copy_n(a.value().data() + i * a.cols(), a.cols(), out.data() + (row0 + i) * cols + col0);
  }
  const std::size_t part_rows = a.rows();
  const std::size_t part_cols = a.cols();
  return make_node(std::move(out), Op::Embed, {a},
                   [=](const std::vector<Node>&, const Node&, const Node& g) {
                     return std::vector<Node>{slice(g, row0, part_rows, col0, part_cols)};
                   });
}

Node index_select_rows(const Node& a, std::span<const std::size_t> rows) {
  Tensor out(rows.size(), a.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= a.rows()) {
      fail(ErrorKind::IndexError, "index_select_rows: row " + std::to_string(rows[i]) +
                                      " of " + shape_str(a.value()));
    }
    std::copy_n(a.value().data() + rows[i] * a.cols(), a.cols(), out.data() + i * a.cols());
  }
  std::vector<std::size_t> index(rows.begin(), rows.end());
  const std::size_t src_rows = a.rows();
  return make_node(std::move(out), Op::IndexSelectRows, {a},
                   [index = std::move(index), src_rows](const std::vector<Node>&, const Node&,
                                                        const Node& g) {
                     return std::vector<Node>{scatter_add_rows(g, index, src_rows)};
                   });
}

Node scatter_add_rows(const Node& a, std::span<const std::size_t> rows, std::size_t out_rows) {
  if (rows.size() != a.rows()) fail(ErrorKind::ShapeError, "scatter_add_rows: index count");
  Tensor out(out_rows, a.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= out_rows) fail(ErrorKind::IndexError, "scatter_add_rows: row out of range");
    for (std::size_t j = 0; j < a.cols(); ++j) out(rows[i], j) += a.value()(i, j);
  }
  std::vector<std::size_t> index(rows.begin(), rows.end());
  return make_node(std::move(out), Op::ScatterAddRows, {a},
                   [index = std::move(index)](const std::vector<Node>&, const Node&,
                                              const Node& g) {
                     return std::vector<Node>{index_select_rows(g, index)};
                   });
}

Node tanh(const Node& a) {
  return make_node(kernels::tanh(a.value()), Op::Tanh, {a},
                   [](const std::vector<Node>&, const Node& y, const Node& g) {
                     // d tanh = 1 - y^2
                     Node slope = sub(ones(y.rows(), y.cols()), mul(y, y));
                     return std::vector<Node>{mul(g, slope)};
                   });
}

Node softmax_rows(const Node& a) {
  return make_node(kernels::softmax_rows(a.value()), Op::SoftmaxRows, {a},
                   [](const std::vector<Node>&, const Node& y, const Node& g) {
                     // dy_j/da = y_j (g_j - sum_k g_k y_k)
                     Node dot = matmul(mul(g, y), ones(y.cols(), 1));
                     Node spread = matmul(dot, ones(1, y.cols()));
                     return std::vector<Node>{mul(y, sub(g, spread))};
                   });
}

Node log(const Node& a, double floor) {
  Tensor out(a.rows(), a.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log(std::max(a.value()[i], floor));
  return make_node(std::move(out), Op::Log, {a},
                   [floor](const std::vector<Node>& p, const Node&, const Node& g) {
                     return std::vector<Node>{mul(g, masked_reciprocal(p[0], floor))};
                   });
}

Node masked_reciprocal(const Node& a, double floor) {
  Tensor out(a.rows(), a.cols());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = a.value()[i];
    out[i] = v > floor ? 1.0 / v : 0.0;
  }
  return make_node(std::move(out), Op::MaskedReciprocal, {a},
                   [](const std::vector<Node>&, const Node& r, const Node& g) {
                     return std::vector<Node>{mul(g, scale(mul(r, r), -1.0))};
                   });
}

Node sum_all(const Node& a) {
  double total = 0.0;
  for (double v : a.value().values()) total += v;
  const std::size_t rows = a.rows();
  const std::size_t cols = a.cols();
  return make_node(Tensor::scalar(total), Op::SumAll, {a},
                   [rows, cols](const std::vector<Node>&, const Node&, const Node& g) {
                     return std::vector<Node>{expand(g, rows, cols)};
                   });
}

Node expand(const Node& scalar, std::size_t rows, std::size_t cols) {
  if (scalar.value().size() != 1) fail(ErrorKind::ShapeError, "expand of a non-scalar");
  return make_node(Tensor(rows, cols, scalar.value()[0]), Op::Expand, {scalar},
                   [](const std::vector<Node>&, const Node&, const Node& g) {
                     return std::vector<Node>{sum_all(g)};
                   });
}

Node mean(const Node& a) {
  if (a.value().size() == 0) fail(ErrorKind::ShapeError, "mean of an empty tensor");
  double total = 0.0;
  for (double v : a.value().values()) total += v;
  const std::size_t rows = a.rows();
  const std::size_t cols = a.cols();
  const double inv = 1.0 / static_cast<double>(rows * cols);
  return make_node(Tensor::scalar(total * inv), Op::Mean, {a},
                   [rows, cols, inv](const std::vector<Node>&, const Node&, const Node& g) {
                     return std::vector<Node>{scale(expand(g, rows, cols), inv)};
                   });
}

Node weighted_sum(const Node& values, const Node& weights) {
  return sum_all(mul(values, weights));
}

Tensor one_hot(std::span<const int> labels, std::size_t num_classes) {
  Tensor out(labels.size(), num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes) {
      fail(ErrorKind::IndexError, "one_hot: label " + std::to_string(labels[i]) +
                                      " outside [0, " + std::to_string(num_classes) + ")");
    }
    out(i, static_cast<std::size_t>(labels[i])) = 1.0;
  }
  return out;
}

Node cross_entropy_rows(const Node& probabilities, const Tensor& targets) {
  const Tensor& p = probabilities.value();
  if (!p.same_shape(targets)) {
    fail(ErrorKind::ShapeError, "cross_entropy: " + shape_str(p) + " vs " + shape_str(targets));
  }
  for (std::size_t i = 0; i < p.rows(); ++i) {
    double total = 0.0;
    int hot = 0;
    for (std::size_t j = 0; j < p.cols(); ++j) {
      if (p(i, j) < 0.0 || !std::isfinite(p(i, j))) {
        fail(ErrorKind::InvalidDistribution, "row " + std::to_string(i) + " has a bad entry");
      }
      total += p(i, j);
      if (targets(i, j) == 1.0) {
        ++hot;
      } else if (targets(i, j) != 0.0) {
        hot = -1000;
      }
    }
    if (std::abs(total - 1.0) > 1e-6) {
      fail(ErrorKind::InvalidDistribution,
           "row " + std::to_string(i) + " sums to " + std::to_string(total));
    }
    if (hot != 1) {
      fail(ErrorKind::InvalidDistribution, "target row " + std::to_string(i) + " is not one-hot");
    }
  }
  Node picked = matmul(mul(log(probabilities, kProbabilityFloor), constant(targets)),
                       ones(p.cols(), 1));
  return scale(picked, -1.0);
}

Node cross_entropy(const Node& probabilities, const Tensor& targets) {
  return mean(cross_entropy_rows(probabilities, targets));
}

std::vector<Node> grad(const Node& objective, std::span<const Node> wrt, bool create_graph) {
  if (objective.value().size() != 1) {
    fail(ErrorKind::NotScalar, "grad of a " + shape_str(objective.value()) + " objective");
  }

  // Post-order DFS gives a topological order (parents before children).
  std::vector<Node> order;
  std::unordered_map<const void*, std::size_t> position;
  if (objective.requires_grad()) {
    std::unordered_map<const void*, bool> visited;
    std::vector<std::pair<Node, std::size_t>> stack;
    stack.emplace_back(objective, 0);
    visited[objective.id()] = true;
    while (!stack.empty()) {
      auto& [node, next] = stack.back();
      const auto& parents = node.parents();
      if (next < parents.size()) {
        const Node parent = parents[next++];
        if (parent.requires_grad() && !visited[parent.id()]) {
          visited[parent.id()] = true;
          stack.emplace_back(parent, 0);
        }
        continue;
      }
      position[node.id()] = order.size();
      order.push_back(node);
      stack.pop_back();
    }
  }

  std::optional<NoGradGuard> no_grad;
  std::optional<EnableGradGuard> with_grad;
  if (create_graph) {
    with_grad.emplace();
  } else {
    no_grad.emplace();
  }

  std::unordered_set<const void*> keep;
  for (const Node& target : wrt) keep.insert(target.id());

  std::vector<Node> grads(order.size());
  if (!order.empty()) grads.back() = constant(Tensor::scalar(1.0));
  for (std::size_t i = order.size(); i-- > 0;) {
    const Node& node = order[i];
    if (!grads[i] || node.is_leaf()) continue;
    const auto& impl = Access::impl(node);
    std::vector<Node> parent_grads = impl.backward(impl.parents, node, grads[i]);
    for (std::size_t k = 0; k < impl.parents.size(); ++k) {
      const Node& parent = impl.parents[k];
      if (!parent.requires_grad() || !parent_grads[k]) continue;
      Node& slot = grads[position.at(parent.id())];
      slot = slot ? add(slot, parent_grads[k]) : parent_grads[k];
    }
    // Intermediate gradients are no longer needed once propagated.
    if (!create_graph && !keep.contains(node.id())) grads[i] = Node();
  }

  std::vector<Node> result;
  result.reserve(wrt.size());
  for (const Node& target : wrt) {
    auto it = position.find(target.id());
    if (it != position.end() && grads[it->second]) {
      result.push_back(grads[it->second]);
    } else {
      result.push_back(constant(Tensor(target.rows(), target.cols())));
    }
  }
  return result;
}

}  // namespace metasre::ad
