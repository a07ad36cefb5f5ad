#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "nmtprobe/error.hpp"
#include "nmtprobe/random.hpp"
#include "nmtprobe/tensor.hpp"

namespace nmtprobe {

/// A trainable tensor and its accumulated gradient. `grad` always has the
/// shape of `value`.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  void zero_grad() { grad.setZero(); }
};

/// Ordered collection of named parameters. Copies are deep, so a copy is a
/// snapshot (used for best-checkpoint selection). Adding parameters
/// invalidates references; build the full set before creating graphs.
class ParameterSet {
 public:
  Parameter& add(std::string name, Tensor value);

  Parameter& operator[](std::size_t i) { return params_[i]; }
  const Parameter& operator[](std::size_t i) const { return params_[i]; }

  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;
  std::size_t index_of(const std::string& name) const;
  bool contains(const std::string& name) const { return by_name_.count(name) != 0; }

  std::size_t size() const { return params_.size(); }
  /// Total number of scalar entries across all parameters.
  std::size_t entry_count() const;

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  void zero_grad();

 private:
  std::vector<Parameter> params_;
  std::map<std::string, std::size_t> by_name_;
};

class Graph;

/// Handle to a node of a Graph. Cheap to copy; valid while its graph lives.
struct Var {
  Graph* graph = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
};

enum class Mode { eval, train };

/// Define-by-run computation graph. Each op evaluates eagerly and records a
/// node; nodes are appended in evaluation order, so insertion order is a valid
/// topological order and `backward` walks it in exact reverse.
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, const Tensor& upstream)>;

  explicit Graph(Mode mode = Mode::eval, std::uint64_t seed = 0) : mode_(mode), rng_(seed) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Input tensor that receives no gradient.
  Var constant(Tensor value);
  /// Leaf bound to a parameter. Repeated calls for the same parameter return
  /// the same node, so its gradient is pushed into `p.grad` once per backward.
  /// The parameter must not change while the graph is alive.
  Var param(Parameter& p);

  /// Records an op result. `inputs` are the nodes the result depends on;
  /// `backward` receives the upstream gradient and must route it to inputs
  /// via `accumulate`.
  Var record(Tensor value, const char* op, std::span<const Var> inputs, BackwardFn backward);

  const Tensor& value(Var v) const {
    const Node& n = nodes_[v.id];
    return n.bound ? *n.bound : n.value;
  }
  /// Gradient of the last backward pass w.r.t. a node (empty if unreached).
  const Tensor& grad(Var v) const { return nodes_[v.id].grad; }
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }

  /// Accumulates d(loss)/d(node) contributions; no-op for constant subgraphs.
  template <typename Derived>
  void accumulate(Var v, const Eigen::MatrixBase<Derived>& delta) {
    Node& n = nodes_[v.id];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) {
      n.grad = delta;
    } else {
      n.grad += delta;
    }
  }

  template <typename Derived>
  void accumulate_block(Var v, Index row0, Index col0, const Eigen::MatrixBase<Derived>& delta) {
    Node& n = nodes_[v.id];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) {
      const Tensor& val = n.bound ? *n.bound : n.value;
      n.grad = Tensor::Zero(val.rows(), val.cols());
    }
    n.grad.block(row0, col0, delta.rows(), delta.cols()) += delta;
  }

  /// Reverse pass from a 1x1 loss node; adds d(loss)/d(p) into every bound
  /// parameter's `grad`. Parameter gradients accumulate across calls.
  void backward(Var loss);

  bool training() const { return mode_ == Mode::train; }
  Mode mode() const { return mode_; }
  Rng& rng() { return rng_; }
  std::size_t size() const { return nodes_.size(); }
  const char* op_name(Var v) const { return nodes_[v.id].op; }

 private:
  struct Node {
    Tensor value;
    /// Parameter leaves read the live tensor instead of a copy.
    const Tensor* bound = nullptr;
    Tensor grad;
    BackwardFn backward;
    const char* op = "";
    bool requires_grad = false;
  };

  void check_owned(Var v, const char* what) const;

  Mode mode_;
  Rng rng_;
  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, std::size_t> param_nodes_;
};

inline const Tensor& Var::value() const { return graph->value(*this); }

// Primitive ops. Binary elementwise ops broadcast their second operand when it
// is 1xN (over rows), Bx1 (over columns) or 1x1.

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var sigmoid(Var a);
Var tanh(Var a);
Var relu(Var a);
/// Row-wise softmax.
Var softmax(Var a);
/// Row-wise log-softmax.
Var log_softmax(Var a);
Var concat_cols(std::span<const Var> parts);
Var slice_cols(Var a, Index start, Index count);
/// Sum of all entries as a 1x1 node.
Var sum(Var a);
/// Inverted dropout: in train mode zeroes each entry with probability
/// `drop_prob` and scales survivors by 1/(1-drop_prob); identity in eval mode.
Var dropout(Var a, double drop_prob);
/// Rows of `table` selected by `ids`, as a len(ids) x cols matrix.
Var embedding(Graph& g, Parameter& table, std::span<const int> ids);
/// Fused log-softmax + negative log-likelihood. Rows whose target equals
/// `ignore_id` contribute nothing. Returns sum(nll) / normalizer as 1x1.
Var cross_entropy(Var logits, std::span<const int> targets, double normalizer, int ignore_id = -1);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }

}  // namespace nmtprobe
