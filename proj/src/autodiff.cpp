#include "nmtprobe/autodiff.hpp"

#include <cmath>
#include <limits>

namespace nmtprobe {

// ---------------------------------------------------------------------------
// ParameterSet

Parameter& ParameterSet::add(std::string name, Tensor value) {
  if (by_name_.count(name)) throw ValueError("duplicate parameter name '" + name + "'");
  Parameter p;
  p.name = name;
  p.grad = Tensor::Zero(value.rows(), value.cols());
  p.value = std::move(value);
  by_name_.emplace(std::move(name), params_.size());
  params_.push_back(std::move(p));
  return params_.back();
}

std::size_t ParameterSet::index_of(const std::string& name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) throw ValueError("unknown parameter '" + name + "'");
  return it->second;
}

Parameter& ParameterSet::at(const std::string& name) { return params_[index_of(name)]; }
const Parameter& ParameterSet::at(const std::string& name) const { return params_[index_of(name)]; }

std::size_t ParameterSet::entry_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

void ParameterSet::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

// ---------------------------------------------------------------------------
// Graph

Var Graph::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.op = "constant";
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

Var Graph::param(Parameter& p) {
  auto it = param_nodes_.find(&p);
  if (it != param_nodes_.end()) return {this, it->second};
  Node n;
  n.bound = &p.value;
  n.op = "param";
  n.requires_grad = true;
  Parameter* target = &p;
  n.backward = [target](Graph&, const Tensor& upstream) { target->grad += upstream; };
  nodes_.push_back(std::move(n));
  param_nodes_.emplace(&p, nodes_.size() - 1);
  return {this, nodes_.size() - 1};
}

void Graph::check_owned(Var v, const char* what) const {
  if (v.graph != this || v.id >= nodes_.size()) {
    throw ValueError(std::string(what) + ": node was not produced by this graph");
  }
}

Var Graph::record(Tensor value, const char* op, std::span<const Var> inputs, BackwardFn backward) {
  Node n;
  n.value = std::move(value);
  n.op = op;
  for (Var in : inputs) {
    check_owned(in, op);
    n.requires_grad = n.requires_grad || nodes_[in.id].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

void Graph::backward(Var loss) {
  if (loss.graph != this || loss.id >= nodes_.size()) {
    throw ValueError("backward before forward: loss node does not exist in this graph");
  }
  const Tensor& lv = value(loss);
  if (lv.rows() != 1 || lv.cols() != 1) {
    throw ShapeError("backward: loss must be 1x1, got " + shape_string(lv));
  }
  for (auto& n : nodes_) n.grad.resize(0, 0);
  if (!nodes_[loss.id].requires_grad) return;
  nodes_[loss.id].grad = Tensor::Ones(1, 1);
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.backward || n.grad.size() == 0) continue;
    // Backward fns only write to earlier nodes, so n.grad stays put.
    n.backward(*this, n.grad);
  }
}

// ---------------------------------------------------------------------------
// Ops

namespace {

enum class Broadcast { same, row, col, scalar };

Broadcast broadcast_kind(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rows() == b.rows() && a.cols() == b.cols()) return Broadcast::same;
  if (b.rows() == 1 && b.cols() == 1) return Broadcast::scalar;
  if (b.rows() == 1 && b.cols() == a.cols()) return Broadcast::row;
  if (b.cols() == 1 && b.rows() == a.rows()) return Broadcast::col;
  throw ShapeError(std::string(op) + ": cannot broadcast " + shape_string(b) + " onto " + shape_string(a));
}

Tensor expand(const Tensor& b, Broadcast kind, Index rows, Index cols) {
  switch (kind) {
    case Broadcast::same:
      return b;
    case Broadcast::row:
      return b.replicate(rows, 1);
    case Broadcast::col:
      return b.replicate(1, cols);
    case Broadcast::scalar:
      return Tensor::Constant(rows, cols, b(0, 0));
  }
  return b;
}

Tensor reduce(const Tensor& g, Broadcast kind) {
  switch (kind) {
    case Broadcast::same:
      return g;
    case Broadcast::row:
      return g.colwise().sum();
    case Broadcast::col:
      return g.rowwise().sum();
    case Broadcast::scalar:
      return Tensor::Constant(1, 1, g.sum());
  }
  return g;
}

void require_finite(const Tensor& t, const char* op) {
  if (!t.allFinite()) throw NumericError(std::string(op) + ": non-finite output (divergence)");
}

Graph& graph_of(Var a, Var b, const char* op) {
  if (a.graph == nullptr || a.graph != b.graph) {
    throw ValueError(std::string(op) + ": operands belong to different graphs");
  }
  return *a.graph;
}

Tensor row_softmax(const Tensor& x) {
  Tensor y = x;
  for (Index r = 0; r < y.rows(); ++r) {
    auto row = y.row(r);
    row.array() -= row.maxCoeff();
    row = row.array().exp().matrix();
    row /= row.sum();
  }
  return y;
}

Tensor row_log_softmax(const Tensor& x) {
  Tensor y = x;
  for (Index r = 0; r < y.rows(); ++r) {
    auto row = y.row(r);
    row.array() -= row.maxCoeff();
    const double lse = std::log(row.array().exp().sum());
    row.array() -= lse;
  }
  return y;
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Var matmul(Var a, Var b) {
  Graph& g = graph_of(a, b, "matmul");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.cols() != bv.rows()) {
    throw ShapeError("matmul: " + shape_string(av) + " x " + shape_string(bv));
  }
  Tensor out = av * bv;
  require_finite(out, "matmul");
  const Var ins[] = {a, b};
  return g.record(std::move(out), "matmul", ins, [a, b](Graph& gr, const Tensor& up) {
    if (gr.requires_grad(a)) gr.accumulate(a, up * gr.value(b).transpose());
    if (gr.requires_grad(b)) gr.accumulate(b, gr.value(a).transpose() * up);
  });
}

Var add(Var a, Var b) {
  Graph& g = graph_of(a, b, "add");
  const Tensor& av = a.value();
  const Broadcast kind = broadcast_kind(av, b.value(), "add");
  Tensor out = av + expand(b.value(), kind, av.rows(), av.cols());
  require_finite(out, "add");
  const Var ins[] = {a, b};
  return g.record(std::move(out), "add", ins, [a, b, kind](Graph& gr, const Tensor& up) {
    gr.accumulate(a, up);
    if (gr.requires_grad(b)) gr.accumulate(b, reduce(up, kind));
  });
}

Var sub(Var a, Var b) {
  Graph& g = graph_of(a, b, "sub");
  const Tensor& av = a.value();
  const Broadcast kind = broadcast_kind(av, b.value(), "sub");
  Tensor out = av - expand(b.value(), kind, av.rows(), av.cols());
  require_finite(out, "sub");
  const Var ins[] = {a, b};
  return g.record(std::move(out), "sub", ins, [a, b, kind](Graph& gr, const Tensor& up) {
    gr.accumulate(a, up);
    if (gr.requires_grad(b)) gr.accumulate(b, -reduce(up, kind));
  });
}

Var mul(Var a, Var b) {
  Graph& g = graph_of(a, b, "mul");
  const Tensor& av = a.value();
  const Broadcast kind = broadcast_kind(av, b.value(), "mul");
  Tensor out = av.cwiseProduct(expand(b.value(), kind, av.rows(), av.cols()));
  require_finite(out, "mul");
  const Var ins[] = {a, b};
  return g.record(std::move(out), "mul", ins, [a, b, kind](Graph& gr, const Tensor& up) {
    const Tensor& av = gr.value(a);
    if (gr.requires_grad(a)) gr.accumulate(a, up.cwiseProduct(expand(gr.value(b), kind, av.rows(), av.cols())));
    if (gr.requires_grad(b)) gr.accumulate(b, reduce(up.cwiseProduct(av), kind));
  });
}

Var scale(Var a, double factor) {
  Tensor out = a.value() * factor;
  require_finite(out, "scale");
  const Var ins[] = {a};
  return a.graph->record(std::move(out), "scale", ins,
                         [a, factor](Graph& gr, const Tensor& up) { gr.accumulate(a, up * factor); });
}

Var sigmoid(Var a) {
  Tensor out = a.value().unaryExpr([](double x) { return stable_sigmoid(x); });
  const Var ins[] = {a};
  Graph& g = *a.graph;
  const std::size_t self = g.size();
  return g.record(std::move(out), "sigmoid", ins, [a, self](Graph& gr, const Tensor& up) {
    const Tensor& y = gr.value(Var{&gr, self});
    gr.accumulate(a, up.cwiseProduct(y.cwiseProduct((1.0 - y.array()).matrix())));
  });
}

Var tanh(Var a) {
  Tensor out = a.value().array().tanh().matrix();
  const Var ins[] = {a};
  Graph& g = *a.graph;
  const std::size_t self = g.size();
  return g.record(std::move(out), "tanh", ins, [a, self](Graph& gr, const Tensor& up) {
    const Tensor& y = gr.value(Var{&gr, self});
    gr.accumulate(a, up.cwiseProduct((1.0 - y.array().square()).matrix()));
  });
}

Var relu(Var a) {
  Tensor out = a.value().cwiseMax(0.0);
  const Var ins[] = {a};
  return a.graph->record(std::move(out), "relu", ins, [a](Graph& gr, const Tensor& up) {
    const Tensor& x = gr.value(a);
    gr.accumulate(a, (x.array() > 0.0).select(up, 0.0).matrix());
  });
}

Var softmax(Var a) {
  Tensor out = row_softmax(a.value());
  const Var ins[] = {a};
  Graph& g = *a.graph;
  const std::size_t self = g.size();
  return g.record(std::move(out), "softmax", ins, [a, self](Graph& gr, const Tensor& up) {
    const Tensor& y = gr.value(Var{&gr, self});
    const Eigen::VectorXd dots = up.cwiseProduct(y).rowwise().sum();
    Tensor dx = y.cwiseProduct(up - dots.replicate(1, up.cols()));
    gr.accumulate(a, dx);
  });
}

Var log_softmax(Var a) {
  Tensor out = row_log_softmax(a.value());
  const Var ins[] = {a};
  Graph& g = *a.graph;
  const std::size_t self = g.size();
  return g.record(std::move(out), "log_softmax", ins, [a, self](Graph& gr, const Tensor& up) {
    const Tensor probs = gr.value(Var{&gr, self}).array().exp().matrix();
    const Eigen::VectorXd totals = up.rowwise().sum();
    gr.accumulate(a, up - probs.cwiseProduct(totals.replicate(1, up.cols())));
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no operands");
  Graph& g = *parts.front().graph;
  const Index rows = parts.front().rows();
  Index cols = 0;
  for (Var p : parts) {
    if (p.graph != &g) throw ValueError("concat_cols: operands belong to different graphs");
    if (p.rows() != rows) throw ShapeError("concat_cols: row mismatch " + shape_string(p.value()));
    cols += p.cols();
  }
  Tensor out(rows, cols);
  std::vector<Var> inputs(parts.begin(), parts.end());
  Index offset = 0;
  for (Var p : parts) {
    out.middleCols(offset, p.cols()) = p.value();
    offset += p.cols();
  }
  return g.record(std::move(out), "concat", inputs, [inputs](Graph& gr, const Tensor& up) {
    Index off = 0;
    for (Var p : inputs) {
      const Index c = gr.value(p).cols();
      gr.accumulate(p, up.middleCols(off, c));
      off += c;
    }
  });
}

Var slice_cols(Var a, Index start, Index count) {
  if (start < 0 || count <= 0 || start + count > a.cols()) {
    throw ShapeError("slice_cols: [" + std::to_string(start) + ", +" + std::to_string(count) + ") out of " +
                     shape_string(a.value()));
  }
  Tensor out = a.value().middleCols(start, count);
  const Var ins[] = {a};
  return a.graph->record(std::move(out), "slice", ins,
                         [a, start](Graph& gr, const Tensor& up) { gr.accumulate_block(a, 0, start, up); });
}

Var sum(Var a) {
  Tensor out = Tensor::Constant(1, 1, a.value().sum());
  require_finite(out, "sum");
  const Var ins[] = {a};
  return a.graph->record(std::move(out), "sum", ins, [a](Graph& gr, const Tensor& up) {
    const Tensor& x = gr.value(a);
    gr.accumulate(a, Tensor::Constant(x.rows(), x.cols(), up(0, 0)));
  });
}

Var dropout(Var a, double drop_prob) {
  if (drop_prob < 0.0 || drop_prob >= 1.0) throw ValueError("dropout: probability must be in [0, 1)");
  Graph& g = *a.graph;
  if (!g.training() || drop_prob == 0.0) return a;
  const double keep = 1.0 - drop_prob;
  Tensor mask(a.rows(), a.cols());
  for (Index i = 0; i < mask.size(); ++i) mask.data()[i] = g.rng().bernoulli(keep) ? 1.0 / keep : 0.0;
  Tensor out = a.value().cwiseProduct(mask);
  const Var ins[] = {a};
  return g.record(std::move(out), "dropout", ins,
                  [a, mask = std::move(mask)](Graph& gr, const Tensor& up) { gr.accumulate(a, up.cwiseProduct(mask)); });
}

Var embedding(Graph& g, Parameter& table, std::span<const int> ids) {
  Tensor out(static_cast<Index>(ids.size()), table.value.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= table.value.rows()) {
      throw ShapeError("embedding: id " + std::to_string(ids[i]) + " outside table '" + table.name + "' of " +
                       std::to_string(table.value.rows()) + " rows");
    }
    out.row(static_cast<Index>(i)) = table.value.row(ids[i]);
  }
  // Lookup is a leaf that scatters straight into the table gradient.
  Var leaf = g.param(table);
  const Var ins[] = {leaf};
  std::vector<int> rows(ids.begin(), ids.end());
  Parameter* target = &table;
  return g.record(std::move(out), "embedding", ins, [target, rows = std::move(rows)](Graph&, const Tensor& up) {
    for (std::size_t i = 0; i < rows.size(); ++i) target->grad.row(rows[i]) += up.row(static_cast<Index>(i));
  });
}

Var cross_entropy(Var logits, std::span<const int> targets, double normalizer, int ignore_id) {
  const Tensor& x = logits.value();
  if (static_cast<Index>(targets.size()) != x.rows()) {
    throw ShapeError("cross_entropy: " + std::to_string(targets.size()) + " targets for " + shape_string(x));
  }
  if (!(normalizer > 0.0)) throw ValueError("cross_entropy: normalizer must be positive");
  const Tensor logp = row_log_softmax(x);
  double total = 0.0;
  for (Index r = 0; r < x.rows(); ++r) {
    const int t = targets[static_cast<std::size_t>(r)];
    if (t == ignore_id) continue;
    if (t < 0 || t >= x.cols()) throw ShapeError("cross_entropy: target id " + std::to_string(t) + " out of range");
    total -= logp(r, t);
  }
  Tensor out = Tensor::Constant(1, 1, total / normalizer);
  std::vector<int> tgt(targets.begin(), targets.end());
  const Var ins[] = {logits};
  return logits.graph->record(
      std::move(out), "cross_entropy", ins,
      [logits, logp, tgt = std::move(tgt), normalizer, ignore_id](Graph& gr, const Tensor& up) {
        Tensor dx = logp.array().exp().matrix();
        for (Index r = 0; r < dx.rows(); ++r) {
          const int t = tgt[static_cast<std::size_t>(r)];
          if (t == ignore_id) {
            dx.row(r).setZero();
          } else {
            dx(r, t) -= 1.0;
          }
        }
        gr.accumulate(logits, dx * (up(0, 0) / normalizer));
      });
}

}  // namespace nmtprobe
