#include "moralscope/autograd.hpp"

#include <cmath>
#include <sstream>

namespace moralscope::num {

namespace {

std::string dims(const Tensor& t) {
  std::ostringstream os;
  os << t.rows() << "x" << t.cols();
  return os.str();
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw InvalidArgument(std::string(op) + ": shape mismatch " + dims(a) + " vs " + dims(b));
  }
}

void require_same_graph(Var a, Var b) {
  if (a.graph() != b.graph()) throw InvalidArgument("operands recorded on different graphs");
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

const Tensor& Var::value() const {
  if (!graph_) throw InvalidArgument("use of an unbound Var");
  return graph_->value(*this);
}

Graph::Graph(bool training, std::uint64_t dropout_seed) : training_(training), rng_(dropout_seed) {}

Var Graph::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Graph::input(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Graph::param(ParamStore& store, const std::string& name) {
  auto& by_name = bound_[&store];
  if (auto it = by_name.find(name); it != by_name.end()) return Var(this, it->second);
  if (by_name.empty()) stores_.push_back(&store);
  Node n;
  n.value = store.value(name);
  n.requires_grad = true;
  n.store = &store;
  n.param_name = name;
  nodes_.push_back(std::move(n));
  by_name.emplace(name, nodes_.size() - 1);
  return Var(this, nodes_.size() - 1);
}

Var Graph::record(Tensor value, std::vector<Var> parents, Backprop backprop) {
  Node n;
  n.value = std::move(value);
  for (const Var& p : parents) {
    if (p.graph() != this) throw InvalidArgument("parent recorded on a different graph");
    n.requires_grad = n.requires_grad || nodes_[p.id()].requires_grad;
  }
  if (n.requires_grad) n.backprop = std::move(backprop);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

void Graph::accumulate(Var v, const Tensor& g) {
  Node& n = nodes_[v.id_];
  if (!n.requires_grad) return;
  if (!n.grad_touched) {
    n.grad = g;
    n.grad_touched = true;
  } else {
    n.grad += g;
  }
}

void Graph::accumulate_block(Var v, Eigen::Index row, Eigen::Index col, const Tensor& g) {
  Node& n = nodes_[v.id_];
  if (!n.requires_grad) return;
  if (!n.grad_touched) {
    n.grad = Tensor::Zero(n.value.rows(), n.value.cols());
    n.grad_touched = true;
  }
  n.grad.block(row, col, g.rows(), g.cols()) += g;
}

void Graph::backward(Var output) {
  if (output.rows() != 1 || output.cols() != 1) {
    throw InvalidArgument("backward: output must be a scalar, got " + dims(output.value()));
  }
  backward(output, Tensor::Ones(1, 1));
}

void Graph::backward(Var output, const Tensor& seed) {
  if (output.graph() != this) throw InvalidArgument("backward: output from another graph");
  if (consumed_) throw StaleTraceError("backward called twice on the same trace; run a new forward pass");
  require_same_shape("backward", output.value(), seed);
  consumed_ = true;
  for (Node& n : nodes_) {
    n.grad_touched = false;
    n.grad.resize(0, 0);
  }
  accumulate(output, seed);
  for (std::size_t i = output.id_ + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.grad_touched || !n.backprop) continue;
    // Closures only write to parents (lower ids) and never grow nodes_.
    n.backprop(*this, n.grad);
  }
  for (Node& n : nodes_) {
    if (n.store && n.grad_touched) n.store->accumulate_grad(n.param_name, n.grad);
  }
  for (ParamStore* s : stores_) s->mark_all_gradients();
}

Tensor Graph::grad(Var v) const {
  const Node& n = nodes_.at(v.id_);
  if (!n.grad_touched) return Tensor::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

// ---- ops -------------------------------------------------------------------

Var matmul(Var a, Var b) {
  require_same_graph(a, b);
  if (a.cols() != b.rows()) {
    throw InvalidArgument("matmul: inner dimension mismatch " + dims(a.value()) + " * " + dims(b.value()));
  }
  return a.graph()->record(a.value() * b.value(), {a, b}, [a, b](Graph& g, const Tensor& up) {
    if (g.requires_grad(a)) g.accumulate(a, up * b.value().transpose());
    if (g.requires_grad(b)) g.accumulate(b, a.value().transpose() * up);
  });
}

Var transpose(Var a) {
  return a.graph()->record(a.value().transpose(), {a},
                           [a](Graph& g, const Tensor& up) { g.accumulate(a, up.transpose()); });
}

Var add(Var a, Var b) {
  require_same_graph(a, b);
  require_same_shape("add", a.value(), b.value());
  return a.graph()->record(a.value() + b.value(), {a, b}, [a, b](Graph& g, const Tensor& up) {
    g.accumulate(a, up);
    g.accumulate(b, up);
  });
}

Var sub(Var a, Var b) {
  require_same_graph(a, b);
  require_same_shape("sub", a.value(), b.value());
  return a.graph()->record(a.value() - b.value(), {a, b}, [a, b](Graph& g, const Tensor& up) {
    g.accumulate(a, up);
    g.accumulate(b, -up);
  });
}

Var mul(Var a, Var b) {
  require_same_graph(a, b);
  require_same_shape("mul", a.value(), b.value());
  return a.graph()->record(a.value().cwiseProduct(b.value()), {a, b}, [a, b](Graph& g, const Tensor& up) {
    if (g.requires_grad(a)) g.accumulate(a, up.cwiseProduct(b.value()));
    if (g.requires_grad(b)) g.accumulate(b, up.cwiseProduct(a.value()));
  });
}

Var add_row(Var a, Var r) {
  require_same_graph(a, r);
  if (r.rows() != 1 || r.cols() != a.cols()) {
    throw InvalidArgument("add_row: expected 1x" + std::to_string(a.cols()) + " row, got " + dims(r.value()));
  }
  Tensor out = a.value().rowwise() + r.value().row(0);
  return a.graph()->record(std::move(out), {a, r}, [a, r](Graph& g, const Tensor& up) {
    g.accumulate(a, up);
    if (g.requires_grad(r)) g.accumulate(r, up.colwise().sum());
  });
}

Var mul_col(Var a, Var c) {
  require_same_graph(a, c);
  if (c.cols() != 1 || c.rows() != a.rows()) {
    throw InvalidArgument("mul_col: expected " + std::to_string(a.rows()) + "x1 column, got " + dims(c.value()));
  }
  Tensor out = a.value().array().colwise() * c.value().col(0).array();
  return a.graph()->record(std::move(out), {a, c}, [a, c](Graph& g, const Tensor& up) {
    if (g.requires_grad(a)) {
      Tensor ga = up.array().colwise() * c.value().col(0).array();
      g.accumulate(a, ga);
    }
    if (g.requires_grad(c)) {
      Tensor gc = up.cwiseProduct(a.value()).rowwise().sum();
      g.accumulate(c, gc);
    }
  });
}

Var scale(Var a, double s) {
  return a.graph()->record(a.value() * s, {a}, [a, s](Graph& g, const Tensor& up) { g.accumulate(a, up * s); });
}

Var sigmoid(Var a) {
  Tensor y = a.value().unaryExpr([](double x) { return stable_sigmoid(x); });
  Tensor local = y.array() * (1.0 - y.array());
  return a.graph()->record(std::move(y), {a}, [a, local = std::move(local)](Graph& g, const Tensor& up) {
    g.accumulate(a, up.cwiseProduct(local));
  });
}

Var tanh(Var a) {
  Tensor y = a.value().array().tanh().matrix();
  Tensor local = 1.0 - y.array().square();
  return a.graph()->record(std::move(y), {a}, [a, local = std::move(local)](Graph& g, const Tensor& up) {
    g.accumulate(a, up.cwiseProduct(local));
  });
}

Var relu(Var a) {
  Tensor y = a.value().cwiseMax(0.0);
  return a.graph()->record(std::move(y), {a}, [a](Graph& g, const Tensor& up) {
    Tensor mask = (a.value().array() > 0.0).cast<double>().matrix();
    g.accumulate(a, up.cwiseProduct(mask));
  });
}

Var abs(Var a) {
  return a.graph()->record(a.value().cwiseAbs(), {a}, [a](Graph& g, const Tensor& up) {
    Tensor sign = a.value().unaryExpr([](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
    g.accumulate(a, up.cwiseProduct(sign));
  });
}

Var log(Var a) {
  return a.graph()->record(a.value().array().log().matrix(), {a}, [a](Graph& g, const Tensor& up) {
    g.accumulate(a, (up.array() / a.value().array()).matrix());
  });
}

Var softmax(Var a) {
  const Tensor& x = a.value();
  if (x.size() == 0) throw InvalidArgument("softmax: empty input");
  Tensor y = (x.array() - x.maxCoeff()).exp().matrix();
  y /= y.sum();
  return a.graph()->record(y, {a}, [a, y](Graph& g, const Tensor& up) {
    const double dot = up.cwiseProduct(y).sum();
    g.accumulate(a, (y.array() * (up.array() - dot)).matrix());
  });
}

Var sum(Var a) {
  Tensor s(1, 1);
  s(0, 0) = a.value().sum();
  return a.graph()->record(std::move(s), {a}, [a](Graph& g, const Tensor& up) {
    g.accumulate(a, Tensor::Constant(a.rows(), a.cols(), up(0, 0)));
  });
}

Var mean_rows(Var a) {
  if (a.rows() == 0) throw InvalidArgument("mean_rows: no rows");
  Tensor m = a.value().colwise().mean();
  return a.graph()->record(std::move(m), {a}, [a](Graph& g, const Tensor& up) {
    const double inv = 1.0 / static_cast<double>(a.rows());
    Tensor ga = up.replicate(a.rows(), 1) * inv;
    g.accumulate(a, ga);
  });
}

Var concat_cols(Var a, Var b) {
  require_same_graph(a, b);
  if (a.rows() != b.rows()) throw InvalidArgument("concat_cols: row mismatch");
  Tensor out(a.rows(), a.cols() + b.cols());
  out << a.value(), b.value();
  return a.graph()->record(std::move(out), {a, b}, [a, b](Graph& g, const Tensor& up) {
    if (g.requires_grad(a)) g.accumulate(a, up.leftCols(a.cols()));
    if (g.requires_grad(b)) g.accumulate(b, up.rightCols(b.cols()));
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw InvalidArgument("concat_rows: no parts");
  Graph* graph = parts.front().graph();
  Eigen::Index rows = 0;
  const Eigen::Index cols = parts.front().cols();
  for (const Var& p : parts) {
    if (p.graph() != graph) throw InvalidArgument("concat_rows: parts on different graphs");
    if (p.cols() != cols) throw InvalidArgument("concat_rows: column mismatch");
    rows += p.rows();
  }
  Tensor out(rows, cols);
  Eigen::Index r = 0;
  for (const Var& p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  return graph->record(std::move(out), parts, [parts](Graph& g, const Tensor& up) {
    Eigen::Index offset = 0;
    for (const Var& p : parts) {
      if (g.requires_grad(p)) g.accumulate(p, up.middleRows(offset, p.rows()));
      offset += p.rows();
    }
  });
}

Var slice_cols(Var a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count <= 0 || start + count > a.cols()) throw InvalidArgument("slice_cols: out of range");
  Tensor out = a.value().middleCols(start, count);
  return a.graph()->record(std::move(out), {a}, [a, start, count](Graph& g, const Tensor& up) {
    g.accumulate_block(a, 0, start, up);
  });
}

Var row(Var a, Eigen::Index r) {
  if (r < 0 || r >= a.rows()) throw InvalidArgument("row: index out of range");
  Tensor out = a.value().row(r);
  return a.graph()->record(std::move(out), {a}, [a, r](Graph& g, const Tensor& up) {
    g.accumulate_block(a, r, 0, up);
  });
}

Var element(Var a, Eigen::Index r, Eigen::Index c) {
  if (r < 0 || r >= a.rows() || c < 0 || c >= a.cols()) throw InvalidArgument("element: index out of range");
  Tensor out(1, 1);
  out(0, 0) = a.value()(r, c);
  return a.graph()->record(std::move(out), {a}, [a, r, c](Graph& g, const Tensor& up) {
    g.accumulate_block(a, r, c, up);
  });
}

Var gather_rows(Var a, const std::vector<Eigen::Index>& index) {
  Tensor out(static_cast<Eigen::Index>(index.size()), a.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] < 0 || index[i] >= a.rows()) throw InvalidArgument("gather_rows: index out of range");
    out.row(static_cast<Eigen::Index>(i)) = a.value().row(index[i]);
  }
  return a.graph()->record(std::move(out), {a}, [a, index](Graph& g, const Tensor& up) {
    Tensor ga = Tensor::Zero(a.rows(), a.cols());
    for (std::size_t i = 0; i < index.size(); ++i) ga.row(index[i]) += up.row(static_cast<Eigen::Index>(i));
    g.accumulate(a, ga);
  });
}

Var scatter_add_rows(Var a, const std::vector<Eigen::Index>& index, Eigen::Index out_rows) {
  if (static_cast<Eigen::Index>(index.size()) != a.rows()) {
    throw InvalidArgument("scatter_add_rows: one index per row required");
  }
  Tensor out = Tensor::Zero(out_rows, a.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] < 0 || index[i] >= out_rows) throw InvalidArgument("scatter_add_rows: index out of range");
    out.row(index[i]) += a.value().row(static_cast<Eigen::Index>(i));
  }
  return a.graph()->record(std::move(out), {a}, [a, index](Graph& g, const Tensor& up) {
    Tensor ga(a.rows(), a.cols());
    for (std::size_t i = 0; i < index.size(); ++i) ga.row(static_cast<Eigen::Index>(i)) = up.row(index[i]);
    g.accumulate(a, ga);
  });
}

Var dropout(Var a, double rate) {
  if (rate < 0.0 || rate >= 1.0) throw InvalidArgument("dropout: rate must be in [0, 1)");
  Graph* graph = a.graph();
  if (!graph->training() || rate == 0.0) return a;
  const double keep_scale = 1.0 / (1.0 - rate);
  Tensor mask(a.rows(), a.cols());
  for (Eigen::Index i = 0; i < mask.size(); ++i) {
    mask.data()[i] = graph->dropout_uniform() < rate ? 0.0 : keep_scale;
  }
  Tensor out = a.value().cwiseProduct(mask);
  return graph->record(std::move(out), {a}, [a, mask](Graph& g, const Tensor& up) {
    g.accumulate(a, up.cwiseProduct(mask));
  });
}

Var cross_entropy(Var probs, std::size_t gold) {
  const Tensor& p = probs.value();
  if (gold >= static_cast<std::size_t>(p.size())) throw InvalidArgument("cross_entropy: gold index out of range");
  const double pg = p.data()[gold];
  const bool clamped = pg < 1e-12;
  Tensor out(1, 1);
  out(0, 0) = -std::log(clamped ? 1e-12 : pg);
  return probs.graph()->record(std::move(out), {probs}, [probs, gold, pg, clamped](Graph& g, const Tensor& up) {
    Tensor gp = Tensor::Zero(probs.rows(), probs.cols());
    if (!clamped) gp.data()[gold] = -up(0, 0) / pg;
    g.accumulate(probs, gp);
  });
}

}  // namespace moralscope::num
