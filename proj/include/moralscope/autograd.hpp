#pragma once

#include "moralscope/params.hpp"
#include "moralscope/tensor.hpp"

#include <functional>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace moralscope::num {

class Graph;

class StaleTraceError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Handle to a node recorded on a Graph. Cheap to copy.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }
  Graph* graph() const { return graph_; }
  std::size_t id() const { return id_; }
  bool valid() const { return graph_ != nullptr; }

 private:
  friend class Graph;
  Var(Graph* g, std::size_t id) : graph_(g), id_(id) {}
  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

/// A single forward trace. Operations append nodes; backward() walks them in
/// reverse creation order. A trace can be differentiated once.
class Graph {
 public:
  explicit Graph(bool training = false, std::uint64_t dropout_seed = 0);
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool training() const { return training_; }

  Var constant(Tensor value);
  /// Leaf whose gradient is retained (embeddings for attribution methods).
  Var input(Tensor value);
  /// Leaf bound to a named parameter; gradients accumulate into the store.
  Var param(ParamStore& store, const std::string& name);

  void backward(Var output);  // output must be 1 x 1
  void backward(Var output, const Tensor& seed);

  /// Gradient of the last backward() output w.r.t. `v`; zeros if unreachable.
  Tensor grad(Var v) const;

  const Tensor& value(Var v) const { return nodes_.at(v.id_).value; }
  std::size_t size() const { return nodes_.size(); }

  // Builder used by the op library.
  using Backprop = std::function<void(Graph&, const Tensor& upstream)>;
  Var record(Tensor value, std::vector<Var> parents, Backprop backprop);
  void accumulate(Var v, const Tensor& g);
  /// Adds `g` into the block of v's gradient starting at (row, col).
  void accumulate_block(Var v, Eigen::Index row, Eigen::Index col, const Tensor& g);
  bool requires_grad(Var v) const { return nodes_[v.id_].requires_grad; }
  double dropout_uniform() { return rng_.uniform(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool grad_touched = false;
    Backprop backprop;
    ParamStore* store = nullptr;
    std::string param_name;
  };

  std::vector<Node> nodes_;
  std::unordered_map<const ParamStore*, std::unordered_map<std::string, std::size_t>> bound_;
  std::vector<ParamStore*> stores_;
  bool training_;
  bool consumed_ = false;
  Rng rng_;
};

// ---- op library ----------------------------------------------------------

Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);              // elementwise, same shape
Var add_row(Var a, Var row);        // a (n x d) + row (1 x d) broadcast
Var mul_col(Var a, Var col);        // a (n x d) * col (n x 1) broadcast
Var scale(Var a, double s);
Var sigmoid(Var a);
Var tanh(Var a);
Var relu(Var a);
Var abs(Var a);
Var log(Var a);
Var softmax(Var a);                 // over all elements
Var sum(Var a);                     // 1 x 1
Var mean_rows(Var a);               // n x d -> 1 x d
Var concat_cols(Var a, Var b);
Var concat_rows(const std::vector<Var>& parts);
Var slice_cols(Var a, Eigen::Index start, Eigen::Index count);
Var row(Var a, Eigen::Index r);
Var element(Var a, Eigen::Index r, Eigen::Index c);  // 1 x 1
Var gather_rows(Var a, const std::vector<Eigen::Index>& index);
Var scatter_add_rows(Var a, const std::vector<Eigen::Index>& index, Eigen::Index out_rows);
Var dropout(Var a, double rate);    // inverted dropout; identity outside training
/// -ln(probs[gold]) with probs[gold] clamped to 1e-12.
Var cross_entropy(Var probs, std::size_t gold);

}  // namespace moralscope::num
