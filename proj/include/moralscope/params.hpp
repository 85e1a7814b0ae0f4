#pragma once

#include "moralscope/tensor.hpp"

#include <map>
#include <string>
#include <vector>

namespace moralscope::num {

struct AdamConfig {
  double learning_rate = 2e-5;
  double epsilon = 1e-8;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double clip_norm = 0.0;  // global L2 clip; 0 disables

  void validate() const;
};

struct Parameter {
  Tensor value;
  Tensor grad;
  Tensor m;
  Tensor v;
  bool has_grad = false;
};

/// Named trainable tensors with gradient and Adam moment slots.
/// Iteration order is lexicographic by name.
class ParamStore {
 public:
  Tensor& add(const std::string& name, Tensor init);
  bool contains(const std::string& name) const { return params_.count(name) != 0; }

  Tensor& value(const std::string& name);
  const Tensor& value(const std::string& name) const;
  const Tensor& grad(const std::string& name) const;
  Parameter& slot(const std::string& name);
  const Parameter& slot(const std::string& name) const;

  std::vector<std::string> names() const;
  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;
  std::uint64_t step() const { return step_; }

  void accumulate_grad(const std::string& name, const Tensor& g);
  /// Marks every parameter as having a (possibly zero) gradient.
  void mark_all_gradients();
  void zero_grad();

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  friend void adam_step(ParamStore&, const AdamConfig&);
  std::map<std::string, Parameter> params_;
  std::uint64_t step_ = 0;
};

/// Bias-corrected Adam update over every parameter; clears gradients.
/// Throws PreconditionError when any parameter has no populated gradient.
void adam_step(ParamStore& store, const AdamConfig& cfg);

}  // namespace moralscope::num
