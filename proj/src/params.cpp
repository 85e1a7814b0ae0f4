#include "moralscope/params.hpp"

#include <cmath>

namespace moralscope::num {

void AdamConfig::validate() const {
  if (!(beta1 > 0.0 && beta1 < 1.0)) throw InvalidArgument("adam: beta1 must be in (0, 1)");
  if (!(beta2 > 0.0 && beta2 < 1.0)) throw InvalidArgument("adam: beta2 must be in (0, 1)");
  if (!(learning_rate > 0.0)) throw InvalidArgument("adam: learning_rate must be positive");
  if (!(epsilon > 0.0)) throw InvalidArgument("adam: epsilon must be positive");
  if (clip_norm < 0.0) throw InvalidArgument("adam: clip_norm must be non-negative");
}

Tensor& ParamStore::add(const std::string& name, Tensor init) {
  if (init.size() == 0) throw InvalidArgument("parameter '" + name + "' is empty");
  Parameter p;
  p.grad = Tensor::Zero(init.rows(), init.cols());
  p.m = Tensor::Zero(init.rows(), init.cols());
  p.v = Tensor::Zero(init.rows(), init.cols());
  p.value = std::move(init);
  auto [it, inserted] = params_.insert_or_assign(name, std::move(p));
  return it->second.value;
}

Parameter& ParamStore::slot(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw InvalidArgument("unknown parameter '" + name + "'");
  return it->second;
}

const Parameter& ParamStore::slot(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw InvalidArgument("unknown parameter '" + name + "'");
  return it->second;
}

Tensor& ParamStore::value(const std::string& name) { return slot(name).value; }
const Tensor& ParamStore::value(const std::string& name) const { return slot(name).value; }
const Tensor& ParamStore::grad(const std::string& name) const { return slot(name).grad; }

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(params_.size());
  for (const auto& [name, _] : params_) out.push_back(name);
  return out;
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [_, p] : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

void ParamStore::accumulate_grad(const std::string& name, const Tensor& g) {
  Parameter& p = slot(name);
  if (g.rows() != p.value.rows() || g.cols() != p.value.cols()) {
    throw InvalidArgument("gradient shape mismatch for '" + name + "'");
  }
  p.grad += g;
  p.has_grad = true;
}

void ParamStore::mark_all_gradients() {
  for (auto& [_, p] : params_) p.has_grad = true;
}

void ParamStore::zero_grad() {
  for (auto& [_, p] : params_) {
    p.grad.setZero();
    p.has_grad = false;
  }
}

void adam_step(ParamStore& store, const AdamConfig& cfg) {
  cfg.validate();
  for (const auto& [name, p] : store.params_) {
    if (!p.has_grad) throw PreconditionError("adam_step: no gradient for '" + name + "'");
  }
  double clip = 1.0;
  if (cfg.clip_norm > 0.0) {
    double sq = 0.0;
    for (const auto& [_, p] : store.params_) sq += p.grad.squaredNorm();
    const double norm = std::sqrt(sq);
    if (norm > cfg.clip_norm) clip = cfg.clip_norm / norm;
  }
  store.step_ += 1;
  const double t = static_cast<double>(store.step_);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  for (auto& [_, p] : store.params_) {
    const Tensor g = p.grad * clip;
    p.m = cfg.beta1 * p.m + (1.0 - cfg.beta1) * g;
    p.v = cfg.beta2 * p.v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
    const auto m_hat = p.m.array() / bc1;
    const auto v_hat = p.v.array() / bc2;
    p.value.array() -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
    p.grad.setZero();
    p.has_grad = false;
  }
}

}  // namespace moralscope::num
