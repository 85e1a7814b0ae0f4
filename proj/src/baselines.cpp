#include "moralscope/model.hpp"

#include <cmath>

namespace moralscope::model {

std::string_view to_string(BaselineKind k) {
  switch (k) {
    case BaselineKind::kLrLength: return "lr_length";
    case BaselineKind::kLrStaticEmbedding: return "lr_static_embedding";
    case BaselineKind::kClsDense: return "cls_dense";
  }
  return "?";
}

BaselineClassifier::BaselineClassifier(BaselineKind kind, int feature_dim, const BaselineConfig& cfg)
    : kind_(kind), feature_dim_(feature_dim), cfg_(cfg) {
  if (feature_dim <= 0) throw num::InvalidArgument("baseline feature dimension must be positive");
  if (kind == BaselineKind::kLrLength && feature_dim != 1) throw num::InvalidArgument("lr_length expects one feature");
  num::Rng rng(cfg.seed);
  if (kind == BaselineKind::kClsDense) {
    init_dense_stack(params_, cfg.dense, feature_dim, rng);
  } else {
    params_.add("lr/W", Tensor::Zero(feature_dim, 2));
    params_.add("lr/b", Tensor::Zero(1, 2));
  }
  mean_.assign(static_cast<std::size_t>(feature_dim), 0.0);
  scale_.assign(static_cast<std::size_t>(feature_dim), 1.0);
}

Var BaselineClassifier::logits(Graph& g, const std::vector<double>& features) {
  if (static_cast<int>(features.size()) != feature_dim_) throw num::InvalidArgument("baseline feature width mismatch");
  Tensor x(1, feature_dim_);
  for (int i = 0; i < feature_dim_; ++i) x(0, i) = (features[i] - mean_[i]) / scale_[i];
  Var in = g.constant(std::move(x));
  if (kind_ == BaselineKind::kClsDense) return dense_stack(g, params_, cfg_.dense, in);
  return add_row(matmul(in, g.param(params_, "lr/W")), g.param(params_, "lr/b"));
}

void BaselineClassifier::fit(const std::vector<std::vector<double>>& features, std::span<const int> labels) {
  if (features.size() != labels.size() || features.empty()) throw num::InvalidArgument("baseline fit: bad input sizes");
  bool has[2] = {false, false};
  for (int y : labels) {
    if (y != 0 && y != 1) throw num::InvalidArgument("baseline fit: labels must be 0 or 1");
    has[y] = true;
  }
  if (!has[0] || !has[1]) throw num::InvalidArgument("baseline fit: degenerate single-class input");
  const double n = static_cast<double>(features.size());
  for (int d = 0; d < feature_dim_; ++d) {
    double m = 0.0, v = 0.0;
    for (const auto& f : features) m += f.at(d) / n;
    for (const auto& f : features) v += (f[d] - m) * (f[d] - m) / n;
    mean_[d] = m;
    scale_[d] = v > 1e-24 ? std::sqrt(v) : 1.0;
  }
  num::Rng rng(cfg_.seed ^ 0xba5eULL);
  for (int step = 0; step < cfg_.steps; ++step) {
    params_.zero_grad();
    Graph g(true, rng.next_u64());
    Var total = g.constant(Tensor::Zero(1, 1));
    for (std::size_t i = 0; i < features.size(); ++i) {
      total = add(total, cross_entropy(softmax(logits(g, features[i])), static_cast<std::size_t>(labels[i])));
    }
    g.backward(scale(total, 1.0 / n));
    num::adam_step(params_, cfg_.adam);
  }
}

std::vector<double> BaselineClassifier::probabilities(const std::vector<double>& features) {
  Graph g(false);
  return num::to_std(softmax(logits(g, features)).value());
}

int BaselineClassifier::predict(const std::vector<double>& features) {
  const auto p = probabilities(features);
  return p[1] > p[0] ? 1 : 0;
}

std::vector<int> BaselineClassifier::predict(const std::vector<std::vector<double>>& features) {
  std::vector<int> out;
  out.reserve(features.size());
  for (const auto& f : features) out.push_back(predict(f));
  return out;
}

BaselineResult baseline_predict(BaselineKind kind, const std::vector<std::vector<double>>& train_features,
                                std::span<const int> train_labels,
                                const std::vector<std::vector<double>>& test_features, std::span<const int> test_labels,
                                const BaselineConfig& cfg) {
  if (train_features.empty()) throw num::InvalidArgument("baseline_predict: empty training set");
  BaselineClassifier clf(kind, static_cast<int>(train_features.front().size()), cfg);
  clf.fit(train_features, train_labels);
  BaselineResult r;
  r.train = evaluate_f1(clf.predict(train_features), train_labels);
  if (!test_features.empty()) r.test = evaluate_f1(clf.predict(test_features), test_labels);
  return r;
}

std::vector<double> length_feature(const corpus::LabeledInstance& instance) {
  return {static_cast<double>(instance.tokens.size())};
}

std::vector<double> mean_static_embedding(const corpus::LabeledInstance& instance, const embed::EmbeddingProvider& provider) {
  std::vector<double> mean(provider.dim(), 0.0);
  if (instance.tokens.empty()) return mean;
  for (const auto& t : instance.tokens) {
    const auto v = provider.token_vector(t);
    for (std::size_t d = 0; d < mean.size(); ++d) mean[d] += v[d];
  }
  for (auto& x : mean) x /= static_cast<double>(instance.tokens.size());
  return mean;
}

}  // namespace moralscope::model
