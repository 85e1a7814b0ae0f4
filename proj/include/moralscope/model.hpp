#pragma once

#include "moralscope/autograd.hpp"
#include "moralscope/corpus.hpp"
#include "moralscope/embeddings.hpp"
#include "moralscope/params.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace moralscope::model {

using num::Graph;
using num::ParamStore;
using num::Tensor;
using num::Var;

enum class Channels { kGlobal, kLocal, kGlobalLocal };
std::string_view to_string(Channels c);
Channels parse_channels(std::string_view s);

struct ModelConfig {
  double lambda = 0.1;
  int embedding_dim = 768;
  int global_hidden_per_direction = 384;
  int recurrent_layers = 2;
  int gcn_layers = 2;
  int gcn_out_dim = 128;
  int attention_dim = 128;
  std::vector<int> dense_units{512, 256, 128};
  double dropout = 0.5;
  int max_seq_len = 256;
  int batch_size = 16;
  int training_steps = 500;
  int epochs = 5;
  std::uint64_t seed = 0;
  Channels channels = Channels::kGlobalLocal;
  num::AdamConfig adam{};

  int global_width() const { return channels == Channels::kLocal ? 0 : 2 * global_hidden_per_direction; }
  int local_width() const { return channels == Channels::kGlobal ? 0 : gcn_out_dim; }
  /// 2 * global_hidden_per_direction + gcn_out_dim for the dual channel.
  int prediction_input_width() const { return global_width() + local_width(); }
  void validate() const;
};

/// Dependency relation labels seen in training plus the reserved "self" and
/// "unk" slots. Unseen labels map to "unk".
class RelationVocab {
 public:
  static constexpr std::string_view kUnknown = "unk";

  RelationVocab();
  static RelationVocab build(const std::vector<const corpus::DependencyGraph*>& graphs);
  static RelationVocab from_labels(const std::vector<std::string>& labels);

  int id(const std::string& relation) const;
  std::size_t size() const { return labels_.size(); }
  const std::vector<std::string>& labels() const { return labels_; }

 private:
  void insert(const std::string& label);
  std::vector<std::string> labels_;
  std::unordered_map<std::string, int> index_;
};

/// Trainable predictor: configuration, relation vocabulary and parameters.
class Model {
 public:
  Model(ModelConfig config, RelationVocab relations);

  const ModelConfig& config() const { return config_; }
  const RelationVocab& relations() const { return relations_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

 private:
  ModelConfig config_;
  RelationVocab relations_;
  ParamStore params_;
};

/// Inputs for one instance after embedding lookup and truncation.
struct ModelInput {
  std::string instance_id;
  Tensor embeddings;  // T x dim
  corpus::DependencyGraph graph;
  std::vector<std::uint8_t> weak_mask;
  int label = 0;
  bool truncated = false;
};

ModelInput prepare_input(const corpus::LabeledInstance& instance, const embed::EmbeddingProvider& provider,
                         int max_seq_len);
std::vector<ModelInput> prepare_inputs(const std::vector<const corpus::LabeledInstance*>& instances,
                                       const embed::EmbeddingProvider& provider, int max_seq_len);

// ---- layers ----------------------------------------------------------------

struct EncoderOutput {
  Var tokens;  // T x width
  Var pooled;  // 1 x width
};

/// Stacked bidirectional LSTM. Per-token state is [forward ; backward] of the
/// last layer; pooled is the time mean.
EncoderOutput encode_global(Graph& g, ParamStore& params, const ModelConfig& cfg, Var embeddings);

/// Syntactic GCN over augmented edges with direction-class weights,
/// per-relation biases and scalar sigmoid edge gates; ReLU between layers.
/// pooled = tanh(dense(mean over tokens)).
EncoderOutput encode_local(Graph& g, ParamStore& params, const ModelConfig& cfg, const RelationVocab& relations,
                           Var embeddings, const corpus::DependencyGraph& graph);

struct AttentionOutput {
  Var weights;  // T x 1, sums to 1
  Var context;  // 1 x width
};

/// Additive attention e_i = v . tanh(W r_i + b); weights = softmax(e).
/// `override_weights` replaces the computed weights (finite-difference probes).
AttentionOutput attention_pool(Graph& g, ParamStore& params, Var token_reps,
                               const std::optional<Tensor>& override_weights = std::nullopt);

/// Dense ReLU stack (dropout in training) followed by the 2-unit logit head.
Var dense_stack(Graph& g, ParamStore& params, const ModelConfig& cfg, Var input, const std::string& prefix = "pred");

void init_dense_stack(ParamStore& params, const ModelConfig& cfg, int input_width, num::Rng& rng,
                      const std::string& prefix = "pred");

struct ForwardOptions {
  bool training = false;
  std::optional<Tensor> attention_override;
};

struct ForwardResult {
  Var embeddings;
  Var token_global;  // invalid when the channel is off
  Var token_local;
  Var attention;
  Var context;
  Var logits;
  Var probs;
};

ForwardResult forward(Graph& g, Model& model, Var embeddings, const corpus::DependencyGraph& graph,
                      const ForwardOptions& options = {});

// ---- prediction and loss ---------------------------------------------------

struct PredictionCache {
  Tensor token_global;
  Tensor token_local;
  std::vector<double> attention;
  std::vector<double> logits;
  std::vector<double> probs;
  int predicted = 0;
  Tensor token_embeddings;
};

/// Inference pass (dropout off). Throws InvalidArgument on dimension mismatch.
PredictionCache predict(Model& model, const ModelInput& input);
PredictionCache predict_embeddings(Model& model, const Tensor& embeddings, const corpus::DependencyGraph& graph);

/// Domain-knowledge term L_d = -sum_i |a_i| z_d[i].
double domain_loss(std::span<const double> attention, std::span<const std::uint8_t> weak_mask);

/// CE(probs, gold) + lambda * L_d.
double loss_total(const PredictionCache& cache, int gold, std::span<const std::uint8_t> weak_mask, double lambda);
Var loss_total(Var probs, Var attention, int gold, std::span<const std::uint8_t> weak_mask, double lambda);

// ---- training --------------------------------------------------------------

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainHistory {
  std::vector<double> step_loss;
  std::vector<double> epoch_train_loss;
  std::vector<double> epoch_dev_macro_f1;
  std::size_t steps = 0;
};

struct TrainResult {
  Model model;
  TrainHistory history;
};

RelationVocab vocab_from_inputs(const std::vector<ModelInput>& inputs);

/// Mini-batch Adam on loss_total with dropout active. Deterministic for a
/// given config seed.
TrainResult train(const std::vector<ModelInput>& train_set, const std::vector<ModelInput>& dev_set,
                  const ModelConfig& config);

std::vector<int> predict_labels(Model& model, const std::vector<ModelInput>& inputs);

// ---- metrics ---------------------------------------------------------------

struct F1Scores {
  double macro_f1 = 0.0;  // percentages
  double precision = 0.0;
  double recall = 0.0;
};

F1Scores evaluate_f1(std::span<const int> predictions, std::span<const int> gold);

/// Stratified fold assignment (fold id per example), deterministic per seed.
std::vector<int> stratified_folds(std::span<const int> labels, int folds, std::uint64_t seed);

/// Runs `fit_predict(train_idx, test_idx) -> predictions for test_idx` per fold
/// and averages the fold scores.
F1Scores cross_validate(std::span<const int> labels, int folds, std::uint64_t seed,
                        const std::function<std::vector<int>(const std::vector<std::size_t>&,
                                                             const std::vector<std::size_t>&)>& fit_predict);

// ---- baselines -------------------------------------------------------------

enum class BaselineKind { kLrLength, kLrStaticEmbedding, kClsDense };
std::string_view to_string(BaselineKind k);

struct BaselineConfig {
  int steps = 400;
  num::AdamConfig adam{.learning_rate = 0.05};
  ModelConfig dense{};  // dense_units / dropout used by kClsDense
  std::uint64_t seed = 0;
};

class BaselineClassifier {
 public:
  BaselineClassifier(BaselineKind kind, int feature_dim, const BaselineConfig& cfg);

  void fit(const std::vector<std::vector<double>>& features, std::span<const int> labels);
  std::vector<double> probabilities(const std::vector<double>& features);
  int predict(const std::vector<double>& features);
  std::vector<int> predict(const std::vector<std::vector<double>>& features);

  BaselineKind kind() const { return kind_; }
  ParamStore& params() { return params_; }
  const BaselineConfig& config() const { return cfg_; }
  const std::vector<double>& feature_mean() const { return mean_; }
  const std::vector<double>& feature_scale() const { return scale_; }

 private:
  Var logits(Graph& g, const std::vector<double>& features);

  BaselineKind kind_;
  int feature_dim_;
  BaselineConfig cfg_;
  ParamStore params_;
  std::vector<double> mean_;
  std::vector<double> scale_;
};

struct BaselineResult {
  F1Scores train;
  F1Scores test;
};

/// Trains the named baseline on `train` features and evaluates both splits.
/// Single-class training labels are an error.
BaselineResult baseline_predict(BaselineKind kind, const std::vector<std::vector<double>>& train_features,
                                std::span<const int> train_labels,
                                const std::vector<std::vector<double>>& test_features, std::span<const int> test_labels,
                                const BaselineConfig& cfg = {});

std::vector<double> length_feature(const corpus::LabeledInstance& instance);
std::vector<double> mean_static_embedding(const corpus::LabeledInstance& instance, const embed::EmbeddingProvider& provider);

// ---- checkpoints -----------------------------------------------------------

void save_checkpoint(const std::filesystem::path& path, const Model& model);
Model load_checkpoint(const std::filesystem::path& path);
std::string config_to_json(const ModelConfig& cfg);
ModelConfig config_from_json(const std::string& json_text);

}  // namespace moralscope::model
