#include "moralscope/model.hpp"

#include "moralscope/log.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace moralscope::model {

namespace {

constexpr const char* kClassNames[3] = {"forward", "reverse", "self"};

int class_index(corpus::EdgeDirection d) {
  switch (d) {
    case corpus::EdgeDirection::kForward: return 0;
    case corpus::EdgeDirection::kReverse: return 1;
    case corpus::EdgeDirection::kSelf: return 2;
  }
  return 2;
}

Tensor xavier(num::Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Tensor t(rows, cols);
  for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = rng.uniform(-limit, limit);
  return t;
}

std::string layer_prefix(const char* base, int layer) { return std::string(base) + "/l" + std::to_string(layer); }

}  // namespace

std::string_view to_string(Channels c) {
  switch (c) {
    case Channels::kGlobal: return "global";
    case Channels::kLocal: return "local";
    case Channels::kGlobalLocal: return "global-local";
  }
  return "?";
}

Channels parse_channels(std::string_view s) {
  if (s == "global") return Channels::kGlobal;
  if (s == "local") return Channels::kLocal;
  if (s == "global-local" || s == "global_local") return Channels::kGlobalLocal;
  throw num::InvalidArgument("unknown channel configuration '" + std::string(s) + "'");
}

void ModelConfig::validate() const {
  if (lambda < 0.0) throw num::InvalidArgument("lambda must be non-negative");
  if (embedding_dim <= 0 || global_hidden_per_direction <= 0 || gcn_out_dim <= 0 || attention_dim <= 0) {
    throw num::InvalidArgument("model dimensions must be positive");
  }
  if (recurrent_layers < 1 || gcn_layers < 1) throw num::InvalidArgument("layer counts must be at least 1");
  for (int u : dense_units) {
    if (u <= 0) throw num::InvalidArgument("dense units must be positive");
  }
  if (dropout < 0.0 || dropout >= 1.0) throw num::InvalidArgument("dropout must be in [0, 1)");
  if (max_seq_len < 1 || batch_size < 1 || epochs < 0 || training_steps < 0) {
    throw num::InvalidArgument("invalid training schedule");
  }
  adam.validate();
}

// ---- relation vocabulary -------------------------------------------------------

RelationVocab::RelationVocab() {
  insert(std::string(corpus::kSelfRelation));
  insert(std::string(kUnknown));
}

void RelationVocab::insert(const std::string& label) {
  if (index_.count(label)) return;
  index_.emplace(label, static_cast<int>(labels_.size()));
  labels_.push_back(label);
}

RelationVocab RelationVocab::build(const std::vector<const corpus::DependencyGraph*>& graphs) {
  std::vector<std::string> seen;
  for (const auto* g : graphs) {
    for (const auto& e : g->edges) seen.push_back(e.relation);
  }
  std::sort(seen.begin(), seen.end());
  seen.erase(std::unique(seen.begin(), seen.end()), seen.end());
  RelationVocab v;
  for (const auto& s : seen) v.insert(s);
  return v;
}

RelationVocab RelationVocab::from_labels(const std::vector<std::string>& labels) {
  RelationVocab v;
  for (const auto& s : labels) v.insert(s);
  return v;
}

int RelationVocab::id(const std::string& relation) const {
  auto it = index_.find(relation);
  return it == index_.end() ? index_.at(std::string(kUnknown)) : it->second;
}

// ---- parameters ------------------------------------------------------------------

void init_dense_stack(ParamStore& params, const ModelConfig& cfg, int input_width, num::Rng& rng,
                      const std::string& prefix) {
  int in = input_width;
  for (std::size_t k = 0; k < cfg.dense_units.size(); ++k) {
    const std::string p = prefix + "/d" + std::to_string(k);
    params.add(p + "/W", xavier(rng, in, cfg.dense_units[k]));
    params.add(p + "/b", Tensor::Zero(1, cfg.dense_units[k]));
    in = cfg.dense_units[k];
  }
  params.add(prefix + "/head/W", xavier(rng, in, 2));
  params.add(prefix + "/head/b", Tensor::Zero(1, 2));
}

Model::Model(ModelConfig config, RelationVocab relations) : config_(std::move(config)), relations_(std::move(relations)) {
  config_.validate();
  const ModelConfig& c = config_;
  num::Rng rng(c.seed);
  const int h = c.global_hidden_per_direction;
  if (c.channels != Channels::kLocal) {
    for (int l = 0; l < c.recurrent_layers; ++l) {
      const int in = l == 0 ? c.embedding_dim : 2 * h;
      for (const char* dir : {"fwd", "bwd"}) {
        const std::string p = layer_prefix("global", l) + "/" + dir;
        params_.add(p + "/Wx", xavier(rng, in, 4 * h));
        params_.add(p + "/Wh", xavier(rng, h, 4 * h));
        params_.add(p + "/b", Tensor::Zero(1, 4 * h));
      }
    }
  }
  if (c.channels != Channels::kGlobal) {
    const auto r = static_cast<Eigen::Index>(relations_.size());
    for (int j = 0; j < c.gcn_layers; ++j) {
      const int in = j == 0 ? c.embedding_dim : c.gcn_out_dim;
      const std::string p = layer_prefix("local", j);
      for (const char* cls : kClassNames) {
        params_.add(p + "/W_" + cls, xavier(rng, in, c.gcn_out_dim));
        params_.add(p + "/gate_" + cls, xavier(rng, in, 1));
      }
      params_.add(p + "/b_rel", Tensor::Zero(r, c.gcn_out_dim));
      params_.add(p + "/gate_b_rel", Tensor::Zero(r, 1));
    }
    params_.add("local/pool/W", xavier(rng, c.gcn_out_dim, c.gcn_out_dim));
    params_.add("local/pool/b", Tensor::Zero(1, c.gcn_out_dim));
  }
  const int width = c.prediction_input_width();
  params_.add("attn/W", xavier(rng, width, c.attention_dim));
  params_.add("attn/b", Tensor::Zero(1, c.attention_dim));
  params_.add("attn/v", xavier(rng, c.attention_dim, 1));
  init_dense_stack(params_, c, width, rng);
}

// ---- inputs ------------------------------------------------------------------------

ModelInput prepare_input(const corpus::LabeledInstance& instance, const embed::EmbeddingProvider& provider,
                         int max_seq_len) {
  ModelInput in;
  in.instance_id = instance.instance_id;
  in.label = instance.label;
  in.embeddings = provider.embed(instance.instance_id, instance.tokens);
  in.graph = instance.graph;
  in.weak_mask = instance.weak_mask;
  if (in.weak_mask.empty()) in.weak_mask.assign(instance.tokens.size(), 0);
  if (in.graph.token_count != static_cast<int>(instance.tokens.size())) {
    throw num::InvalidArgument("instance '" + instance.instance_id + "': graph and tokens differ in length");
  }
  const auto t = static_cast<int>(instance.tokens.size());
  if (t > max_seq_len) {
    log::warn("truncated_instance", {{"instance_id", instance.instance_id}, {"tokens", t}, {"max_seq_len", max_seq_len}});
    in.embeddings = in.embeddings.topRows(max_seq_len).eval();
    in.graph = in.graph.truncated(max_seq_len);
    in.weak_mask.resize(static_cast<std::size_t>(max_seq_len));
    in.truncated = true;
  }
  return in;
}

std::vector<ModelInput> prepare_inputs(const std::vector<const corpus::LabeledInstance*>& instances,
                                       const embed::EmbeddingProvider& provider, int max_seq_len) {
  std::vector<ModelInput> out;
  out.reserve(instances.size());
  for (const auto* inst : instances) out.push_back(prepare_input(*inst, provider, max_seq_len));
  return out;
}

// ---- global channel -----------------------------------------------------------------

namespace {

Var lstm_direction(Graph& g, ParamStore& params, const std::string& prefix, Var input, int hidden, bool reverse) {
  const Eigen::Index t_len = input.rows();
  Var xw = add_row(matmul(input, g.param(params, prefix + "/Wx")), g.param(params, prefix + "/b"));
  Var wh = g.param(params, prefix + "/Wh");
  Var h = g.constant(Tensor::Zero(1, hidden));
  Var c = g.constant(Tensor::Zero(1, hidden));
  std::vector<Var> states(static_cast<std::size_t>(t_len));
  for (Eigen::Index step = 0; step < t_len; ++step) {
    const Eigen::Index t = reverse ? t_len - 1 - step : step;
    Var z = add(row(xw, t), matmul(h, wh));
    Var i_gate = num::sigmoid(slice_cols(z, 0, hidden));
    Var f_gate = num::sigmoid(slice_cols(z, hidden, hidden));
    Var cand = num::tanh(slice_cols(z, 2 * hidden, hidden));
    Var o_gate = num::sigmoid(slice_cols(z, 3 * hidden, hidden));
    c = add(mul(f_gate, c), mul(i_gate, cand));
    h = mul(o_gate, num::tanh(c));
    states[static_cast<std::size_t>(t)] = h;
  }
  return concat_rows(states);
}

}  // namespace

EncoderOutput encode_global(Graph& g, ParamStore& params, const ModelConfig& cfg, Var embeddings) {
  if (embeddings.rows() < 1) throw num::InvalidArgument("encode_global: empty sequence");
  if (embeddings.cols() != cfg.embedding_dim) throw num::InvalidArgument("encode_global: embedding width mismatch");
  Var x = embeddings;
  for (int l = 0; l < cfg.recurrent_layers; ++l) {
    const std::string p = layer_prefix("global", l);
    Var fwd = lstm_direction(g, params, p + "/fwd", x, cfg.global_hidden_per_direction, false);
    Var bwd = lstm_direction(g, params, p + "/bwd", x, cfg.global_hidden_per_direction, true);
    x = concat_cols(fwd, bwd);
  }
  return {x, mean_rows(x)};
}

// ---- local channel ---------------------------------------------------------------------

EncoderOutput encode_local(Graph& g, ParamStore& params, const ModelConfig& cfg, const RelationVocab& relations,
                           Var embeddings, const corpus::DependencyGraph& graph) {
  const Eigen::Index t_len = embeddings.rows();
  if (t_len < 1) throw num::InvalidArgument("encode_local: empty sequence");
  if (graph.token_count != t_len) throw num::InvalidArgument("encode_local: graph token count differs from embeddings");
  if (embeddings.cols() != cfg.embedding_dim) throw num::InvalidArgument("encode_local: embedding width mismatch");

  struct EdgeLists {
    std::vector<Eigen::Index> src, dst, rel;
  };
  EdgeLists by_class[3];
  for (const auto& e : graph.augmented_edges) {
    auto& l = by_class[class_index(e.direction)];
    l.src.push_back(e.source);
    l.dst.push_back(e.target);
    l.rel.push_back(relations.id(e.relation));
  }

  Var h = embeddings;
  for (int j = 0; j < cfg.gcn_layers; ++j) {
    const std::string p = layer_prefix("local", j);
    Var b_rel = g.param(params, p + "/b_rel");
    Var gate_b_rel = g.param(params, p + "/gate_b_rel");
    std::optional<Var> next;
    for (int cls = 0; cls < 3; ++cls) {
      const auto& l = by_class[cls];
      if (l.src.empty()) continue;
      Var transformed = matmul(h, g.param(params, p + "/W_" + kClassNames[cls]));
      Var messages = add(gather_rows(transformed, l.src), gather_rows(b_rel, l.rel));
      Var gate_logit = matmul(h, g.param(params, p + "/gate_" + kClassNames[cls]));
      Var gates = num::sigmoid(add(gather_rows(gate_logit, l.src), gather_rows(gate_b_rel, l.rel)));
      Var summed = scatter_add_rows(mul_col(messages, gates), l.dst, t_len);
      next = next ? add(*next, summed) : summed;
    }
    h = *next;
    if (j + 1 < cfg.gcn_layers) h = relu(h);
  }
  Var pooled = num::tanh(add_row(matmul(mean_rows(h), g.param(params, "local/pool/W")), g.param(params, "local/pool/b")));
  return {h, pooled};
}

// ---- attention and prediction network ------------------------------------------------

AttentionOutput attention_pool(Graph& g, ParamStore& params, Var token_reps, const std::optional<Tensor>& override_weights) {
  if (token_reps.rows() < 1) throw num::InvalidArgument("attention_pool: empty sequence");
  Var hidden = num::tanh(add_row(matmul(token_reps, g.param(params, "attn/W")), g.param(params, "attn/b")));
  Var scores = matmul(hidden, g.param(params, "attn/v"));
  Var weights = softmax(scores);
  if (override_weights) {
    if (override_weights->rows() != token_reps.rows() || override_weights->cols() != 1) {
      throw num::InvalidArgument("attention override has the wrong shape");
    }
    weights = g.input(*override_weights);
  }
  Var context = matmul(transpose(weights), token_reps);
  return {weights, context};
}

Var dense_stack(Graph& g, ParamStore& params, const ModelConfig& cfg, Var input, const std::string& prefix) {
  Var x = input;
  for (std::size_t k = 0; k < cfg.dense_units.size(); ++k) {
    const std::string p = prefix + "/d" + std::to_string(k);
    x = relu(add_row(matmul(x, g.param(params, p + "/W")), g.param(params, p + "/b")));
    x = dropout(x, cfg.dropout);
  }
  return add_row(matmul(x, g.param(params, prefix + "/head/W")), g.param(params, prefix + "/head/b"));
}

ForwardResult forward(Graph& g, Model& model, Var embeddings, const corpus::DependencyGraph& graph,
                      const ForwardOptions& options) {
  const ModelConfig& cfg = model.config();
  ParamStore& params = model.params();
  if (embeddings.cols() != cfg.embedding_dim) {
    throw num::InvalidArgument("embedding width " + std::to_string(embeddings.cols()) + " != configured " +
                               std::to_string(cfg.embedding_dim));
  }
  if (graph.token_count != embeddings.rows()) throw num::InvalidArgument("graph and embeddings differ in length");
  ForwardResult r;
  r.embeddings = embeddings;
  std::optional<Var> reps, pooled;
  if (cfg.channels != Channels::kLocal) {
    EncoderOutput glob = encode_global(g, params, cfg, embeddings);
    r.token_global = glob.tokens;
    reps = glob.tokens;
    pooled = glob.pooled;
  }
  if (cfg.channels != Channels::kGlobal) {
    EncoderOutput loc = encode_local(g, params, cfg, model.relations(), embeddings, graph);
    r.token_local = loc.tokens;
    reps = reps ? concat_cols(*reps, loc.tokens) : loc.tokens;
    pooled = pooled ? concat_cols(*pooled, loc.pooled) : loc.pooled;
  }
  AttentionOutput att = attention_pool(g, params, *reps, options.attention_override);
  r.attention = att.weights;
  r.context = att.context;
  r.logits = dense_stack(g, params, cfg, add(*pooled, att.context));
  r.probs = softmax(r.logits);
  return r;
}

// ---- prediction --------------------------------------------------------------------------

PredictionCache predict_embeddings(Model& model, const Tensor& embeddings, const corpus::DependencyGraph& graph) {
  Graph g(false);
  Var emb = g.constant(embeddings);
  ForwardResult r = forward(g, model, emb, graph);
  PredictionCache c;
  if (r.token_global.valid()) c.token_global = r.token_global.value();
  if (r.token_local.valid()) c.token_local = r.token_local.value();
  c.attention = num::to_std(r.attention.value());
  c.logits = num::to_std(r.logits.value());
  c.probs = num::to_std(r.probs.value());
  c.predicted = c.probs[1] > c.probs[0] ? 1 : 0;
  c.token_embeddings = embeddings;
  return c;
}

PredictionCache predict(Model& model, const ModelInput& input) {
  return predict_embeddings(model, input.embeddings, input.graph);
}

std::vector<int> predict_labels(Model& model, const std::vector<ModelInput>& inputs) {
  std::vector<int> out;
  out.reserve(inputs.size());
  for (const auto& in : inputs) out.push_back(predict(model, in).predicted);
  return out;
}

double domain_loss(std::span<const double> attention, std::span<const std::uint8_t> weak_mask) {
  if (attention.size() != weak_mask.size()) throw num::InvalidArgument("domain_loss: attention and mask lengths differ");
  double s = 0.0;
  for (std::size_t i = 0; i < attention.size(); ++i) s += std::abs(attention[i]) * weak_mask[i];
  return -s;
}

double loss_total(const PredictionCache& cache, int gold, std::span<const std::uint8_t> weak_mask, double lambda) {
  if (lambda < 0.0) throw num::InvalidArgument("lambda must be non-negative");
  const double ce = num::cross_entropy(cache.probs, static_cast<std::size_t>(gold));
  if (lambda == 0.0) {
    if (cache.attention.size() != weak_mask.size()) throw num::InvalidArgument("loss_total: attention and mask lengths differ");
    return ce;
  }
  return ce + lambda * domain_loss(cache.attention, weak_mask);
}

Var loss_total(Var probs, Var attention, int gold, std::span<const std::uint8_t> weak_mask, double lambda) {
  if (lambda < 0.0) throw num::InvalidArgument("lambda must be non-negative");
  if (static_cast<std::size_t>(attention.rows() * attention.cols()) != weak_mask.size()) {
    throw num::InvalidArgument("loss_total: attention and mask lengths differ");
  }
  Var ce = cross_entropy(probs, static_cast<std::size_t>(gold));
  bool any = false;
  Tensor z(attention.rows(), attention.cols());
  for (std::size_t i = 0; i < weak_mask.size(); ++i) {
    z.data()[i] = weak_mask[i];
    any = any || weak_mask[i];
  }
  if (lambda == 0.0 || !any) return ce;
  Graph& g = *probs.graph();
  Var ld = scale(sum(mul(num::abs(attention), g.constant(std::move(z)))), -1.0);
  return add(ce, scale(ld, lambda));
}

// ---- training ------------------------------------------------------------------------------

RelationVocab vocab_from_inputs(const std::vector<ModelInput>& inputs) {
  std::vector<const corpus::DependencyGraph*> graphs;
  graphs.reserve(inputs.size());
  for (const auto& in : inputs) graphs.push_back(&in.graph);
  return RelationVocab::build(graphs);
}

TrainResult train(const std::vector<ModelInput>& train_set, const std::vector<ModelInput>& dev_set,
                  const ModelConfig& config) {
  if (train_set.empty()) throw num::InvalidArgument("train: empty training split");
  config.validate();
  TrainResult result{Model(config, vocab_from_inputs(train_set)), {}};
  Model& model = result.model;
  TrainHistory& hist = result.history;
  num::Rng order_rng(config.seed ^ 0x5eedULL);

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  const auto steps_cap = static_cast<std::size_t>(config.training_steps);

  for (int epoch = 0; epoch < config.epochs && hist.steps < steps_cap; ++epoch) {
    order_rng.shuffle(order.begin(), order.end());
    double epoch_loss = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order.size() && hist.steps < steps_cap;
         start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      const double inv_batch = 1.0 / static_cast<double>(end - start);
      model.params().zero_grad();
      double batch_loss = 0.0;
      for (std::size_t k = start; k < end; ++k) {
        const ModelInput& in = train_set[order[k]];
        Graph g(true, order_rng.next_u64());
        ForwardOptions opts;
        opts.training = true;
        ForwardResult r = forward(g, model, g.constant(in.embeddings), in.graph, opts);
        Var loss = loss_total(r.probs, r.attention, in.label, in.weak_mask, config.lambda);
        const double value = loss.scalar();
        if (!std::isfinite(value)) {
          throw TrainingDiverged("loss became non-finite at step " + std::to_string(hist.steps) + " (instance '" +
                                 in.instance_id + "'); lower the learning rate or enable clipping");
        }
        batch_loss += value;
        g.backward(scale(loss, inv_batch));
      }
      num::adam_step(model.params(), config.adam);
      ++hist.steps;
      hist.step_loss.push_back(batch_loss * inv_batch);
      epoch_loss += batch_loss;
      seen += end - start;
    }
    hist.epoch_train_loss.push_back(seen ? epoch_loss / static_cast<double>(seen) : 0.0);
    if (!dev_set.empty()) {
      std::vector<int> gold;
      for (const auto& d : dev_set) gold.push_back(d.label);
      const auto preds = predict_labels(model, dev_set);
      hist.epoch_dev_macro_f1.push_back(evaluate_f1(preds, gold).macro_f1);
    }
    log::info("epoch_done", {{"epoch", epoch},
                             {"train_loss", hist.epoch_train_loss.back()},
                             {"dev_macro_f1", hist.epoch_dev_macro_f1.empty() ? 0.0 : hist.epoch_dev_macro_f1.back()}});
  }
  return result;
}

}  // namespace moralscope::model
