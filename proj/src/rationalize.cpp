#include "moralscope/rationalize.hpp"

#include "moralscope/fidelity.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace moralscope::rationale {

std::string_view to_string(Method m) {
  switch (m) {
    case Method::kRand: return "RAND";
    case Method::kAttn: return "ATTN";
    case Method::kScaledAttn: return "SCALED_ATTN";
    case Method::kIG: return "IG";
    case Method::kFlx: return "FLX";
  }
  return "?";
}

Method parse_method(std::string_view s) {
  for (Method m : {Method::kRand, Method::kAttn, Method::kScaledAttn, Method::kIG, Method::kFlx}) {
    if (s == to_string(m)) return m;
  }
  if (s == "SCALED-ATTN" || s == "ATTN_GRAD") return Method::kScaledAttn;
  throw num::InvalidArgument("unknown scoring method '" + std::string(s) + "'");
}

std::string_view to_string(Selection s) {
  switch (s) {
    case Selection::kTopK: return "topk";
    case Selection::kSpan: return "span";
    case Selection::kFlx: return "flx";
  }
  return "?";
}

Selection parse_selection(std::string_view s) {
  if (s == "topk") return Selection::kTopK;
  if (s == "span") return Selection::kSpan;
  if (s == "flx") return Selection::kFlx;
  throw num::InvalidArgument("unknown selection '" + std::string(s) + "'");
}

std::vector<int> RationaleMask::indices() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) out.push_back(static_cast<int>(i));
  }
  return out;
}

// ---- scoring -------------------------------------------------------------------

ImportanceScores score_random(std::size_t token_count, std::uint64_t seed) {
  if (token_count == 0) throw num::InvalidArgument("score_random: T must be at least 1");
  num::Rng rng(seed);
  ImportanceScores s{Method::kRand, std::vector<double>(token_count), seed};
  for (auto& x : s.scores) x = rng.uniform();
  return s;
}

ImportanceScores score_attention(const model::PredictionCache& cache) {
  return {Method::kAttn, cache.attention, std::nullopt};
}

ImportanceScores score_scaled_attention(std::span<const double> attention, std::span<const double> grad) {
  if (attention.size() != grad.size()) throw num::InvalidArgument("score_scaled_attention: length mismatch");
  ImportanceScores s{Method::kScaledAttn, std::vector<double>(attention.size()), std::nullopt};
  for (std::size_t i = 0; i < attention.size(); ++i) s.scores[i] = attention[i] * grad[i];
  return s;
}

ImportanceScores score_scaled_attention(num::Graph& g, const model::ForwardResult& fwd) {
  const Tensor& p = fwd.probs.value();
  const Eigen::Index y_hat = p(0, 1) > p(0, 0) ? 1 : 0;
  g.backward(num::element(fwd.probs, 0, y_hat));
  const auto a = num::to_std(fwd.attention.value());
  const auto grad = num::to_std(g.grad(fwd.attention));
  return score_scaled_attention(a, grad);
}

ImportanceScores score_scaled_attention(Model& model, const ModelInput& input) {
  num::Graph g(false);
  const auto fwd = model::forward(g, model, g.constant(input.embeddings), input.graph);
  return score_scaled_attention(g, fwd);
}

std::vector<double> integrated_gradients(const ScalarFunction& f, const Tensor& x, int steps, Tensor* per_feature) {
  if (steps < 8) throw num::InvalidArgument("integrated_gradients: steps must be at least 8");
  Tensor mean_grad = Tensor::Zero(x.rows(), x.cols());
  Tensor grad;
  for (int k = 0; k < steps; ++k) {
    const double alpha = (k + 0.5) / steps;
    f(alpha * x, &grad);
    mean_grad += grad;
  }
  mean_grad /= steps;
  Tensor attr = x.cwiseProduct(mean_grad);
  std::vector<double> out(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) out[static_cast<std::size_t>(i)] = attr.row(i).sum();
  if (per_feature) *per_feature = std::move(attr);
  return out;
}

ScalarFunction predicted_probability(Model& model, const corpus::DependencyGraph& graph, int y_hat) {
  return [&model, &graph, y_hat](const Tensor& x, Tensor* grad) {
    num::Graph g(false);
    num::Var in = g.input(x);
    const auto fwd = model::forward(g, model, in, graph);
    num::Var p = num::element(fwd.probs, 0, y_hat);
    const double value = p.scalar();
    if (grad) {
      g.backward(p);
      *grad = g.grad(in);
    }
    return value;
  };
}

ImportanceScores score_integrated_gradients(Model& model, const ModelInput& input, int steps) {
  const int y_hat = model::predict(model, input).predicted;
  auto f = predicted_probability(model, input.graph, y_hat);
  return {Method::kIG, integrated_gradients(f, input.embeddings, steps), std::nullopt};
}

ImportanceScores score(Method method, Model& model, const ModelInput& input, std::uint64_t seed, int ig_steps) {
  switch (method) {
    case Method::kRand: return score_random(static_cast<std::size_t>(input.embeddings.rows()), seed);
    case Method::kAttn: return score_attention(model::predict(model, input));
    case Method::kScaledAttn: return score_scaled_attention(model, input);
    case Method::kIG: return score_integrated_gradients(model, input, ig_steps);
    case Method::kFlx: break;
  }
  throw num::InvalidArgument("FLX is a selection strategy, not a scoring method");
}

// ---- selection -----------------------------------------------------------------

int k_for_fraction(double fraction, std::size_t token_count) {
  if (token_count == 0) throw num::InvalidArgument("k_for_fraction: empty instance");
  if (!(fraction > 0.0) || fraction > 1.0) throw num::InvalidArgument("rationale fraction must be in (0, 1]");
  const auto k = static_cast<long>(std::ceil(fraction * static_cast<double>(token_count) - 1e-9));
  return static_cast<int>(std::clamp<long>(k, 1, static_cast<long>(token_count)));
}

namespace {

void check_k(std::span<const double> scores, int k) {
  if (k < 1 || static_cast<std::size_t>(k) > scores.size()) {
    throw num::InvalidArgument("k=" + std::to_string(k) + " outside [1, " + std::to_string(scores.size()) + "]");
  }
}

}  // namespace

RationaleMask select_topk(std::span<const double> scores, int k) {
  check_k(scores, k);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  RationaleMask m{std::vector<std::uint8_t>(scores.size(), 0), k, Selection::kTopK, Method::kRand};
  for (int i = 0; i < k; ++i) m.mask[order[static_cast<std::size_t>(i)]] = 1;
  return m;
}

RationaleMask select_span(std::span<const double> scores, int k) {
  check_k(scores, k);
  const auto kk = static_cast<std::size_t>(k);
  double best = 0.0;
  std::size_t best_start = 0;
  for (std::size_t s = 0; s + kk <= scores.size(); ++s) {
    const double window = std::accumulate(scores.begin() + static_cast<std::ptrdiff_t>(s),
                                          scores.begin() + static_cast<std::ptrdiff_t>(s + kk), 0.0);
    if (s == 0 || window > best) {
      best = window;
      best_start = s;
    }
  }
  RationaleMask m{std::vector<std::uint8_t>(scores.size(), 0), k, Selection::kSpan, Method::kRand};
  for (std::size_t i = best_start; i < best_start + kk; ++i) m.mask[i] = 1;
  return m;
}

std::size_t best_flx_candidate(const std::vector<FlxCandidate>& candidates) {
  if (candidates.empty()) throw num::InvalidArgument("FLX needs at least one candidate");
  std::size_t best = 0;
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    const auto& c = candidates[i];
    const auto& b = candidates[best];
    if (c.objective > b.objective || (c.objective == b.objective && c.mask.k < b.mask.k)) best = i;
  }
  return best;
}

RationaleMask select_flx(Model& model, const ModelInput& input, const FlxConfig& cfg, std::vector<FlxCandidate>* evaluated) {
  const auto t = static_cast<std::size_t>(input.embeddings.rows());
  std::vector<FlxCandidate> candidates;
  for (Method method : cfg.methods) {
    const ImportanceScores s = score(method, model, input, 0, cfg.ig_steps);
    std::vector<int> seen_k;
    for (double frac : cfg.fractions) {
      const int k = k_for_fraction(frac, t);
      if (std::find(seen_k.begin(), seen_k.end(), k) != seen_k.end()) continue;
      seen_k.push_back(k);
      FlxCandidate c;
      c.method = method;
      c.mask = cfg.base_selection == Selection::kSpan ? select_span(s.scores, k) : select_topk(s.scores, k);
      const auto f = fidelity::evaluate_instance(model, input, c.mask.mask);
      c.objective = f.ns + f.nc;
      candidates.push_back(std::move(c));
    }
  }
  const std::size_t best = best_flx_candidate(candidates);
  RationaleMask out = candidates[best].mask;
  out.selection = Selection::kFlx;
  out.chosen_method = candidates[best].method;
  if (evaluated) *evaluated = std::move(candidates);
  return out;
}

// ---- dump ------------------------------------------------------------------------

RationaleRecord make_record(const std::string& instance_id, const RationaleMask& mask,
                            const std::vector<std::string>& tokens, Method method) {
  RationaleRecord r{instance_id, method, mask.k, mask.indices(), {}};
  for (int i : r.indices) {
    if (static_cast<std::size_t>(i) < tokens.size()) r.tokens.push_back(tokens[static_cast<std::size_t>(i)]);
  }
  return r;
}

void write_rationales(const std::filesystem::path& path, const std::vector<RationaleRecord>& records) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  for (const auto& r : records) {
    nlohmann::json j{{"instance_id", r.instance_id},
                     {"method", std::string(to_string(r.method))},
                     {"k", r.k},
                     {"indices", r.indices},
                     {"tokens", r.tokens}};
    out << j.dump() << '\n';
  }
}

std::vector<RationaleRecord> read_rationales(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read '" + path.string() + "'");
  std::vector<RationaleRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    RationaleRecord r;
    r.instance_id = j.at("instance_id").get<std::string>();
    r.method = parse_method(j.at("method").get<std::string>());
    r.k = j.at("k").get<int>();
    r.indices = j.at("indices").get<std::vector<int>>();
    r.tokens = j.at("tokens").get<std::vector<std::string>>();
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace moralscope::rationale
