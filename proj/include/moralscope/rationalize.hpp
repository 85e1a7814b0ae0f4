#pragma once

#include "moralscope/model.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace moralscope::rationale {

using model::Model;
using model::ModelInput;
using num::Tensor;

enum class Method { kRand, kAttn, kScaledAttn, kIG, kFlx };
std::string_view to_string(Method m);
Method parse_method(std::string_view s);

struct ImportanceScores {
  Method method = Method::kRand;
  std::vector<double> scores;
  std::optional<std::uint64_t> seed;  // RAND only
};

enum class Selection { kTopK, kSpan, kFlx };
std::string_view to_string(Selection s);
Selection parse_selection(std::string_view s);

struct RationaleMask {
  std::vector<std::uint8_t> mask;
  int k = 0;
  Selection selection = Selection::kTopK;
  Method chosen_method = Method::kRand;

  std::vector<int> indices() const;
};

// ---- scoring ---------------------------------------------------------------

ImportanceScores score_random(std::size_t token_count, std::uint64_t seed);
ImportanceScores score_attention(const model::PredictionCache& cache);

/// scores_i = a_i * grad_i.
ImportanceScores score_scaled_attention(std::span<const double> attention, std::span<const double> grad);
/// Runs a forward pass, back-propagates p(y_hat) to the attention weights and
/// scales them by their gradient.
ImportanceScores score_scaled_attention(Model& model, const ModelInput& input);
/// Same, on an existing trace. Throws StaleTraceError if `g` was already
/// differentiated.
ImportanceScores score_scaled_attention(num::Graph& g, const model::ForwardResult& fwd);

/// Value and input gradient of a scalar function of a T x d input.
using ScalarFunction = std::function<double(const Tensor& x, Tensor* grad)>;

inline constexpr int kDefaultIgSteps = 128;

/// Integrated gradients from the zero baseline with a midpoint Riemann sum.
/// Returns per-token attributions (summed over columns); `per_feature`
/// receives the T x d attribution matrix when non-null.
std::vector<double> integrated_gradients(const ScalarFunction& f, const Tensor& x, int steps = kDefaultIgSteps,
                                         Tensor* per_feature = nullptr);

/// p(y_hat | embeddings) with y_hat fixed by the full-input pass.
ScalarFunction predicted_probability(Model& model, const corpus::DependencyGraph& graph, int y_hat);

ImportanceScores score_integrated_gradients(Model& model, const ModelInput& input, int steps = kDefaultIgSteps);

/// Scores for any non-FLX method.
ImportanceScores score(Method method, Model& model, const ModelInput& input, std::uint64_t seed = 0,
                       int ig_steps = kDefaultIgSteps);

// ---- selection -------------------------------------------------------------

/// ceil(fraction * T), clamped to [1, T].
int k_for_fraction(double fraction, std::size_t token_count);

RationaleMask select_topk(std::span<const double> scores, int k);
RationaleMask select_span(std::span<const double> scores, int k);

struct FlxConfig {
  std::vector<Method> methods{Method::kAttn, Method::kScaledAttn, Method::kIG};
  std::vector<double> fractions{0.02, 0.10, 0.20, 0.33, 0.50};
  Selection base_selection = Selection::kTopK;
  int ig_steps = kDefaultIgSteps;
};

struct FlxCandidate {
  Method method = Method::kAttn;
  RationaleMask mask;
  double objective = 0.0;  // NS + NC
};

/// Picks the candidate with the largest objective; ties go to the shorter
/// mask, then to the earlier position in `candidates`.
std::size_t best_flx_candidate(const std::vector<FlxCandidate>& candidates);

/// Evaluates every (method, length) candidate with NS + NC on this instance.
RationaleMask select_flx(Model& model, const ModelInput& input, const FlxConfig& cfg = {},
                         std::vector<FlxCandidate>* evaluated = nullptr);

// ---- dump ------------------------------------------------------------------

struct RationaleRecord {
  std::string instance_id;
  Method method = Method::kAttn;
  int k = 0;
  std::vector<int> indices;
  std::vector<std::string> tokens;
};

RationaleRecord make_record(const std::string& instance_id, const RationaleMask& mask,
                            const std::vector<std::string>& tokens, Method method);
void write_rationales(const std::filesystem::path& path, const std::vector<RationaleRecord>& records);
std::vector<RationaleRecord> read_rationales(const std::filesystem::path& path);

}  // namespace moralscope::rationale
