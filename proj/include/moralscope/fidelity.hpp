#pragma once

#include "moralscope/model.hpp"
#include "moralscope/rationalize.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace moralscope::fidelity {

using model::Model;
using model::ModelInput;
using num::Tensor;

enum class MaskMode { kKeepOnly, kRemove };

/// Zeroes the embedding rows outside (keep_only) or inside (remove) the mask.
Tensor apply_mask(const Tensor& embeddings, std::span<const std::uint8_t> mask, MaskMode mode);

double prob_with_mask(Model& model, const ModelInput& input, std::span<const std::uint8_t> mask, MaskMode mode,
                      int y_hat);

double normalized_sufficiency(double p_full, double p_rationale);
double normalized_comprehensiveness(double p_full, double p_without);

/// Variants rescaled by the zero-input sufficiency, 1 - max(0, p_full - p_null).
double null_normalized_sufficiency(double p_full, double p_rationale, double p_null);
double null_normalized_comprehensiveness(double p_full, double p_without, double p_null);

struct FidelityOptions {
  bool normalize_by_null = false;
};

struct InstanceFidelity {
  int y_hat = 0;
  int y_reduced = 0;  // prediction with the rationale removed
  double p_full = 0.0;
  double p_rationale = 0.0;
  double p_without = 0.0;
  double ns = 0.0;
  double nc = 0.0;
};

InstanceFidelity evaluate_instance(Model& model, const ModelInput& input, std::span<const std::uint8_t> mask,
                                   const FidelityOptions& opts = {});

/// Macro F1 (percent) of predictions on rationale-removed inputs against the
/// full-input predictions.
double rev_f1(std::span<const int> full_predictions, std::span<const int> reduced_predictions);
double rev_f1(Model& model, const std::vector<ModelInput>& inputs, const std::vector<std::vector<std::uint8_t>>& masks);

struct FidelityCell {
  std::string channels;
  bool domain = false;
  std::string method;
  double rev_f1 = 0.0;
  double ns = 0.0;
  double nc = 0.0;
  std::size_t n_instances = 0;
};

struct MaskPolicy {
  double fraction = 0.2;
  rationale::Selection selection = rationale::Selection::kTopK;
  std::uint64_t random_seed = 0;
  rationale::FlxConfig flx{};
};

/// Masks for every input under one method (FLX picks per instance).
std::vector<rationale::RationaleMask> build_masks(Model& model, const std::vector<ModelInput>& inputs,
                                                   rationale::Method method, const MaskPolicy& policy);

FidelityCell evaluate_cell(Model& model, const std::vector<ModelInput>& inputs,
                           const std::vector<rationale::RationaleMask>& masks, const FidelityOptions& opts = {});

struct FidelityReport {
  std::vector<FidelityCell> cells;

  const FidelityCell* find(const std::string& channels, bool domain, const std::string& method) const;
  void write_csv(const std::filesystem::path& path) const;
  void write_json(const std::filesystem::path& path) const;
  static FidelityReport read_json(const std::filesystem::path& path);
};

/// One cell per method for a trained model; cells are labelled with the
/// model's channel configuration and whether lambda > 0.
FidelityReport fidelity_report(Model& model, const std::vector<ModelInput>& inputs,
                               const std::vector<rationale::Method>& methods, const MaskPolicy& policy,
                               const FidelityOptions& opts = {});

}  // namespace moralscope::fidelity
