#include "moralscope/fidelity.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <iomanip>

namespace moralscope::fidelity {

namespace {

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

}  // namespace

Tensor apply_mask(const Tensor& embeddings, std::span<const std::uint8_t> mask, MaskMode mode) {
  if (static_cast<Eigen::Index>(mask.size()) != embeddings.rows()) {
    throw num::InvalidArgument("mask length " + std::to_string(mask.size()) + " != token count " +
                               std::to_string(embeddings.rows()));
  }
  Tensor out = embeddings;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    const bool in_rationale = mask[i] != 0;
    if (in_rationale == (mode == MaskMode::kRemove)) out.row(static_cast<Eigen::Index>(i)).setZero();
  }
  return out;
}

double prob_with_mask(Model& model, const ModelInput& input, std::span<const std::uint8_t> mask, MaskMode mode,
                      int y_hat) {
  const auto cache = model::predict_embeddings(model, apply_mask(input.embeddings, mask, mode), input.graph);
  return cache.probs.at(static_cast<std::size_t>(y_hat));
}

double normalized_sufficiency(double p_full, double p_rationale) { return clamp01(1.0 - (p_full - p_rationale)); }

double normalized_comprehensiveness(double p_full, double p_without) { return clamp01(p_full - p_without); }

double null_normalized_sufficiency(double p_full, double p_rationale, double p_null) {
  const double suff = 1.0 - std::max(0.0, p_full - p_rationale);
  const double suff_null = 1.0 - std::max(0.0, p_full - p_null);
  const double denom = 1.0 - suff_null;
  if (denom <= 1e-12) return clamp01(suff);
  return clamp01((suff - suff_null) / denom);
}

double null_normalized_comprehensiveness(double p_full, double p_without, double p_null) {
  const double comp = std::max(0.0, p_full - p_without);
  const double denom = 1.0 - (1.0 - std::max(0.0, p_full - p_null));
  if (denom <= 1e-12) return clamp01(comp);
  return clamp01(comp / denom);
}

InstanceFidelity evaluate_instance(Model& model, const ModelInput& input, std::span<const std::uint8_t> mask,
                                   const FidelityOptions& opts) {
  InstanceFidelity f;
  const auto full = model::predict(model, input);
  f.y_hat = full.predicted;
  f.p_full = full.probs[static_cast<std::size_t>(f.y_hat)];
  f.p_rationale = prob_with_mask(model, input, mask, MaskMode::kKeepOnly, f.y_hat);
  const auto removed = model::predict_embeddings(model, apply_mask(input.embeddings, mask, MaskMode::kRemove), input.graph);
  f.p_without = removed.probs[static_cast<std::size_t>(f.y_hat)];
  f.y_reduced = removed.predicted;
  if (opts.normalize_by_null) {
    const std::vector<std::uint8_t> none(mask.size(), 0);
    const double p_null = prob_with_mask(model, input, none, MaskMode::kKeepOnly, f.y_hat);
    f.ns = null_normalized_sufficiency(f.p_full, f.p_rationale, p_null);
    f.nc = null_normalized_comprehensiveness(f.p_full, f.p_without, p_null);
  } else {
    f.ns = normalized_sufficiency(f.p_full, f.p_rationale);
    f.nc = normalized_comprehensiveness(f.p_full, f.p_without);
  }
  return f;
}

double rev_f1(std::span<const int> full_predictions, std::span<const int> reduced_predictions) {
  return model::evaluate_f1(reduced_predictions, full_predictions).macro_f1;
}

double rev_f1(Model& model, const std::vector<ModelInput>& inputs, const std::vector<std::vector<std::uint8_t>>& masks) {
  if (masks.size() != inputs.size()) throw num::InvalidArgument("rev_f1: one mask per instance required");
  std::vector<int> full, reduced;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    full.push_back(model::predict(model, inputs[i]).predicted);
    reduced.push_back(
        model::predict_embeddings(model, apply_mask(inputs[i].embeddings, masks[i], MaskMode::kRemove), inputs[i].graph)
            .predicted);
  }
  return rev_f1(full, reduced);
}

std::vector<rationale::RationaleMask> build_masks(Model& model, const std::vector<ModelInput>& inputs,
                                                   rationale::Method method, const MaskPolicy& policy) {
  using rationale::Method;
  std::vector<rationale::RationaleMask> masks;
  masks.reserve(inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto& in = inputs[i];
    if (method == Method::kFlx) {
      masks.push_back(rationale::select_flx(model, in, policy.flx));
      continue;
    }
    const auto s = rationale::score(method, model, in, policy.random_seed + i, policy.flx.ig_steps);
    const int k = rationale::k_for_fraction(policy.fraction, static_cast<std::size_t>(in.embeddings.rows()));
    auto m = policy.selection == rationale::Selection::kSpan ? rationale::select_span(s.scores, k)
                                                             : rationale::select_topk(s.scores, k);
    m.chosen_method = method;
    masks.push_back(std::move(m));
  }
  return masks;
}

FidelityCell evaluate_cell(Model& model, const std::vector<ModelInput>& inputs,
                           const std::vector<rationale::RationaleMask>& masks, const FidelityOptions& opts) {
  if (masks.size() != inputs.size()) throw num::InvalidArgument("evaluate_cell: one mask per instance required");
  FidelityCell cell;
  cell.channels = std::string(model::to_string(model.config().channels));
  cell.domain = model.config().lambda > 0.0;
  cell.n_instances = inputs.size();
  if (inputs.empty()) return cell;
  std::vector<int> full, reduced;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto f = evaluate_instance(model, inputs[i], masks[i].mask, opts);
    cell.ns += f.ns;
    cell.nc += f.nc;
    full.push_back(f.y_hat);
    reduced.push_back(f.y_reduced);
  }
  cell.ns /= static_cast<double>(inputs.size());
  cell.nc /= static_cast<double>(inputs.size());
  cell.rev_f1 = rev_f1(full, reduced);
  return cell;
}

FidelityReport fidelity_report(Model& model, const std::vector<ModelInput>& inputs,
                               const std::vector<rationale::Method>& methods, const MaskPolicy& policy,
                               const FidelityOptions& opts) {
  FidelityReport report;
  for (auto m : methods) {
    auto cell = evaluate_cell(model, inputs, build_masks(model, inputs, m, policy), opts);
    cell.method = std::string(rationale::to_string(m));
    report.cells.push_back(std::move(cell));
  }
  return report;
}

const FidelityCell* FidelityReport::find(const std::string& channels, bool domain, const std::string& method) const {
  for (const auto& c : cells) {
    if (c.channels == channels && c.domain == domain && c.method == method) return &c;
  }
  return nullptr;
}

void FidelityReport::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << "channels,domain,method,rev_f1,ns,nc,n_instances\n" << std::fixed;
  for (const auto& c : cells) {
    out << c.channels << ',' << (c.domain ? "domain" : "no-domain") << ',' << c.method << ',' << std::setprecision(1)
        << c.rev_f1 << ',' << std::setprecision(4) << c.ns << ',' << c.nc << ',' << c.n_instances << '\n';
  }
}

void FidelityReport::write_json(const std::filesystem::path& path) const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& c : cells) {
    arr.push_back({{"channels", c.channels},
                   {"domain", c.domain},
                   {"method", c.method},
                   {"rev_f1", c.rev_f1},
                   {"ns", c.ns},
                   {"nc", c.nc},
                   {"n_instances", c.n_instances}});
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << nlohmann::json{{"cells", arr}}.dump(2) << '\n';
}

FidelityReport FidelityReport::read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read '" + path.string() + "'");
  const auto j = nlohmann::json::parse(in);
  FidelityReport r;
  for (const auto& c : j.at("cells")) {
    r.cells.push_back({c.at("channels").get<std::string>(), c.at("domain").get<bool>(), c.at("method").get<std::string>(),
                       c.at("rev_f1").get<double>(), c.at("ns").get<double>(), c.at("nc").get<double>(),
                       c.at("n_instances").get<std::size_t>()});
  }
  return r;
}

}  // namespace moralscope::fidelity
