#pragma once

#include "moralscope/model.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace moralscope::config {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---- TOML-style documents -------------------------------------------------

using Scalar = std::variant<bool, std::int64_t, double, std::string>;

struct Value {
  std::variant<bool, std::int64_t, double, std::string, std::vector<Scalar>> data;
};

/// Sections of `key = value` pairs. Values: quoted strings, integers, floats,
/// true/false and flat arrays of those. `#` starts a comment.
class Document {
 public:
  static Document parse(const std::string& text);
  static Document load(const std::filesystem::path& path);

  bool has(const std::string& section, const std::string& key) const;
  std::string get_string(const std::string& section, const std::string& key, std::optional<std::string> fallback = {}) const;
  std::int64_t get_int(const std::string& section, const std::string& key, std::optional<std::int64_t> fallback = {}) const;
  double get_double(const std::string& section, const std::string& key, std::optional<double> fallback = {}) const;
  bool get_bool(const std::string& section, const std::string& key, std::optional<bool> fallback = {}) const;
  std::vector<std::string> get_strings(const std::string& section, const std::string& key,
                                       std::optional<std::vector<std::string>> fallback = {}) const;
  std::vector<std::int64_t> get_ints(const std::string& section, const std::string& key,
                                     std::optional<std::vector<std::int64_t>> fallback = {}) const;
  std::vector<bool> get_bools(const std::string& section, const std::string& key,
                              std::optional<std::vector<bool>> fallback = {}) const;

  /// Keys that no getter asked for, as "section.key".
  std::vector<std::string> unused() const;

 private:
  const Value* find(const std::string& section, const std::string& key) const;
  std::map<std::string, std::map<std::string, Value>> sections_;
  mutable std::map<std::string, bool> touched_;
};

// ---- pipeline configuration -----------------------------------------------

struct Paths {
  std::filesystem::path posts;
  std::filesystem::path comments;
  std::filesystem::path parses;            // optional
  std::filesystem::path moral_lexicon;
  std::filesystem::path embeddings;        // optional EMB1 file; random_fixed when empty
  std::filesystem::path static_embeddings; // optional EMB1 static table for analysis
  std::filesystem::path topic_model;       // optional
  std::filesystem::path category_map;      // optional
  std::filesystem::path histories;         // optional
  std::filesystem::path tag_lexicon;
  std::filesystem::path output_dir;
};

struct SelectionConfig {
  std::vector<std::string> methods{"RAND", "ATTN", "SCALED_ATTN", "IG", "FLX"};
  double fraction = 0.2;
  std::string selection = "topk";
  int ig_steps = 128;
  std::string extract_method = "ATTN";
  std::string eval_split = "test";
  bool normalize_by_null = false;
};

struct AnalysisConfig {
  int kmeans_k = 100;
  std::uint64_t kmeans_seed = 0;
  int max_iter = 300;
  int window_days = 91;
  int min_history = 1;
  int min_comments = 30;
  std::string reference;  // empty: most frequent category
  std::string orientation = "category_on_usage";
  std::vector<std::string> negation_relations{"neg"};
};

struct PipelineConfig {
  std::filesystem::path source;  // config file, for manifests
  std::uint64_t seed = 0;
  Paths paths;
  model::ModelConfig model;
  std::vector<std::string> channels{"global-local"};
  std::vector<bool> domain{true, false};
  int baseline_steps = 400;
  SelectionConfig selection;
  AnalysisConfig analysis;
  std::vector<std::string> report_formats{"csv", "json", "md"};

  /// Throws ConfigError for bad values or missing input files.
  void validate() const;
};

PipelineConfig from_document(const Document& doc, const std::filesystem::path& base_dir = {});
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

}  // namespace moralscope::config
