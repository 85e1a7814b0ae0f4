#pragma once

#include "moralscope/config.hpp"

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace moralscope::pipeline {

enum ExitCode { kOk = 0, kConfigError = 2, kMissingStage = 3, kRuntimeFailure = 4 };

class MissingStageError : public std::runtime_error {
 public:
  explicit MissingStageError(const std::string& stage)
      : std::runtime_error("missing upstream stage '" + stage + "': run `moralscope " + stage + "` first"), stage_(stage) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

inline const std::vector<std::string>& stages() {
  static const std::vector<std::string> s{"ingest", "label", "train", "extract", "fidelity",
                                          "cluster", "associate", "regress", "report"};
  return s;
}

/// Latest versioned artifact directory of a stage, e.g. out/train/v3.
std::filesystem::path latest_artifact(const std::filesystem::path& output_dir, const std::string& stage);
/// Creates the next versioned directory for a stage.
std::filesystem::path new_artifact(const std::filesystem::path& output_dir, const std::string& stage);

/// FNV-1a 64 of a file's bytes, as 16 hex digits.
std::string file_hash(const std::filesystem::path& path);

/// Runs one stage and returns the artifact directory it wrote.
std::filesystem::path run_stage(const std::string& stage, const config::PipelineConfig& cfg);

/// Runs a subcommand ("all" runs every stage in order) and maps failures to
/// exit codes; errors are logged.
int run(const std::string& subcommand, const std::filesystem::path& config_path);

}  // namespace moralscope::pipeline
