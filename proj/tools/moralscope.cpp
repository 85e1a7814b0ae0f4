#include "moralscope/log.hpp"
#include "moralscope/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  using namespace moralscope;
  CLI::App app{"moralscope: verdict labeling, rationale extraction and social-factor analysis"};
  app.require_subcommand(1, 1);
  std::string config_path;
  std::string level = "info";
  app.add_option("-c,--config", config_path, "pipeline config file")->required();
  app.add_option("--log-level", level, "debug, info, warn, error or off")
      ->check(CLI::IsMember({"debug", "info", "warn", "error", "off"}));
  std::vector<std::string> names = pipeline::stages();
  names.push_back("all");
  for (const auto& n : names) {
    app.add_subcommand(n, n == "all" ? "run every stage in order" : "run the " + n + " stage");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : pipeline::kConfigError;
  }
  const std::map<std::string, log::Level> levels{{"debug", log::Level::kDebug}, {"info", log::Level::kInfo},
                                                 {"warn", log::Level::kWarn},   {"error", log::Level::kError},
                                                 {"off", log::Level::kOff}};
  log::set_level(levels.at(level));
  return pipeline::run(app.get_subcommands().front()->get_name(), config_path);
}
