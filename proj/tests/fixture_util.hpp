#pragma once

#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace fixtures {

inline std::filesystem::path dir() { return std::filesystem::path(MORALSCOPE_FIXTURE_DIR); }

inline std::string read(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// (expected code, body) pairs; "\n" in the file is a newline.
inline std::vector<std::pair<std::string, std::string>> verdict_cases() {
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream in(read(dir() / "verdicts.tsv"));
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    std::string body = line.substr(tab + 1);
    for (std::size_t p = body.find("\\n"); p != std::string::npos; p = body.find("\\n", p + 1)) body.replace(p, 2, "\n");
    out.emplace_back(line.substr(0, tab), body);
  }
  return out;
}

inline std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("moralscope_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

/// Copies the toy pipeline config into a scratch dir with absolute input
/// paths and a private output dir.
inline std::filesystem::path toy_config(const std::string& name) {
  const auto d = scratch(name);
  std::string text = read(dir() / "pipeline" / "config.toml");
  const std::string base = (dir() / "pipeline").string() + "/";
  text = std::regex_replace(text, std::regex(R"re(= "([a-z_]+\.[a-z]+)")re"), "= \"" + base + "$1\"");
  text = std::regex_replace(text, std::regex(R"(output_dir = "[^"]*")"), "output_dir = \"" + (d / "out").string() + "\"");
  std::ofstream(d / "config.toml") << text;
  return d / "config.toml";
}

}  // namespace fixtures
