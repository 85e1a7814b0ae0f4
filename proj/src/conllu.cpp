#include "moralscope/corpus.hpp"
#include "moralscope/text.hpp"

#include <fstream>
#include <sstream>

namespace moralscope::corpus {

DependencyGraph DependencyGraph::make(int token_count, std::vector<DependencyEdge> edges) {
  if (token_count < 0) throw FormatError("negative token count");
  DependencyGraph g;
  g.token_count = token_count;
  for (const auto& e : edges) {
    if (e.head < 0 || e.head >= token_count || e.dependent < 0 || e.dependent >= token_count) {
      throw FormatError("dependency edge index out of range");
    }
  }
  g.edges = std::move(edges);
  g.augmented_edges.reserve(static_cast<std::size_t>(token_count) + 2 * g.edges.size());
  for (const auto& e : g.edges) {
    g.augmented_edges.push_back({e.head, e.dependent, e.relation, EdgeDirection::kForward});
    g.augmented_edges.push_back({e.dependent, e.head, e.relation, EdgeDirection::kReverse});
  }
  for (int i = 0; i < token_count; ++i) {
    g.augmented_edges.push_back({i, i, std::string(kSelfRelation), EdgeDirection::kSelf});
  }
  return g;
}

DependencyGraph DependencyGraph::chain(int token_count, const std::string& relation) {
  std::vector<DependencyEdge> edges;
  for (int i = 0; i + 1 < token_count; ++i) edges.push_back({i, i + 1, relation});
  return make(token_count, std::move(edges));
}

DependencyGraph DependencyGraph::truncated(int max_tokens) const {
  if (token_count <= max_tokens) return *this;
  std::vector<DependencyEdge> kept;
  for (const auto& e : edges) {
    if (e.head < max_tokens && e.dependent < max_tokens) kept.push_back(e);
  }
  return make(max_tokens, std::move(kept));
}

std::map<std::string, ParsedSentence> parse_conllu(std::string_view content, ConlluReport* report) {
  std::map<std::string, ParsedSentence> out;
  ConlluReport r;

  std::string current_id;
  std::vector<std::string> forms;
  std::vector<std::pair<int, std::pair<int, std::string>>> raw;  // (dep, (head, rel)) 1-based within sentence
  std::size_t lineno = 0;
  bool in_sentence = false;

  auto flush = [&] {
    if (!in_sentence) return;
    in_sentence = false;
    ++r.sentences;
    if (current_id.empty()) {
      r.problems.push_back("sentence ending at line " + std::to_string(lineno) + " has no instance id");
    } else {
      ParsedSentence& ps = out[current_id];
      const int offset = static_cast<int>(ps.forms.size());
      std::vector<DependencyEdge> edges = ps.graph.edges;
      bool ok = true;
      for (const auto& [dep, hr] : raw) {
        const auto& [head, rel] = hr;
        if (head == 0) continue;
        if (head < 0 || head > static_cast<int>(forms.size())) {
          r.problems.push_back(current_id + ": head " + std::to_string(head) + " out of range");
          ok = false;
          break;
        }
        edges.push_back({offset + head - 1, offset + dep - 1, rel});
      }
      if (ok) {
        ps.forms.insert(ps.forms.end(), forms.begin(), forms.end());
        ps.graph = DependencyGraph::make(static_cast<int>(ps.forms.size()), std::move(edges));
      }
    }
    current_id.clear();
    forms.clear();
    raw.clear();
  };

  std::istringstream in{std::string(content)};
  std::string line;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty()) {
      flush();
      continue;
    }
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq != std::string::npos) {
        const std::string key = text::trim(line.substr(1, eq - 1));
        if (key == "instance_id" || (key == "sent_id" && current_id.empty())) {
          current_id = text::trim(line.substr(eq + 1));
        }
      }
      continue;
    }
    in_sentence = true;
    const auto cols = text::split(line, '\t');
    if (cols.size() < 8) {
      r.problems.push_back("line " + std::to_string(lineno) + ": expected 10 tab-separated columns");
      continue;
    }
    // Multiword token ranges (1-2) and empty nodes (1.1) carry no basic edge.
    if (cols[0].find('-') != std::string::npos || cols[0].find('.') != std::string::npos) continue;
    try {
      const int id = std::stoi(cols[0]);
      const int head = cols[6] == "_" ? 0 : std::stoi(cols[6]);
      if (id != static_cast<int>(forms.size()) + 1) {
        r.problems.push_back("line " + std::to_string(lineno) + ": token ids not consecutive");
      }
      forms.push_back(cols[1]);
      raw.push_back({id, {head, cols[7]}});
    } catch (const std::exception&) {
      r.problems.push_back("line " + std::to_string(lineno) + ": non-numeric id or head");
    }
  }
  flush();
  r.instances = out.size();
  if (report) *report = r;
  return out;
}

std::map<std::string, ParsedSentence> load_conllu(const std::filesystem::path& path, ConlluReport* report) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read CoNLL-U '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_conllu(ss.str(), report);
}

}  // namespace moralscope::corpus
