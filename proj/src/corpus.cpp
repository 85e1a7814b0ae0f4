#include "moralscope/corpus.hpp"

#include "moralscope/tensor.hpp"
#include "moralscope/text.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <regex>
#include <unordered_map>

namespace moralscope::corpus {

using nlohmann::json;

namespace {

std::optional<std::string> optional_string(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw FormatError(std::string("field '") + key + "' is not a string");
  return it->get<std::string>();
}

std::int64_t integer_field(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return 0;
  if (it->is_number_integer()) return it->get<std::int64_t>();
  if (it->is_number()) return static_cast<std::int64_t>(it->get<double>());
  throw FormatError(std::string("field '") + key + "' is not numeric");
}

std::string escape_regex(std::string_view s) {
  static const std::string special = R"(\^$.|?*+()[]{})";
  std::string out;
  for (char c : s) {
    if (special.find(c) != std::string::npos) out.push_back('\\');
    out.push_back(c);
  }
  return out;
}

std::regex word_set_regex(const std::vector<std::string>& words) {
  std::string pattern = R"(\b(?:)";
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) pattern += '|';
    pattern += escape_regex(words[i]);
  }
  pattern += R"()\b)";
  return std::regex(pattern, std::regex::icase | std::regex::ECMAScript);
}

bool is_sentence_break(char c) { return c == '.' || c == '!' || c == '?' || c == '\n'; }

std::string strip_quoted_lines(std::string_view body) {
  std::string out;
  for (const auto& line : text::split(body, '\n')) {
    const std::string t = text::trim(line);
    if (t.starts_with(">") || t.starts_with("&gt;")) continue;
    if (!out.empty()) out.push_back('\n');
    out += line;
  }
  return out;
}

}  // namespace

// ---- dump loading ------------------------------------------------------------

std::optional<RawSubmission> parse_submission(std::string_view line) {
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return std::nullopt;
  try {
    RawSubmission s;
    auto id = optional_string(j, "id");
    auto kind = optional_string(j, "kind");
    auto body = optional_string(j, "body");
    if (!id || id->empty() || !kind || !body) return std::nullopt;
    s.id = *id;
    if (*kind == "post") {
      s.kind = SubmissionKind::kPost;
    } else if (*kind == "comment") {
      s.kind = SubmissionKind::kComment;
    } else {
      return std::nullopt;
    }
    s.parent_id = optional_string(j, "parent_id");
    if (s.kind == SubmissionKind::kComment && (!s.parent_id || s.parent_id->empty())) return std::nullopt;
    s.author_id = optional_string(j, "author_id");
    if (s.author_id && (s.author_id->empty() || *s.author_id == "[deleted]")) s.author_id.reset();
    s.body = *body;
    s.score = integer_field(j, "score");
    s.created_utc = integer_field(j, "created_utc");
    s.author_flair = optional_string(j, "author_flair");
    if (s.author_flair && s.author_flair->empty()) s.author_flair.reset();
    if (auto it = j.find("is_moderator"); it != j.end() && !it->is_null()) {
      if (!it->is_boolean()) return std::nullopt;
      s.is_moderator = it->get<bool>();
    }
    if (text::trim(s.body).empty()) return std::nullopt;
    return s;
  } catch (const FormatError&) {
    return std::nullopt;
  }
}

std::vector<RawSubmission> load_dump(const std::filesystem::path& path, std::optional<SubmissionKind> kind,
                                     LoadReport* report) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read dump '" + path.string() + "'");
  LoadReport r;
  std::vector<RawSubmission> out;
  std::string line;
  while (std::getline(in, line)) {
    if (text::trim(line).empty()) continue;
    ++r.lines;
    auto s = parse_submission(line);
    if (!s) {
      ++r.malformed;
      continue;
    }
    if (kind && s->kind != *kind) {
      ++r.filtered_kind;
      continue;
    }
    ++r.records;
    out.push_back(std::move(*s));
  }
  if (in.bad()) throw IoError("error while reading '" + path.string() + "'");
  if (r.lines > 0 && r.malformed * 10 > r.lines) {
    throw FormatError("dump '" + path.string() + "': " + std::to_string(r.malformed) + " of " +
                      std::to_string(r.lines) + " lines malformed (probable schema mismatch)");
  }
  if (report) *report = r;
  return out;
}

// ---- verdicts ----------------------------------------------------------------

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::kYTA: return "YTA";
    case Verdict::kNTA: return "NTA";
    case Verdict::kESH: return "ESH";
    case Verdict::kNAH: return "NAH";
    case Verdict::kINFO: return "INFO";
  }
  return "?";
}

std::optional<Verdict> parse_verdict(std::string_view code) {
  const std::string c = text::lowercase(code);
  if (c == "yta") return Verdict::kYTA;
  if (c == "nta") return Verdict::kNTA;
  if (c == "esh") return Verdict::kESH;
  if (c == "nah") return Verdict::kNAH;
  if (c == "info") return Verdict::kINFO;
  return std::nullopt;
}

std::optional<int> verdict_label(Verdict v) {
  if (v == Verdict::kYTA) return 1;
  if (v == Verdict::kNTA) return 0;
  return std::nullopt;
}

VerdictScan scan_verdict(std::string_view body, const VerdictRules& rules) {
  VerdictScan scan;
  scan.text = strip_quoted_lines(text::fold_quotes(body));

  // Group 1..k are variants in rule order, the last group is the bare code.
  std::string pattern;
  for (const auto& [fragment, _] : rules.variants) pattern += "(" + fragment + ")|";
  pattern += R"(\b(yta|nta|esh|nah|info)\b)";
  const std::regex re(pattern, std::regex::icase | std::regex::ECMAScript);

  for (auto it = std::sregex_iterator(scan.text.begin(), scan.text.end(), re); it != std::sregex_iterator(); ++it) {
    const std::smatch& m = *it;
    VerdictMatch vm;
    vm.begin = static_cast<std::size_t>(m.position(0));
    vm.end = vm.begin + static_cast<std::size_t>(m.length(0));
    const std::size_t groups = rules.variants.size();
    bool found = false;
    for (std::size_t g = 0; g < groups; ++g) {
      if (m[g + 1].matched) {
        vm.code = rules.variants[g].second;
        found = true;
        break;
      }
    }
    if (!found) vm.code = *parse_verdict(m[groups + 1].str());
    scan.matches.push_back(vm);
  }

  std::string reasoning;
  std::size_t cursor = 0;
  for (const auto& m : scan.matches) {
    reasoning += scan.text.substr(cursor, m.begin - cursor);
    cursor = m.end;
  }
  reasoning += scan.text.substr(cursor);
  scan.reasoning_chars = static_cast<std::size_t>(
      std::count_if(reasoning.begin(), reasoning.end(), [](char c) { return !std::isspace(static_cast<unsigned char>(c)); }));

  if (scan.matches.empty()) return scan;

  std::size_t chosen = 0;
  if (scan.matches.size() >= 2 && !rules.transitions.empty()) {
    const auto& a = scan.matches[0];
    const auto& b = scan.matches[1];
    const std::string between = scan.text.substr(a.end, b.begin - a.end);
    if (std::regex_search(between, word_set_regex(rules.transitions))) chosen = 1;
  }
  const VerdictMatch& m = scan.matches[chosen];
  Verdict v = m.code;

  if (!rules.negations.empty() && (v == Verdict::kYTA || v == Verdict::kNTA)) {
    std::size_t start = m.begin;
    while (start > 0 && !is_sentence_break(scan.text[start - 1])) --start;
    const std::string prefix = scan.text.substr(start, m.begin - start);
    if (std::regex_search(prefix, word_set_regex(rules.negations))) {
      v = v == Verdict::kYTA ? Verdict::kNTA : Verdict::kYTA;
    }
  }
  scan.verdict = v;
  return scan;
}

// ---- filters -----------------------------------------------------------------

bool is_deleted_body(std::string_view body) {
  const std::string t = text::trim(body);
  return t == "[deleted]" || t == "[removed]";
}

std::set<std::string> filter_posts(const std::vector<RawSubmission>& posts, const std::vector<RawSubmission>& comments,
                                   const FilterConfig& cfg) {
  std::unordered_map<std::string, std::size_t> top_level;
  for (const auto& c : comments) {
    if (c.kind == SubmissionKind::kComment && c.parent_id) ++top_level[*c.parent_id];
  }
  std::set<std::string> out;
  for (const auto& p : posts) {
    if (p.kind != SubmissionKind::kPost) continue;
    if (is_deleted_body(p.body) || !p.author_id || p.is_moderator) continue;
    auto it = top_level.find(p.id);
    if (it == top_level.end() || it->second < cfg.min_top_level_comments) continue;
    out.insert(p.id);
  }
  return out;
}

std::vector<EligibleComment> filter_comments(const std::vector<RawSubmission>& comments,
                                             const std::set<std::string>& eligible_posts, const VerdictRules& rules,
                                             const FilterConfig& cfg) {
  std::vector<EligibleComment> out;
  for (const auto& c : comments) {
    if (c.kind != SubmissionKind::kComment || !c.parent_id || !eligible_posts.count(*c.parent_id)) continue;
    if (c.score <= cfg.min_score_exclusive) continue;
    if (!c.author_flair) continue;
    if (is_deleted_body(c.body)) continue;
    auto tokens = text::tokenize(c.body);
    if (tokens.size() < cfg.min_tokens || tokens.size() > cfg.max_tokens) continue;
    const VerdictScan scan = scan_verdict(c.body, rules);
    if (!scan.verdict || scan.reasoning_chars < cfg.min_reasoning_chars) continue;
    out.push_back({c, *scan.verdict, std::move(tokens)});
  }
  return out;
}

// ---- lexicon -----------------------------------------------------------------

Lexicon load_lexicon(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read lexicon '" + path.string() + "'");
  Lexicon lex;
  std::string line;
  while (std::getline(in, line)) {
    const std::string w = text::lowercase(text::trim(line));
    if (!w.empty()) lex.insert(w);
  }
  return lex;
}

std::vector<std::uint8_t> apply_moral_lexicon(const std::vector<std::string>& tokens, const Lexicon& lexicon) {
  std::vector<std::uint8_t> mask(tokens.size(), 0);
  for (std::size_t i = 0; i < tokens.size(); ++i) mask[i] = lexicon.count(text::lowercase(tokens[i])) ? 1 : 0;
  return mask;
}

// ---- instances ---------------------------------------------------------------

std::string_view to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kDev: return "dev";
    case Split::kTest: return "test";
  }
  return "?";
}

Split parse_split(std::string_view s) {
  if (s == "train") return Split::kTrain;
  if (s == "dev") return Split::kDev;
  if (s == "test") return Split::kTest;
  throw FormatError("unknown split '" + std::string(s) + "'");
}

void LabeledInstance::validate() const {
  if (weak_mask.size() != tokens.size()) throw FormatError(instance_id + ": weak mask length differs from tokens");
  for (auto z : weak_mask) {
    if (z > 1) throw FormatError(instance_id + ": weak mask is not binary");
  }
  const auto mapped = verdict_label(verdict);
  if (!mapped || *mapped != label) throw FormatError(instance_id + ": label does not match verdict");
  if (graph.token_count != static_cast<int>(tokens.size())) {
    throw FormatError(instance_id + ": graph token count differs from tokens");
  }
}

std::vector<LabeledInstance> build_dataset(const std::vector<EligibleComment>& eligible, std::uint64_t seed) {
  std::vector<const EligibleComment*> by_label[2];
  for (const auto& e : eligible) {
    if (auto y = verdict_label(e.verdict)) by_label[*y].push_back(&e);
  }
  for (int y = 0; y < 2; ++y) {
    if (by_label[y].empty()) {
      throw DatasetError(std::string("no instances with label ") + (y ? "1 (YTA)" : "0 (NTA)"));
    }
    std::sort(by_label[y].begin(), by_label[y].end(),
              [](const auto* a, const auto* b) { return a->comment.id < b->comment.id; });
  }
  num::Rng rng(seed);
  const std::size_t per_class = std::min(by_label[0].size(), by_label[1].size());
  const std::size_t n_dev = per_class / 10;
  const std::size_t n_test = per_class / 10;

  std::vector<LabeledInstance> out;
  out.reserve(2 * per_class);
  for (int y = 0; y < 2; ++y) {
    auto& pool = by_label[y];
    rng.shuffle(pool.begin(), pool.end());
    for (std::size_t i = 0; i < per_class; ++i) {
      const EligibleComment& e = *pool[i];
      LabeledInstance inst;
      inst.instance_id = e.comment.id;
      inst.tokens = e.tokens;
      inst.label = y;
      inst.verdict = e.verdict;
      inst.graph = DependencyGraph::chain(static_cast<int>(e.tokens.size()));
      inst.weak_mask.assign(e.tokens.size(), 0);
      inst.post_id = e.comment.parent_id.value_or("");
      inst.commenter_id = e.comment.author_id.value_or("");
      inst.created_utc = e.comment.created_utc;
      inst.split = i < n_dev ? Split::kDev : (i < n_dev + n_test ? Split::kTest : Split::kTrain);
      out.push_back(std::move(inst));
    }
  }
  rng.shuffle(out.begin(), out.end());
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.split < b.split; });
  return out;
}

void attach_parses(std::vector<LabeledInstance>& instances, const std::map<std::string, ParsedSentence>& parses,
                   AttachReport* report) {
  std::vector<LabeledInstance> kept;
  kept.reserve(instances.size());
  for (auto& inst : instances) {
    auto it = parses.find(inst.instance_id);
    if (it == parses.end()) {
      if (report) report->excluded.push_back(inst.instance_id + ": no parse");
      continue;
    }
    if (it->second.graph.token_count != static_cast<int>(inst.tokens.size())) {
      if (report) {
        report->excluded.push_back(inst.instance_id + ": token count mismatch (parse " +
                                   std::to_string(it->second.graph.token_count) + ", instance " +
                                   std::to_string(inst.tokens.size()) + ")");
      }
      continue;
    }
    inst.graph = it->second.graph;
    kept.push_back(std::move(inst));
  }
  instances = std::move(kept);
}

void attach_lexicon(std::vector<LabeledInstance>& instances, const Lexicon& lexicon) {
  for (auto& inst : instances) inst.weak_mask = apply_moral_lexicon(inst.tokens, lexicon);
}

void write_instances(const std::filesystem::path& path, const std::vector<LabeledInstance>& instances) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  for (const auto& inst : instances) {
    json edges = json::array();
    for (const auto& e : inst.graph.edges) edges.push_back({e.head, e.dependent, e.relation});
    json j = {
        {"instance_id", inst.instance_id},
        {"tokens", inst.tokens},
        {"label", inst.label},
        {"verdict", std::string(to_string(inst.verdict))},
        {"token_count", inst.graph.token_count},
        {"edges", edges},
        {"weak_mask", inst.weak_mask},
        {"post_id", inst.post_id},
        {"commenter_id", inst.commenter_id},
        {"split", std::string(to_string(inst.split))},
        {"created_utc", inst.created_utc},
    };
    out << j.dump() << '\n';
  }
}

std::vector<LabeledInstance> read_instances(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read instances '" + path.string() + "'");
  std::vector<LabeledInstance> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    try {
      const json j = json::parse(line);
      LabeledInstance inst;
      inst.instance_id = j.at("instance_id").get<std::string>();
      inst.tokens = j.at("tokens").get<std::vector<std::string>>();
      inst.label = j.at("label").get<int>();
      auto v = parse_verdict(j.at("verdict").get<std::string>());
      if (!v) throw FormatError("bad verdict");
      inst.verdict = *v;
      std::vector<DependencyEdge> edges;
      for (const auto& e : j.at("edges")) edges.push_back({e.at(0).get<int>(), e.at(1).get<int>(), e.at(2).get<std::string>()});
      inst.graph = DependencyGraph::make(j.at("token_count").get<int>(), std::move(edges));
      inst.weak_mask = j.at("weak_mask").get<std::vector<std::uint8_t>>();
      inst.post_id = j.value("post_id", "");
      inst.commenter_id = j.value("commenter_id", "");
      inst.split = parse_split(j.at("split").get<std::string>());
      inst.created_utc = j.value("created_utc", std::int64_t{0});
      inst.validate();
      out.push_back(std::move(inst));
    } catch (const std::exception& e) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_split_manifest(const std::filesystem::path& path, const std::vector<LabeledInstance>& instances) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << "instance_id\tsplit\n";
  for (const auto& inst : instances) out << inst.instance_id << '\t' << to_string(inst.split) << '\n';
}

std::vector<const LabeledInstance*> select_split(const std::vector<LabeledInstance>& instances, Split split) {
  std::vector<const LabeledInstance*> out;
  for (const auto& inst : instances) {
    if (inst.split == split) out.push_back(&inst);
  }
  return out;
}

}  // namespace moralscope::corpus
