#include "moralscope/config.hpp"

#include "moralscope/rationalize.hpp"
#include "moralscope/text.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

namespace moralscope::config {

namespace {

std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

Scalar parse_scalar(const std::string& raw, int line_no) {
  const std::string s = text::trim(raw);
  auto fail = [&](const std::string& why) {
    return ConfigError("line " + std::to_string(line_no) + ": " + why + " '" + s + "'");
  };
  if (s.empty()) throw fail("missing value");
  if (s.front() == '"') {
    if (s.size() < 2 || s.back() != '"') throw fail("unterminated string");
    std::string out;
    for (std::size_t i = 1; i + 1 < s.size(); ++i) {
      if (s[i] == '\\' && i + 2 < s.size()) {
        const char n = s[++i];
        out += n == 'n' ? '\n' : n == 't' ? '\t' : n;
      } else {
        out += s[i];
      }
    }
    return out;
  }
  if (s == "true") return true;
  if (s == "false") return false;
  std::string digits;
  for (char c : s) {
    if (c != '_') digits += c;
  }
  std::int64_t iv = 0;
  auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), iv);
  if (ec == std::errc() && p == digits.data() + digits.size()) return iv;
  try {
    std::size_t used = 0;
    const double dv = std::stod(digits, &used);
    if (used == digits.size()) return dv;
  } catch (const std::exception&) {
  }
  throw fail("cannot parse value");
}

std::vector<std::string> split_array(const std::string& inner, int line_no) {
  std::vector<std::string> parts;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < inner.size(); ++i) {
    const char c = inner[i];
    if (c == '"' && (i == 0 || inner[i - 1] != '\\')) quoted = !quoted;
    if (c == ',' && !quoted) {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted) throw ConfigError("line " + std::to_string(line_no) + ": unterminated string in array");
  if (!text::trim(cur).empty()) parts.push_back(cur);
  return parts;
}

std::string type_name(const Value& v) {
  switch (v.data.index()) {
    case 0: return "boolean";
    case 1: return "integer";
    case 2: return "float";
    case 3: return "string";
    default: return "array";
  }
}

}  // namespace

Document Document::parse(const std::string& content) {
  Document doc;
  std::istringstream in(content);
  std::string line;
  std::string section;
  int line_no = 0;
  std::string pending;
  int pending_line = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string s = text::trim(strip_comment(line));
    if (!pending.empty()) {
      pending += ' ' + s;
      if (s.find(']') == std::string::npos) continue;
      s = pending;
      pending.clear();
    }
    if (s.empty()) continue;
    if (s.front() == '[' && s.find('=') == std::string::npos) {
      if (s.back() != ']') throw ConfigError("line " + std::to_string(line_no) + ": malformed section header");
      section = text::trim(s.substr(1, s.size() - 2));
      if (section.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty section name");
      doc.sections_[section];
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = text::trim(s.substr(0, eq));
    const std::string rhs = text::trim(s.substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    if (!rhs.empty() && rhs.front() == '[' && rhs.find(']') == std::string::npos) {
      pending = s;
      pending_line = line_no;
      continue;
    }
    Value v;
    if (!rhs.empty() && rhs.front() == '[') {
      if (rhs.back() != ']') throw ConfigError("line " + std::to_string(line_no) + ": malformed array");
      std::vector<Scalar> items;
      for (const auto& part : split_array(rhs.substr(1, rhs.size() - 2), line_no)) items.push_back(parse_scalar(part, line_no));
      v.data = std::move(items);
    } else {
      std::visit([&](auto&& x) { v.data = x; }, parse_scalar(rhs, line_no));
    }
    auto& sec = doc.sections_[section];
    if (sec.count(key)) throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    sec.emplace(key, std::move(v));
  }
  if (!pending.empty()) throw ConfigError("line " + std::to_string(pending_line) + ": unterminated array");
  return doc;
}

Document Document::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

const Value* Document::find(const std::string& section, const std::string& key) const {
  touched_[section + "." + key] = true;
  auto s = sections_.find(section);
  if (s == sections_.end()) return nullptr;
  auto k = s->second.find(key);
  return k == s->second.end() ? nullptr : &k->second;
}

bool Document::has(const std::string& section, const std::string& key) const {
  auto s = sections_.find(section);
  return s != sections_.end() && s->second.count(key);
}

namespace {

template <class T>
T required(const std::optional<T>& fallback, const std::string& section, const std::string& key) {
  if (!fallback) throw ConfigError("missing required key '" + section + "." + key + "'");
  return *fallback;
}

ConfigError wrong_type(const std::string& section, const std::string& key, const Value& v, const char* want) {
  return ConfigError("'" + section + "." + key + "' should be " + want + ", found " + type_name(v));
}

}  // namespace

std::string Document::get_string(const std::string& section, const std::string& key, std::optional<std::string> fallback) const {
  const Value* v = find(section, key);
  if (!v) return required(fallback, section, key);
  if (auto p = std::get_if<std::string>(&v->data)) return *p;
  throw wrong_type(section, key, *v, "a string");
}

std::int64_t Document::get_int(const std::string& section, const std::string& key, std::optional<std::int64_t> fallback) const {
  const Value* v = find(section, key);
  if (!v) return required(fallback, section, key);
  if (auto p = std::get_if<std::int64_t>(&v->data)) return *p;
  throw wrong_type(section, key, *v, "an integer");
}

double Document::get_double(const std::string& section, const std::string& key, std::optional<double> fallback) const {
  const Value* v = find(section, key);
  if (!v) return required(fallback, section, key);
  if (auto p = std::get_if<double>(&v->data)) return *p;
  if (auto p = std::get_if<std::int64_t>(&v->data)) return static_cast<double>(*p);
  throw wrong_type(section, key, *v, "a number");
}

bool Document::get_bool(const std::string& section, const std::string& key, std::optional<bool> fallback) const {
  const Value* v = find(section, key);
  if (!v) return required(fallback, section, key);
  if (auto p = std::get_if<bool>(&v->data)) return *p;
  throw wrong_type(section, key, *v, "a boolean");
}

std::vector<std::string> Document::get_strings(const std::string& section, const std::string& key,
                                               std::optional<std::vector<std::string>> fallback) const {
  const Value* v = find(section, key);
  if (!v) return required(fallback, section, key);
  auto arr = std::get_if<std::vector<Scalar>>(&v->data);
  if (!arr) throw wrong_type(section, key, *v, "an array of strings");
  std::vector<std::string> out;
  for (const auto& s : *arr) {
    auto p = std::get_if<std::string>(&s);
    if (!p) throw ConfigError("'" + section + "." + key + "' should contain only strings");
    out.push_back(*p);
  }
  return out;
}

std::vector<std::int64_t> Document::get_ints(const std::string& section, const std::string& key,
                                             std::optional<std::vector<std::int64_t>> fallback) const {
  const Value* v = find(section, key);
  if (!v) return required(fallback, section, key);
  auto arr = std::get_if<std::vector<Scalar>>(&v->data);
  if (!arr) throw wrong_type(section, key, *v, "an array of integers");
  std::vector<std::int64_t> out;
  for (const auto& s : *arr) {
    auto p = std::get_if<std::int64_t>(&s);
    if (!p) throw ConfigError("'" + section + "." + key + "' should contain only integers");
    out.push_back(*p);
  }
  return out;
}

std::vector<bool> Document::get_bools(const std::string& section, const std::string& key,
                                      std::optional<std::vector<bool>> fallback) const {
  const Value* v = find(section, key);
  if (!v) return required(fallback, section, key);
  auto arr = std::get_if<std::vector<Scalar>>(&v->data);
  if (!arr) throw wrong_type(section, key, *v, "an array of booleans");
  std::vector<bool> out;
  for (const auto& s : *arr) {
    auto p = std::get_if<bool>(&s);
    if (!p) throw ConfigError("'" + section + "." + key + "' should contain only booleans");
    out.push_back(*p);
  }
  return out;
}

std::vector<std::string> Document::unused() const {
  std::vector<std::string> out;
  for (const auto& [sec, keys] : sections_) {
    for (const auto& [k, v] : keys) {
      if (!touched_.count(sec + "." + k)) out.push_back(sec + "." + k);
    }
  }
  return out;
}

// ---- pipeline configuration ---------------------------------------------------

PipelineConfig from_document(const Document& doc, const std::filesystem::path& base_dir) {
  PipelineConfig c;
  auto path = [&](const std::string& key, bool required_key) -> std::filesystem::path {
    const std::string s = required_key ? doc.get_string("paths", key) : doc.get_string("paths", key, std::string());
    if (s.empty()) return {};
    std::filesystem::path p(s);
    return p.is_absolute() || base_dir.empty() ? p : base_dir / p;
  };
  if (!doc.has("run", "seed")) throw ConfigError("missing required key 'run.seed' (wall-clock seeding is not supported)");
  const auto seed = doc.get_int("run", "seed");
  if (seed < 0) throw ConfigError("run.seed must be non-negative");
  c.seed = static_cast<std::uint64_t>(seed);

  c.paths.posts = path("posts", true);
  c.paths.comments = path("comments", true);
  c.paths.parses = path("parses", false);
  c.paths.moral_lexicon = path("moral_lexicon", true);
  c.paths.embeddings = path("embeddings", false);
  c.paths.static_embeddings = path("static_embeddings", false);
  c.paths.topic_model = path("topic_model", false);
  c.paths.category_map = path("category_map", false);
  c.paths.histories = path("histories", false);
  c.paths.tag_lexicon = path("tag_lexicon", true);
  c.paths.output_dir = path("output_dir", true);

  auto& m = c.model;
  const model::ModelConfig d;
  m.lambda = doc.get_double("model", "lambda", d.lambda);
  m.adam.learning_rate = doc.get_double("model", "learning_rate", d.adam.learning_rate);
  m.adam.clip_norm = doc.get_double("model", "clip_norm", d.adam.clip_norm);
  m.embedding_dim = static_cast<int>(doc.get_int("model", "embedding_dim", d.embedding_dim));
  m.global_hidden_per_direction =
      static_cast<int>(doc.get_int("model", "global_hidden_per_direction", d.global_hidden_per_direction));
  m.recurrent_layers = static_cast<int>(doc.get_int("model", "recurrent_layers", d.recurrent_layers));
  m.gcn_layers = static_cast<int>(doc.get_int("model", "gcn_layers", d.gcn_layers));
  m.gcn_out_dim = static_cast<int>(doc.get_int("model", "gcn_out_dim", d.gcn_out_dim));
  m.attention_dim = static_cast<int>(doc.get_int("model", "attention_dim", d.attention_dim));
  m.dense_units.clear();
  for (auto u : doc.get_ints("model", "dense_units", std::vector<std::int64_t>{512, 256, 128})) m.dense_units.push_back(static_cast<int>(u));
  m.dropout = doc.get_double("model", "dropout", d.dropout);
  m.max_seq_len = static_cast<int>(doc.get_int("model", "max_seq_len", d.max_seq_len));
  m.batch_size = static_cast<int>(doc.get_int("model", "batch_size", d.batch_size));
  m.training_steps = static_cast<int>(doc.get_int("model", "training_steps", d.training_steps));
  m.epochs = static_cast<int>(doc.get_int("model", "epochs", d.epochs));
  m.seed = c.seed;
  c.channels = doc.get_strings("model", "channels", c.channels);
  c.domain = doc.get_bools("model", "domain", c.domain);
  c.baseline_steps = static_cast<int>(doc.get_int("model", "baseline_steps", c.baseline_steps));

  auto& s = c.selection;
  s.methods = doc.get_strings("selection", "methods", s.methods);
  s.fraction = doc.get_double("selection", "fraction", s.fraction);
  s.selection = doc.get_string("selection", "selection", s.selection);
  s.ig_steps = static_cast<int>(doc.get_int("selection", "ig_steps", s.ig_steps));
  s.extract_method = doc.get_string("selection", "extract_method", s.extract_method);
  s.eval_split = doc.get_string("selection", "eval_split", s.eval_split);
  s.normalize_by_null = doc.get_bool("selection", "normalize_by_null", s.normalize_by_null);

  auto& a = c.analysis;
  a.kmeans_k = static_cast<int>(doc.get_int("analysis", "kmeans_k", a.kmeans_k));
  a.kmeans_seed = static_cast<std::uint64_t>(doc.get_int("analysis", "kmeans_seed", static_cast<std::int64_t>(c.seed)));
  a.max_iter = static_cast<int>(doc.get_int("analysis", "max_iter", a.max_iter));
  a.window_days = static_cast<int>(doc.get_int("analysis", "window_days", a.window_days));
  a.min_history = static_cast<int>(doc.get_int("analysis", "min_history", a.min_history));
  a.min_comments = static_cast<int>(doc.get_int("analysis", "min_comments", a.min_comments));
  a.reference = doc.get_string("analysis", "reference", a.reference);
  a.orientation = doc.get_string("analysis", "orientation", a.orientation);
  a.negation_relations = doc.get_strings("analysis", "negation_relations", a.negation_relations);

  c.report_formats = doc.get_strings("report", "formats", c.report_formats);

  const auto unused = doc.unused();
  if (!unused.empty()) {
    std::string msg = "unknown config keys:";
    for (const auto& k : unused) msg += " " + k;
    throw ConfigError(msg);
  }
  return c;
}

PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
  PipelineConfig c = from_document(Document::load(path), path.parent_path());
  c.source = path;
  c.validate();
  return c;
}

void PipelineConfig::validate() const {
  try {
    model.validate();
    for (const auto& ch : channels) model::parse_channels(ch);
    for (const auto& m : selection.methods) rationale::parse_method(m);
    const auto extract = rationale::parse_method(selection.extract_method);
    if (extract == rationale::Method::kFlx) throw ConfigError("selection.extract_method cannot be FLX");
    rationale::parse_selection(selection.selection);
    corpus::parse_split(selection.eval_split);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (channels.empty() || domain.empty()) throw ConfigError("model.channels and model.domain must be non-empty");
  if (!(selection.fraction > 0.0 && selection.fraction <= 1.0)) throw ConfigError("selection.fraction must be in (0, 1]");
  if (selection.ig_steps < 8) throw ConfigError("selection.ig_steps must be at least 8");
  if (analysis.kmeans_k < 1) throw ConfigError("analysis.kmeans_k must be positive");
  if (analysis.window_days < 0 || analysis.min_history < 1 || analysis.min_comments < 1) {
    throw ConfigError("invalid analysis thresholds");
  }
  if (analysis.orientation != "category_on_usage" && analysis.orientation != "usage_on_category") {
    throw ConfigError("analysis.orientation must be category_on_usage or usage_on_category");
  }
  if (baseline_steps < 1) throw ConfigError("model.baseline_steps must be positive");
  for (const auto& f : report_formats) {
    if (f != "csv" && f != "json" && f != "md") throw ConfigError("unknown report format '" + f + "'");
  }
  const std::vector<std::pair<const char*, const std::filesystem::path*>> inputs{
      {"posts", &paths.posts},           {"comments", &paths.comments},
      {"parses", &paths.parses},         {"moral_lexicon", &paths.moral_lexicon},
      {"embeddings", &paths.embeddings}, {"static_embeddings", &paths.static_embeddings},
      {"topic_model", &paths.topic_model}, {"category_map", &paths.category_map},
      {"histories", &paths.histories},   {"tag_lexicon", &paths.tag_lexicon}};
  for (const auto& [name, p] : inputs) {
    if (!p->empty() && !std::filesystem::exists(*p)) {
      throw ConfigError("paths." + std::string(name) + " does not exist: " + p->string());
    }
  }
}

}  // namespace moralscope::config
