#include "moralscope/socialfactors.hpp"

#include "moralscope/text.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <regex>
#include <sstream>
#include <stdexcept>

namespace moralscope::social {

using nlohmann::json;

std::string_view to_string(Gender g) {
  switch (g) {
    case Gender::kFemale: return "female";
    case Gender::kMale: return "male";
    case Gender::kUnknown: return "unknown";
  }
  return "unknown";
}

Gender parse_gender(std::string_view s) {
  if (s == "female") return Gender::kFemale;
  if (s == "male") return Gender::kMale;
  return Gender::kUnknown;
}

namespace {

const std::regex& first_person_template() {
  // pronoun, optional comma, then a bracketed age/gender marker
  static const std::regex re(
      R"(\b(?:i|me|i'm|im|myself)\s*,?\s*[\[\(]\s*(?:(\d{1,2})\s*(f|m|nb|enby|x)|(f|m|nb|enby|x)\s*(\d{1,2}))\s*[\]\)])",
      std::regex::icase | std::regex::ECMAScript);
  return re;
}

const std::regex& first_person_description() {
  static const std::regex re(
      R"(\b(?:i am|i'm|im|as)\s+(?:a|an|the)?\s*(?:[a-z]+\s+)?(boy|father|son|girl|mother|daughter|non-?binary|enby)\b)",
      std::regex::icase | std::regex::ECMAScript);
  return re;
}

Gender gender_of_marker(std::string marker) {
  marker = text::lowercase(marker);
  if (marker == "f") return Gender::kFemale;
  if (marker == "m") return Gender::kMale;
  return Gender::kUnknown;
}

Gender gender_of_word(std::string word) {
  word = text::lowercase(word);
  if (word == "boy" || word == "father" || word == "son") return Gender::kMale;
  if (word == "girl" || word == "mother" || word == "daughter") return Gender::kFemale;
  return Gender::kUnknown;
}

}  // namespace

Gender extract_gender(std::string_view post_text) {
  const std::string t = text::fold_quotes(post_text);
  std::smatch m;
  if (std::regex_search(t, m, first_person_template())) {
    return gender_of_marker(m[2].matched ? m[2].str() : m[3].str());
  }
  if (std::regex_search(t, m, first_person_description())) return gender_of_word(m[1].str());
  return Gender::kUnknown;
}

// ---- topics ------------------------------------------------------------------

void TopicModelTable::validate() const {
  if (topics.empty()) throw std::invalid_argument("topic table is empty");
  for (const auto& t : topics) {
    if (t.word_probs.empty()) throw std::invalid_argument("topic " + std::to_string(t.topic_id) + " has no words");
    for (const auto& [w, p] : t.word_probs) {
      if (!(p > 0.0)) throw std::invalid_argument("topic " + std::to_string(t.topic_id) + ": non-positive probability for '" + w + "'");
    }
  }
}

TopicModelTable TopicModelTable::from_json_text(std::string_view json_text) {
  const json j = json::parse(json_text);
  TopicModelTable table;
  const json& list = j.is_array() ? j : j.at("topics");
  for (const auto& item : list) {
    Topic t;
    t.topic_id = item.at("topic_id").get<int>();
    t.name = item.value("name", "");
    for (const auto& [w, p] : item.at("word_probs").items()) t.word_probs[text::lowercase(w)] = p.get<double>();
    table.topics.push_back(std::move(t));
  }
  table.validate();
  return table;
}

TopicModelTable TopicModelTable::load_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read topic table '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

int assign_topic(const std::vector<std::string>& post_tokens, const TopicModelTable& table) {
  if (post_tokens.empty()) throw std::invalid_argument("assign_topic: empty token list");
  if (table.topics.empty()) throw std::invalid_argument("assign_topic: empty topic table");
  const double floor_log = std::log(kTopicFloorProbability);
  int best_id = 0;
  double best = -std::numeric_limits<double>::infinity();
  bool first = true;
  for (const auto& topic : table.topics) {
    double score = 0.0;
    for (const auto& tok : post_tokens) {
      auto it = topic.word_probs.find(text::lowercase(tok));
      score += it == topic.word_probs.end() ? floor_log : std::log(it->second);
    }
    if (first || score > best || (score == best && topic.topic_id < best_id)) {
      best = score;
      best_id = topic.topic_id;
      first = false;
    }
  }
  return best_id;
}

// ---- interests ---------------------------------------------------------------

InterestProfile infer_interest(const std::string& commenter_id, const std::vector<HistoryEntry>& history,
                               std::int64_t comment_time, const std::map<std::string, std::string>& category_map,
                               const InterestConfig& cfg) {
  InterestProfile p;
  p.commenter_id = commenter_id;
  p.window_days = cfg.window_days;
  const std::int64_t window = static_cast<std::int64_t>(cfg.window_days) * 86400;
  std::size_t total = 0;
  for (const auto& h : history) {
    const std::int64_t delta = h.timestamp > comment_time ? h.timestamp - comment_time : comment_time - h.timestamp;
    if (delta > window) continue;
    auto it = category_map.find(text::lowercase(h.subreddit));
    if (it == category_map.end()) it = category_map.find(h.subreddit);
    ++p.submission_counts[it == category_map.end() ? std::string(kOtherCategory) : it->second];
    ++total;
  }
  if (total < std::max<std::size_t>(cfg.min_submissions, 1)) {
    p.category = std::string(kNoInterest);
    return p;
  }
  // std::map iterates lexicographically, so strict '>' keeps the first on ties.
  std::size_t best = 0;
  for (const auto& [cat, n] : p.submission_counts) {
    if (n > best) {
      best = n;
      p.category = cat;
    }
  }
  return p;
}

std::map<std::string, std::string> load_category_map(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read category map '" + path.string() + "'");
  const json j = json::parse(in);
  std::map<std::string, std::string> out;
  for (const auto& [k, v] : j.items()) out[text::lowercase(k)] = v.get<std::string>();
  return out;
}

std::map<std::string, std::vector<HistoryEntry>> load_histories(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read histories '" + path.string() + "'");
  std::map<std::string, std::vector<HistoryEntry>> out;
  std::string line;
  while (std::getline(in, line)) {
    if (text::trim(line).empty()) continue;
    const json j = json::parse(line);
    out[j.at("commenter_id").get<std::string>()].push_back(
        {j.at("subreddit").get<std::string>(), j.at("timestamp").get<std::int64_t>()});
  }
  return out;
}

}  // namespace moralscope::social
