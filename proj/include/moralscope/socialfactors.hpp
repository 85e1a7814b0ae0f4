#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace moralscope::social {

enum class Gender { kFemale, kMale, kUnknown };
std::string_view to_string(Gender g);
Gender parse_gender(std::string_view s);

/// Self-reported author gender. Age/gender templates ("[25F]", "(f25)") only
/// count when they directly follow a first-person pronoun; otherwise a
/// first-person self-description ("I am a father") is used. Nonbinary
/// markers and the absence of any marker give kUnknown.
Gender extract_gender(std::string_view post_text);

struct Topic {
  int topic_id = 0;
  std::string name;
  std::map<std::string, double> word_probs;
};

struct TopicModelTable {
  std::vector<Topic> topics;

  void validate() const;
  static TopicModelTable load_json(const std::filesystem::path& path);
  static TopicModelTable from_json_text(std::string_view json_text);
};

inline constexpr double kTopicFloorProbability = 1e-9;

/// argmax over topics of the summed log word probabilities (OOV words use a
/// 1e-9 floor); ties go to the lowest topic id.
int assign_topic(const std::vector<std::string>& post_tokens, const TopicModelTable& table);

struct HistoryEntry {
  std::string subreddit;
  std::int64_t timestamp = 0;
};

struct InterestConfig {
  int window_days = 91;  // each side of the comment timestamp
  std::size_t min_submissions = 1;
};

struct InterestProfile {
  std::string commenter_id;
  std::string category;  // "none" when nothing falls in the window
  int window_days = 91;
  std::map<std::string, std::size_t> submission_counts;
};

inline constexpr std::string_view kNoInterest = "none";
inline constexpr std::string_view kOtherCategory = "other";

InterestProfile infer_interest(const std::string& commenter_id, const std::vector<HistoryEntry>& history,
                               std::int64_t comment_time, const std::map<std::string, std::string>& category_map,
                               const InterestConfig& cfg = {});

std::map<std::string, std::string> load_category_map(const std::filesystem::path& path);
/// JSON Lines of {commenter_id, subreddit, timestamp}, grouped by commenter.
std::map<std::string, std::vector<HistoryEntry>> load_histories(const std::filesystem::path& path);

}  // namespace moralscope::social
