#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace moralscope::corpus {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class SubmissionKind { kPost, kComment };

struct RawSubmission {
  std::string id;
  SubmissionKind kind = SubmissionKind::kPost;
  std::optional<std::string> parent_id;
  std::optional<std::string> author_id;  // absent = deleted account
  std::string body;
  std::int64_t score = 0;
  std::int64_t created_utc = 0;
  std::optional<std::string> author_flair;
  bool is_moderator = false;
};

struct LoadReport {
  std::size_t lines = 0;
  std::size_t records = 0;
  std::size_t malformed = 0;
  std::size_t filtered_kind = 0;
};

/// Reads a JSON Lines dump. Malformed lines are skipped and counted; more than
/// 10% malformed lines is a FormatError. Unreadable files raise IoError.
std::vector<RawSubmission> load_dump(const std::filesystem::path& path,
                                     std::optional<SubmissionKind> kind = std::nullopt,
                                     LoadReport* report = nullptr);

/// Parses one dump line; nullopt when the line does not describe a submission.
std::optional<RawSubmission> parse_submission(std::string_view line);

// ---- verdicts --------------------------------------------------------------

enum class Verdict { kYTA, kNTA, kESH, kNAH, kINFO };

std::string_view to_string(Verdict v);
std::optional<Verdict> parse_verdict(std::string_view code);
/// YTA -> 1, NTA -> 0, everything else unmapped.
std::optional<int> verdict_label(Verdict v);

struct VerdictRules {
  std::vector<std::string> transitions{"but", "however", "although", "though"};
  std::vector<std::string> negations{"not", "don't", "do not", "wouldn't", "isn't"};
  /// Regex fragment (ECMAScript, matched case-insensitively) -> code.
  std::vector<std::pair<std::string, Verdict>> variants{
      {R"((?:you'?re|you are|ur) not the (?:a-?hole|asshole|ass hole|a\*\*hole))", Verdict::kNTA},
      {R"(not the (?:a-?hole|asshole|ass hole|a\*\*hole))", Verdict::kNTA},
      {R"((?:you'?re|you are|ur) the (?:a-?hole|asshole|ass hole|a\*\*hole))", Verdict::kYTA},
      {R"(everyone sucks here)", Verdict::kESH},
      {R"(no (?:a-?holes|assholes) here)", Verdict::kNAH},
      {R"(not enough info(?:rmation)?)", Verdict::kINFO},
  };
};

struct VerdictMatch {
  std::size_t begin = 0;  // offsets into VerdictScan::text
  std::size_t end = 0;
  Verdict code = Verdict::kINFO;
};

struct VerdictScan {
  std::string text;  // body with quoted lines removed
  std::vector<VerdictMatch> matches;
  std::optional<Verdict> verdict;
  std::size_t reasoning_chars = 0;  // non-space chars left after removing matches
};

/// Full scan: quote stripping, matching, transition and negation rules.
VerdictScan scan_verdict(std::string_view body, const VerdictRules& rules = {});

inline std::optional<Verdict> extract_verdict(std::string_view body, const VerdictRules& rules = {}) {
  return scan_verdict(body, rules).verdict;
}

// ---- filters ---------------------------------------------------------------

struct FilterConfig {
  std::size_t min_top_level_comments = 10;
  std::int64_t min_score_exclusive = 100;
  std::size_t min_tokens = 20;
  std::size_t max_tokens = 200;
  std::size_t min_reasoning_chars = 15;
};

bool is_deleted_body(std::string_view body);

std::set<std::string> filter_posts(const std::vector<RawSubmission>& posts,
                                   const std::vector<RawSubmission>& comments,
                                   const FilterConfig& cfg = {});

struct EligibleComment {
  RawSubmission comment;
  Verdict verdict = Verdict::kINFO;
  std::vector<std::string> tokens;
};

/// Top-level comments (parent is an eligible post) passing score, length,
/// flair, verdict and reasoning-length rules.
std::vector<EligibleComment> filter_comments(const std::vector<RawSubmission>& comments,
                                             const std::set<std::string>& eligible_posts,
                                             const VerdictRules& rules = {}, const FilterConfig& cfg = {});

// ---- dependency graphs -----------------------------------------------------

enum class EdgeDirection { kForward, kReverse, kSelf };

struct DependencyEdge {
  int head = 0;  // 0-based token indices
  int dependent = 0;
  std::string relation;
};

struct AugmentedEdge {
  int source = 0;  // message flows source -> target
  int target = 0;
  std::string relation;
  EdgeDirection direction = EdgeDirection::kSelf;
};

inline constexpr std::string_view kSelfRelation = "self";

struct DependencyGraph {
  int token_count = 0;
  std::vector<DependencyEdge> edges;
  std::vector<AugmentedEdge> augmented_edges;

  /// Validates indices and derives augmented_edges: one self edge per token,
  /// one forward (head -> dependent) and one reverse edge per parse edge.
  static DependencyGraph make(int token_count, std::vector<DependencyEdge> edges);
  /// Left-to-right chain (token i heads token i+1) with one relation label.
  static DependencyGraph chain(int token_count, const std::string& relation = "dep");

  DependencyGraph truncated(int max_tokens) const;
};

struct ParsedSentence {
  std::vector<std::string> forms;
  DependencyGraph graph;
};

struct ConlluReport {
  std::size_t sentences = 0;
  std::size_t instances = 0;
  std::vector<std::string> problems;
};

/// Reads CoNLL-U. The instance id comes from a "# instance_id = X" or
/// "# sent_id = X" comment; consecutive sentences sharing an id are joined.
/// Root attachments (head 0) produce no edge.
std::map<std::string, ParsedSentence> load_conllu(const std::filesystem::path& path, ConlluReport* report = nullptr);
std::map<std::string, ParsedSentence> parse_conllu(std::string_view content, ConlluReport* report = nullptr);

// ---- lexicon and instances -------------------------------------------------

using Lexicon = std::unordered_set<std::string>;

/// One word per line, UTF-8; entries are lowercased.
Lexicon load_lexicon(const std::filesystem::path& path);

/// z_d[i] = 1 iff lowercase(tokens[i]) is in the lexicon.
std::vector<std::uint8_t> apply_moral_lexicon(const std::vector<std::string>& tokens, const Lexicon& lexicon);

enum class Split { kTrain, kDev, kTest };
std::string_view to_string(Split s);
Split parse_split(std::string_view s);

struct LabeledInstance {
  std::string instance_id;
  std::vector<std::string> tokens;
  int label = 0;
  Verdict verdict = Verdict::kNTA;
  DependencyGraph graph;
  std::vector<std::uint8_t> weak_mask;
  std::string post_id;
  std::string commenter_id;
  Split split = Split::kTrain;
  std::int64_t created_utc = 0;

  /// Throws FormatError when the type invariants are violated.
  void validate() const;
};

/// Drops non-YTA/NTA codes, undersamples the majority class to the minority
/// count and splits each class 80/10/10. Deterministic for a given seed.
std::vector<LabeledInstance> build_dataset(const std::vector<EligibleComment>& eligible, std::uint64_t seed);

struct AttachReport {
  std::vector<std::string> excluded;  // "id: reason"
};

/// Attaches parses by instance id; instances without a parse or with a token
/// count mismatch are removed and reported.
void attach_parses(std::vector<LabeledInstance>& instances, const std::map<std::string, ParsedSentence>& parses,
                   AttachReport* report = nullptr);
void attach_lexicon(std::vector<LabeledInstance>& instances, const Lexicon& lexicon);

void write_instances(const std::filesystem::path& path, const std::vector<LabeledInstance>& instances);
std::vector<LabeledInstance> read_instances(const std::filesystem::path& path);
void write_split_manifest(const std::filesystem::path& path, const std::vector<LabeledInstance>& instances);

std::vector<const LabeledInstance*> select_split(const std::vector<LabeledInstance>& instances, Split split);

}  // namespace moralscope::corpus
