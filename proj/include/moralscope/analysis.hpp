#pragma once

#include "moralscope/corpus.hpp"
#include "moralscope/embeddings.hpp"
#include "moralscope/rationalize.hpp"
#include "moralscope/socialfactors.hpp"
#include "moralscope/stats.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace moralscope::analysis {

// ---- rationale lexicon -----------------------------------------------------

/// Splits a rationale record into contiguous runs; each run is one rationale
/// string (single word or phrase, space-joined, lowercased).
std::vector<std::string> rationale_phrases(const rationale::RationaleRecord& record);

struct NegationFilterResult {
  std::vector<rationale::RationaleRecord> kept;
  std::size_t excluded = 0;
  std::vector<std::string> missing_parse;  // instance ids kept without a parse
};

/// Drops rationales where any selected token is the head or dependent of an
/// edge whose relation is in `negation_relations`.
NegationFilterResult filter_rationales(const std::vector<rationale::RationaleRecord>& records,
                                       const std::map<std::string, corpus::DependencyGraph>& parses,
                                       const std::set<std::string>& negation_relations = {"neg"});

/// Mean of the member words' vectors (lowercased lookup); OOV words are
/// skipped; nullopt when every word is OOV.
std::optional<std::vector<double>> embed_rationale(const std::string& rationale, const embed::StaticTable& table);

struct EmbeddedRationales {
  std::vector<std::string> rationales;
  std::vector<std::vector<double>> vectors;
  std::vector<std::string> excluded_oov;
};

EmbeddedRationales embed_rationales(const std::vector<std::string>& rationales, const embed::StaticTable& table);

// ---- clustering ------------------------------------------------------------

struct KMeansResult {
  std::vector<std::vector<double>> centroids;
  std::vector<int> assignment;
  std::vector<double> inertia_history;  // after each assignment step
  int iterations = 0;
  double inertia = 0.0;
};

/// Lloyd iterations with k-means++ seeding; stops when assignments repeat or
/// after max_iter.
KMeansResult kmeans(const std::vector<std::vector<double>>& vectors, int k, std::uint64_t seed, int max_iter = 300);

using TagLexicon = std::map<std::string, std::set<std::string>>;

/// "word<TAB>cat1;cat2" per line.
TagLexicon load_tag_lexicon(const std::filesystem::path& path);
TagLexicon parse_tag_lexicon(const std::string& content);

enum class ClusterStatus { kNamed, kDiscardedPronounPreposition, kUntaggable };
std::string_view to_string(ClusterStatus s);

struct MeaningCluster {
  int cluster_id = 0;
  std::vector<double> centroid;
  std::vector<std::string> members;
  std::optional<std::string> tag;
  ClusterStatus status = ClusterStatus::kUntaggable;
};

/// True for categories naming pronouns or prepositions.
bool is_function_word_category(const std::string& category);

/// Members are taggable when every lexicon-known word shares at least one
/// category; the tag is the most frequent category over taggable members
/// (ties lexicographic).
MeaningCluster tag_cluster(MeaningCluster cluster, const TagLexicon& lexicon);

std::vector<MeaningCluster> build_clusters(const EmbeddedRationales& embedded, const KMeansResult& km,
                                           const TagLexicon& lexicon);

void write_clusters(const std::filesystem::path& path, const std::vector<MeaningCluster>& clusters);
std::vector<MeaningCluster> read_clusters(const std::filesystem::path& path);

// ---- associations ----------------------------------------------------------

/// Occurrences of any member word or phrase in a token sequence
/// (case-insensitive, non-overlapping per start position).
std::size_t cluster_hits(const std::vector<std::string>& tokens, const std::vector<std::string>& members);

struct CommentRecord {
  std::string comment_id;
  std::vector<std::string> tokens;
  social::Gender post_author_gender = social::Gender::kUnknown;
  int post_topic = 0;
  std::string interest_category;
};

stats::ContingencyTable2x2 build_contingency(const std::vector<CommentRecord>& comments, const MeaningCluster& cluster,
                                             int topic);

struct AssociationRow {
  int topic = 0;
  int cluster_id = 0;
  std::string tag;
  stats::ContingencyTable2x2 table;
  stats::OddsRatio result;
};

/// One row per (topic, named cluster) with a non-empty table.
std::vector<AssociationRow> associate(const std::vector<CommentRecord>& comments,
                                      const std::vector<MeaningCluster>& clusters, const std::vector<int>& topics);
void write_associations(const std::filesystem::path& path, const std::vector<AssociationRow>& rows);

enum class Orientation { kCategoryOnUsage, kUsageOnCategory };
Orientation parse_orientation(std::string_view s);

struct InterestOptions {
  std::size_t min_comments = 30;
  std::optional<std::string> reference;  // default: most frequent category
  Orientation orientation = Orientation::kCategoryOnUsage;
};

struct EffectRow {
  int cluster_id = 0;
  std::string tag;
  std::string category;
  double beta = 0.0;
  double p_value = 1.0;
};

struct InterestEffects {
  std::map<int, stats::RegressionResult> per_cluster;
  std::vector<EffectRow> rows;
  std::string reference;
  std::vector<std::string> excluded;  // "category: n comments"
  std::vector<std::string> notes;
};

/// `usage[c][i]` is the frequency of cluster c in comment i (hits / tokens);
/// `categories[i]` is comment i's interest category.
InterestEffects interest_effects(const std::vector<std::string>& categories,
                                 const std::map<int, std::vector<double>>& usage,
                                 const std::map<int, std::string>& tags = {}, const InterestOptions& opts = {});
void write_effects(const std::filesystem::path& path, const std::vector<EffectRow>& rows);

}  // namespace moralscope::analysis
