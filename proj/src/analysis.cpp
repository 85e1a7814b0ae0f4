#include "moralscope/analysis.hpp"

#include "moralscope/log.hpp"
#include "moralscope/text.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace moralscope::analysis {

// ---- rationale lexicon -----------------------------------------------------------

std::vector<std::string> rationale_phrases(const rationale::RationaleRecord& record) {
  std::vector<std::string> out;
  std::string current;
  int prev = -2;
  for (std::size_t i = 0; i < record.indices.size() && i < record.tokens.size(); ++i) {
    const int idx = record.indices[i];
    if (idx != prev + 1 && !current.empty()) {
      out.push_back(current);
      current.clear();
    }
    if (!current.empty()) current += ' ';
    current += text::lowercase(record.tokens[i]);
    prev = idx;
  }
  if (!current.empty()) out.push_back(current);
  return out;
}

NegationFilterResult filter_rationales(const std::vector<rationale::RationaleRecord>& records,
                                       const std::map<std::string, corpus::DependencyGraph>& parses,
                                       const std::set<std::string>& negation_relations) {
  NegationFilterResult r;
  for (const auto& rec : records) {
    auto it = parses.find(rec.instance_id);
    if (it == parses.end()) {
      r.missing_parse.push_back(rec.instance_id);
      r.kept.push_back(rec);
      continue;
    }
    const std::set<int> selected(rec.indices.begin(), rec.indices.end());
    bool negated = false;
    for (const auto& e : it->second.edges) {
      if (!negation_relations.count(e.relation)) continue;
      if (selected.count(e.head) || selected.count(e.dependent)) {
        negated = true;
        break;
      }
    }
    if (negated) {
      ++r.excluded;
    } else {
      r.kept.push_back(rec);
    }
  }
  return r;
}

std::optional<std::vector<double>> embed_rationale(const std::string& rationale, const embed::StaticTable& table) {
  std::vector<double> sum(table.dim(), 0.0);
  std::size_t found = 0;
  for (const auto& w : text::split(rationale, ' ')) {
    if (w.empty()) continue;
    const auto row = table.find(text::lowercase(w));
    if (!row) continue;
    for (std::size_t d = 0; d < sum.size(); ++d) sum[d] += (*row)[d];
    ++found;
  }
  if (found == 0) return std::nullopt;
  for (auto& x : sum) x /= static_cast<double>(found);
  return sum;
}

EmbeddedRationales embed_rationales(const std::vector<std::string>& rationales, const embed::StaticTable& table) {
  EmbeddedRationales out;
  for (const auto& r : rationales) {
    if (auto v = embed_rationale(r, table)) {
      out.rationales.push_back(r);
      out.vectors.push_back(std::move(*v));
    } else {
      out.excluded_oov.push_back(r);
    }
  }
  return out;
}

// ---- k-means -----------------------------------------------------------------------

namespace {

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

}  // namespace

KMeansResult kmeans(const std::vector<std::vector<double>>& vectors, int k, std::uint64_t seed, int max_iter) {
  const std::size_t n = vectors.size();
  if (k < 1) throw num::InvalidArgument("kmeans: k must be positive");
  if (static_cast<std::size_t>(k) > n) {
    throw num::InvalidArgument("kmeans: k=" + std::to_string(k) + " exceeds " + std::to_string(n) + " vectors");
  }
  const std::size_t dim = vectors.front().size();
  for (const auto& v : vectors) {
    if (v.size() != dim) throw num::InvalidArgument("kmeans: vectors differ in dimension");
  }
  num::Rng rng(seed);
  KMeansResult r;
  std::vector<bool> chosen(n, false);
  std::size_t first = rng.below(n);
  r.centroids.push_back(vectors[first]);
  chosen[first] = true;
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = sq_dist(vectors[i], r.centroids[0]);
  while (r.centroids.size() < static_cast<std::size_t>(k)) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += chosen[i] ? 0.0 : d2[i];
    std::size_t pick = n;
    if (total > 0.0) {
      double u = rng.uniform() * total;
      for (std::size_t i = 0; i < n; ++i) {
        if (chosen[i] || d2[i] <= 0.0) continue;
        pick = i;
        u -= d2[i];
        if (u < 0.0) break;
      }
    } else {
      std::vector<std::size_t> rest;
      for (std::size_t i = 0; i < n; ++i) {
        if (!chosen[i]) rest.push_back(i);
      }
      pick = rest[rng.below(rest.size())];
    }
    chosen[pick] = true;
    r.centroids.push_back(vectors[pick]);
    for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], sq_dist(vectors[i], r.centroids.back()));
  }

  r.assignment.assign(n, -1);
  for (int iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        const double d = sq_dist(vectors[i], r.centroids[static_cast<std::size_t>(c)]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (r.assignment[i] != best) changed = true;
      r.assignment[i] = best;
      inertia += best_d;
    }
    r.inertia_history.push_back(inertia);
    r.inertia = inertia;
    r.iterations = iter + 1;
    if (!changed) break;
    std::vector<std::vector<double>> sums(static_cast<std::size_t>(k), std::vector<double>(dim, 0.0));
    std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
    for (std::size_t i = 0; i < n; ++i) {
      auto& s = sums[static_cast<std::size_t>(r.assignment[i])];
      for (std::size_t d = 0; d < dim; ++d) s[d] += vectors[i][d];
      ++counts[static_cast<std::size_t>(r.assignment[i])];
    }
    for (std::size_t c = 0; c < sums.size(); ++c) {
      if (counts[c] == 0) continue;  // empty cluster keeps its centroid
      for (std::size_t d = 0; d < dim; ++d) r.centroids[c][d] = sums[c][d] / static_cast<double>(counts[c]);
    }
  }
  return r;
}

// ---- tagging -----------------------------------------------------------------------

TagLexicon parse_tag_lexicon(const std::string& content) {
  TagLexicon lex;
  std::istringstream in(content);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw corpus::FormatError("tag lexicon line without a tab: '" + line + "'");
    auto& cats = lex[text::lowercase(text::trim(line.substr(0, tab)))];
    for (const auto& c : text::split(line.substr(tab + 1), ';')) {
      const auto t = text::trim(c);
      if (!t.empty()) cats.insert(t);
    }
  }
  return lex;
}

TagLexicon load_tag_lexicon(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw corpus::IoError("cannot read tag lexicon '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_tag_lexicon(ss.str());
}

std::string_view to_string(ClusterStatus s) {
  switch (s) {
    case ClusterStatus::kNamed: return "named";
    case ClusterStatus::kDiscardedPronounPreposition: return "discarded_pronoun_preposition";
    case ClusterStatus::kUntaggable: return "untaggable";
  }
  return "?";
}

bool is_function_word_category(const std::string& category) {
  const std::string c = text::lowercase(category);
  return c.find("pronoun") != std::string::npos || c.find("preposition") != std::string::npos;
}

MeaningCluster tag_cluster(MeaningCluster cluster, const TagLexicon& lexicon) {
  std::map<std::string, std::size_t> counts;
  for (const auto& member : cluster.members) {
    std::optional<std::set<std::string>> shared;
    for (const auto& w : text::split(member, ' ')) {
      auto it = lexicon.find(text::lowercase(w));
      if (w.empty() || it == lexicon.end()) continue;
      if (!shared) {
        shared = it->second;
      } else {
        std::set<std::string> both;
        std::set_intersection(shared->begin(), shared->end(), it->second.begin(), it->second.end(),
                              std::inserter(both, both.begin()));
        shared = std::move(both);
      }
    }
    if (!shared) continue;
    for (const auto& c : *shared) ++counts[c];
  }
  cluster.tag.reset();
  cluster.status = ClusterStatus::kUntaggable;
  std::size_t best = 0;
  for (const auto& [cat, n] : counts) {
    if (n > best) {
      best = n;
      cluster.tag = cat;
    }
  }
  if (cluster.tag) {
    cluster.status = is_function_word_category(*cluster.tag) ? ClusterStatus::kDiscardedPronounPreposition
                                                             : ClusterStatus::kNamed;
  }
  return cluster;
}

std::vector<MeaningCluster> build_clusters(const EmbeddedRationales& embedded, const KMeansResult& km,
                                           const TagLexicon& lexicon) {
  std::vector<MeaningCluster> out;
  for (std::size_t c = 0; c < km.centroids.size(); ++c) {
    MeaningCluster mc;
    mc.cluster_id = static_cast<int>(c);
    mc.centroid = km.centroids[c];
    for (std::size_t i = 0; i < km.assignment.size(); ++i) {
      if (km.assignment[i] == static_cast<int>(c)) mc.members.push_back(embedded.rationales[i]);
    }
    if (mc.members.empty()) continue;
    std::sort(mc.members.begin(), mc.members.end());
    out.push_back(tag_cluster(std::move(mc), lexicon));
  }
  return out;
}

void write_clusters(const std::filesystem::path& path, const std::vector<MeaningCluster>& clusters) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& c : clusters) {
    arr.push_back({{"cluster_id", c.cluster_id},
                   {"centroid", c.centroid},
                   {"members", c.members},
                   {"tag", c.tag ? nlohmann::json(*c.tag) : nlohmann::json(nullptr)},
                   {"status", std::string(to_string(c.status))}});
  }
  std::ofstream out(path);
  if (!out) throw corpus::IoError("cannot write '" + path.string() + "'");
  out << nlohmann::json{{"clusters", arr}}.dump(1) << '\n';
}

std::vector<MeaningCluster> read_clusters(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw corpus::IoError("cannot read '" + path.string() + "'");
  const auto j = nlohmann::json::parse(in);
  std::vector<MeaningCluster> out;
  for (const auto& c : j.at("clusters")) {
    MeaningCluster mc;
    mc.cluster_id = c.at("cluster_id").get<int>();
    mc.centroid = c.at("centroid").get<std::vector<double>>();
    mc.members = c.at("members").get<std::vector<std::string>>();
    if (!c.at("tag").is_null()) mc.tag = c.at("tag").get<std::string>();
    const auto status = c.at("status").get<std::string>();
    mc.status = status == "named" ? ClusterStatus::kNamed
                : status == "untaggable" ? ClusterStatus::kUntaggable
                                         : ClusterStatus::kDiscardedPronounPreposition;
    out.push_back(std::move(mc));
  }
  return out;
}

// ---- associations ------------------------------------------------------------------

std::size_t cluster_hits(const std::vector<std::string>& tokens, const std::vector<std::string>& members) {
  std::vector<std::vector<std::string>> phrases;
  for (const auto& m : members) {
    std::vector<std::string> words;
    for (const auto& w : text::split(m, ' ')) {
      if (!w.empty()) words.push_back(text::lowercase(w));
    }
    if (!words.empty()) phrases.push_back(std::move(words));
  }
  std::sort(phrases.begin(), phrases.end(), [](const auto& a, const auto& b) { return a.size() > b.size(); });
  std::vector<std::string> lower;
  lower.reserve(tokens.size());
  for (const auto& t : tokens) lower.push_back(text::lowercase(t));
  std::size_t hits = 0;
  std::size_t i = 0;
  while (i < lower.size()) {
    std::size_t matched = 0;
    for (const auto& p : phrases) {
      if (i + p.size() <= lower.size() && std::equal(p.begin(), p.end(), lower.begin() + static_cast<std::ptrdiff_t>(i))) {
        matched = p.size();
        break;
      }
    }
    if (matched) {
      ++hits;
      i += matched;
    } else {
      ++i;
    }
  }
  return hits;
}

stats::ContingencyTable2x2 build_contingency(const std::vector<CommentRecord>& comments, const MeaningCluster& cluster,
                                             int topic) {
  stats::ContingencyTable2x2 t;
  for (const auto& c : comments) {
    if (c.post_topic != topic || c.post_author_gender == social::Gender::kUnknown) continue;
    const bool present = cluster_hits(c.tokens, cluster.members) > 0;
    if (c.post_author_gender == social::Gender::kFemale) {
      ++(present ? t.a : t.b);
    } else {
      ++(present ? t.c : t.d);
    }
  }
  return t;
}

std::vector<AssociationRow> associate(const std::vector<CommentRecord>& comments,
                                      const std::vector<MeaningCluster>& clusters, const std::vector<int>& topics) {
  std::vector<AssociationRow> rows;
  for (int topic : topics) {
    for (const auto& cl : clusters) {
      if (cl.status != ClusterStatus::kNamed) continue;
      AssociationRow row;
      row.topic = topic;
      row.cluster_id = cl.cluster_id;
      row.tag = cl.tag.value_or("");
      row.table = build_contingency(comments, cl, topic);
      if (row.table.total() == 0) {
        log::info("empty_contingency", {{"topic", topic}, {"cluster", cl.cluster_id}});
        continue;
      }
      row.result = stats::odds_ratio(row.table);
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

void write_associations(const std::filesystem::path& path, const std::vector<AssociationRow>& rows) {
  std::ofstream out(path);
  if (!out) throw corpus::IoError("cannot write '" + path.string() + "'");
  out << "topic,cluster,tag,a,b,c,d,odds_ratio,log_se,p_value,band\n" << std::setprecision(10);
  for (const auto& r : rows) {
    out << r.topic << ',' << r.cluster_id << ",\"" << r.tag << "\"," << r.table.a << ',' << r.table.b << ','
        << r.table.c << ',' << r.table.d << ',' << r.result.odds_ratio << ',' << r.result.log_se << ','
        << r.result.p_value << ',' << stats::p_band(r.result.p_value) << '\n';
  }
}

Orientation parse_orientation(std::string_view s) {
  if (s == "category_on_usage") return Orientation::kCategoryOnUsage;
  if (s == "usage_on_category") return Orientation::kUsageOnCategory;
  throw num::InvalidArgument("unknown regression orientation '" + std::string(s) + "'");
}

InterestEffects interest_effects(const std::vector<std::string>& categories,
                                 const std::map<int, std::vector<double>>& usage, const std::map<int, std::string>& tags,
                                 const InterestOptions& opts) {
  InterestEffects out;
  std::map<std::string, std::size_t> counts;
  for (const auto& c : categories) ++counts[c];
  std::vector<std::string> kept;
  for (const auto& [cat, n] : counts) {
    if (n < opts.min_comments) {
      out.excluded.push_back(cat + ": " + std::to_string(n) + " comments");
    } else {
      kept.push_back(cat);
    }
  }
  if (kept.empty()) {
    out.notes.push_back("no category has enough comments");
    return out;
  }
  if (opts.reference) {
    if (std::find(kept.begin(), kept.end(), *opts.reference) == kept.end()) {
      throw num::InvalidArgument("reference category '" + *opts.reference + "' is absent or excluded");
    }
    out.reference = *opts.reference;
  } else {
    std::size_t best = 0;
    for (const auto& c : kept) {
      if (counts[c] > best) {
        best = counts[c];
        out.reference = c;
      }
    }
  }
  std::vector<std::string> others;
  for (const auto& c : kept) {
    if (c != out.reference) others.push_back(c);
  }
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < categories.size(); ++i) {
    if (counts[categories[i]] >= opts.min_comments) rows.push_back(i);
  }
  if (others.empty()) out.notes.push_back("single category '" + out.reference + "': intercept-only model");

  for (const auto& [cluster, freq] : usage) {
    if (freq.size() != categories.size()) throw num::InvalidArgument("interest_effects: usage length mismatch");
    const std::string tag = tags.count(cluster) ? tags.at(cluster) : "";
    if (opts.orientation == Orientation::kCategoryOnUsage) {
      const auto n = static_cast<Eigen::Index>(rows.size());
      Eigen::MatrixXd X(n, static_cast<Eigen::Index>(others.size() + 1));
      Eigen::VectorXd y(n);
      for (Eigen::Index r = 0; r < n; ++r) {
        const std::size_t i = rows[static_cast<std::size_t>(r)];
        X(r, 0) = 1.0;
        for (std::size_t j = 0; j < others.size(); ++j) X(r, static_cast<Eigen::Index>(j + 1)) = categories[i] == others[j];
        y(r) = freq[i];
      }
      std::vector<std::string> names{"(intercept)"};
      names.insert(names.end(), others.begin(), others.end());
      auto fit = stats::ols_fit(X, y, names);
      for (std::size_t j = 0; j < others.size(); ++j) {
        out.rows.push_back({cluster, tag, others[j], fit.beta[j + 1], fit.p_values[j + 1]});
      }
      out.per_cluster.emplace(cluster, std::move(fit));
    } else {
      for (const auto& cat : others) {
        std::vector<std::size_t> sub;
        for (std::size_t i : rows) {
          if (categories[i] == cat || categories[i] == out.reference) sub.push_back(i);
        }
        const auto n = static_cast<Eigen::Index>(sub.size());
        Eigen::MatrixXd X(n, 2);
        Eigen::VectorXd y(n);
        for (Eigen::Index r = 0; r < n; ++r) {
          const std::size_t i = sub[static_cast<std::size_t>(r)];
          X(r, 0) = 1.0;
          X(r, 1) = freq[i];
          y(r) = categories[i] == cat;
        }
        try {
          const auto fit = stats::ols_fit(X, y, {"(intercept)", "usage"});
          out.rows.push_back({cluster, tag, cat, fit.beta[1], fit.p_values[1]});
        } catch (const stats::RankDeficientError&) {
          out.notes.push_back("cluster " + std::to_string(cluster) + " has constant usage; skipped for " + cat);
        }
      }
    }
  }
  return out;
}

void write_effects(const std::filesystem::path& path, const std::vector<EffectRow>& rows) {
  std::ofstream out(path);
  if (!out) throw corpus::IoError("cannot write '" + path.string() + "'");
  out << "cluster,tag,category,beta,p_value,band\n" << std::setprecision(10);
  for (const auto& r : rows) {
    out << r.cluster_id << ",\"" << r.tag << "\"," << r.category << ',' << r.beta << ',' << r.p_value << ','
        << stats::p_band(r.p_value) << '\n';
  }
}

}  // namespace moralscope::analysis
