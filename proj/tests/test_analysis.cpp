#include "doctest.h"
#include "fixture_util.hpp"
#include "stats_oracles.hpp"

#include "moralscope/analysis.hpp"
#include "moralscope/stats.hpp"

#include <algorithm>
#include <fstream>

using namespace moralscope;
using namespace moralscope::analysis;
using stats::ContingencyTable2x2;

namespace {

rationale::RationaleRecord record(const std::string& id, std::vector<int> idx, std::vector<std::string> toks) {
  rationale::RationaleRecord r;
  r.instance_id = id;
  r.indices = std::move(idx);
  r.tokens = std::move(toks);
  r.k = static_cast<int>(r.indices.size());
  return r;
}

CommentRecord comment(social::Gender g, int topic, std::vector<std::string> tokens) {
  CommentRecord c;
  c.post_author_gender = g;
  c.post_topic = topic;
  c.tokens = std::move(tokens);
  return c;
}

}  // namespace

TEST_CASE("odds ratio arithmetic and Wald p") {
  const auto r = stats::odds_ratio({10, 20, 5, 40});
  CHECK(r.odds_ratio == doctest::Approx(4.0).epsilon(1e-14));
  CHECK(r.log_se == doctest::Approx(std::sqrt(0.375)).epsilon(1e-14));
  const long double z = std::log(4.0L) / std::sqrt(0.375L);
  CHECK(r.p_value == doctest::Approx(static_cast<double>(stats_oracles::normal_tail(z))).epsilon(1e-12));
  CHECK(r.p_value == doctest::Approx(0.0236).epsilon(0.01));
  CHECK_FALSE(r.corrected);

  const auto sym = stats::odds_ratio({7, 9, 7, 9});
  CHECK(sym.odds_ratio == 1.0);
  CHECK(sym.p_value == doctest::Approx(1.0));

  const auto zero = stats::odds_ratio({0, 5, 3, 4});
  CHECK(zero.corrected);
  CHECK(zero.odds_ratio == doctest::Approx((0.5 * 4.5) / (5.5 * 3.5)));
  CHECK_THROWS_AS(stats::odds_ratio({0, 0, 0, 0}), std::invalid_argument);

  num::Rng rng(4);
  for (int i = 0; i < 100; ++i) {
    ContingencyTable2x2 t{1 + static_cast<std::int64_t>(rng.below(50)), 1 + static_cast<std::int64_t>(rng.below(50)),
                          1 + static_cast<std::int64_t>(rng.below(50)), 1 + static_cast<std::int64_t>(rng.below(50))};
    const double o = stats::odds_ratio(t).odds_ratio;
    const double swapped = stats::odds_ratio({t.c, t.d, t.a, t.b}).odds_ratio;
    CHECK(std::abs(swapped - 1.0 / o) < 1e-12);
  }
}

TEST_CASE("distribution tails") {
  CHECK(stats::normal_two_sided_p(0.0) == 1.0);
  CHECK(stats::normal_two_sided_p(1.959963984540054) == doctest::Approx(0.05).epsilon(1e-12));
  CHECK(stats::t_two_sided_p(2.228138851986274, 10) == doctest::Approx(0.05).epsilon(1e-10));
  CHECK(stats::p_band(5e-5) == "<1e-4");
  CHECK(stats::p_band(5e-4) == "<1e-3");
  CHECK(stats::p_band(0.01) == "<0.05");
  CHECK(stats::p_band(0.2) == "n.s.");
}

TEST_CASE("ols closed forms") {
  Eigen::MatrixXd X(3, 2);
  X << 1, 0, 1, 1, 1, 2;
  Eigen::VectorXd y(3);
  y << 1, 3, 5;
  const auto fit = stats::ols_fit(X, y);
  CHECK(fit.beta[0] == doctest::Approx(1.0));
  CHECK(fit.beta[1] == doctest::Approx(2.0));
  CHECK(fit.sigma2 == doctest::Approx(0.0).epsilon(1e-20));

  Eigen::MatrixXd Z(6, 3);
  Z << 1, 0.3, 2, 1, -1, 0, 1, 2, 1, 1, 0.5, -3, 1, 4, 1, 1, -2, 0.5;
  const auto c = stats::ols_fit(Z, Eigen::VectorXd::Constant(6, 2.5));
  CHECK(c.beta[0] == doctest::Approx(2.5));
  CHECK(std::abs(c.beta[1]) < 1e-12);
  CHECK(std::abs(c.beta[2]) < 1e-12);
}

TEST_CASE("ols matches a long double normal equation solve") { CHECK(stats_oracles::ols_max_error() < 1e-8); }

TEST_CASE("ols residuals are orthogonal to the design") {
  num::Rng rng(9);
  const int n = 40;
  Eigen::MatrixXd X(n, 4);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    X(i, 0) = 1;
    for (int j = 1; j < 4; ++j) X(i, j) = rng.normal();
    y(i) = rng.normal();
  }
  const auto fit = stats::ols_fit(X, y);
  Eigen::VectorXd b(4);
  for (int j = 0; j < 4; ++j) b(j) = fit.beta[static_cast<std::size_t>(j)];
  const Eigen::VectorXd resid = y - X * b;
  CHECK((X.transpose() * resid).cwiseAbs().maxCoeff() < 1e-8 * n);
  CHECK(fit.n == static_cast<std::size_t>(n));
  CHECK(fit.p_values.size() == 4);
}

TEST_CASE("ols rank deficiency names the collinear column") {
  Eigen::MatrixXd X(5, 3);
  X << 1, 1, 2, 1, 2, 4, 1, 3, 6, 1, 4, 8, 1, 5, 10;
  Eigen::VectorXd y(5);
  y << 1, 2, 3, 4, 6;
  try {
    stats::ols_fit(X, y, {"(intercept)", "x", "twice_x"});
    FAIL("expected rank deficiency");
  } catch (const stats::RankDeficientError& e) {
    REQUIRE(e.columns().size() == 1);
    CHECK((e.columns()[0] == "x" || e.columns()[0] == "twice_x"));
  }
  CHECK_THROWS_AS(stats::ols_fit(X.topRows(3), y.head(3)), std::invalid_argument);
}

TEST_CASE("rationale embedding") {
  embed::StaticTable t(2);
  const std::vector<float> a{1.f, 0.f}, b{0.f, 1.f};
  t.add("a", a);
  t.add("b", b);
  CHECK(*embed_rationale("a a", t) == std::vector<double>{1.0, 0.0});
  CHECK(*embed_rationale("a b", t) == std::vector<double>{0.5, 0.5});
  CHECK(*embed_rationale("A zz b", t) == std::vector<double>{0.5, 0.5});
  CHECK_FALSE(embed_rationale("zz qq", t).has_value());
  const auto e = embed_rationales({"a", "zz", "a b"}, t);
  CHECK(e.vectors.size() == 2);
  CHECK(e.excluded_oov == std::vector<std::string>{"zz"});
}

TEST_CASE("rationale phrases and negation filtering") {
  const auto r = record("c1", {0, 1, 4}, {"Not", "happy", "rude"});
  CHECK(rationale_phrases(r) == std::vector<std::string>{"not happy", "rude"});

  std::map<std::string, corpus::DependencyGraph> parses;
  parses["c1"] = corpus::DependencyGraph::make(5, {{1, 0, "neg"}, {4, 3, "amod"}});
  parses["c2"] = corpus::DependencyGraph::make(3, {{1, 0, "nsubj"}});
  const auto res = filter_rationales({r, record("c2", {1}, {"happy"}), record("c3", {0}, {"x"})}, parses);
  CHECK(res.excluded == 1);
  REQUIRE(res.kept.size() == 2);
  CHECK(res.kept[0].instance_id == "c2");
  CHECK(res.missing_parse == std::vector<std::string>{"c3"});
}

TEST_CASE("kmeans") {
  const std::vector<std::vector<double>> pts{{0, 0}, {0, 1}, {10, 10}, {10, 11}};
  auto km = kmeans(pts, 2, 1);
  auto c = km.centroids;
  std::sort(c.begin(), c.end());
  CHECK(c[0] == std::vector<double>{0, 0.5});
  CHECK(c[1] == std::vector<double>{10, 10.5});
  CHECK(km.assignment[0] == km.assignment[1]);
  CHECK(km.assignment[0] != km.assignment[2]);

  km = kmeans(pts, 4, 2);
  CHECK(km.inertia == 0.0);
  CHECK_THROWS_AS(kmeans(pts, 5, 1), num::InvalidArgument);

  num::Rng rng(6);
  std::vector<std::vector<double>> cloud(300, std::vector<double>(3));
  for (auto& p : cloud) {
    for (auto& v : p) v = rng.normal();
  }
  km = kmeans(cloud, 8, 11);
  for (std::size_t i = 1; i < km.inertia_history.size(); ++i) {
    CHECK(km.inertia_history[i] <= km.inertia_history[i - 1] + 1e-9);
  }
  // fixed point: every point is nearest to its own centroid
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    auto dist = [&](const std::vector<double>& c2) {
      double s = 0;
      for (std::size_t d = 0; d < 3; ++d) s += (cloud[i][d] - c2[d]) * (cloud[i][d] - c2[d]);
      return s;
    };
    const double own = dist(km.centroids[static_cast<std::size_t>(km.assignment[i])]);
    for (const auto& c2 : km.centroids) CHECK(own <= dist(c2) + 1e-12);
  }
  CHECK(kmeans(cloud, 8, 11).assignment == km.assignment);
}

TEST_CASE("cluster tagging") {
  const auto lex = parse_tag_lexicon(
      "awful\tEvaluation: Good/Bad\n"
      "horrible\tEvaluation: Good/Bad;Emotion\n"
      "extremely\tEvaluation: Good/Bad;Degree\n"
      "he\tPronouns\n"
      "she\tPronouns\n"
      "they\tPronouns\n"
      "cake\tFood\n");
  MeaningCluster c;
  c.members = {"awful", "horrible"};
  auto t = tag_cluster(c, lex);
  CHECK(t.status == ClusterStatus::kNamed);
  CHECK(*t.tag == "Evaluation: Good/Bad");

  c.members = {"extremely awful"};
  CHECK(tag_cluster(c, lex).tag == "Evaluation: Good/Bad");
  c.members = {"awful cake"};
  CHECK(tag_cluster(c, lex).status == ClusterStatus::kUntaggable);
  c.members = {"he", "she", "they"};
  CHECK(tag_cluster(c, lex).status == ClusterStatus::kDiscardedPronounPreposition);
  c.members = {"zzz"};
  CHECK(tag_cluster(c, lex).status == ClusterStatus::kUntaggable);

  c.members = {"cake", "awful", "horrible", "cake"};
  auto a = tag_cluster(c, lex);
  std::reverse(c.members.begin(), c.members.end());
  auto b = tag_cluster(c, lex);
  CHECK(a.tag == b.tag);
  CHECK(a.status == b.status);
}

TEST_CASE("clusters round trip") {
  MeaningCluster c;
  c.cluster_id = 3;
  c.centroid = {0.25, -1.0};
  c.members = {"rude", "very rude"};
  c.tag = "Politeness";
  c.status = ClusterStatus::kNamed;
  const auto path = fixtures::scratch("clusters") / "c.json";
  write_clusters(path, {c});
  const auto back = read_clusters(path);
  REQUIRE(back.size() == 1);
  CHECK(back[0].members == c.members);
  CHECK(back[0].centroid == c.centroid);
  CHECK(back[0].tag == c.tag);
  CHECK(back[0].status == c.status);
}

TEST_CASE("contingency counting") {
  MeaningCluster cl;
  cl.members = {"rude", "very selfish"};
  cl.status = ClusterStatus::kNamed;
  cl.tag = "x";
  using social::Gender;
  std::vector<CommentRecord> cs{
      comment(Gender::kFemale, 1, {"so", "rude"}),       comment(Gender::kFemale, 1, {"very", "selfish", "of", "you"}),
      comment(Gender::kFemale, 1, {"fine"}),             comment(Gender::kMale, 1, {"RUDE"}),
      comment(Gender::kMale, 1, {"ok"}),                 comment(Gender::kMale, 1, {"selfish"}),
      comment(Gender::kMale, 1, {"nah"}),                comment(Gender::kUnknown, 1, {"rude"}),
      comment(Gender::kFemale, 2, {"rude"}),
  };
  const auto t = build_contingency(cs, cl, 1);
  CHECK(t.a == 2);
  CHECK(t.b == 1);
  CHECK(t.c == 1);
  CHECK(t.d == 3);
  CHECK(build_contingency(cs, cl, 9).total() == 0);
  CHECK(cluster_hits({"very", "selfish", "and", "rude", "rude"}, cl.members) == 3);

  const auto rows = associate(cs, {cl}, {1, 9});
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].topic == 1);
  CHECK(rows[0].result.odds_ratio == doctest::Approx(6.0));
}

TEST_CASE("interest effects") {
  std::vector<std::string> cats;
  std::vector<double> usage;
  for (int i = 0; i < 40; ++i) {
    cats.push_back("art");
    usage.push_back(0.1 + 0.001 * (i % 5));
  }
  for (int i = 0; i < 35; ++i) {
    cats.push_back("music");
    usage.push_back(0.2 + 0.001 * (i % 5));
  }
  for (int i = 0; i < 5; ++i) {
    cats.push_back("rare");
    usage.push_back(0.9);
  }
  const auto eff = interest_effects(cats, {{0, usage}}, {{0, "Politeness"}});
  CHECK(eff.reference == "art");
  CHECK(eff.excluded == std::vector<std::string>{"rare: 5 comments"});
  REQUIRE(eff.rows.size() == 1);
  CHECK(eff.rows[0].category == "music");
  CHECK(eff.rows[0].beta == doctest::Approx(0.1));
  CHECK(eff.rows[0].p_value < 1e-4);
  CHECK(eff.rows[0].tag == "Politeness");

  InterestOptions flipped;
  flipped.orientation = parse_orientation("usage_on_category");
  const auto alt = interest_effects(cats, {{0, usage}}, {}, flipped);
  REQUIRE(alt.rows.size() == 1);
  CHECK(alt.rows[0].beta > 0);

  std::vector<std::string> one(40, "art");
  const auto single = interest_effects(one, {{0, std::vector<double>(usage.begin(), usage.begin() + 40)}});
  CHECK(single.rows.empty());
  CHECK(single.per_cluster.at(0).beta.size() == 1);
  CHECK_FALSE(single.notes.empty());
}

TEST_CASE("planted interest effect and null calibration") {
  const auto cal = stats_oracles::calibrate();
  CHECK(cal.planted_beta > 0.0);
  CHECK(cal.planted_p < 0.05);
  CHECK(cal.false_positive_rate <= 0.10);
}
