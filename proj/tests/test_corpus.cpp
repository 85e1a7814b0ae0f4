#include "doctest.h"
#include "fixture_util.hpp"

#include "moralscope/corpus.hpp"
#include "moralscope/text.hpp"

#include <fstream>

using namespace moralscope;
using namespace moralscope::corpus;

namespace {

std::filesystem::path write_file(const std::string& name, const std::string& content) {
  auto p = fixtures::scratch("corpus") / name;
  std::ofstream(p) << content;
  return p;
}

RawSubmission comment(const std::string& id, const std::string& parent, std::int64_t score, const std::string& body,
                      bool flair = true) {
  RawSubmission c;
  c.id = id;
  c.kind = SubmissionKind::kComment;
  c.parent_id = parent;
  c.author_id = "u_" + id;
  c.body = body;
  c.score = score;
  if (flair) c.author_flair = "Partassipant";
  return c;
}

RawSubmission post(const std::string& id, const std::string& author = "op") {
  RawSubmission p;
  p.id = id;
  p.kind = SubmissionKind::kPost;
  p.author_id = author;
  p.body = "AITA for something?";
  return p;
}

std::string words(std::size_t n) {
  std::string s;
  for (std::size_t i = 0; i < n; ++i) s += (i ? " w" : "w") + std::to_string(i);
  return s;
}

}  // namespace

TEST_CASE("load_dump counts records and malformed lines") {
  const std::string good = R"({"id":"a","kind":"post","body":"x","author_id":"u","score":1,"created_utc":5})";
  auto p = write_file("three.jsonl", good + "\n" + good + "\n" + good + "\n");
  LoadReport rep;
  CHECK(load_dump(p, std::nullopt, &rep).size() == 3);
  CHECK(rep.malformed == 0);

  std::string ten;
  for (int i = 0; i < 9; ++i) ten += good + "\n";
  ten += "{not json\n";
  p = write_file("ten.jsonl", ten);
  CHECK(load_dump(p, std::nullopt, &rep).size() == 9);
  CHECK(rep.malformed == 1);

  p = write_file("bad.jsonl", good + "\n{bad\n{bad\n");
  CHECK_THROWS_AS(load_dump(p), FormatError);

  p = write_file("empty.jsonl", "");
  CHECK(load_dump(p, std::nullopt, &rep).empty());
  CHECK(rep.lines == 0);
  CHECK_THROWS_AS(load_dump("/nonexistent/file.jsonl"), IoError);
}

TEST_CASE("verdict extraction examples") {
  CHECK(extract_verdict("NTA. He was out of line.") == Verdict::kNTA);
  CHECK(extract_verdict("I was leaning NTA but honestly YTA for lying.") == Verdict::kYTA);
  CHECK(extract_verdict("I do not think YTA applies here.") == Verdict::kNTA);
  CHECK(extract_verdict("> YTA totally\nDisagree, NTA.") == Verdict::kNTA);
  CHECK_FALSE(extract_verdict("What a story, thanks for sharing").has_value());
}

TEST_CASE("verdict fixture suite") {
  const auto cases = fixtures::verdict_cases();
  REQUIRE(cases.size() >= 30);
  for (const auto& [expected, body] : cases) {
    CAPTURE(body);
    const auto v = extract_verdict(body);
    REQUIRE(v.has_value());
    CHECK(to_string(*v) == expected);
  }
}

TEST_CASE("verdict labels") {
  CHECK(verdict_label(Verdict::kYTA) == 1);
  CHECK(verdict_label(Verdict::kNTA) == 0);
  CHECK_FALSE(verdict_label(Verdict::kESH).has_value());
}

TEST_CASE("post filter boundaries") {
  std::vector<RawSubmission> posts{post("p10"), post("p9"), post("pdel")};
  posts[2].author_id.reset();
  std::vector<RawSubmission> comments;
  for (int i = 0; i < 10; ++i) comments.push_back(comment("a" + std::to_string(i), "p10", 1, "x"));
  for (int i = 0; i < 9; ++i) comments.push_back(comment("b" + std::to_string(i), "p9", 1, "x"));
  for (int i = 0; i < 12; ++i) comments.push_back(comment("c" + std::to_string(i), "pdel", 1, "x"));
  const auto kept = filter_posts(posts, comments);
  CHECK(kept.count("p10") == 1);
  CHECK(kept.count("p9") == 0);
  CHECK(kept.count("pdel") == 0);
}

TEST_CASE("comment filter rules") {
  const std::set<std::string> eligible{"p"};
  const std::string reasoning = "NTA because " + words(48);
  CHECK(filter_comments({comment("c", "p", 101, reasoning)}, eligible).size() == 1);
  CHECK(filter_comments({comment("c", "p", 100, reasoning)}, eligible).empty());
  CHECK(filter_comments({comment("c", "p", 101, reasoning, false)}, eligible).empty());
  CHECK(filter_comments({comment("c", "q", 101, reasoning)}, eligible).empty());
  CHECK(filter_comments({comment("c", "p", 101, "NTA " + words(17))}, eligible).empty());  // 18 tokens
  CHECK(filter_comments({comment("c", "p", 101, words(60))}, eligible).empty());          // no verdict
  CHECK(filter_comments({comment("c", "p", 101, "NTA " + words(210))}, eligible).empty());
  const auto kept = filter_comments({comment("c", "p", 101, reasoning)}, eligible);
  CHECK(kept[0].verdict == Verdict::kNTA);
  CHECK(kept[0].tokens.size() == text::tokenize(reasoning).size());
}

TEST_CASE("dependency graph augmentation") {
  auto g = DependencyGraph::make(2, {{0, 1, "nsubj"}});
  CHECK(g.augmented_edges.size() == 4);
  int fwd = 0, rev = 0, self = 0;
  for (const auto& e : g.augmented_edges) {
    fwd += e.direction == EdgeDirection::kForward;
    rev += e.direction == EdgeDirection::kReverse;
    self += e.direction == EdgeDirection::kSelf;
  }
  CHECK(fwd == 1);
  CHECK(rev == 1);
  CHECK(self == 2);
  CHECK_THROWS(DependencyGraph::make(2, {{0, 2, "x"}}));
}

TEST_CASE("CoNLL-U parsing joins sentences and skips root edges") {
  const std::string text =
      "# instance_id = c1\n"
      "1\tShe\tshe\tPRON\t_\t_\t2\tnsubj\t_\t_\n"
      "2\tleft\tleave\tVERB\t_\t_\t0\troot\t_\t_\n"
      "\n"
      "# instance_id = c1\n"
      "1-2\tdon't\t_\t_\t_\t_\t_\t_\t_\t_\n"
      "1\tdo\tdo\tAUX\t_\t_\t3\taux\t_\t_\n"
      "2\tn't\tnot\tPART\t_\t_\t3\tneg\t_\t_\n"
      "3\tgo\tgo\tVERB\t_\t_\t0\troot\t_\t_\n"
      "\n";
  ConlluReport rep;
  const auto parsed = parse_conllu(text, &rep);
  REQUIRE(parsed.count("c1") == 1);
  const auto& s = parsed.at("c1");
  CHECK(s.forms.size() == 5);
  CHECK(s.graph.edges.size() == 3);
  CHECK(s.graph.augmented_edges.size() == 5 + 2 * 3);
  bool has_neg = false;
  for (const auto& e : s.graph.edges) has_neg |= (e.relation == "neg" && e.head == 4 && e.dependent == 3);
  CHECK(has_neg);
}

TEST_CASE("moral lexicon weak mask") {
  const std::vector<std::string> toks{"she", "Betrayed", "me"};
  CHECK(apply_moral_lexicon(toks, Lexicon{"betrayed"}) == std::vector<std::uint8_t>{0, 1, 0});
  CHECK(apply_moral_lexicon(toks, Lexicon{}) == std::vector<std::uint8_t>{0, 0, 0});
}

TEST_CASE("dataset balancing and splits") {
  std::vector<EligibleComment> elig;
  for (int i = 0; i < 160; ++i) {
    EligibleComment e;
    e.comment = comment("c" + std::to_string(i), "p", 200, "x");
    e.verdict = i < 100 ? Verdict::kNTA : Verdict::kYTA;
    e.tokens = text::tokenize(words(25));
    elig.push_back(e);
  }
  EligibleComment esh = elig.front();
  esh.comment.id = "esh";
  esh.verdict = Verdict::kESH;
  elig.push_back(esh);

  const auto ds = build_dataset(elig, 7);
  CHECK(ds.size() == 120);
  std::map<Split, std::array<int, 2>> counts;
  for (const auto& i : ds) {
    ++counts[i.split][static_cast<std::size_t>(i.label)];
    CHECK(i.label == (i.verdict == Verdict::kYTA ? 1 : 0));
  }
  CHECK(counts[Split::kTrain][0] + counts[Split::kTrain][1] == 96);
  CHECK(counts[Split::kDev][0] + counts[Split::kDev][1] == 12);
  CHECK(counts[Split::kTest][0] + counts[Split::kTest][1] == 12);
  for (auto& [split, c] : counts) CHECK(std::abs(c[0] - c[1]) <= 1);

  const auto again = build_dataset(elig, 7);
  REQUIRE(again.size() == ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    CHECK(again[i].instance_id == ds[i].instance_id);
    CHECK(again[i].split == ds[i].split);
  }

  std::vector<EligibleComment> one_class(elig.begin(), elig.begin() + 10);
  CHECK_THROWS_AS(build_dataset(one_class, 1), DatasetError);
}

TEST_CASE("attach_parses excludes mismatches and instances round-trip") {
  std::vector<LabeledInstance> inst(2);
  inst[0].instance_id = "a";
  inst[0].tokens = {"She", "left"};
  inst[0].graph = DependencyGraph::chain(2);
  inst[0].weak_mask = {0, 0};
  inst[1].instance_id = "b";
  inst[1].tokens = {"x", "y", "z"};
  inst[1].graph = DependencyGraph::chain(3);
  inst[1].weak_mask = {0, 0, 0};
  inst[1].label = 1;
  inst[1].verdict = Verdict::kYTA;
  std::map<std::string, ParsedSentence> parses;
  parses["a"] = {{"She", "left"}, DependencyGraph::make(2, {{1, 0, "nsubj"}})};
  parses["b"] = {{"x", "y"}, DependencyGraph::make(2, {})};
  AttachReport rep;
  attach_parses(inst, parses, &rep);
  REQUIRE(inst.size() == 1);
  CHECK(rep.excluded.size() == 1);
  CHECK(inst[0].graph.edges.at(0).relation == "nsubj");

  attach_lexicon(inst, Lexicon{"left"});
  const auto path = fixtures::scratch("roundtrip") / "inst.jsonl";
  write_instances(path, inst);
  const auto back = read_instances(path);
  REQUIRE(back.size() == 1);
  CHECK(back[0].tokens == inst[0].tokens);
  CHECK(back[0].weak_mask == std::vector<std::uint8_t>{0, 1});
  CHECK(back[0].graph.augmented_edges.size() == inst[0].graph.augmented_edges.size());
}
