#include "moralscope/pipeline.hpp"

#include "moralscope/analysis.hpp"
#include "moralscope/corpus.hpp"
#include "moralscope/embeddings.hpp"
#include "moralscope/fidelity.hpp"
#include "moralscope/log.hpp"
#include "moralscope/model.hpp"
#include "moralscope/rationalize.hpp"
#include "moralscope/socialfactors.hpp"
#include "moralscope/text.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <sstream>

namespace moralscope::pipeline {

namespace fs = std::filesystem;
using json = nlohmann::json;

// ---- artifacts -----------------------------------------------------------------

namespace {

int version_of(const fs::path& dir) {
  const std::string name = dir.filename().string();
  if (name.size() < 2 || name[0] != 'v') return -1;
  try {
    std::size_t used = 0;
    const int v = std::stoi(name.substr(1), &used);
    return used == name.size() - 1 ? v : -1;
  } catch (const std::exception&) {
    return -1;
  }
}

}  // namespace

fs::path latest_artifact(const fs::path& output_dir, const std::string& stage) {
  const fs::path root = output_dir / stage;
  int best = -1;
  fs::path best_dir;
  if (fs::is_directory(root)) {
    for (const auto& e : fs::directory_iterator(root)) {
      const int v = version_of(e.path());
      if (v > best && fs::exists(e.path() / "manifest.json")) {
        best = v;
        best_dir = e.path();
      }
    }
  }
  if (best < 0) throw MissingStageError(stage);
  return best_dir;
}

fs::path new_artifact(const fs::path& output_dir, const std::string& stage) {
  const fs::path root = output_dir / stage;
  fs::create_directories(root);
  int next = 1;
  for (const auto& e : fs::directory_iterator(root)) next = std::max(next, version_of(e.path()) + 1);
  const fs::path dir = root / ("v" + std::to_string(next));
  fs::create_directory(dir);
  return dir;
}

std::string file_hash(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot hash '" + path.string() + "'");
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << num::fnv1a64(bytes);
  return os.str();
}

namespace {

class Artifact {
 public:
  Artifact(const config::PipelineConfig& cfg, std::string stage)
      : cfg_(cfg), stage_(std::move(stage)), dir_(new_artifact(cfg.paths.output_dir, stage_)) {}

  const fs::path& dir() const { return dir_; }
  fs::path file(const std::string& name) const { return dir_ / name; }

  void input(const fs::path& p) {
    if (!p.empty()) inputs_[p.string()] = file_hash(p);
  }
  fs::path upstream(const std::string& stage) {
    const fs::path d = latest_artifact(cfg_.paths.output_dir, stage);
    upstream_[stage] = d.string();
    return d;
  }

  void finish(const json& summary = json::object()) {
    json outputs = json::object();
    for (const auto& e : fs::directory_iterator(dir_)) {
      if (e.is_regular_file()) outputs[e.path().filename().string()] = file_hash(e.path());
    }
    json m{{"stage", stage_},
           {"version", version_of(dir_)},
           {"seed", cfg_.seed},
           {"config_hash", cfg_.source.empty() ? std::string() : file_hash(cfg_.source)},
           {"inputs", inputs_},
           {"upstream", upstream_},
           {"outputs", outputs},
           {"summary", summary}};
    std::ofstream(dir_ / "manifest.json") << m.dump(2) << '\n';
  }

 private:
  const config::PipelineConfig& cfg_;
  std::string stage_;
  fs::path dir_;
  json inputs_ = json::object();
  json upstream_ = json::object();
};

json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("cannot read '" + p.string() + "'");
  return json::parse(in);
}

void write_json(const fs::path& p, const json& j) {
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write '" + p.string() + "'");
  out << j.dump(2) << '\n';
}

std::string model_name(const std::string& channels, bool domain) {
  return channels + (domain ? "_domain" : "_no-domain");
}

embed::EmbeddingProvider make_provider(const config::PipelineConfig& cfg) {
  if (cfg.paths.embeddings.empty()) {
    return embed::EmbeddingProvider::random_fixed(static_cast<std::uint32_t>(cfg.model.embedding_dim), cfg.seed);
  }
  auto p = embed::EmbeddingProvider::from_file(cfg.paths.embeddings);
  if (static_cast<int>(p.dim()) != cfg.model.embedding_dim) {
    throw config::ConfigError("embedding file dim " + std::to_string(p.dim()) + " != model.embedding_dim " +
                              std::to_string(cfg.model.embedding_dim));
  }
  return p;
}

std::vector<model::ModelInput> inputs_for(const std::vector<corpus::LabeledInstance>& instances,
                                          const embed::EmbeddingProvider& provider, int max_len,
                                          std::optional<corpus::Split> split) {
  std::vector<const corpus::LabeledInstance*> sel;
  for (const auto& i : instances) {
    if (!split || i.split == *split) sel.push_back(&i);
  }
  return model::prepare_inputs(sel, provider, max_len);
}

std::vector<int> labels_of(const std::vector<model::ModelInput>& in) {
  std::vector<int> out;
  for (const auto& i : in) out.push_back(i.label);
  return out;
}

json scores_json(const model::F1Scores& s) {
  return {{"macro_f1", s.macro_f1}, {"precision", s.precision}, {"recall", s.recall}};
}

// ---- stages -------------------------------------------------------------------------

fs::path stage_ingest(const config::PipelineConfig& cfg) {
  Artifact art(cfg, "ingest");
  art.input(cfg.paths.posts);
  art.input(cfg.paths.comments);
  art.input(cfg.paths.parses);
  art.input(cfg.paths.moral_lexicon);

  corpus::LoadReport post_rep, comment_rep;
  const auto posts = corpus::load_dump(cfg.paths.posts, corpus::SubmissionKind::kPost, &post_rep);
  const auto comments = corpus::load_dump(cfg.paths.comments, corpus::SubmissionKind::kComment, &comment_rep);
  const auto eligible_posts = corpus::filter_posts(posts, comments);
  const auto eligible = corpus::filter_comments(comments, eligible_posts);

  std::map<std::string, std::size_t> verdict_counts;
  for (const auto& e : eligible) ++verdict_counts[std::string(corpus::to_string(e.verdict))];

  auto instances = corpus::build_dataset(eligible, cfg.seed);
  corpus::AttachReport attach;
  std::size_t parse_sentences = 0;
  if (!cfg.paths.parses.empty()) {
    corpus::ConlluReport conllu;
    corpus::attach_parses(instances, corpus::load_conllu(cfg.paths.parses, &conllu), &attach);
    parse_sentences = conllu.sentences;
  }
  corpus::attach_lexicon(instances, corpus::load_lexicon(cfg.paths.moral_lexicon));
  corpus::write_instances(art.file("instances.jsonl"), instances);
  corpus::write_split_manifest(art.file("splits.tsv"), instances);

  json split_counts = json::object();
  for (const auto& i : instances) {
    auto& cell = split_counts[std::string(corpus::to_string(i.split))];
    if (cell.is_null()) cell = json{{"YTA", 0}, {"NTA", 0}};
    cell[i.label == 1 ? "YTA" : "NTA"] = cell[i.label == 1 ? "YTA" : "NTA"].get<int>() + 1;
  }
  const json summary{{"posts_loaded", post_rep.records},
                     {"posts_malformed", post_rep.malformed},
                     {"comments_loaded", comment_rep.records},
                     {"comments_malformed", comment_rep.malformed},
                     {"eligible_posts", eligible_posts.size()},
                     {"eligible_comments", eligible.size()},
                     {"verdict_counts", verdict_counts},
                     {"instances", instances.size()},
                     {"split_counts", split_counts},
                     {"parse_sentences", parse_sentences},
                     {"excluded_by_parse", attach.excluded}};
  write_json(art.file("summary.json"), summary);
  log::info("ingest_done", {{"instances", instances.size()}, {"eligible_comments", eligible.size()}});
  art.finish(summary);
  return art.dir();
}

std::vector<corpus::LabeledInstance> upstream_instances(Artifact& art) {
  return corpus::read_instances(art.upstream("ingest") / "instances.jsonl");
}

fs::path stage_label(const config::PipelineConfig& cfg) {
  Artifact art(cfg, "label");
  const auto instances = upstream_instances(art);
  art.input(cfg.paths.posts);
  art.input(cfg.paths.topic_model);
  art.input(cfg.paths.category_map);
  art.input(cfg.paths.histories);

  std::map<std::string, std::string> post_body;
  for (const auto& p : corpus::load_dump(cfg.paths.posts, corpus::SubmissionKind::kPost)) post_body[p.id] = p.body;
  std::optional<social::TopicModelTable> topics;
  if (!cfg.paths.topic_model.empty()) topics = social::TopicModelTable::load_json(cfg.paths.topic_model);
  std::map<std::string, std::string> categories;
  if (!cfg.paths.category_map.empty()) categories = social::load_category_map(cfg.paths.category_map);
  std::map<std::string, std::vector<social::HistoryEntry>> histories;
  if (!cfg.paths.histories.empty()) histories = social::load_histories(cfg.paths.histories);
  social::InterestConfig icfg;
  icfg.window_days = cfg.analysis.window_days;
  icfg.min_submissions = static_cast<std::size_t>(cfg.analysis.min_history);

  std::ofstream out(art.file("factors.jsonl"));
  std::map<std::string, std::size_t> gender_counts, topic_counts, interest_counts;
  for (const auto& inst : instances) {
    const std::string body = post_body.count(inst.post_id) ? post_body[inst.post_id] : std::string();
    const auto gender = social::extract_gender(body);
    int topic = 0;
    std::string topic_name;
    if (topics) {
      auto toks = text::tokenize(text::lowercase(body));
      if (!toks.empty()) {
        topic = social::assign_topic(toks, *topics);
        for (const auto& t : topics->topics) {
          if (t.topic_id == topic) topic_name = t.name;
        }
      }
    }
    static const std::vector<social::HistoryEntry> kEmpty;
    auto h = histories.find(inst.commenter_id);
    const auto profile = social::infer_interest(inst.commenter_id, h == histories.end() ? kEmpty : h->second,
                                                inst.created_utc, categories, icfg);
    ++gender_counts[std::string(social::to_string(gender))];
    ++topic_counts[std::to_string(topic)];
    ++interest_counts[profile.category];
    out << json{{"instance_id", inst.instance_id},
                {"post_id", inst.post_id},
                {"post_author_gender", std::string(social::to_string(gender))},
                {"post_topic", topic},
                {"topic_name", topic_name},
                {"interest_category", profile.category}}
               .dump()
        << '\n';
  }
  out.close();
  const json summary{{"instances", instances.size()},
                     {"gender_counts", gender_counts},
                     {"topic_counts", topic_counts},
                     {"interest_counts", interest_counts}};
  write_json(art.file("summary.json"), summary);
  art.finish(summary);
  return art.dir();
}

fs::path stage_train(const config::PipelineConfig& cfg) {
  Artifact art(cfg, "train");
  const auto instances = upstream_instances(art);
  art.input(cfg.paths.embeddings);
  art.input(cfg.paths.static_embeddings);
  const auto provider = make_provider(cfg);
  const int max_len = cfg.model.max_seq_len;
  const auto train_in = inputs_for(instances, provider, max_len, corpus::Split::kTrain);
  const auto dev_in = inputs_for(instances, provider, max_len, corpus::Split::kDev);
  const auto test_in = inputs_for(instances, provider, max_len, corpus::Split::kTest);
  if (train_in.empty()) throw std::runtime_error("the training split is empty; check the ingest filters");

  json models = json::array();
  for (const auto& ch : cfg.channels) {
    for (bool dom : cfg.domain) {
      model::ModelConfig mc = cfg.model;
      mc.channels = model::parse_channels(ch);
      mc.lambda = dom ? cfg.model.lambda : 0.0;
      log::info("train_start", {{"channels", ch}, {"domain", dom}});
      auto result = model::train(train_in, dev_in, mc);
      const std::string name = model_name(ch, dom);
      model::save_checkpoint(art.file(name + ".msck"), result.model);
      json entry{{"name", name},
                 {"channels", ch},
                 {"domain", dom},
                 {"checkpoint", name + ".msck"},
                 {"steps", result.history.steps},
                 {"epoch_train_loss", result.history.epoch_train_loss},
                 {"epoch_dev_macro_f1", result.history.epoch_dev_macro_f1}};
      entry["train"] = scores_json(model::evaluate_f1(model::predict_labels(result.model, train_in), labels_of(train_in)));
      if (!dev_in.empty()) {
        entry["dev"] = scores_json(model::evaluate_f1(model::predict_labels(result.model, dev_in), labels_of(dev_in)));
      }
      if (!test_in.empty()) {
        entry["test"] = scores_json(model::evaluate_f1(model::predict_labels(result.model, test_in), labels_of(test_in)));
      }
      models.push_back(entry);
    }
  }

  json baselines = json::array();
  std::vector<const corpus::LabeledInstance*> tr = corpus::select_split(instances, corpus::Split::kTrain);
  std::vector<const corpus::LabeledInstance*> te = corpus::select_split(instances, corpus::Split::kTest);
  auto run_baseline = [&](model::BaselineKind kind, auto feature) {
    std::vector<std::vector<double>> ftr, fte;
    std::vector<int> ytr, yte;
    for (const auto* i : tr) {
      ftr.push_back(feature(*i));
      ytr.push_back(i->label);
    }
    for (const auto* i : te) {
      fte.push_back(feature(*i));
      yte.push_back(i->label);
    }
    model::BaselineConfig bc;
    bc.steps = cfg.baseline_steps;
    bc.dense = cfg.model;
    bc.seed = cfg.seed;
    json entry{{"name", std::string(model::to_string(kind))}};
    try {
      const auto r = model::baseline_predict(kind, ftr, ytr, fte, yte, bc);
      entry["train"] = scores_json(r.train);
      if (!fte.empty()) entry["test"] = scores_json(r.test);
    } catch (const std::invalid_argument& e) {
      entry["skipped"] = e.what();
    }
    baselines.push_back(entry);
  };
  run_baseline(model::BaselineKind::kLrLength, [](const corpus::LabeledInstance& i) { return model::length_feature(i); });
  std::optional<embed::EmbeddingProvider> static_provider;
  if (!cfg.paths.static_embeddings.empty()) {
    static_provider = embed::EmbeddingProvider::from_file(cfg.paths.static_embeddings);
  } else if (provider.mode() != embed::ProviderMode::kContextualFile) {
    static_provider = provider;
  }
  if (static_provider && static_provider->mode() != embed::ProviderMode::kContextualFile) {
    run_baseline(model::BaselineKind::kLrStaticEmbedding,
                 [&](const corpus::LabeledInstance& i) { return model::mean_static_embedding(i, *static_provider); });
  }
  run_baseline(model::BaselineKind::kClsDense, [&](const corpus::LabeledInstance& i) {
    const num::Tensor e = provider.embed(i.instance_id, i.tokens);
    return num::to_std(e.colwise().mean().eval());
  });

  const json metrics{{"models", models}, {"baselines", baselines}};
  write_json(art.file("metrics.json"), metrics);
  art.finish({{"models", models.size()}, {"train_instances", train_in.size()}});
  return art.dir();
}

struct TrainedModel {
  std::string name;
  std::string channels;
  bool domain = false;
  fs::path checkpoint;
};

std::vector<TrainedModel> trained_models(const fs::path& train_dir) {
  std::vector<TrainedModel> out;
  const json metrics = read_json(train_dir / "metrics.json");
  for (const auto& m : metrics.at("models")) {
    out.push_back({m.at("name").get<std::string>(), m.at("channels").get<std::string>(), m.at("domain").get<bool>(),
                   train_dir / m.at("checkpoint").get<std::string>()});
  }
  if (out.empty()) throw std::runtime_error("train artifact lists no models");
  return out;
}

fs::path stage_extract(const config::PipelineConfig& cfg) {
  Artifact art(cfg, "extract");
  const auto instances = upstream_instances(art);
  const auto models = trained_models(art.upstream("train"));
  const TrainedModel& primary = models.front();
  model::Model m = model::load_checkpoint(primary.checkpoint);
  const auto provider = make_provider(cfg);
  const auto method = rationale::parse_method(cfg.selection.extract_method);
  const auto selection = rationale::parse_selection(cfg.selection.selection);

  std::vector<rationale::RationaleRecord> records;
  for (const auto& inst : instances) {
    const auto in = model::prepare_input(inst, provider, cfg.model.max_seq_len);
    const auto s = rationale::score(method, m, in, cfg.seed + records.size(), cfg.selection.ig_steps);
    const int k = rationale::k_for_fraction(cfg.selection.fraction, s.scores.size());
    const auto mask = selection == rationale::Selection::kSpan ? rationale::select_span(s.scores, k)
                                                               : rationale::select_topk(s.scores, k);
    records.push_back(rationale::make_record(inst.instance_id, mask, inst.tokens, method));
  }
  rationale::write_rationales(art.file("rationales.jsonl"), records);
  art.finish({{"model", primary.name}, {"method", cfg.selection.extract_method}, {"records", records.size()}});
  return art.dir();
}

fs::path stage_fidelity(const config::PipelineConfig& cfg) {
  Artifact art(cfg, "fidelity");
  const auto instances = upstream_instances(art);
  const auto models = trained_models(art.upstream("train"));
  const auto provider = make_provider(cfg);
  const auto eval = inputs_for(instances, provider, cfg.model.max_seq_len, corpus::parse_split(cfg.selection.eval_split));
  if (eval.empty()) throw std::runtime_error("evaluation split '" + cfg.selection.eval_split + "' is empty");

  std::vector<rationale::Method> methods;
  for (const auto& name : cfg.selection.methods) methods.push_back(rationale::parse_method(name));
  fidelity::MaskPolicy policy;
  policy.fraction = cfg.selection.fraction;
  policy.selection = rationale::parse_selection(cfg.selection.selection);
  policy.random_seed = cfg.seed;
  policy.flx.ig_steps = cfg.selection.ig_steps;
  fidelity::FidelityOptions opts;
  opts.normalize_by_null = cfg.selection.normalize_by_null;

  fidelity::FidelityReport report;
  for (const auto& tm : models) {
    model::Model m = model::load_checkpoint(tm.checkpoint);
    auto r = fidelity::fidelity_report(m, eval, methods, policy, opts);
    for (auto& c : r.cells) {
      c.channels = tm.channels;
      c.domain = tm.domain;
      report.cells.push_back(std::move(c));
    }
    log::info("fidelity_model_done", {{"model", tm.name}});
  }
  report.write_csv(art.file("fidelity.csv"));
  report.write_json(art.file("fidelity.json"));
  art.finish({{"cells", report.cells.size()}, {"eval_instances", eval.size()}});
  return art.dir();
}

embed::StaticTable analysis_table(const config::PipelineConfig& cfg, const std::vector<std::string>& phrases) {
  if (!cfg.paths.static_embeddings.empty()) {
    auto f = embed::read_embedding_file(cfg.paths.static_embeddings);
    if (f.kind != embed::EmbeddingKind::kStatic) throw config::ConfigError("paths.static_embeddings must be a static table");
    return std::move(f.table);
  }
  // Fall back to the fixed random vectors used by the model.
  const auto provider = embed::EmbeddingProvider::random_fixed(static_cast<std::uint32_t>(cfg.model.embedding_dim), cfg.seed);
  std::set<std::string> vocab;
  for (const auto& p : phrases) {
    for (const auto& w : text::split(p, ' ')) {
      if (!w.empty()) vocab.insert(w);
    }
  }
  embed::StaticTable table(provider.dim());
  for (const auto& w : vocab) {
    const auto v = provider.token_vector(w);
    std::vector<float> f(v.begin(), v.end());
    table.add(w, f);
  }
  return table;
}

fs::path stage_cluster(const config::PipelineConfig& cfg) {
  Artifact art(cfg, "cluster");
  const auto instances = upstream_instances(art);
  const auto records = rationale::read_rationales(art.upstream("extract") / "rationales.jsonl");
  art.input(cfg.paths.static_embeddings);
  art.input(cfg.paths.tag_lexicon);

  std::map<std::string, corpus::DependencyGraph> parses;
  for (const auto& i : instances) parses.emplace(i.instance_id, i.graph);
  const std::set<std::string> neg(cfg.analysis.negation_relations.begin(), cfg.analysis.negation_relations.end());
  const auto filtered = analysis::filter_rationales(records, parses, neg);

  std::set<std::string> unique;
  for (const auto& r : filtered.kept) {
    for (auto& p : analysis::rationale_phrases(r)) unique.insert(std::move(p));
  }
  const std::vector<std::string> phrases(unique.begin(), unique.end());
  const auto table = analysis_table(cfg, phrases);
  const auto embedded = analysis::embed_rationales(phrases, table);
  const auto lexicon = analysis::load_tag_lexicon(cfg.paths.tag_lexicon);

  std::vector<analysis::MeaningCluster> clusters;
  int k = 0;
  if (!embedded.vectors.empty()) {
    k = std::min<int>(cfg.analysis.kmeans_k, static_cast<int>(embedded.vectors.size()));
    if (k < cfg.analysis.kmeans_k) {
      log::warn("kmeans_k_reduced", {{"requested", cfg.analysis.kmeans_k}, {"rationales", embedded.vectors.size()}});
    }
    const auto km = analysis::kmeans(embedded.vectors, k, cfg.analysis.kmeans_seed, cfg.analysis.max_iter);
    clusters = analysis::build_clusters(embedded, km, lexicon);
  }
  analysis::write_clusters(art.file("clusters.json"), clusters);
  std::ofstream csv(art.file("clusters.csv"));
  csv << "cluster,tag,status,size,members\n";
  std::map<std::string, std::size_t> status_counts;
  for (const auto& c : clusters) {
    ++status_counts[std::string(analysis::to_string(c.status))];
    csv << c.cluster_id << ",\"" << c.tag.value_or("") << "\"," << analysis::to_string(c.status) << ','
        << c.members.size() << ",\"" << text::join(c.members, "; ") << "\"\n";
  }
  csv.close();
  const json summary{{"rationale_records", records.size()},
                     {"excluded_negated", filtered.excluded},
                     {"missing_parse", filtered.missing_parse.size()},
                     {"unique_rationales", phrases.size()},
                     {"excluded_oov", embedded.excluded_oov.size()},
                     {"k", k},
                     {"clusters", clusters.size()},
                     {"status_counts", status_counts}};
  write_json(art.file("summary.json"), summary);
  art.finish(summary);
  return art.dir();
}

struct Factors {
  social::Gender gender = social::Gender::kUnknown;
  int topic = 0;
  std::string interest;
};

std::map<std::string, Factors> read_factors(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("cannot read '" + p.string() + "'");
  std::map<std::string, Factors> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = json::parse(line);
    out[j.at("instance_id").get<std::string>()] = {social::parse_gender(j.at("post_author_gender").get<std::string>()),
                                                   j.at("post_topic").get<int>(),
                                                   j.at("interest_category").get<std::string>()};
  }
  return out;
}

std::vector<analysis::CommentRecord> comment_records(const std::vector<corpus::LabeledInstance>& instances,
                                                     const std::map<std::string, Factors>& factors) {
  std::vector<analysis::CommentRecord> out;
  for (const auto& i : instances) {
    auto it = factors.find(i.instance_id);
    if (it == factors.end()) continue;
    out.push_back({i.instance_id, i.tokens, it->second.gender, it->second.topic, it->second.interest});
  }
  return out;
}

fs::path stage_associate(const config::PipelineConfig& cfg) {
  Artifact art(cfg, "associate");
  const auto clusters = analysis::read_clusters(art.upstream("cluster") / "clusters.json");
  const auto factors = read_factors(art.upstream("label") / "factors.jsonl");
  const auto instances = upstream_instances(art);
  const auto comments = comment_records(instances, factors);
  std::set<int> topic_set;
  for (const auto& c : comments) topic_set.insert(c.post_topic);
  const auto rows = analysis::associate(comments, clusters, {topic_set.begin(), topic_set.end()});
  analysis::write_associations(art.file("associations.csv"), rows);
  art.finish({{"rows", rows.size()}, {"topics", topic_set.size()}});
  return art.dir();
}

fs::path stage_regress(const config::PipelineConfig& cfg) {
  Artifact art(cfg, "regress");
  const auto clusters = analysis::read_clusters(art.upstream("cluster") / "clusters.json");
  const auto factors = read_factors(art.upstream("label") / "factors.jsonl");
  const auto instances = upstream_instances(art);
  const auto comments = comment_records(instances, factors);

  std::vector<std::string> categories;
  for (const auto& c : comments) categories.push_back(c.interest_category);
  std::map<int, std::vector<double>> usage;
  std::map<int, std::string> tags;
  for (const auto& cl : clusters) {
    if (cl.status != analysis::ClusterStatus::kNamed) continue;
    auto& u = usage[cl.cluster_id];
    tags[cl.cluster_id] = cl.tag.value_or("");
    for (const auto& c : comments) {
      u.push_back(c.tokens.empty() ? 0.0
                                   : static_cast<double>(analysis::cluster_hits(c.tokens, cl.members)) /
                                         static_cast<double>(c.tokens.size()));
    }
  }
  analysis::InterestOptions opts;
  opts.min_comments = static_cast<std::size_t>(cfg.analysis.min_comments);
  if (!cfg.analysis.reference.empty()) opts.reference = cfg.analysis.reference;
  opts.orientation = analysis::parse_orientation(cfg.analysis.orientation);
  const auto effects = analysis::interest_effects(categories, usage, tags, opts);
  analysis::write_effects(art.file("effects.csv"), effects.rows);
  const json summary{{"rows", effects.rows.size()},
                     {"reference", effects.reference},
                     {"excluded", effects.excluded},
                     {"notes", effects.notes}};
  write_json(art.file("summary.json"), summary);
  art.finish(summary);
  return art.dir();
}

std::string fmt(double v, int precision) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << v;
  return os.str();
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path stage_report(const config::PipelineConfig& cfg) {
  Artifact art(cfg, "report");
  const json ingest = read_json(art.upstream("ingest") / "summary.json");
  const json label = read_json(art.upstream("label") / "summary.json");
  const json metrics = read_json(art.upstream("train") / "metrics.json");
  art.upstream("extract");
  const auto fid = fidelity::FidelityReport::read_json(art.upstream("fidelity") / "fidelity.json");
  const json clusters = read_json(art.upstream("cluster") / "summary.json");
  const fs::path assoc_dir = art.upstream("associate");
  const fs::path regress_dir = art.upstream("regress");

  json table3 = json::array();
  std::vector<std::string> missing;
  for (const auto& ch : cfg.channels) {
    for (bool dom : cfg.domain) {
      for (const auto& m : cfg.selection.methods) {
        const auto* cell = fid.find(ch, dom, m);
        if (!cell) {
          missing.push_back(ch + "/" + (dom ? "domain" : "no-domain") + "/" + m);
          continue;
        }
        table3.push_back({{"channels", ch},
                          {"domain", dom},
                          {"method", m},
                          {"rev_f1", cell->rev_f1},
                          {"ns", cell->ns},
                          {"nc", cell->nc},
                          {"n_instances", cell->n_instances}});
      }
    }
  }
  const json report{{"table1", ingest},
                    {"factors", label},
                    {"table2", metrics},
                    {"table3", table3},
                    {"missing_cells", missing},
                    {"clusters", clusters}};
  const auto wants = [&](const char* f) {
    return std::find(cfg.report_formats.begin(), cfg.report_formats.end(), f) != cfg.report_formats.end();
  };
  if (wants("json")) write_json(art.file("report.json"), report);
  if (wants("csv")) {
    std::ofstream t3(art.file("table3.csv"));
    t3 << "channels,domain,method,rev_f1,ns,nc,n_instances\n";
    for (const auto& c : table3) {
      t3 << c["channels"].get<std::string>() << ',' << (c["domain"].get<bool>() ? "domain" : "no-domain") << ','
         << c["method"].get<std::string>() << ',' << fmt(c["rev_f1"].get<double>(), 1) << ','
         << fmt(c["ns"].get<double>(), 2) << ',' << fmt(c["nc"].get<double>(), 2) << ',' << c["n_instances"] << '\n';
    }
    std::ofstream t2(art.file("table2.csv"));
    t2 << "model,split,macro_f1,precision,recall\n";
    for (const auto* group : {"models", "baselines"}) {
      for (const auto& m : metrics.at(group)) {
        for (const auto* split : {"train", "dev", "test"}) {
          if (!m.contains(split)) continue;
          t2 << m["name"].get<std::string>() << ',' << split << ',' << fmt(m[split]["macro_f1"].get<double>(), 1) << ','
             << fmt(m[split]["precision"].get<double>(), 1) << ',' << fmt(m[split]["recall"].get<double>(), 1) << '\n';
        }
      }
    }
  }
  if (wants("md")) {
    std::ofstream md(art.file("report.md"));
    md << "# moralscope report\n\n## Corpus\n\n";
    md << "| verdict | comments |\n|---|---|\n";
    for (const auto& [k, v] : ingest.at("verdict_counts").items()) md << "| " << k << " | " << v << " |\n";
    md << "\n| split | YTA | NTA |\n|---|---|---|\n";
    for (const auto& [k, v] : ingest.at("split_counts").items()) {
      md << "| " << k << " | " << v.value("YTA", 0) << " | " << v.value("NTA", 0) << " |\n";
    }
    md << "\n## Prediction (macro F1, test)\n\n| model | macro F1 | precision | recall |\n|---|---|---|---|\n";
    for (const auto* group : {"models", "baselines"}) {
      for (const auto& m : metrics.at(group)) {
        if (!m.contains("test")) continue;
        md << "| " << m["name"].get<std::string>() << " | " << fmt(m["test"]["macro_f1"].get<double>(), 1) << " | "
           << fmt(m["test"]["precision"].get<double>(), 1) << " | " << fmt(m["test"]["recall"].get<double>(), 1) << " |\n";
      }
    }
    md << "\n## Rationale faithfulness (revF1 / NS / NC)\n\n| channels | domain | method | revF1 | NS | NC |\n"
          "|---|---|---|---|---|---|\n";
    for (const auto& c : table3) {
      md << "| " << c["channels"].get<std::string>() << " | " << (c["domain"].get<bool>() ? "Domain" : "No-Domain")
         << " | " << c["method"].get<std::string>() << " | " << fmt(c["rev_f1"].get<double>(), 1) << " | "
         << fmt(c["ns"].get<double>(), 2) << " | " << fmt(c["nc"].get<double>(), 2) << " |\n";
    }
    if (!missing.empty()) md << "\nMissing cells: " << text::join(missing, ", ") << "\n";
    md << "\n## Meaning clusters\n\n" << clusters.dump(2) << "\n";
    md << "\n## Gender x topic associations\n\n```\n" << read_text(assoc_dir / "associations.csv") << "```\n";
    md << "\n## Interest effects\n\n```\n" << read_text(regress_dir / "effects.csv") << "```\n";
  }
  art.finish({{"table3_cells", table3.size()}, {"missing_cells", missing}});
  if (!missing.empty()) throw std::runtime_error("report is missing requested cells: " + text::join(missing, ", "));
  return art.dir();
}

}  // namespace

const std::vector<std::string>& dependencies(const std::string& stage) {
  static const std::map<std::string, std::vector<std::string>> deps{
      {"ingest", {}},
      {"label", {"ingest"}},
      {"train", {"ingest"}},
      {"extract", {"ingest", "train"}},
      {"fidelity", {"ingest", "train"}},
      {"cluster", {"ingest", "extract"}},
      {"associate", {"ingest", "label", "cluster"}},
      {"regress", {"ingest", "label", "cluster"}},
      {"report", {"ingest", "label", "train", "extract", "fidelity", "cluster", "associate", "regress"}}};
  auto it = deps.find(stage);
  if (it == deps.end()) throw config::ConfigError("unknown subcommand '" + stage + "'");
  return it->second;
}

fs::path run_stage(const std::string& stage, const config::PipelineConfig& cfg) {
  for (const auto& dep : dependencies(stage)) latest_artifact(cfg.paths.output_dir, dep);
  fs::create_directories(cfg.paths.output_dir);
  if (stage == "ingest") return stage_ingest(cfg);
  if (stage == "label") return stage_label(cfg);
  if (stage == "train") return stage_train(cfg);
  if (stage == "extract") return stage_extract(cfg);
  if (stage == "fidelity") return stage_fidelity(cfg);
  if (stage == "cluster") return stage_cluster(cfg);
  if (stage == "associate") return stage_associate(cfg);
  if (stage == "regress") return stage_regress(cfg);
  if (stage == "report") return stage_report(cfg);
  throw config::ConfigError("unknown subcommand '" + stage + "'");
}

int run(const std::string& subcommand, const fs::path& config_path) {
  config::PipelineConfig cfg;
  try {
    cfg = config::load_pipeline_config(config_path);
    if (subcommand != "all" && std::find(stages().begin(), stages().end(), subcommand) == stages().end()) {
      throw config::ConfigError("unknown subcommand '" + subcommand + "'");
    }
  } catch (const config::ConfigError& e) {
    log::event(log::Level::kError, "config_error", {{"message", e.what()}});
    return kConfigError;
  }
  const std::vector<std::string> todo = subcommand == "all" ? stages() : std::vector<std::string>{subcommand};
  for (const auto& stage : todo) {
    try {
      log::info("stage_start", {{"stage", stage}});
      const fs::path dir = run_stage(stage, cfg);
      log::info("stage_done", {{"stage", stage}, {"artifact", dir.string()}});
    } catch (const MissingStageError& e) {
      log::event(log::Level::kError, "missing_stage", {{"stage", stage}, {"missing", e.stage()}, {"message", e.what()}});
      return kMissingStage;
    } catch (const config::ConfigError& e) {
      log::event(log::Level::kError, "config_error", {{"stage", stage}, {"message", e.what()}});
      return kConfigError;
    } catch (const std::exception& e) {
      log::event(log::Level::kError, "stage_failed", {{"stage", stage}, {"message", e.what()}});
      return kRuntimeFailure;
    }
  }
  return kOk;
}

}  // namespace moralscope::pipeline
