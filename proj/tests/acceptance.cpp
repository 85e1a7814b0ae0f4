// Acceptance runner: one PASS/FAIL line per criterion.
// usage: moralscope_acceptance <path-to-moralscope-cli>

#include "fixture_util.hpp"
#include "oracles.hpp"
#include "planted.hpp"
#include "stats_oracles.hpp"

#include "moralscope/config.hpp"
#include "moralscope/corpus.hpp"
#include "moralscope/fidelity.hpp"
#include "moralscope/pipeline.hpp"
#include "moralscope/stats.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <set>
#include <sstream>
#include <tuple>

using namespace moralscope;

namespace {

int failures = 0;

void report(const std::string& name, double limit_s, const std::function<bool(std::string&)>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  std::string detail;
  bool ok = false;
  try {
    ok = body(detail);
  } catch (const std::exception& e) {
    detail = std::string("exception: ") + e.what();
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (secs >= limit_s) {
    ok = false;
    detail += " (over time budget)";
  }
  if (!ok) ++failures;
  std::printf("%s  %-22s %7.2fs / %gs  %s\n", ok ? "PASS" : "FAIL", name.c_str(), secs, limit_s, detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

double accuracy(model::Model& m, const std::vector<model::ModelInput>& set) {
  const auto p = model::predict_labels(m, set);
  std::size_t k = 0;
  for (std::size_t i = 0; i < set.size(); ++i) k += p[i] == set[i].label;
  return static_cast<double>(k) / static_cast<double>(set.size());
}

struct PlantedRun {
  double train_acc = 0, test_acc = 0, hit = 0, lexicon_mass = 0;
  fidelity::FidelityCell rand, attn;
};

PlantedRun planted_run(std::uint64_t seed, double lambda, bool with_fidelity) {
  const auto c = planted::generate(seed, 200, 50);
  const auto prov = embed::EmbeddingProvider::random_fixed(16, seed);
  const auto tr = planted::inputs(c.train, prov);
  const auto te = planted::inputs(c.test, prov);
  auto res = model::train(tr, {}, planted::small_config(seed, lambda));
  PlantedRun r;
  r.train_acc = accuracy(res.model, tr);
  r.test_acc = accuracy(res.model, te);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < te.size(); ++i) {
    const auto cache = model::predict(res.model, te[i]);
    const auto m = rationale::select_topk(cache.attention, rationale::k_for_fraction(0.2, cache.attention.size()));
    hits += m.mask[c.test_signal[i]];
    r.lexicon_mass += cache.attention[c.test_signal[i]];
  }
  r.hit = static_cast<double>(hits) / static_cast<double>(te.size());
  r.lexicon_mass /= static_cast<double>(te.size());
  if (with_fidelity) {
    fidelity::MaskPolicy pol;
    pol.random_seed = seed;
    const auto rep = fidelity::fidelity_report(res.model, te, {rationale::Method::kRand, rationale::Method::kAttn}, pol);
    r.rand = rep.cells.at(0);
    r.attn = rep.cells.at(1);
  }
  return r;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: %s <moralscope-cli>\n", argv[0]);
    return 2;
  }
  const std::string cli = argv[1];

  report("gradient suite", 10, [](std::string& d) {
    const auto r = oracles::gradient_suite(3);
    d = fmt("max rel err %.3g over %.0f entries", r.max_rel_err, static_cast<double>(r.checked)) + " worst " + r.worst;
    return r.checked > 0 && r.max_rel_err < 1e-4;
  });

  report("IG axioms", 30, [](std::string& d) {
    const double linear = oracles::ig_linear_max_error();
    double gap = 0;
    for (std::uint64_t s = 1; s <= 5; ++s) gap = std::max(gap, oracles::ig_completeness_gap(s, 128));
    d = fmt("completeness gap %.3g, linear err %.3g", gap, linear);
    return gap < 1e-3 && linear < 1e-12;
  });

  report("oracle equivalence", 120, [](std::string& d) {
    const auto span = oracles::span_mismatches(50, 3);
    const double local = oracles::encode_local_max_error(5);
    const double ols = stats_oracles::ols_max_error(20);
    const auto orr = stats::odds_ratio({10, 20, 5, 40});
    const long double z = std::log(4.0L) / std::sqrt(1.0L / 10 + 1.0L / 20 + 1.0L / 5 + 1.0L / 40);
    const double p_oracle = static_cast<double>(stats_oracles::normal_tail(z));
    std::size_t violations = 0;
    double prob_err = 0;
    for (int t = 5; t <= 8; ++t) {
      for (std::uint64_t s = 1; s <= 3; ++s) {
        auto toy = oracles::toy_instance(s * 10 + t, t);
        const auto e = oracles::enumerate_masks(toy.model, toy.input);
        violations += e.violations;
        prob_err = std::max(prob_err, e.max_prob_error);
      }
    }
    std::ostringstream os;
    os << "span mismatches " << span << ", local " << local << ", ols " << ols << ", OR " << orr.odds_ratio
       << " p " << orr.p_value << " (oracle " << p_oracle << "), mask violations " << violations;
    d = os.str();
    return span == 0 && local < 1e-10 && ols < 1e-8 && std::fabs(orr.odds_ratio - 4.0) < 1e-12 &&
           std::fabs(orr.p_value - p_oracle) < 1e-12 && std::fabs(orr.p_value - 0.0236) < 0.0236 * 0.01 &&
           violations == 0 && prob_err < 1e-12;
  });

  std::vector<PlantedRun> domain_runs;
  report("planted experiment", 600, [&](std::string& d) {
    bool ok = true;
    PlantedRun mean;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const auto r = planted_run(seed, 0.1, true);
      domain_runs.push_back(r);
      ok = ok && r.train_acc >= 0.95 && r.test_acc >= 0.90 && r.hit >= 0.80;
      mean.train_acc = std::min(r.train_acc, seed == 1 ? 1.0 : mean.train_acc);
      mean.test_acc = std::min(r.test_acc, seed == 1 ? 1.0 : mean.test_acc);
      mean.hit = std::min(r.hit, seed == 1 ? 1.0 : mean.hit);
      mean.rand.rev_f1 += r.rand.rev_f1 / 5;
      mean.rand.ns += r.rand.ns / 5;
      mean.rand.nc += r.rand.nc / 5;
      mean.attn.rev_f1 += r.attn.rev_f1 / 5;
      mean.attn.ns += r.attn.ns / 5;
      mean.attn.nc += r.attn.nc / 5;
    }
    d = fmt("min train %.3f, min test %.3f, min hit %.2f", mean.train_acc, mean.test_acc, mean.hit) +
        fmt("; revF1 ATTN %.1f vs RAND %.1f", mean.attn.rev_f1, mean.rand.rev_f1) +
        fmt("; NS %.3f vs %.3f; NC %.3f vs %.3f", mean.attn.ns, mean.rand.ns, mean.attn.nc, mean.rand.nc);
    return ok && mean.attn.rev_f1 < mean.rand.rev_f1 && mean.attn.ns > mean.rand.ns && mean.attn.nc > mean.rand.nc;
  });

  report("domain-loss effect", 600, [&](std::string& d) {
    double with = 0, without = 0;
    int wins = 0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const double a = seed <= domain_runs.size() ? domain_runs[seed - 1].lexicon_mass
                                                  : planted_run(seed, 0.1, false).lexicon_mass;
      const double b = planted_run(seed, 0.0, false).lexicon_mass;
      with += a / 5;
      without += b / 5;
      wins += a > b;
    }
    d = fmt("lexicon attention mass %.3f (lambda 0.1) vs %.3f (lambda 0), %.0f/5 seeds", with, without, wins);
    return with > without;
  });

  report("verdict fixture suite", 1, [](std::string& d) {
    const auto cases = fixtures::verdict_cases();
    std::size_t right = 0;
    for (const auto& [expected, body] : cases) {
      const auto v = corpus::extract_verdict(body);
      right += v && corpus::to_string(*v) == expected;
    }
    d = std::to_string(right) + "/" + std::to_string(cases.size()) + " correct";
    return cases.size() >= 30 && right == cases.size();
  });

  report("stats calibration", 120, [](std::string& d) {
    const auto c = stats_oracles::calibrate(2024, 500, 100);
    d = fmt("beta_A %.3f p %.3g, null FPR %.2f", c.planted_beta, c.planted_p, c.false_positive_rate);
    return c.planted_beta > 0 && c.planted_p < 0.05 && c.false_positive_rate <= 0.10;
  });

  report("pipeline smoke", 300, [&](std::string& d) {
    const auto cfg_path = fixtures::toy_config("acceptance");
    for (const auto& stage : pipeline::stages()) {
      const std::string cmd = "\"" + cli + "\" --log-level warn -c \"" + cfg_path.string() + "\" " + stage;
      const int rc = std::system(cmd.c_str());
      if (rc != 0) {
        d = "stage " + stage + " failed with status " + std::to_string(rc);
        return false;
      }
    }
    const auto cfg = config::load_pipeline_config(cfg_path);
    const auto rep = nlohmann::json::parse(fixtures::read(pipeline::latest_artifact(cfg.paths.output_dir, "report") / "report.json"));
    std::set<std::tuple<std::string, bool, std::string>> have;
    for (const auto& c : rep.at("table3")) {
      have.emplace(c.at("channels").get<std::string>(), c.at("domain").get<bool>(), c.at("method").get<std::string>());
    }
    std::size_t wanted = 0, missing = 0;
    for (const auto& ch : cfg.channels) {
      for (bool dom : cfg.domain) {
        for (const auto& m : cfg.selection.methods) {
          ++wanted;
          missing += have.count({ch, dom, m}) == 0;
        }
      }
    }
    d = std::to_string(wanted - missing) + "/" + std::to_string(wanted) + " table cells present";
    return missing == 0 && rep.at("missing_cells").empty();
  });

  return failures == 0 ? 0 : 1;
}
