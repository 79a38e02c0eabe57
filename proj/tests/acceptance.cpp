// Copyright 2026 The safelab Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================

// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "fuzz.hpp"
#include "oracles.hpp"
#include "planted.hpp"
#include "safelab/acquisition.hpp"
#include "safelab/agents.hpp"
#include "safelab/analysis.hpp"
#include "safelab/gp.hpp"
#include "safelab/records.hpp"
#include "safelab/rng.hpp"
#include "safelab/session.hpp"
#include "safelab/simulate.hpp"
#include "safelab/task.hpp"

// After Eigen, see session.cpp.
#include <httplib.h>
#include <json.hpp>

using namespace safelab;
using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

struct Verdict {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// ---------------------------------------------------------------------------

Verdict gp_oracle() {
  Verdict v;
  const auto t0 = Clock::now();
  std::mt19937_64 rng(20261016);
  double worst = 0.0;
  std::size_t largest = 0;
  for (int rep = 0; rep < 200; ++rep) {
    const auto inst = fuzz::random_instance(rng, 50, 12);
    largest = std::max(largest, inst.domain->size());
    const auto p = posterior(inst.params, *inst.domain, inst.obs);
    const auto o = oracle::gp_posterior(inst.params.signal_sd, inst.params.lengthscale,
                                        fuzz::grid_vectors(*inst.domain), inst.obs.inputs, inst.obs.outputs,
                                        inst.obs.noise_var);
    for (std::size_t i = 0; i < o.mean.size(); ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      worst = std::max(worst, std::abs(p.mean(ii) - o.mean[i]));
      for (std::size_t j = 0; j < o.mean.size(); ++j)
        worst = std::max(worst, std::abs(p.cov(ii, static_cast<Eigen::Index>(j)) - o.cov[i][j]));
    }
  }
  const double secs = seconds_since(t0);
  v.detail << "200 instances, grids up to " << largest << " points, max abs error " << worst << ", " << secs << " s";
  v.require(largest <= 50, "grid size <= 50");
  v.require(worst < 1e-8, "error < 1e-8");
  v.require(secs < 10.0, "runtime < 10 s");
  return v;
}

Verdict set_algebra() {
  Verdict v;
  std::mt19937_64 rng(7001);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  long violations = 0;
  long checks = 0;
  auto expect = [&](bool ok) {
    ++checks;
    if (!ok) ++violations;
  };
  for (int rep = 0; rep < 1000; ++rep) {
    const auto inst = fuzz::random_instance(rng, 40, 10);
    const GpModel model(GridPrior::shared(inst.params, inst.domain), inst.obs);
    const double beta = 0.5 + 3.5 * u(rng);
    const double j_min = -2.0 + 3.0 * u(rng);
    const auto a = assess(model, j_min, {beta, 0}, 1);
    const auto& f = a.features;
    const auto lower_j = safe_set(a.bounds, j_min - 0.25);
    const auto higher_j = safe_set(a.bounds, j_min + 0.25);
    const auto wider = safe_set(bounds(model.posterior(), beta + 0.5), j_min);
    const auto narrower = safe_set(bounds(model.posterior(), std::max(0.0, beta - 0.5)), j_min);
    for (std::size_t i = 0; i < f.size(); ++i) {
      expect(!f.maximizer[i] || f.safe[i]);
      expect(!f.expander[i] || f.safe[i]);
      expect(f.safe[i] || f.expander_count[i] == 0);
      expect(!f.safe[i] || lower_j[i]);
      expect(!higher_j[i] || f.safe[i]);
      expect(!wider[i] || f.safe[i]);
      expect(!f.safe[i] || narrower[i]);
    }
  }
  v.detail << "1000 fuzzed posteriors, " << checks << " checks, " << violations << " violations";
  v.require(violations == 0, "zero violations");
  return v;
}

Verdict probabilities() {
  Verdict v;
  constexpr int kDraws = 100000;
  std::mt19937_64 rng(31337);
  std::normal_distribution<double> z(0.0, 1.0);
  double worst_pi = 0.0;
  double worst_ps = 0.0;
  std::mt19937_64 inst_rng(99);
  for (int rep = 0; rep < 20; ++rep) {
    const auto inst = fuzz::random_instance(inst_rng, 30, 6);
    const auto post = posterior(inst.params, *inst.domain, inst.obs);
    const double inc = incumbent_value(post);
    const double j_min = post.mean.mean() - 0.3;
    const auto pi = prob_improvement(post, inc);
    const auto ps = prob_safe(post, j_min);
    for (Eigen::Index i = 0; i < post.mean.size(); i += std::max<Eigen::Index>(1, post.mean.size() / 4)) {
      int above_inc = 0;
      int above_j = 0;
      for (int d = 0; d < kDraws; ++d) {
        const double f = post.mean(i) + post.sd(i) * z(rng);
        above_inc += f >= inc;
        above_j += f >= j_min;
      }
      worst_pi = std::max(worst_pi, std::abs(static_cast<double>(above_inc) / kDraws - pi(i)));
      worst_ps = std::max(worst_ps, std::abs(static_cast<double>(above_j) / kDraws - ps(i)));
    }
  }
  // Point whose mean sits exactly on the threshold.
  GpPosterior at;
  at.mean = Eigen::VectorXd::Constant(3, 1.75);
  at.sd = Eigen::Vector3d(0.1, 1.0, 3.0);
  at.cov = at.sd.array().square().matrix().asDiagonal();
  const auto half = prob_safe(at, 1.75);
  const bool exactly_half = (half.array() == 0.5).all();

  const double one_sided = normal_cdf(3.0);
  const double two_sided = normal_cdf(3.0) - normal_cdf(-3.0);
  v.detail << "PI max MC gap " << worst_pi << ", p_safe max MC gap " << worst_ps << " (1e5 draws each); "
           << "p_safe at the threshold " << (exactly_half ? "exactly 0.5" : "not 0.5") << "; Phi(3) = " << one_sided
           << " (below 0.999, so the 99.9% safety figure is a rounding of the two-sided " << two_sided << ")";
  v.require(worst_pi < 0.01, "PI within 0.01 of MC");
  v.require(worst_ps < 0.01, "p_safe within 0.01 of MC");
  v.require(exactly_half, "p_safe(mean = J) == 0.5");
  v.require(one_sided < 0.999, "one-sided Phi(3) < 0.999");
  v.require(std::abs(two_sided - 0.9973) < 1e-4, "P(|f - mean| <= 3 sd) = 0.9973");
  return v;
}

Verdict logistic_recovery() {
  Verdict v;
  const auto t0 = Clock::now();
  const std::vector<std::string> feats = {"safe", "maximizer", "expander"};
  const std::map<std::string, std::array<double, 4>> tables = {
      {"first", {-4.26, 1.57, 1.72, 0.12}},
      {"second, safe condition", {-5.92, 2.11, 0.23, 0.03}},
  };
  const char* names[] = {"intercept", "safe", "maximizer", "expander"};
  for (const auto& [label, planted_b] : tables) {
    const auto fit = logistic_fit(planted::logistic(planted_b, 100000, 20261016), feats, false);
    v.detail << label << " table:";
    for (int k = 0; k < 4; ++k) {
      const double est = fit.coefficient(names[k]);
      v.detail << " " << names[k] << " " << est << " (planted " << planted_b[static_cast<std::size_t>(k)] << ")";
      v.require(std::abs(est - planted_b[static_cast<std::size_t>(k)]) <= 0.1,
                label + " " + names[k] + " within 0.1");
    }
    v.detail << "; ";
  }
  const double secs = seconds_since(t0);
  v.detail << "n = 100000 each, " << secs << " s";
  v.require(secs < 60.0, "runtime < 60 s");
  return v;
}

Verdict tree_recovery() {
  Verdict v;
  const std::vector<std::string> feats = {"p_safe", "p_improve"};
  const auto t1 = tree_fit(planted::tree1(50000, 20261016), feats);
  std::map<std::string, double> cuts;
  cuts[t1.root.feature] = t1.root.cut();
  for (const auto* child : {&t1.left, &t1.right})
    if (*child) cuts[(*child)->feature] = (*child)->cut();
  v.detail << "two-level rule: depth " << t1.depth;
  for (const auto& [f, c] : cuts) v.detail << ", " << f << " > " << c;
  v.require(t1.depth == 2, "two-level tree");
  v.require(cuts.count("p_safe") && std::abs(cuts["p_safe"] - 0.99) <= 0.01 + 1e-12, "p_safe cut 0.99 +- 0.01");
  v.require(cuts.count("p_improve") && std::abs(cuts["p_improve"] - 0.05) <= 0.01 + 1e-12,
            "p_improve cut 0.05 +- 0.01");

  const auto t2 = tree_fit(planted::tree2(50000, 20261016), feats);
  v.detail << "; one-level rule: depth " << t2.depth << ", " << t2.root.feature << " > " << t2.root.cut();
  v.require(t2.depth == 1, "one-level tree");
  v.require(t2.root.feature == "p_safe", "split on p_safe");
  v.require(std::abs(t2.root.cut() - 0.8) <= 0.01 + 1e-12, "p_safe cut 0.8 +- 0.01");
  return v;
}

struct Welch {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;  // one-sided, H1: mean(a) > mean(b)
};

Welch welch(const std::vector<double>& a, const std::vector<double>& b) {
  auto moments = [](const std::vector<double>& x) {
    double m = 0.0;
    for (double v : x) m += v;
    m /= static_cast<double>(x.size());
    double s = 0.0;
    for (double v : x) s += (v - m) * (v - m);
    return std::pair{m, s / static_cast<double>(x.size() - 1)};
  };
  const auto [ma, va] = moments(a);
  const auto [mb, vb] = moments(b);
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double se2 = va / na + vb / nb;
  Welch w;
  w.t = (ma - mb) / std::sqrt(se2);
  w.df = se2 * se2 / ((va / na) * (va / na) / (na - 1) + (vb / nb) * (vb / nb) / (nb - 1));
  w.p = boost::math::cdf(boost::math::complement(boost::math::students_t(w.df), w.t));
  return w;
}

Verdict behaviour() {
  Verdict v;
  const auto t0 = Clock::now();
  for (int e : {1, 2}) {
    const auto cfg = TaskConfig::for_experiment(e);
    CampaignOptions opts;
    for (AgentKind k : {AgentKind::kSafeOpt, AgentKind::kTree1, AgentKind::kTree2, AgentKind::kRandom})
      opts.agents.push_back(AgentSpec::defaults(k));
    opts.runs = (500 + cfg.blocks - 1) / cfg.blocks;
    opts.seed = 20261016;
    opts.record_features = false;
    const auto camp = run_campaign(cfg, opts);

    std::map<std::string, std::vector<double>> per_trial;
    for (const auto& b : camp.blocks) per_trial[b.agent].push_back(b.mean_y);
    std::map<std::string, AgentSummary> sum;
    for (const auto& s : camp.summaries) sum[s.agent] = s;

    v.detail << "experiment " << e << " (" << per_trial["random"].size() << " blocks per agent):";
    for (const char* agent : {"safeopt", "tree1", "tree2"}) {
      const auto w = welch(per_trial[agent], per_trial["random"]);
      v.detail << " " << agent << " " << sum[agent].mean_score_per_trial << " vs random "
               << sum["random"].mean_score_per_trial << " (t " << w.t << ", p " << w.p << ");";
      v.require(per_trial[agent].size() >= 500, std::string(agent) + " 500 blocks");
      v.require(w.p < 0.01, std::string(agent) + " beats random, experiment " + std::to_string(e));
    }
    const double vs = sum["safeopt"].violation_rate, vr = sum["random"].violation_rate;
    const double ts = sum["safeopt"].termination_rate, tr = sum["random"].termination_rate;
    v.detail << " violation rate safeopt " << vs << " vs random " << vr << " (ratio " << vr / vs << ");"
             << " termination rate safeopt " << ts << " vs random " << tr << " (ratio " << tr / ts << ");";
    v.require(vr >= 3.0 * vs, "violation ratio >= 3, experiment " + std::to_string(e));

    if (e == 2) {
      std::vector<TrialRecord> tree2;
      for (const auto& r : camp.records)
        if (r.agent == "tree2") tree2.push_back(r);
      std::map<std::string, DistanceSummary> d;
      for (auto& s : distance_stats(tree2, *cfg.domain)) d[s.condition] = s;
      const double ref = d.at("all").reference_mean;
      v.detail << " tree2 mean distance to start: safe " << d["safe"].mean << ", normal " << d["normal"].mean
               << ", random reference " << ref << ";";
      v.require(d["safe"].mean < d["normal"].mean, "distance safe < normal");
      v.require(d["normal"].mean < ref, "distance normal < random reference");
    }
    v.detail << " ";
  }
  v.detail << seconds_since(t0) << " s";
  return v;
}

// Expected choices of a uniform-random agent in one block: trial k happens
// iff the k-1 earlier outputs all cleared the threshold.
double random_block_length(const BlockState& b, const TaskConfig& cfg) {
  if (!b.terminating) return cfg.trials_per_block;
  double q = 0.0;
  for (Eigen::Index i = 0; i < b.latent.size(); ++i)
    q += 0.5 * std::erfc((*b.threshold - b.latent(i)) / (cfg.noise_sd * std::sqrt(2.0)));
  q /= static_cast<double>(b.latent.size());
  double len = 0.0, qk = 1.0;
  for (int k = 0; k < cfg.trials_per_block; ++k, qk *= q) len += qk;
  return len;
}

Verdict environment() {
  Verdict v;
  const auto e2 = TaskConfig::experiment2();
  int span_bad = 0;
  for (std::uint64_t s = 0; s < 300; ++s) {
    const auto b = make_block(e2, static_cast<int>(s % 10), derive_seed(5150, {s}));
    if (b.latent.minCoeff() != 0.0 || b.latent.maxCoeff() != 100.0) ++span_bad;
  }
  v.detail << "experiment 2: " << 300 - span_bad << "/300 surfaces span exactly [0, 100]; ";
  v.require(span_bad == 0, "surfaces span [0, 100]");

  const auto e1 = TaskConfig::experiment1();
  int split_bad = 0;
  for (std::uint64_t s = 0; s < 2000; ++s) {
    const auto b = make_block(e1, static_cast<int>(s % 9), derive_seed(6160, {s}));
    const auto above = (b.latent.array() > *b.threshold).count();
    if (above != 10 && above != 11) ++split_bad;
  }
  v.detail << "experiment 1: " << 2000 - split_bad << "/2000 thresholds split 10/11; ";
  v.require(split_bad == 0, "threshold splits 10/11");

  constexpr int kBlocks = 10000;
  const auto agent = AgentSpec::defaults(AgentKind::kRandom, 3);
  RunOptions ropts;
  ropts.record_features = false;
  double sim = 0.0, oracle_len = 0.0;
  for (int s = 0; s < kBlocks; ++s) {
    auto block = make_block(e1, s % e1.blocks, derive_seed(7170, {static_cast<std::uint64_t>(s)}));
    oracle_len += random_block_length(block, e1);
    sim += run_block(agent, e1, std::move(block), ropts).block.trials_done();
  }
  sim /= kBlocks;
  oracle_len /= kBlocks;
  v.detail << "random block length " << sim << " vs enumeration " << oracle_len << " over " << kBlocks << " blocks";
  v.require(std::abs(sim - oracle_len) <= 0.05, "block length within 0.05");
  return v;
}

std::vector<std::string> split_lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

Verdict service_replay() {
  Verdict v;
  SessionOptions sopts;  // default forward-simulation count
  SessionManager manager(sopts);
  SessionServer server(manager);
  const int port = server.bind("127.0.0.1", 0);
  std::thread th([&] { server.run(); });
  server.wait_until_ready();
  httplib::Client cli("127.0.0.1", port);

  struct Case {
    int experiment;
    AgentKind agent;
    std::uint64_t seed;
    int blocks;
  };
  std::size_t compared = 0, mismatched = 0, with_features = 0;
  bool transport_ok = true;
  for (const Case c : {Case{1, AgentKind::kSafeOpt, 4242, 9}, Case{2, AgentKind::kTree1, 777, 2},
                       Case{2, AgentKind::kSafeOpt, 778, 2}}) {
    auto res = cli.Post("/sessions", json{{"experiment", c.experiment}, {"seed", c.seed}}.dump(), "application/json");
    if (!res || res->status != 201) {
      transport_ok = false;
      continue;
    }
    const std::string id = json::parse(res->body)["session_id"];
    const auto cfg = TaskConfig::for_experiment(c.experiment);
    const auto plan = plan_subject(cfg, c.seed);
    RunOptions ropts;
    ropts.subject = id;
    ropts.features = sopts.features;
    std::vector<std::string> expected;
    long long request = 0;
    for (int b = 0; b < c.blocks; ++b) {
      auto run = run_block(AgentSpec::defaults(c.agent), cfg,
                           make_block(cfg, b, plan.block_seeds[static_cast<std::size_t>(b)],
                                      plan.safe_flags[static_cast<std::size_t>(b)]),
                           ropts);
      for (auto& r : run.records) {
        r.agent = "human";
        if (r.features) ++with_features;
        expected.push_back(to_json_line(r));
        if (r.is_start()) continue;
        res = cli.Post("/sessions/" + id + "/choices", json{{"choice", r.choice}, {"request_id", ++request}}.dump(),
                       "application/json");
        if (!res || res->status != 200) transport_ok = false;
      }
    }
    res = cli.Get("/sessions/" + id + "/records");
    const auto got = res ? split_lines(res->body) : std::vector<std::string>{};
    for (std::size_t k = 0; k < expected.size(); ++k) {
      ++compared;
      if (k >= got.size() || got[k] != expected[k]) ++mismatched;
    }
  }
  server.stop();
  th.join();
  v.detail << compared << " records (" << with_features << " with feature snapshots) compared byte for byte, "
           << mismatched << " differ";
  v.require(transport_ok, "all requests succeeded");
  v.require(mismatched == 0 && compared > 0, "byte-identical");
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    const char* key;
    const char* name;
    std::function<Verdict()> run;
  };
  const std::vector<Criterion> criteria = {
      {"gp_oracle", "GP oracle equivalence", gp_oracle},
      {"set_algebra", "Set algebra", set_algebra},
      {"probabilities", "Probability checks", probabilities},
      {"logistic", "Planted recovery, logistic", logistic_recovery},
      {"trees", "Planted recovery, trees", tree_recovery},
      {"behaviour", "Behavioural mirror", behaviour},
      {"environment", "Environment statistics", environment},
      {"service_replay", "Service replay", service_replay},
  };
  // Optional arguments pick criteria by key; none runs all of them.
  std::vector<std::string> wanted(argv + 1, argv + argc);
  int failed = 0, ran = 0;
  for (const auto& c : criteria) {
    if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), c.key) == wanted.end()) continue;
    ++ran;
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail << "threw: " << e.what();
    }
    if (!v.pass) ++failed;
    std::printf("%s  %s: %s\n", v.pass ? "PASS" : "FAIL", c.name, v.detail.str().c_str());
    std::fflush(stdout);
  }
  if (ran == 0) {
    std::fprintf(stderr, "no criterion matches the arguments\n");
    return 2;
  }
  std::printf("%d of %d criteria passed\n", ran - failed, ran);
  return failed == 0 ? 0 : 1;
}
