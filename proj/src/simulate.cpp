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

#include "safelab/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "safelab/error.hpp"
#include "safelab/rng.hpp"

namespace safelab {

std::string subject_name(const AgentSpec& agent, int run) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s-%04d", to_string(agent.kind), run);
  return buf;
}

std::uint64_t run_seed(std::uint64_t campaign_seed, int run) {
  return derive_seed(campaign_seed, {static_cast<std::uint64_t>(run)});
}

namespace {

struct Job {
  std::size_t agent;
  int run;
};

struct JobResult {
  std::vector<TrialRecord> records;
  std::vector<BlockOutcome> blocks;
};

JobResult play(const TaskConfig& config, const CampaignOptions& options, const Job& job) {
  AgentSpec agent = options.agents[job.agent];
  const std::uint64_t seed = run_seed(options.seed, job.run);
  agent.seed = derive_seed(seed, {stream::kAgent, agent.seed});
  const SubjectPlan plan = plan_subject(config, seed);
  RunOptions ropts;
  ropts.subject = subject_name(agent, job.run);
  ropts.features = options.features;
  ropts.record_features = options.record_features;

  JobResult out;
  for (int b = 0; b < config.blocks; ++b) {
    auto block = make_block(config, b, plan.block_seeds[static_cast<std::size_t>(b)],
                            plan.safe_flags[static_cast<std::size_t>(b)]);
    auto run = run_block(agent, config, std::move(block), ropts);
    BlockOutcome o;
    o.agent = to_string(agent.kind);
    o.run = job.run;
    o.block = b;
    o.condition = run.block.condition;
    o.status = run.block.status;
    o.trials = run.block.trials_done();
    o.score = run.block.score;
    o.has_threshold = run.block.threshold.has_value();
    double sum = 0.0;
    for (std::size_t k = 1; k < run.block.history.size(); ++k) {
      sum += run.block.history[k].y;
      const auto x = static_cast<Eigen::Index>(run.block.history[k].index);
      if (run.block.threshold && run.block.latent(x) < *run.block.threshold) o.violated = true;
    }
    o.mean_y = o.trials > 0 ? sum / o.trials : 0.0;
    out.blocks.push_back(o);
    for (auto& r : run.records) out.records.push_back(std::move(r));
  }
  return out;
}

}  // namespace

Campaign run_campaign(const TaskConfig& config, const CampaignOptions& options) {
  config.validate();
  if (options.agents.empty()) fail(ErrorCode::kInvalidInput, "campaign needs at least one agent");
  if (options.runs < 1) fail(ErrorCode::kInvalidInput, "runs must be positive");
  // Builds the shared Gram matrix once before the workers start.
  config.prior()->sampling_factor();

  std::vector<Job> jobs;
  for (std::size_t a = 0; a < options.agents.size(); ++a)
    for (int r = 0; r < options.runs; ++r) jobs.push_back({a, r});
  std::vector<JobResult> results(jobs.size());

  int threads = options.threads > 0 ? options.threads : static_cast<int>(std::thread::hardware_concurrency());
  threads = std::clamp(threads, 1, static_cast<int>(jobs.size()));
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (std::size_t j; (j = next.fetch_add(1)) < jobs.size();) {
      try {
        results[j] = play(config, options, jobs[j]);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next = jobs.size();
      }
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);

  Campaign c;
  for (auto& r : results) {
    for (auto& rec : r.records) c.records.push_back(std::move(rec));
    for (auto& b : r.blocks) c.blocks.push_back(b);
  }
  c.summaries = summarize(c.blocks);
  return c;
}

std::vector<AgentSummary> summarize(const std::vector<BlockOutcome>& blocks) {
  std::vector<AgentSummary> out;
  std::map<std::string, std::size_t> index;
  std::map<std::string, std::map<int, bool>> runs;
  std::vector<double> score_sum, y_sum;
  std::vector<int> with_threshold, violations, terminations;
  for (const auto& b : blocks) {
    auto [it, inserted] = index.emplace(b.agent, out.size());
    if (inserted) {
      out.push_back({});
      out.back().agent = b.agent;
      score_sum.push_back(0.0);
      y_sum.push_back(0.0);
      with_threshold.push_back(0);
      violations.push_back(0);
      terminations.push_back(0);
    }
    const std::size_t a = it->second;
    auto& s = out[a];
    runs[b.agent][b.run] = true;
    ++s.blocks;
    s.choices += b.trials;
    score_sum[a] += b.score;
    y_sum[a] += b.mean_y * b.trials;
    if (b.has_threshold) {
      ++with_threshold[a];
      violations[a] += b.violated ? 1 : 0;
    }
    terminations[a] += b.status == BlockStatus::kTerminated ? 1 : 0;
  }
  for (std::size_t a = 0; a < out.size(); ++a) {
    auto& s = out[a];
    s.runs = static_cast<int>(runs[s.agent].size());
    s.mean_block_score = score_sum[a] / s.blocks;
    s.mean_score_per_trial = s.choices > 0 ? y_sum[a] / s.choices : 0.0;
    s.mean_block_length = static_cast<double>(s.choices) / s.blocks;
    s.violation_rate = with_threshold[a] > 0 ? static_cast<double>(violations[a]) / with_threshold[a] : 0.0;
    s.termination_rate = static_cast<double>(terminations[a]) / s.blocks;
  }
  return out;
}

void write_summary_csv(std::ostream& out, const std::vector<AgentSummary>& summaries) {
  out << "agent,runs,blocks,choices,mean_block_score,mean_score_per_trial,mean_block_length,violation_rate,"
         "termination_rate\n";
  char buf[256];
  for (const auto& s : summaries) {
    std::snprintf(buf, sizeof buf, "%s,%d,%d,%d,%.6f,%.6f,%.6f,%.6f,%.6f\n", s.agent.c_str(), s.runs, s.blocks,
                  s.choices, s.mean_block_score, s.mean_score_per_trial, s.mean_block_length, s.violation_rate,
                  s.termination_rate);
    out << buf;
  }
}

std::string format_summary(const TaskConfig& config, const CampaignOptions& options,
                           const std::vector<AgentSummary>& summaries) {
  std::ostringstream os;
  os << "experiment " << config.experiment << ", " << options.runs << " runs x " << config.blocks
     << " blocks, seed " << options.seed << "\n\n";
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-8s %8s %12s %12s %10s %10s %10s\n", "agent", "blocks", "score/trial",
                "block score", "block len", "violation", "ended");
  os << buf;
  for (const auto& s : summaries) {
    std::snprintf(buf, sizeof buf, "%-8s %8d %12.3f %12.3f %10.3f %10.3f %10.3f\n", s.agent.c_str(), s.blocks,
                  s.mean_score_per_trial, s.mean_block_score, s.mean_block_length, s.violation_rate,
                  s.termination_rate);
    os << buf;
  }
  os << "\nviolation: share of thresholded blocks with a choice whose latent value lies below the threshold\n"
        "ended: share of blocks cut short by an output below the threshold\n";
  return os.str();
}

}  // namespace safelab
