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

// Simulation campaigns: each run is one simulated participant playing every
// block of the task. Runs of different agents with the same run number see the
// same block sequence and latent functions.

#ifndef SAFELAB_SIMULATE_HPP
#define SAFELAB_SIMULATE_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "safelab/agents.hpp"

namespace safelab {

struct CampaignOptions {
  std::vector<AgentSpec> agents;
  int runs = 10;
  std::uint64_t seed = 1;
  FeatureOptions features;
  bool record_features = true;
  /// 0 = one per hardware thread.
  int threads = 0;
};

struct BlockOutcome {
  std::string agent;
  int run = 0;
  int block = 0;
  Condition condition = Condition::kSafe;
  BlockStatus status = BlockStatus::kActive;
  int trials = 0;
  double score = 0.0;
  double mean_y = 0.0;
  bool has_threshold = false;
  /// Some choice had a latent value below the threshold. Noisy outputs can
  /// end a block without one.
  bool violated = false;
};

struct AgentSummary {
  std::string agent;
  int runs = 0;
  int blocks = 0;
  int choices = 0;
  double mean_block_score = 0.0;
  double mean_score_per_trial = 0.0;
  double mean_block_length = 0.0;
  /// Share of thresholded blocks with a violating choice.
  double violation_rate = 0.0;
  double termination_rate = 0.0;
};

struct Campaign {
  std::vector<TrialRecord> records;
  std::vector<BlockOutcome> blocks;
  std::vector<AgentSummary> summaries;
};

std::string subject_name(const AgentSpec& agent, int run);
std::uint64_t run_seed(std::uint64_t campaign_seed, int run);

/// Records come out grouped by agent, then run, then block, whatever the
/// thread count.
Campaign run_campaign(const TaskConfig& config, const CampaignOptions& options);

std::vector<AgentSummary> summarize(const std::vector<BlockOutcome>& blocks);
void write_summary_csv(std::ostream& out, const std::vector<AgentSummary>& summaries);
std::string format_summary(const TaskConfig& config, const CampaignOptions& options,
                           const std::vector<AgentSummary>& summaries);

}  // namespace safelab

#endif  // SAFELAB_SIMULATE_HPP
