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

// Choice policies for the threshold bandit, and the loop that plays one block.

#ifndef SAFELAB_AGENTS_HPP
#define SAFELAB_AGENTS_HPP

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "safelab/acquisition.hpp"
#include "safelab/records.hpp"
#include "safelab/task.hpp"

namespace safelab {

enum class AgentKind { kSafeOpt, kTree1, kTree2, kRandom };

const char* to_string(AgentKind kind);
AgentKind parse_agent_kind(std::string_view name);

struct AgentSpec {
  AgentKind kind = AgentKind::kSafeOpt;
  double beta = kDefaultBeta;
  double safe_cut = 0.99;
  double improve_cut = 0.05;
  std::uint64_t seed = 0;

  /// tree1: p_safe > 0.99 then p_improve > 0.05. tree2: p_safe > 0.8.
  static AgentSpec defaults(AgentKind kind, std::uint64_t seed = 0);
};

/// Picks a grid index. Total: every policy falls back to the point with the
/// highest p_safe when its preferred candidate set is empty. Ties go to the
/// lowest index. `seed` only matters for the random policy.
std::size_t choose(const AgentSpec& agent, const SetFeatures& features, const ConfidenceBounds& bounds,
                   const BlockState& block, std::uint64_t seed);

/// Seed of the p_expand forward simulation before choice `trial` (1-based).
/// Depends only on the block so that replays through the session service
/// reproduce the same snapshot.
std::uint64_t feature_seed(const BlockState& block, int trial);

/// Assessment of the block's current state, as seen before the next choice.
Assessment assess_block(const TaskConfig& config, const BlockState& block, const FeatureOptions& options);

TrialRecord start_record(const TaskConfig& config, const BlockState& block, const std::string& subject,
                         const std::string& agent);

/// Record for the most recent choice in `block` (after step()).
TrialRecord choice_record(const TaskConfig& config, const BlockState& block, const std::string& subject,
                          const std::string& agent, std::optional<SetFeatures> features);

struct RunOptions {
  std::string subject = "s0";
  FeatureOptions features;
  /// Skipping features lets the random policy run without any GP work.
  bool record_features = true;
};

struct BlockRun {
  BlockState block;
  std::vector<TrialRecord> records;
};

/// Plays a fresh block to completion or termination. records[0] is the
/// start observation; every choice record carries the features computed
/// before that choice.
BlockRun run_block(const AgentSpec& agent, const TaskConfig& config, BlockState block,
                   const RunOptions& options = {});

}  // namespace safelab

#endif  // SAFELAB_AGENTS_HPP
