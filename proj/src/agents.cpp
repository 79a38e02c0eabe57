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

#include "safelab/agents.hpp"

#include <random>

#include "safelab/error.hpp"
#include "safelab/rng.hpp"

namespace safelab {

const char* to_string(AgentKind kind) {
  switch (kind) {
    case AgentKind::kSafeOpt: return "safeopt";
    case AgentKind::kTree1: return "tree1";
    case AgentKind::kTree2: return "tree2";
    case AgentKind::kRandom: return "random";
  }
  return "?";
}

AgentKind parse_agent_kind(std::string_view name) {
  if (name == "safeopt") return AgentKind::kSafeOpt;
  if (name == "tree1") return AgentKind::kTree1;
  if (name == "tree2") return AgentKind::kTree2;
  if (name == "random") return AgentKind::kRandom;
  fail(ErrorCode::kInvalidInput, "unknown agent '" + std::string(name) + "' (safeopt, tree1, tree2, random)");
}

AgentSpec AgentSpec::defaults(AgentKind kind, std::uint64_t seed) {
  AgentSpec a;
  a.kind = kind;
  a.seed = seed;
  a.safe_cut = kind == AgentKind::kTree2 ? 0.8 : 0.99;
  a.improve_cut = 0.05;
  return a;
}

namespace {

// argmax of score over indices where keep(i); npos when none qualifies.
template <typename Keep, typename Score>
std::size_t best_of(std::size_t n, Keep keep, Score score) {
  std::size_t best = static_cast<std::size_t>(-1);
  double best_score = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!keep(i)) continue;
    const double s = score(i);
    if (best == static_cast<std::size_t>(-1) || s > best_score) {
      best = i;
      best_score = s;
    }
  }
  return best;
}

constexpr std::size_t kNone = static_cast<std::size_t>(-1);

}  // namespace

std::size_t choose(const AgentSpec& agent, const SetFeatures& f, const ConfidenceBounds& b,
                   const BlockState& block, std::uint64_t seed) {
  const std::size_t n = agent.kind == AgentKind::kRandom ? static_cast<std::size_t>(block.latent.size()) : f.size();
  if (n == 0) fail(ErrorCode::kInvalidInput, "choose: empty grid");

  auto idx = [](std::size_t i) { return static_cast<Eigen::Index>(i); };
  auto all = [](std::size_t) { return true; };
  auto by_p_safe = [&](std::size_t i) { return f.p_safe(idx(i)); };

  switch (agent.kind) {
    case AgentKind::kRandom: {
      Rng rng = make_rng(seed);
      std::uniform_int_distribution<std::size_t> pick(0, n - 1);
      return pick(rng);
    }
    case AgentKind::kSafeOpt: {
      auto width = [&](std::size_t i) { return b.width(i); };
      std::size_t c = best_of(n, [&](std::size_t i) { return f.maximizer[i] && f.expander[i]; }, width);
      if (c == kNone) c = best_of(n, [&](std::size_t i) { return bool(f.maximizer[i]); }, width);
      if (c == kNone) c = best_of(n, [&](std::size_t i) { return bool(f.safe[i]); }, width);
      if (c == kNone) c = best_of(n, all, by_p_safe);
      return c;
    }
    case AgentKind::kTree1: {
      const std::size_t c = best_of(
          n,
          [&](std::size_t i) { return f.p_safe(idx(i)) > agent.safe_cut && f.p_improve(idx(i)) > agent.improve_cut; },
          [&](std::size_t i) { return f.p_improve(idx(i)); });
      return c != kNone ? c : best_of(n, all, by_p_safe);
    }
    case AgentKind::kTree2: {
      const std::size_t c = best_of(
          n, [&](std::size_t i) { return f.p_safe(idx(i)) > agent.safe_cut; },
          [&](std::size_t i) { return b.mean(i); });
      return c != kNone ? c : best_of(n, all, by_p_safe);
    }
  }
  return 0;
}

std::uint64_t feature_seed(const BlockState& block, int trial) {
  return derive_seed(block.seed, {stream::kExpand, static_cast<std::uint64_t>(trial)});
}

Assessment assess_block(const TaskConfig& config, const BlockState& block, const FeatureOptions& options) {
  const BlockModel bm = block_model(config, block);
  return assess(bm.model, bm.j_min, options, feature_seed(block, block.trials_done() + 1));
}

TrialRecord start_record(const TaskConfig& config, const BlockState& block, const std::string& subject,
                         const std::string& agent) {
  TrialRecord r;
  r.subject = subject;
  r.agent = agent;
  r.experiment = config.experiment;
  r.block = block.block_index;
  r.trial = 0;
  r.condition = block.condition;
  r.choice = block.history.front().index;
  r.y = block.history.front().y;
  r.status = RecordStatus::kStart;
  r.start_index = block.start_index;
  r.threshold = block.threshold;
  return r;
}

TrialRecord choice_record(const TaskConfig& config, const BlockState& block, const std::string& subject,
                          const std::string& agent, std::optional<SetFeatures> features) {
  TrialRecord r = start_record(config, block, subject, agent);
  r.trial = block.trials_done();
  r.choice = block.history.back().index;
  r.y = block.history.back().y;
  r.status = record_status(block.status);
  r.features = std::move(features);
  return r;
}

BlockRun run_block(const AgentSpec& agent, const TaskConfig& config, BlockState block, const RunOptions& options) {
  if (block.status != BlockStatus::kActive || block.trials_done() != 0)
    fail(ErrorCode::kInvalidState, "run_block needs a fresh block");
  const std::string agent_name = to_string(agent.kind);
  FeatureOptions fopts = options.features;
  fopts.beta = agent.beta;
  // No agent reads p_expand.
  if (!options.record_features) fopts.expand_samples = 0;

  BlockRun run;
  run.records.push_back(start_record(config, block, options.subject, agent_name));
  const bool need_assessment = options.record_features || agent.kind != AgentKind::kRandom;
  while (block.status == BlockStatus::kActive) {
    const int trial = block.trials_done() + 1;
    Assessment a;
    if (need_assessment) {
      try {
        a = assess_block(config, block, fopts);
      } catch (const Error& e) {
        fail(e.code(), "subject " + options.subject + " block " + std::to_string(block.block_index) + " trial " +
                           std::to_string(trial) + ": " + e.what());
      }
    }
    const std::size_t c = choose(agent, a.features, a.bounds, block,
                                 derive_seed(agent.seed, {stream::kAgent, block.seed, static_cast<std::uint64_t>(trial)}));
    const std::uint64_t noise_seed = trial_seed(block, trial);
    block = step(std::move(block), c, config, noise_seed).block;
    std::optional<SetFeatures> snapshot;
    if (options.record_features) snapshot = std::move(a.features);
    run.records.push_back(choice_record(config, block, options.subject, agent_name, std::move(snapshot)));
  }
  run.block = std::move(block);
  return run;
}

}  // namespace safelab
