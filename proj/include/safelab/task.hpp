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

// Threshold-bandit task: task configuration, latent-function generation and
// the per-block state machine shared by simulated agents and the session
// service.

#ifndef SAFELAB_TASK_HPP
#define SAFELAB_TASK_HPP

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "safelab/gp.hpp"

namespace safelab {

enum class ThresholdRule { kMedianSplit, kFixed, kNone };
enum class OutputScaling { kIdentity, kAffine0To100 };
enum class BlockStatus { kActive, kCompleted, kTerminated };
enum class Condition { kNormal, kSafe };

const char* to_string(BlockStatus s);
const char* to_string(Condition c);
const char* to_string(ThresholdRule r);
const char* to_string(OutputScaling s);

struct TaskConfig {
  int experiment = 1;
  KernelParams kernel;
  std::shared_ptr<const GridDomain> domain;
  double noise_sd = 1.0;
  int trials_per_block = 10;
  int blocks = 9;
  ThresholdRule threshold_rule = ThresholdRule::kMedianSplit;
  double threshold_value = 0.0;
  OutputScaling output_scaling = OutputScaling::kIdentity;
  /// true = threshold violations end the block. One entry per block.
  std::vector<bool> safe_block_flags;

  /// 21 points {0, 0.5, ..., 10}, lengthscale 1, 9 safe blocks.
  static TaskConfig experiment1();
  /// 21x21 grid over [0, 1]^2, lengthscale 2, outputs scaled to [0, 100],
  /// threshold 50, five safe and five normal blocks.
  static TaskConfig experiment2();
  static TaskConfig for_experiment(int experiment);

  void validate() const;
  std::shared_ptr<const GridPrior> prior() const;
};

/// Flat `key = value` text; `#` starts a comment. Keys not listed in the
/// README are rejected. Starts from the defaults of `experiment`.
TaskConfig parse_config(std::istream& in, const std::string& source = "<config>");
TaskConfig load_config(const std::string& path);

struct Observation {
  std::size_t index = 0;
  double y = 0.0;
};

struct BlockState {
  int block_index = 0;
  std::uint64_t seed = 0;
  Condition condition = Condition::kSafe;
  Eigen::VectorXd latent;
  /// Reference threshold for features and the start point. Absent only
  /// under ThresholdRule::kNone.
  std::optional<double> threshold;
  /// Whether a sub-threshold output ends the block.
  bool terminating = false;
  std::size_t start_index = 0;
  /// history[0] is the provided start observation.
  std::vector<Observation> history;
  BlockStatus status = BlockStatus::kActive;
  double score = 0.0;

  /// Choices made so far, excluding the start observation.
  int trials_done() const { return static_cast<int>(history.size()) - 1; }
};

BlockState make_block(const TaskConfig& config, int block_index, std::uint64_t seed,
                      std::optional<bool> safe_override = std::nullopt);

struct StepResult {
  BlockState block;
  double y = 0.0;
};

/// Noise for a trial is drawn from `seed`.
StepResult step(BlockState block, std::size_t choice, const TaskConfig& config, std::uint64_t seed);

/// Seed used for the noise of choice number `trial` (1-based) in a block.
std::uint64_t trial_seed(const BlockState& block, int trial);

/// Block sequence of one participant: conditions in a seeded random
/// permutation of config.safe_block_flags, and one seed per block.
struct SubjectPlan {
  std::vector<bool> safe_flags;
  std::vector<std::uint64_t> block_seeds;
};

SubjectPlan plan_subject(const TaskConfig& config, std::uint64_t seed);

struct ChanceLevel {
  double score_per_trial = 0.0;
  double block_length = 0.0;
};

/// Uniform-random agent played on n_sims blocks.
ChanceLevel chance_level(const TaskConfig& config, int n_sims, std::uint64_t seed);

/// Output units the agent's GP works in: y_model = (y - offset) / scale.
/// For outputs stretched onto [0, 100] the offset is 50 and the scale is 100
/// over the mean range of a prior draw on the grid, which undoes the stretch
/// on average so the prior matches the surfaces it will meet.
struct ModelUnits {
  double offset = 0.0;
  double scale = 1.0;

  double to_model(double y) const { return (y - offset) / scale; }
};

ModelUnits model_units(const TaskConfig& config);

/// Monte Carlo mean of max - min over grid draws from the prior. Cached per
/// prior.
double mean_prior_range(const GridPrior& prior);

/// The agent's GP model of a block from its history, and the threshold in
/// model units (-inf without a threshold).
struct BlockModel {
  GpModel model;
  double j_min;
};

BlockModel block_model(const TaskConfig& config, const BlockState& block);

}  // namespace safelab

#endif  // SAFELAB_TASK_HPP
