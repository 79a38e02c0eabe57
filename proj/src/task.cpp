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

#include "safelab/task.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>

#include "safelab/error.hpp"
#include "safelab/rng.hpp"

namespace safelab {

const char* to_string(BlockStatus s) {
  switch (s) {
    case BlockStatus::kActive: return "active";
    case BlockStatus::kCompleted: return "completed";
    case BlockStatus::kTerminated: return "terminated";
  }
  return "?";
}

const char* to_string(Condition c) { return c == Condition::kSafe ? "safe" : "normal"; }

const char* to_string(ThresholdRule r) {
  switch (r) {
    case ThresholdRule::kMedianSplit: return "median";
    case ThresholdRule::kFixed: return "fixed";
    case ThresholdRule::kNone: return "none";
  }
  return "?";
}

const char* to_string(OutputScaling s) {
  return s == OutputScaling::kIdentity ? "identity" : "affine-0-100";
}

namespace {

std::shared_ptr<const GridDomain> experiment1_domain() {
  static const auto domain = std::make_shared<const GridDomain>(GridDomain::line(0.0, 10.0, 0.5));
  return domain;
}

std::shared_ptr<const GridDomain> experiment2_domain() {
  static const auto domain = std::make_shared<const GridDomain>(GridDomain::square(0.0, 1.0, 0.05));
  return domain;
}

std::vector<bool> default_flags(int experiment, int blocks) {
  std::vector<bool> flags(static_cast<std::size_t>(std::max(blocks, 0)), true);
  if (experiment == 2)
    for (std::size_t i = flags.size() / 2; i < flags.size(); ++i) flags[i] = false;
  return flags;
}

}  // namespace

TaskConfig TaskConfig::experiment1() {
  TaskConfig c;
  c.experiment = 1;
  c.kernel = {1.0, 1.0};
  c.domain = experiment1_domain();
  c.noise_sd = 1.0;
  c.trials_per_block = 10;
  c.blocks = 9;
  c.threshold_rule = ThresholdRule::kMedianSplit;
  c.output_scaling = OutputScaling::kIdentity;
  c.safe_block_flags = default_flags(1, c.blocks);
  return c;
}

TaskConfig TaskConfig::experiment2() {
  TaskConfig c;
  c.experiment = 2;
  c.kernel = {1.0, 2.0};
  c.domain = experiment2_domain();
  c.noise_sd = 1.0;
  c.trials_per_block = 10;
  c.blocks = 10;
  c.threshold_rule = ThresholdRule::kFixed;
  c.threshold_value = 50.0;
  c.output_scaling = OutputScaling::kAffine0To100;
  c.safe_block_flags = default_flags(2, c.blocks);
  return c;
}

TaskConfig TaskConfig::for_experiment(int experiment) {
  if (experiment == 1) return experiment1();
  if (experiment == 2) return experiment2();
  fail(ErrorCode::kInvalidInput, "experiment must be 1 or 2, got " + std::to_string(experiment));
}

void TaskConfig::validate() const {
  if (experiment != 1 && experiment != 2) fail(ErrorCode::kInvalidInput, "experiment must be 1 or 2");
  kernel.validate();
  if (!domain) fail(ErrorCode::kInvalidInput, "config has no grid");
  if (!(noise_sd >= 0.0) || !std::isfinite(noise_sd)) fail(ErrorCode::kInvalidInput, "noise_sd must be nonnegative");
  if (trials_per_block < 1) fail(ErrorCode::kInvalidInput, "trials_per_block must be positive");
  if (blocks < 1) fail(ErrorCode::kInvalidInput, "blocks must be positive");
  if (safe_block_flags.size() != static_cast<std::size_t>(blocks))
    fail(ErrorCode::kInvalidInput, "safe_block_flags must have one entry per block");
  if (threshold_rule == ThresholdRule::kFixed && !std::isfinite(threshold_value))
    fail(ErrorCode::kInvalidInput, "threshold_value must be finite");
}

std::shared_ptr<const GridPrior> TaskConfig::prior() const {
  return GridPrior::shared(kernel, domain);
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    fail(ErrorCode::kInvalidInput, "config key '" + key + "': expected a number, got '" + v + "'");
  }
}

int parse_int(const std::string& key, const std::string& v) {
  const double d = parse_double(key, v);
  if (d != std::floor(d) || std::abs(d) > 1e9)
    fail(ErrorCode::kInvalidInput, "config key '" + key + "': expected an integer, got '" + v + "'");
  return static_cast<int>(d);
}

}  // namespace

TaskConfig parse_config(std::istream& in, const std::string& source) {
  std::map<std::string, std::pair<std::string, int>> kv;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      fail(ErrorCode::kInvalidInput, source + ":" + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (kv.count(key))
      fail(ErrorCode::kInvalidInput, source + ":" + std::to_string(line_no) + ": duplicate key '" + key + "'");
    kv[key] = {value, line_no};
  }

  static const char* const kKnown[] = {"experiment",      "signal_sd",      "lengthscale",
                                       "noise_sd",        "trials_per_block", "blocks",
                                       "threshold_rule",  "threshold_value", "output_scaling",
                                       "safe_block_flags"};
  for (const auto& [key, entry] : kv)
    if (std::find(std::begin(kKnown), std::end(kKnown), key) == std::end(kKnown))
      fail(ErrorCode::kInvalidInput,
           source + ":" + std::to_string(entry.second) + ": unknown key '" + key + "'");

  auto get = [&](const char* key) -> const std::string* {
    auto it = kv.find(key);
    return it == kv.end() ? nullptr : &it->second.first;
  };

  TaskConfig c = TaskConfig::for_experiment(get("experiment") ? parse_int("experiment", *get("experiment")) : 1);
  if (auto v = get("signal_sd")) c.kernel.signal_sd = parse_double("signal_sd", *v);
  if (auto v = get("lengthscale")) c.kernel.lengthscale = parse_double("lengthscale", *v);
  if (auto v = get("noise_sd")) c.noise_sd = parse_double("noise_sd", *v);
  if (auto v = get("trials_per_block")) c.trials_per_block = parse_int("trials_per_block", *v);
  if (auto v = get("blocks")) {
    c.blocks = parse_int("blocks", *v);
    c.safe_block_flags = default_flags(c.experiment, c.blocks);
  }
  if (auto v = get("threshold_rule")) {
    if (*v == "median")
      c.threshold_rule = ThresholdRule::kMedianSplit;
    else if (*v == "fixed")
      c.threshold_rule = ThresholdRule::kFixed;
    else if (*v == "none")
      c.threshold_rule = ThresholdRule::kNone;
    else
      fail(ErrorCode::kInvalidInput, "threshold_rule must be median, fixed or none");
  }
  if (auto v = get("threshold_value")) {
    c.threshold_value = parse_double("threshold_value", *v);
    if (!get("threshold_rule")) c.threshold_rule = ThresholdRule::kFixed;
  }
  if (auto v = get("output_scaling")) {
    if (*v == "identity")
      c.output_scaling = OutputScaling::kIdentity;
    else if (*v == "affine-0-100")
      c.output_scaling = OutputScaling::kAffine0To100;
    else
      fail(ErrorCode::kInvalidInput, "output_scaling must be identity or affine-0-100");
  }
  if (auto v = get("safe_block_flags")) {
    c.safe_block_flags.clear();
    std::stringstream ss(*v);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (item == "1" || item == "safe")
        c.safe_block_flags.push_back(true);
      else if (item == "0" || item == "normal")
        c.safe_block_flags.push_back(false);
      else
        fail(ErrorCode::kInvalidInput, "safe_block_flags entries must be 1/0 or safe/normal");
    }
    if (!get("blocks")) c.blocks = static_cast<int>(c.safe_block_flags.size());
  }
  c.validate();
  return c;
}

TaskConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open config file '" + path + "'");
  return parse_config(in, path);
}

namespace {

double gaussian_noise(std::uint64_t seed, double sd) {
  if (sd == 0.0) return 0.0;
  Rng rng = make_rng(seed);
  std::normal_distribution<double> noise(0.0, sd);
  return noise(rng);
}

double median(Eigen::VectorXd v) {
  std::vector<double> s(v.data(), v.data() + v.size());
  std::sort(s.begin(), s.end());
  const std::size_t n = s.size();
  return n % 2 == 1 ? s[n / 2] : 0.5 * (s[n / 2 - 1] + s[n / 2]);
}

void scale_to_0_100(Eigen::VectorXd& f) {
  const Eigen::Index lo = [&] { Eigen::Index i; f.minCoeff(&i); return i; }();
  const Eigen::Index hi = [&] { Eigen::Index i; f.maxCoeff(&i); return i; }();
  const double min = f(lo);
  const double range = f(hi) - min;
  if (!(range > 0.0)) fail(ErrorCode::kGenerationFailure, "flat latent surface cannot be scaled");
  f = (f.array() - min) * (100.0 / range);
  // Pin the endpoints so the range is exact.
  f(lo) = 0.0;
  f(hi) = 100.0;
}

}  // namespace

BlockState make_block(const TaskConfig& config, int block_index, std::uint64_t seed,
                      std::optional<bool> safe_override) {
  config.validate();
  if (block_index < 0 || block_index >= config.blocks)
    fail(ErrorCode::kInvalidInput, "block index " + std::to_string(block_index) + " out of range");
  const auto prior = config.prior();

  BlockState block;
  block.block_index = block_index;
  block.seed = seed;
  const bool flag = safe_override.value_or(config.safe_block_flags[static_cast<std::size_t>(block_index)]);

  constexpr int kMaxAttempts = 100;
  std::vector<std::size_t> candidates;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    block.latent = sample_function(*prior, derive_seed(seed, {stream::kLatent, static_cast<std::uint64_t>(attempt)}));
    if (config.output_scaling == OutputScaling::kAffine0To100) scale_to_0_100(block.latent);

    switch (config.threshold_rule) {
      case ThresholdRule::kMedianSplit: block.threshold = median(block.latent); break;
      case ThresholdRule::kFixed: block.threshold = config.threshold_value; break;
      case ThresholdRule::kNone: block.threshold.reset(); break;
    }
    candidates.clear();
    for (std::size_t i = 0; i < prior->size(); ++i)
      if (!block.threshold || block.latent(static_cast<Eigen::Index>(i)) > *block.threshold)
        candidates.push_back(i);
    if (!candidates.empty()) break;
  }
  if (candidates.empty())
    fail(ErrorCode::kGenerationFailure, "no grid point above the threshold after 100 attempts");

  block.terminating = block.threshold.has_value() && flag;
  block.condition = block.terminating ? Condition::kSafe : Condition::kNormal;

  Rng start_rng = make_rng(derive_seed(seed, {stream::kStart}));
  std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
  block.start_index = candidates[pick(start_rng)];

  const double y0 =
      block.latent(static_cast<Eigen::Index>(block.start_index)) + gaussian_noise(trial_seed(block, 0), config.noise_sd);
  block.history.push_back({block.start_index, y0});
  block.score = y0;
  block.status = BlockStatus::kActive;
  return block;
}

std::uint64_t trial_seed(const BlockState& block, int trial) {
  return derive_seed(block.seed, {stream::kNoise, static_cast<std::uint64_t>(trial)});
}

StepResult step(BlockState block, std::size_t choice, const TaskConfig& config, std::uint64_t seed) {
  if (block.status != BlockStatus::kActive)
    fail(ErrorCode::kInvalidState, std::string("cannot step a ") + to_string(block.status) + " block");
  if (choice >= static_cast<std::size_t>(block.latent.size()))
    fail(ErrorCode::kInvalidInput, "choice " + std::to_string(choice) + " is not a grid index");

  const double y = block.latent(static_cast<Eigen::Index>(choice)) + gaussian_noise(seed, config.noise_sd);
  block.history.push_back({choice, y});
  block.score += y;
  if (block.terminating && y < *block.threshold)
    block.status = BlockStatus::kTerminated;
  else if (block.trials_done() >= config.trials_per_block)
    block.status = BlockStatus::kCompleted;
  return {std::move(block), y};
}

SubjectPlan plan_subject(const TaskConfig& config, std::uint64_t seed) {
  SubjectPlan plan;
  plan.safe_flags = config.safe_block_flags;
  Rng rng = make_rng(derive_seed(seed, {stream::kPermutation}));
  // Fisher-Yates with an explicit uniform draw; std::shuffle's algorithm is
  // not pinned by the standard.
  for (std::size_t i = plan.safe_flags.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    const std::size_t j = pick(rng);
    const bool tmp = plan.safe_flags[i - 1];
    plan.safe_flags[i - 1] = plan.safe_flags[j];
    plan.safe_flags[j] = tmp;
  }
  for (int b = 0; b < config.blocks; ++b)
    plan.block_seeds.push_back(derive_seed(seed, {stream::kBlock, static_cast<std::uint64_t>(b)}));
  return plan;
}

ChanceLevel chance_level(const TaskConfig& config, int n_sims, std::uint64_t seed) {
  if (n_sims < 1) fail(ErrorCode::kInvalidInput, "n_sims must be positive");
  double total_y = 0.0;
  long long trials = 0;
  for (int s = 0; s < n_sims; ++s) {
    const int b = s % config.blocks;
    BlockState block = make_block(config, b, derive_seed(seed, {stream::kBlock, static_cast<std::uint64_t>(s)}));
    Rng rng = make_rng(derive_seed(seed, {stream::kAgent, static_cast<std::uint64_t>(s)}));
    std::uniform_int_distribution<std::size_t> pick(0, config.domain->size() - 1);
    while (block.status == BlockStatus::kActive) {
      const std::uint64_t noise_seed = trial_seed(block, block.trials_done() + 1);
      auto r = step(std::move(block), pick(rng), config, noise_seed);
      block = std::move(r.block);
      total_y += r.y;
      ++trials;
    }
  }
  return {total_y / static_cast<double>(trials), static_cast<double>(trials) / n_sims};
}

double mean_prior_range(const GridPrior& prior) {
  constexpr int kDraws = 1000;
  constexpr std::uint64_t kSeed = 0x72616e6765ULL;
  static std::mutex mutex;
  static std::map<const GridPrior*, double> cache;
  {
    std::lock_guard lock(mutex);
    auto it = cache.find(&prior);
    if (it != cache.end()) return it->second;
  }
  double sum = 0.0;
  for (int d = 0; d < kDraws; ++d) {
    const Eigen::VectorXd f = sample_function(prior, derive_seed(kSeed, {static_cast<std::uint64_t>(d)}));
    sum += f.maxCoeff() - f.minCoeff();
  }
  const double mean = sum / kDraws;
  std::lock_guard lock(mutex);
  cache[&prior] = mean;
  return mean;
}

ModelUnits model_units(const TaskConfig& config) {
  if (config.output_scaling == OutputScaling::kAffine0To100) {
    // Keeps the prior alive so its cache entry cannot be reused by another.
    static std::mutex mutex;
    static std::vector<std::shared_ptr<const GridPrior>> keep;
    auto prior = config.prior();
    {
      std::lock_guard lock(mutex);
      if (std::find(keep.begin(), keep.end(), prior) == keep.end()) keep.push_back(prior);
    }
    const double range = mean_prior_range(*prior);
    if (!(range > 0.0)) fail(ErrorCode::kNumericalFailure, "prior draws have no spread on this grid");
    return {50.0, 100.0 / range};
  }
  return {0.0, 1.0};
}

BlockModel block_model(const TaskConfig& config, const BlockState& block) {
  const ModelUnits units = model_units(config);
  ObservationSet obs;
  obs.noise_var = (config.noise_sd / units.scale) * (config.noise_sd / units.scale);
  for (const Observation& o : block.history) obs.add(o.index, units.to_model(o.y));
  const double j_min = block.threshold ? units.to_model(*block.threshold)
                                       : -std::numeric_limits<double>::infinity();
  return {GpModel(config.prior(), std::move(obs)), j_min};
}

}  // namespace safelab
