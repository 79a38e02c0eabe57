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

// Safe-set machinery over a GP posterior: confidence bounds, the safe,
// maximizer and expander sets, and the probabilistic choice features used by
// the behavioral analyses.

#ifndef SAFELAB_ACQUISITION_HPP
#define SAFELAB_ACQUISITION_HPP

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "safelab/gp.hpp"

namespace safelab {

using Mask = std::vector<bool>;

inline constexpr double kDefaultBeta = 3.0;
inline constexpr int kDefaultExpandSamples = 2000;

struct ConfidenceBounds {
  Eigen::VectorXd upper;
  Eigen::VectorXd lower;
  double beta = kDefaultBeta;

  std::size_t size() const { return static_cast<std::size_t>(upper.size()); }
  double width(std::size_t i) const {
    return upper(static_cast<Eigen::Index>(i)) - lower(static_cast<Eigen::Index>(i));
  }
  double mean(std::size_t i) const {
    return 0.5 * (upper(static_cast<Eigen::Index>(i)) + lower(static_cast<Eigen::Index>(i)));
  }
};

struct SetFeatures {
  Mask safe;
  Mask maximizer;
  Mask expander;
  std::vector<int> expander_count;
  Eigen::VectorXd p_safe;
  Eigen::VectorXd p_improve;
  /// Empty when forward simulation was switched off.
  Eigen::VectorXd p_expand;
  double threshold = 0.0;

  std::size_t size() const { return safe.size(); }
};

/// Standard normal CDF.
double normal_cdf(double z);

ConfidenceBounds bounds(const GpPosterior& post, double beta = kDefaultBeta);

/// lower[i] >= j_min.
Mask safe_set(const ConfidenceBounds& b, double j_min);

/// safe[i] and upper[i] >= max over the whole grid of lower.
Mask maximizer_set(const ConfidenceBounds& b, const Mask& safe);

/// For every safe x, the number of currently unsafe points whose lower bound
/// clears j_min after the hypothetical observation (x, upper[x]). Unsafe
/// points get 0.
std::vector<int> expander_counts(const GpModel& model, const ConfidenceBounds& b,
                                 const Mask& safe, double j_min);

Mask expander_set(const std::vector<int>& counts, const Mask& safe);

/// Highest posterior mean on the grid.
double incumbent_value(const GpPosterior& post);

Eigen::VectorXd prob_improvement(const GpPosterior& post, double incumbent);
Eigen::VectorXd prob_safe(const GpPosterior& post, double j_min);

/// Fraction of posterior-predictive outcomes at each safe x after which some
/// currently unsafe point becomes safe. Deterministic in seed, and each
/// point's draws depend only on (seed, index).
Eigen::VectorXd prob_expand(const GpModel& model, const ConfidenceBounds& b, const Mask& safe,
                            double j_min, int n_samples, std::uint64_t seed);

/// Exact one-step update of the posterior marginals after observing grid
/// point `at` with the model's noise. The variance does not depend on the
/// outcome, so it is computed once; mean_after() applies an outcome.
class Lookahead {
 public:
  Lookahead(const GpPosterior& post, double noise_var, std::size_t at);

  const Eigen::VectorXd& sd_after() const { return sd_after_; }
  const Eigen::VectorXd& gain() const { return gain_; }
  Eigen::VectorXd mean_after(double y) const;
  double predictive_var() const { return denom_; }

 private:
  const GpPosterior* post_;
  std::size_t at_;
  double denom_;
  Eigen::VectorXd gain_;
  Eigen::VectorXd sd_after_;
};

struct FeatureOptions {
  double beta = kDefaultBeta;
  /// 0 disables the p_expand forward simulation.
  int expand_samples = kDefaultExpandSamples;
};

/// Everything a policy or an analysis needs about one decision.
struct Assessment {
  ConfidenceBounds bounds;
  SetFeatures features;
  double incumbent = 0.0;
};

Assessment assess(const GpModel& model, double j_min, const FeatureOptions& options,
                  std::uint64_t seed);

}  // namespace safelab

#endif  // SAFELAB_ACQUISITION_HPP
