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

#include "safelab/acquisition.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "safelab/error.hpp"
#include "safelab/rng.hpp"

namespace safelab {

double normal_cdf(double z) {
  if (std::isnan(z)) return std::numeric_limits<double>::quiet_NaN();
  return 0.5 * std::erfc(-z / std::sqrt(2.0));
}

namespace {

// Phi((mean - ref) / sd) with the 0/1 step at sd = 0.
Eigen::VectorXd gaussian_exceedance(const GpPosterior& post, double ref) {
  Eigen::VectorXd p(post.mean.size());
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double m = post.mean(i);
    const double s = post.sd(i);
    if (s > 0.0)
      p(i) = normal_cdf((m - ref) / s);
    else
      p(i) = m >= ref ? 1.0 : 0.0;
  }
  return p;
}

void check_length(const Mask& mask, std::size_t n, const char* what) {
  if (mask.size() != n)
    fail(ErrorCode::kInvalidInput, std::string(what) + ": mask length does not match grid");
}

}  // namespace

ConfidenceBounds bounds(const GpPosterior& post, double beta) {
  if (!(beta > 0.0) || !std::isfinite(beta)) fail(ErrorCode::kInvalidInput, "beta must be positive");
  ConfidenceBounds b;
  b.beta = beta;
  b.upper = post.mean + beta * post.sd;
  b.lower = post.mean - beta * post.sd;
  return b;
}

Mask safe_set(const ConfidenceBounds& b, double j_min) {
  Mask safe(b.size());
  for (std::size_t i = 0; i < safe.size(); ++i) safe[i] = b.lower(static_cast<Eigen::Index>(i)) >= j_min;
  return safe;
}

Mask maximizer_set(const ConfidenceBounds& b, const Mask& safe) {
  check_length(safe, b.size(), "maximizer_set");
  Mask out(b.size(), false);
  if (b.size() == 0) return out;
  const double best_lower = b.lower.maxCoeff();
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = safe[i] && b.upper(static_cast<Eigen::Index>(i)) >= best_lower;
  return out;
}

Lookahead::Lookahead(const GpPosterior& post, double noise_var, std::size_t at)
    : post_(&post), at_(at) {
  const auto x = static_cast<Eigen::Index>(at);
  // Same jitter as a full refit, so the two routes agree.
  denom_ = post.cov(x, x) + noise_var + kJitter;
  gain_ = post.cov.col(x) / denom_;
  sd_after_.resize(post.mean.size());
  for (Eigen::Index z = 0; z < sd_after_.size(); ++z) {
    const double var = post.cov(z, z) - post.cov(z, x) * gain_(z);
    sd_after_(z) = std::sqrt(std::max(var, 0.0));
  }
}

Eigen::VectorXd Lookahead::mean_after(double y) const {
  return post_->mean + gain_ * (y - post_->mean(static_cast<Eigen::Index>(at_)));
}

std::vector<int> expander_counts(const GpModel& model, const ConfidenceBounds& b, const Mask& safe,
                                 double j_min) {
  const GpPosterior& post = model.posterior();
  check_length(safe, post.size(), "expander_counts");
  std::vector<int> counts(post.size(), 0);
  std::vector<Eigen::Index> unsafe;
  for (std::size_t i = 0; i < safe.size(); ++i)
    if (!safe[i]) unsafe.push_back(static_cast<Eigen::Index>(i));
  if (unsafe.empty()) return counts;

  for (std::size_t x = 0; x < safe.size(); ++x) {
    if (!safe[x]) continue;
    const Lookahead look(post, model.noise_var(), x);
    const double shift = b.upper(static_cast<Eigen::Index>(x)) - post.mean(static_cast<Eigen::Index>(x));
    int count = 0;
    for (Eigen::Index z : unsafe) {
      const double lower = post.mean(z) + look.gain()(z) * shift - b.beta * look.sd_after()(z);
      if (lower >= j_min) ++count;
    }
    counts[x] = count;
  }
  return counts;
}

Mask expander_set(const std::vector<int>& counts, const Mask& safe) {
  if (counts.size() != safe.size())
    fail(ErrorCode::kInvalidInput, "expander_set: counts and mask differ in length");
  Mask out(safe.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = safe[i] && counts[i] >= 1;
  return out;
}

double incumbent_value(const GpPosterior& post) {
  if (post.mean.size() == 0) fail(ErrorCode::kInvalidInput, "empty posterior");
  return post.mean.maxCoeff();
}

Eigen::VectorXd prob_improvement(const GpPosterior& post, double incumbent) {
  if (!std::isfinite(incumbent)) fail(ErrorCode::kInvalidInput, "incumbent value must be finite");
  return gaussian_exceedance(post, incumbent);
}

Eigen::VectorXd prob_safe(const GpPosterior& post, double j_min) {
  return gaussian_exceedance(post, j_min);
}

Eigen::VectorXd prob_expand(const GpModel& model, const ConfidenceBounds& b, const Mask& safe,
                            double j_min, int n_samples, std::uint64_t seed) {
  if (n_samples < 1) fail(ErrorCode::kInvalidInput, "prob_expand needs at least one sample");
  const GpPosterior& post = model.posterior();
  check_length(safe, post.size(), "prob_expand");
  Eigen::VectorXd p = Eigen::VectorXd::Zero(post.mean.size());
  std::vector<Eigen::Index> unsafe;
  for (std::size_t i = 0; i < safe.size(); ++i)
    if (!safe[i]) unsafe.push_back(static_cast<Eigen::Index>(i));
  if (unsafe.empty()) return p;

  constexpr double kInf = std::numeric_limits<double>::infinity();
  for (std::size_t x = 0; x < safe.size(); ++x) {
    if (!safe[x]) continue;
    const auto xi = static_cast<Eigen::Index>(x);
    const Lookahead look(post, model.noise_var(), x);

    // Unsafe z turns safe iff gain(z) * d >= need(z), with d = y - mean(x).
    // Collect the outcome region where that holds for at least one z.
    bool always = false;
    double up_from = kInf;    // expands for d >= up_from
    double down_from = -kInf;  // expands for d <= down_from
    for (Eigen::Index z : unsafe) {
      const double need = j_min - post.mean(z) + b.beta * look.sd_after()(z);
      const double g = look.gain()(z);
      if (g > 0.0)
        up_from = std::min(up_from, need / g);
      else if (g < 0.0)
        down_from = std::max(down_from, need / g);
      else if (need <= 0.0)
        always = true;
    }

    if (always) {
      p(xi) = 1.0;
      continue;
    }
    Rng rng = make_rng(derive_seed(seed, {stream::kExpand, x}));
    const double pred_sd = std::sqrt(post.cov(xi, xi) + model.noise_var());
    // d = pred_sd * Phi^-1(u); compare u against the region in CDF space.
    double u_hi = 1.0;
    double u_lo = 0.0;
    if (pred_sd > 0.0) {
      u_hi = up_from == kInf ? 2.0 : normal_cdf(up_from / pred_sd);
      u_lo = down_from == -kInf ? -1.0 : normal_cdf(down_from / pred_sd);
    } else {
      u_hi = up_from <= 0.0 ? -1.0 : 2.0;
      u_lo = down_from >= 0.0 ? 2.0 : -1.0;
    }
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    int hits = 0;
    for (int s = 0; s < n_samples; ++s) {
      const double u = uniform(rng);
      if (u >= u_hi || u <= u_lo) ++hits;
    }
    p(xi) = static_cast<double>(hits) / n_samples;
  }
  return p;
}

Assessment assess(const GpModel& model, double j_min, const FeatureOptions& options,
                  std::uint64_t seed) {
  Assessment a;
  const GpPosterior& post = model.posterior();
  a.bounds = bounds(post, options.beta);
  SetFeatures& f = a.features;
  f.threshold = j_min;
  f.safe = safe_set(a.bounds, j_min);
  f.maximizer = maximizer_set(a.bounds, f.safe);
  f.expander_count = expander_counts(model, a.bounds, f.safe, j_min);
  f.expander = expander_set(f.expander_count, f.safe);
  f.p_safe = prob_safe(post, j_min);
  a.incumbent = incumbent_value(post);
  f.p_improve = prob_improvement(post, a.incumbent);
  if (options.expand_samples > 0)
    f.p_expand = prob_expand(model, a.bounds, f.safe, j_min, options.expand_samples, seed);
  return a;
}

}  // namespace safelab
