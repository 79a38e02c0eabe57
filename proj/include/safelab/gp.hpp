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

// Exact Gaussian process regression over a finite grid.
//
// Everything here is indexed by grid position: observations refer to grid
// indices, and the posterior is the joint Gaussian over all grid points.
// The prior mean is zero and the covariance is the squared-exponential
// kernel
//
//   k(x, x') = signal_sd^2 * exp(-|x - x'|^2 / (2 * lengthscale^2)).
//
// Posteriors are formed with a Cholesky factorization of
// K_tt + (noise_var + jitter) I; the inverse is never formed explicitly.

#ifndef SAFELAB_GP_HPP
#define SAFELAB_GP_HPP

#include <cstddef>
#include <cstdint>
#include <memory>
#include <mutex>
#include <vector>

#include <Eigen/Dense>

namespace safelab {

/// Diagonal jitter added to every factorized covariance.
inline constexpr double kJitter = 1e-10;

struct KernelParams {
  double signal_sd = 1.0;
  double lengthscale = 1.0;

  void validate() const;
};

/// Finite, ordered set of candidate inputs. A point's row index is its
/// identity everywhere else in the library.
class GridDomain {
 public:
  explicit GridDomain(Eigen::MatrixXd points);

  /// Points lo, lo + step, ..., hi (inclusive, within step/2).
  static GridDomain line(double lo, double hi, double step);
  /// Cartesian product of line(lo, hi, step) with itself, x1 varying slowest.
  static GridDomain square(double lo, double hi, double step);

  std::size_t size() const { return static_cast<std::size_t>(points_.rows()); }
  int dim() const { return static_cast<int>(points_.cols()); }
  const Eigen::MatrixXd& points() const { return points_; }
  Eigen::VectorXd point(std::size_t i) const { return points_.row(static_cast<Eigen::Index>(i)).transpose(); }
  double distance(std::size_t i, std::size_t j) const;

 private:
  Eigen::MatrixXd points_;
};

struct ObservationSet {
  std::vector<std::size_t> inputs;
  std::vector<double> outputs;
  double noise_var = 0.0;

  std::size_t size() const { return inputs.size(); }
  void add(std::size_t index, double y) {
    inputs.push_back(index);
    outputs.push_back(y);
  }
};

struct GpPosterior {
  Eigen::VectorXd mean;
  Eigen::VectorXd sd;
  Eigen::MatrixXd cov;

  std::size_t size() const { return static_cast<std::size_t>(mean.size()); }
};

/// Entry (i, j) = signal_sd^2 exp(-|a_i - b_j|^2 / (2 lengthscale^2)).
/// Rows of a and b are input vectors.
Eigen::MatrixXd kernel_matrix(const KernelParams& params, const Eigen::MatrixXd& a,
                              const Eigen::MatrixXd& b);

/// Prior over a fixed grid: the kernel and its grid Gram matrix, computed
/// once and shared by every posterior on that grid.
class GridPrior {
 public:
  GridPrior(KernelParams params, std::shared_ptr<const GridDomain> domain);

  GridPrior(const GridPrior&) = delete;
  GridPrior& operator=(const GridPrior&) = delete;

  /// Process-wide cache keyed by (params, domain identity).
  static std::shared_ptr<const GridPrior> shared(const KernelParams& params,
                                                 const std::shared_ptr<const GridDomain>& domain);

  const KernelParams& params() const { return params_; }
  const GridDomain& domain() const { return *domain_; }
  const std::shared_ptr<const GridDomain>& domain_ptr() const { return domain_; }
  const Eigen::MatrixXd& gram() const { return gram_; }
  std::size_t size() const { return domain_->size(); }

  /// Matrix F with F F^T = gram + jitter I. Computed on first use.
  const Eigen::MatrixXd& sampling_factor() const;

 private:
  KernelParams params_;
  std::shared_ptr<const GridDomain> domain_;
  Eigen::MatrixXd gram_;
  mutable std::once_flag factor_once_;
  mutable Eigen::MatrixXd factor_;
};

GpPosterior posterior(const GridPrior& prior, const ObservationSet& obs);
GpPosterior posterior(const KernelParams& params, const GridDomain& domain,
                      const ObservationSet& obs);

/// One draw of f over the grid from the zero-mean prior. Deterministic in seed.
Eigen::VectorXd sample_function(const GridPrior& prior, std::uint64_t seed);
Eigen::VectorXd sample_function(const KernelParams& params, const GridDomain& domain,
                                std::uint64_t seed);

/// Observation history plus its cached posterior.
class GpModel {
 public:
  GpModel(std::shared_ptr<const GridPrior> prior, ObservationSet obs);

  const GridPrior& prior() const { return *prior_; }
  const std::shared_ptr<const GridPrior>& prior_ptr() const { return prior_; }
  const ObservationSet& observations() const { return obs_; }
  const GpPosterior& posterior() const { return posterior_; }
  double noise_var() const { return obs_.noise_var; }

  /// Refit with one extra observation.
  GpModel with_observation(std::size_t index, double y) const;

 private:
  std::shared_ptr<const GridPrior> prior_;
  ObservationSet obs_;
  GpPosterior posterior_;
};

}  // namespace safelab

#endif  // SAFELAB_GP_HPP
