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

#include "safelab/gp.hpp"

#include <cmath>
#include <map>
#include <random>
#include <string>
#include <tuple>

#include "safelab/error.hpp"
#include "safelab/rng.hpp"

namespace safelab {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidInput: return "invalid_input";
    case ErrorCode::kNumericalFailure: return "numerical_failure";
    case ErrorCode::kGenerationFailure: return "generation_failure";
    case ErrorCode::kInvalidState: return "invalid_state";
    case ErrorCode::kDataIntegrity: return "data_integrity";
    case ErrorCode::kSeparation: return "separation";
    case ErrorCode::kCollinearity: return "collinearity";
    case ErrorCode::kNotFound: return "not_found";
    case ErrorCode::kConflict: return "conflict";
    case ErrorCode::kIo: return "io";
  }
  return "unknown";
}

void KernelParams::validate() const {
  if (!(signal_sd > 0.0) || !std::isfinite(signal_sd))
    fail(ErrorCode::kInvalidInput, "signal_sd must be positive");
  if (!(lengthscale > 0.0) || !std::isfinite(lengthscale))
    fail(ErrorCode::kInvalidInput, "lengthscale must be positive");
}

GridDomain::GridDomain(Eigen::MatrixXd points) : points_(std::move(points)) {
  if (points_.rows() == 0) fail(ErrorCode::kInvalidInput, "grid must contain at least one point");
  if (points_.cols() < 1 || points_.cols() > 2)
    fail(ErrorCode::kInvalidInput, "grid dimension must be 1 or 2");
  for (Eigen::Index i = 0; i < points_.rows(); ++i)
    for (Eigen::Index j = 0; j < i; ++j)
      if ((points_.row(i) - points_.row(j)).squaredNorm() == 0.0)
        fail(ErrorCode::kInvalidInput, "grid points must be distinct (duplicate at index " +
                                           std::to_string(i) + ")");
}

namespace {

std::vector<double> axis(double lo, double hi, double step) {
  if (!(step > 0.0) || !(hi >= lo)) fail(ErrorCode::kInvalidInput, "bad grid axis");
  const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 0.5)) + 1;
  std::vector<double> v(n);
  // Multiply rather than accumulate so 0.05 * 20 lands on 1.0 exactly.
  for (std::size_t i = 0; i < n; ++i) v[i] = lo + static_cast<double>(i) * step;
  return v;
}

}  // namespace

GridDomain GridDomain::line(double lo, double hi, double step) {
  const auto v = axis(lo, hi, step);
  Eigen::MatrixXd pts(static_cast<Eigen::Index>(v.size()), 1);
  for (std::size_t i = 0; i < v.size(); ++i) pts(static_cast<Eigen::Index>(i), 0) = v[i];
  return GridDomain(std::move(pts));
}

GridDomain GridDomain::square(double lo, double hi, double step) {
  const auto v = axis(lo, hi, step);
  const auto n = static_cast<Eigen::Index>(v.size());
  Eigen::MatrixXd pts(n * n, 2);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      pts(i * n + j, 0) = v[static_cast<std::size_t>(i)];
      pts(i * n + j, 1) = v[static_cast<std::size_t>(j)];
    }
  return GridDomain(std::move(pts));
}

double GridDomain::distance(std::size_t i, std::size_t j) const {
  return (points_.row(static_cast<Eigen::Index>(i)) - points_.row(static_cast<Eigen::Index>(j))).norm();
}

Eigen::MatrixXd kernel_matrix(const KernelParams& params, const Eigen::MatrixXd& a,
                              const Eigen::MatrixXd& b) {
  params.validate();
  if (a.cols() != b.cols())
    fail(ErrorCode::kInvalidInput, "kernel_matrix: dimension mismatch (" + std::to_string(a.cols()) +
                                       " vs " + std::to_string(b.cols()) + ")");
  const double amp = params.signal_sd * params.signal_sd;
  const double inv = 1.0 / (2.0 * params.lengthscale * params.lengthscale);
  Eigen::MatrixXd k(a.rows(), b.rows());
  for (Eigen::Index j = 0; j < b.rows(); ++j)
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      k(i, j) = amp * std::exp(-(a.row(i) - b.row(j)).squaredNorm() * inv);
  return k;
}

GridPrior::GridPrior(KernelParams params, std::shared_ptr<const GridDomain> domain)
    : params_(params), domain_(std::move(domain)) {
  params_.validate();
  if (!domain_) fail(ErrorCode::kInvalidInput, "GridPrior: null domain");
  gram_ = kernel_matrix(params_, domain_->points(), domain_->points());
}

std::shared_ptr<const GridPrior> GridPrior::shared(const KernelParams& params,
                                                   const std::shared_ptr<const GridDomain>& domain) {
  using Key = std::tuple<double, double, const GridDomain*>;
  static std::mutex mu;
  static std::map<Key, std::pair<std::weak_ptr<const GridDomain>, std::shared_ptr<const GridPrior>>> cache;
  std::lock_guard<std::mutex> lock(mu);
  const Key key{params.signal_sd, params.lengthscale, domain.get()};
  auto it = cache.find(key);
  // A recycled address with an expired weak_ptr is a different domain.
  if (it != cache.end() && !it->second.first.expired()) return it->second.second;
  auto prior = std::make_shared<const GridPrior>(params, domain);
  cache[key] = {domain, prior};
  return prior;
}

const Eigen::MatrixXd& GridPrior::sampling_factor() const {
  std::call_once(factor_once_, [this] {
    Eigen::MatrixXd a = gram_;
    a.diagonal().array() += kJitter;
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() == Eigen::Success) {
      factor_ = llt.matrixL();
      return;
    }
    // Smooth kernels on dense grids are numerically rank deficient; fall back
    // to the eigendecomposition with the negative round-off spectrum clipped.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a);
    if (eig.info() != Eigen::Success)
      fail(ErrorCode::kNumericalFailure, "prior covariance factorization failed");
    factor_ = eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  });
  return factor_;
}

GpPosterior posterior(const GridPrior& prior, const ObservationSet& obs) {
  const auto n = static_cast<Eigen::Index>(prior.size());
  const auto t = static_cast<Eigen::Index>(obs.size());
  if (obs.inputs.size() != obs.outputs.size())
    fail(ErrorCode::kInvalidInput, "observation inputs and outputs differ in length");
  if (!(obs.noise_var >= 0.0) || !std::isfinite(obs.noise_var))
    fail(ErrorCode::kInvalidInput, "noise_var must be nonnegative");
  for (std::size_t idx : obs.inputs)
    if (idx >= prior.size())
      fail(ErrorCode::kInvalidInput, "observation index " + std::to_string(idx) + " outside grid of " +
                                         std::to_string(prior.size()) + " points");

  GpPosterior post;
  if (t == 0) {
    post.mean = Eigen::VectorXd::Zero(n);
    post.cov = prior.gram();
    post.sd = post.cov.diagonal().cwiseMax(0.0).cwiseSqrt();
    return post;
  }

  const Eigen::MatrixXd& gram = prior.gram();
  Eigen::MatrixXd k_tt(t, t);
  Eigen::MatrixXd k_tg(t, n);
  Eigen::VectorXd y(t);
  for (Eigen::Index a = 0; a < t; ++a) {
    const auto ia = static_cast<Eigen::Index>(obs.inputs[static_cast<std::size_t>(a)]);
    y(a) = obs.outputs[static_cast<std::size_t>(a)];
    k_tg.row(a) = gram.row(ia);
    for (Eigen::Index b = 0; b < t; ++b)
      k_tt(a, b) = gram(ia, static_cast<Eigen::Index>(obs.inputs[static_cast<std::size_t>(b)]));
  }
  k_tt.diagonal().array() += obs.noise_var + kJitter;

  Eigen::LLT<Eigen::MatrixXd> llt(k_tt);
  if (llt.info() != Eigen::Success)
    fail(ErrorCode::kNumericalFailure, "observation covariance is not positive definite");

  // v = L^{-1} K_tg, alpha = L^{-1} y: mean = v^T alpha, cov = K_gg - v^T v.
  const Eigen::MatrixXd v = llt.matrixL().solve(k_tg);
  const Eigen::VectorXd alpha = llt.matrixL().solve(y);
  post.mean = v.transpose() * alpha;
  post.cov = gram;
  post.cov.selfadjointView<Eigen::Lower>().rankUpdate(v.transpose(), -1.0);
  for (Eigen::Index j = 1; j < n; ++j) post.cov.col(j).head(j) = post.cov.row(j).head(j).transpose();
  post.sd = post.cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  if (!post.mean.allFinite() || !post.cov.allFinite())
    fail(ErrorCode::kNumericalFailure, "posterior is not finite");
  return post;
}

GpPosterior posterior(const KernelParams& params, const GridDomain& domain,
                      const ObservationSet& obs) {
  // Non-owning shared_ptr; the prior does not outlive this call.
  GridPrior prior(params, std::shared_ptr<const GridDomain>(&domain, [](const GridDomain*) {}));
  return posterior(prior, obs);
}

Eigen::VectorXd sample_function(const GridPrior& prior, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd z(static_cast<Eigen::Index>(prior.size()));
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = normal(rng);
  return prior.sampling_factor() * z;
}

Eigen::VectorXd sample_function(const KernelParams& params, const GridDomain& domain,
                                std::uint64_t seed) {
  GridPrior prior(params, std::shared_ptr<const GridDomain>(&domain, [](const GridDomain*) {}));
  return sample_function(prior, seed);
}

GpModel::GpModel(std::shared_ptr<const GridPrior> prior, ObservationSet obs)
    : prior_(std::move(prior)), obs_(std::move(obs)) {
  if (!prior_) fail(ErrorCode::kInvalidInput, "GpModel: null prior");
  posterior_ = safelab::posterior(*prior_, obs_);
}

GpModel GpModel::with_observation(std::size_t index, double y) const {
  ObservationSet next = obs_;
  next.add(index, y);
  return GpModel(prior_, std::move(next));
}

}  // namespace safelab
