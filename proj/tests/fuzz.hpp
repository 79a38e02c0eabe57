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

// Random instance generators for property tests.

#ifndef SAFELAB_TESTS_FUZZ_HPP
#define SAFELAB_TESTS_FUZZ_HPP

#include <memory>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "safelab/gp.hpp"

namespace fuzz {

struct Instance {
  safelab::KernelParams params;
  std::shared_ptr<const safelab::GridDomain> domain;
  safelab::ObservationSet obs;
};

/// Distinct random points in 1-D or 2-D, kernel and noise drawn from ranges
/// that keep K + noise I reasonably conditioned.
inline Instance random_instance(std::mt19937_64& rng, int max_points = 50, int max_obs = 12) {
  std::uniform_int_distribution<int> dim_d(1, 2), n_d(2, max_points);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int dim = dim_d(rng);
  const int n = n_d(rng);
  Eigen::MatrixXd pts(n, dim);
  // Jittered lattice keeps points distinct.
  for (int i = 0; i < n; ++i)
    for (int d = 0; d < dim; ++d) pts(i, d) = (d == 0 ? i : (i * 7) % n) * 0.5 + 0.2 * u(rng);

  Instance inst;
  inst.params.signal_sd = 0.5 + 1.5 * u(rng);
  inst.params.lengthscale = 0.3 + 2.7 * u(rng);
  inst.domain = std::make_shared<const safelab::GridDomain>(pts);
  inst.obs.noise_var = 0.01 + u(rng);
  std::uniform_int_distribution<int> t_d(0, max_obs);
  std::uniform_int_distribution<std::size_t> idx_d(0, static_cast<std::size_t>(n - 1));
  std::normal_distribution<double> y_d(0.0, 1.5);
  const int t = t_d(rng);
  for (int k = 0; k < t; ++k) inst.obs.add(idx_d(rng), y_d(rng));
  return inst;
}

inline std::vector<oracle::Vector> grid_vectors(const safelab::GridDomain& d) {
  std::vector<oracle::Vector> g;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto p = d.point(i);
    g.emplace_back(p.data(), p.data() + p.size());
  }
  return g;
}

}  // namespace fuzz

#endif  // SAFELAB_TESTS_FUZZ_HPP
