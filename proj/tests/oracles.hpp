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

// Independent reference implementations used only by the tests. Nothing here
// calls into the library's numerical paths: GP posteriors are formed by an
// explicit Gauss-Jordan inverse on plain vectors, and the standard normal CDF
// comes from a series expansion rather than erfc.

#ifndef SAFELAB_TESTS_ORACLES_HPP
#define SAFELAB_TESTS_ORACLES_HPP

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace oracle {

using Matrix = std::vector<std::vector<double>>;
using Vector = std::vector<double>;

inline double sqexp(double signal_sd, double lengthscale, const Vector& a, const Vector& b) {
  double d2 = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) d2 += (a[k] - b[k]) * (a[k] - b[k]);
  return signal_sd * signal_sd * std::exp(-d2 / (2.0 * lengthscale * lengthscale));
}

/// Gauss-Jordan elimination with partial pivoting.
inline Matrix invert(Matrix a) {
  const std::size_t n = a.size();
  Matrix inv(n, Vector(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) inv[i][i] = 1.0;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    if (a[piv][col] == 0.0) throw std::runtime_error("singular");
    std::swap(a[piv], a[col]);
    std::swap(inv[piv], inv[col]);
    const double p = a[col][col];
    for (std::size_t c = 0; c < n; ++c) {
      a[col][c] /= p;
      inv[col][c] /= p;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = a[r][col];
      if (f == 0.0) continue;
      for (std::size_t c = 0; c < n; ++c) {
        a[r][c] -= f * a[col][c];
        inv[r][c] -= f * inv[col][c];
      }
    }
  }
  return inv;
}

struct Posterior {
  Vector mean;
  Matrix cov;
};

/// mean = k^T (K + s2 I)^{-1} y,  cov = K_gg - k^T (K + s2 I)^{-1} k,
/// with the same 1e-10 diagonal jitter the library adds.
inline Posterior gp_posterior(double signal_sd, double lengthscale, const std::vector<Vector>& grid,
                              const std::vector<std::size_t>& inputs, const Vector& outputs,
                              double noise_var) {
  const std::size_t n = grid.size();
  const std::size_t t = inputs.size();
  Posterior p;
  p.mean.assign(n, 0.0);
  p.cov.assign(n, Vector(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) p.cov[i][j] = sqexp(signal_sd, lengthscale, grid[i], grid[j]);
  if (t == 0) return p;

  Matrix k(t, Vector(t));
  for (std::size_t a = 0; a < t; ++a)
    for (std::size_t b = 0; b < t; ++b)
      k[a][b] = sqexp(signal_sd, lengthscale, grid[inputs[a]], grid[inputs[b]]) +
                (a == b ? noise_var + 1e-10 : 0.0);
  const Matrix kinv = invert(k);
  Matrix cross(t, Vector(n));
  for (std::size_t a = 0; a < t; ++a)
    for (std::size_t i = 0; i < n; ++i) cross[a][i] = sqexp(signal_sd, lengthscale, grid[inputs[a]], grid[i]);

  Vector w(t, 0.0);  // Kinv y
  for (std::size_t a = 0; a < t; ++a)
    for (std::size_t b = 0; b < t; ++b) w[a] += kinv[a][b] * outputs[b];
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t a = 0; a < t; ++a) p.mean[i] += cross[a][i] * w[a];

  Matrix kc(t, Vector(n, 0.0));  // Kinv cross
  for (std::size_t a = 0; a < t; ++a)
    for (std::size_t b = 0; b < t; ++b)
      for (std::size_t i = 0; i < n; ++i) kc[a][i] += kinv[a][b] * cross[b][i];
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t a = 0; a < t; ++a) s += cross[a][i] * kc[a][j];
      p.cov[i][j] -= s;
    }
  return p;
}

/// Standard normal CDF by the Taylor series of the error function. Series
/// cancellation limits it to |z| <= 4 (error below 1e-12 there).
inline double normal_cdf(double z) {
  if (std::abs(z) > 4.0) throw std::domain_error("oracle normal_cdf limited to |z| <= 4");
  const double x = z / std::sqrt(2.0);
  // erf(x) = 2/sqrt(pi) * sum (-1)^n x^(2n+1) / (n! (2n+1))
  double term = x;
  double sum = x;
  for (int n = 1; n < 400; ++n) {
    term *= -x * x / n;
    const double add = term / (2 * n + 1);
    sum += add;
    if (std::abs(add) < 1e-18 * std::abs(sum)) break;
  }
  return 0.5 * (1.0 + 2.0 / std::sqrt(M_PI) * sum);
}

}  // namespace oracle

#endif  // SAFELAB_TESTS_ORACLES_HPP
