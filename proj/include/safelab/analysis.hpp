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

// Behavioural analyses over choice records: a long-format table with one row
// per (trial, grid point), logistic regression of "was this point chosen" on
// its features, log-loss threshold trees, and distance-to-start histograms.

#ifndef SAFELAB_ANALYSIS_HPP
#define SAFELAB_ANALYSIS_HPP

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "safelab/gp.hpp"
#include "safelab/records.hpp"

namespace safelab {

/// Feature columns produced by expand_long. p_expand only appears when every
/// record carries it.
extern const std::vector<std::string> kFeatureColumns;

struct LongTable {
  /// Per choice record, in input order. Features are kept in the columns.
  std::vector<TrialRecord> trials;
  /// Row -> index into `trials`, and the grid point the row describes.
  std::vector<std::uint32_t> trial_of_row;
  std::vector<std::uint32_t> point;
  std::vector<std::uint8_t> outcome;
  std::map<std::string, std::vector<double>> columns;

  std::size_t rows() const { return outcome.size(); }
  bool has(const std::string& name) const { return columns.count(name) != 0; }
  /// Throws Error(kInvalidInput) for unknown names.
  const std::vector<double>& column(const std::string& name) const;
  /// Subject of each row as an index into subjects().
  std::vector<std::size_t> subject_index(std::vector<std::string>* subjects = nullptr) const;
};

/// Start observations (trial 0) carry no choice and are skipped. Throws
/// Error(kDataIntegrity) when a choice record lacks features for the grid or
/// its choice lies outside them.
LongTable expand_long(const std::vector<TrialRecord>& records, const GridDomain& domain);

/// Inverse of expand_long for the choice records.
std::vector<TrialRecord> collapse_long(const LongTable& table);

struct LogisticFit {
  std::vector<std::string> names;  // "intercept", features..., "subject:<id>"...
  std::vector<double> coefficients;
  std::vector<double> standard_errors;
  bool converged = false;
  int iterations = 0;
  double log_likelihood = 0.0;
  std::size_t n = 0;

  double coefficient(const std::string& name) const;
  double standard_error(const std::string& name) const;
};

struct LogisticOptions {
  int max_iterations = 100;
  double tolerance = 1e-8;
  /// |coefficient| beyond this is reported as separation.
  double divergence_bound = 30.0;
};

/// Maximum likelihood by iteratively reweighted least squares. With
/// subject_dummies, adds one intercept shift per subject after the first.
/// Errors: kInvalidInput (missing column, one-class outcome), kCollinearity
/// (rank-deficient design), kSeparation (diverging coefficients).
LogisticFit logistic_fit(const LongTable& table, const std::vector<std::string>& features, bool subject_dummies,
                         const LogisticOptions& options = {});

struct TreeSplit {
  std::string feature;
  int cut_index = 0;  // cut = cut_index / 100; rows with value > cut go right
  double cut() const { return cut_index / 100.0; }
};

struct TreeLeaf {
  std::string path;  // e.g. "p_safe<=0.99" or "p_safe>0.99 & p_improve>0.05"
  double rate = 0.0;
  std::size_t n = 0;
};

struct TreeFit {
  int depth = 1;
  TreeSplit root;
  std::optional<TreeSplit> left;
  std::optional<TreeSplit> right;
  /// Left subtree leaves first, then right; within a split, <= before >.
  std::vector<TreeLeaf> leaves;
  /// Mean log-loss per row (nats) and the total.
  double log_loss = 0.0;
  double total_log_loss = 0.0;
  std::size_t n = 0;

  double predict(const std::map<std::string, double>& row) const;
};

struct TreeOptions {
  int max_depth = 2;
  /// Second-level splits must lower the total log-loss by at least this many
  /// nats. Negative selects log(n).
  double split_penalty = -1.0;
};

/// Exhaustive search over the cut grid {0.00, ..., 1.00}. The root split is
/// always present; second-level splits are kept only when they pay for the
/// penalty. Ties go to shallower trees, then earlier features, then lower cuts.
TreeFit tree_fit(const LongTable& table, const std::vector<std::string>& features, const TreeOptions& options = {});

struct DistanceSummary {
  std::string condition;  // "safe", "normal" or "all"
  std::size_t n = 0;
  double mean = 0.0;
  /// Bin b covers distances in [(b - 1/2) w, (b + 1/2) w).
  double bin_width = 0.0;
  std::vector<std::size_t> counts;
  std::vector<double> density;
  /// Distance density of a uniform choice, averaged over each record's start.
  std::vector<double> reference;
  double reference_mean = 0.0;
};

/// One summary per condition present, then "all". Start rows are ignored.
std::vector<DistanceSummary> distance_stats(const std::vector<TrialRecord>& records, const GridDomain& domain);

/// Smallest positive distance between grid points.
double grid_spacing(const GridDomain& domain);

}  // namespace safelab

#endif  // SAFELAB_ANALYSIS_HPP
