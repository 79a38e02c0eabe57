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

#include "safelab/analysis.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <cmath>
#include <limits>
#include <unordered_map>

#include <Eigen/Dense>

#include "safelab/error.hpp"

namespace safelab {

const std::vector<std::string> kFeatureColumns = {"safe",     "maximizer", "expander", "expander_count",
                                                  "p_safe",   "p_improve", "p_expand"};

const std::vector<double>& LongTable::column(const std::string& name) const {
  auto it = columns.find(name);
  if (it == columns.end()) fail(ErrorCode::kInvalidInput, "no column named '" + name + "'");
  return it->second;
}

std::vector<std::size_t> LongTable::subject_index(std::vector<std::string>* subjects) const {
  std::unordered_map<std::string, std::size_t> ids;
  std::vector<std::string> names;
  std::vector<std::size_t> per_trial(trials.size());
  for (std::size_t t = 0; t < trials.size(); ++t) {
    auto [it, inserted] = ids.emplace(trials[t].subject, names.size());
    if (inserted) names.push_back(trials[t].subject);
    per_trial[t] = it->second;
  }
  std::vector<std::size_t> out(rows());
  for (std::size_t r = 0; r < rows(); ++r) out[r] = per_trial[trial_of_row[r]];
  if (subjects) *subjects = std::move(names);
  return out;
}

LongTable expand_long(const std::vector<TrialRecord>& records, const GridDomain& domain) {
  const std::size_t n = domain.size();
  LongTable table;
  bool with_expand = true;
  std::size_t choices = 0;
  for (std::size_t k = 0; k < records.size(); ++k) {
    const auto& r = records[k];
    if (r.is_start()) continue;
    const std::string where = "record " + std::to_string(k + 1) + " (subject " + r.subject + ", block " +
                              std::to_string(r.block) + ", trial " + std::to_string(r.trial) + ")";
    if (!r.features) fail(ErrorCode::kDataIntegrity, where + " has no features");
    if (r.features->size() != n)
      fail(ErrorCode::kDataIntegrity, where + " has features for " + std::to_string(r.features->size()) +
                                          " points, grid has " + std::to_string(n));
    if (r.choice >= n) fail(ErrorCode::kDataIntegrity, where + " chose index " + std::to_string(r.choice) +
                                                           " outside the features");
    with_expand = with_expand && r.features->p_expand.size() == static_cast<Eigen::Index>(n);
    ++choices;
  }

  const std::size_t rows = choices * n;
  table.trials.reserve(choices);
  table.trial_of_row.reserve(rows);
  table.point.reserve(rows);
  table.outcome.reserve(rows);
  for (const auto& name : kFeatureColumns) {
    if (name == "p_expand" && (!with_expand || choices == 0)) continue;
    table.columns[name].reserve(rows);
  }
  auto& safe = table.columns["safe"];
  auto& maximizer = table.columns["maximizer"];
  auto& expander = table.columns["expander"];
  auto& count = table.columns["expander_count"];
  auto& p_safe = table.columns["p_safe"];
  auto& p_improve = table.columns["p_improve"];
  std::vector<double>* p_expand = table.has("p_expand") ? &table.columns["p_expand"] : nullptr;

  for (const auto& r : records) {
    if (r.is_start()) continue;
    const auto& f = *r.features;
    const auto t = static_cast<std::uint32_t>(table.trials.size());
    for (std::size_t i = 0; i < n; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      table.trial_of_row.push_back(t);
      table.point.push_back(static_cast<std::uint32_t>(i));
      table.outcome.push_back(i == r.choice ? 1 : 0);
      safe.push_back(f.safe[i] ? 1.0 : 0.0);
      maximizer.push_back(f.maximizer[i] ? 1.0 : 0.0);
      expander.push_back(f.expander[i] ? 1.0 : 0.0);
      count.push_back(static_cast<double>(f.expander_count[i]));
      p_safe.push_back(f.p_safe(ii));
      p_improve.push_back(f.p_improve(ii));
      if (p_expand) p_expand->push_back(f.p_expand(ii));
    }
    TrialRecord meta = r;
    meta.features.reset();
    table.trials.push_back(std::move(meta));
  }
  return table;
}

std::vector<TrialRecord> collapse_long(const LongTable& table) {
  std::vector<TrialRecord> out = table.trials;
  std::vector<std::size_t> first(out.size(), table.rows()), count(out.size(), 0);
  for (std::size_t r = 0; r < table.rows(); ++r) {
    const auto t = table.trial_of_row[r];
    first[t] = std::min(first[t], r);
    ++count[t];
  }
  const auto* p_expand = table.has("p_expand") ? &table.column("p_expand") : nullptr;
  for (std::size_t t = 0; t < out.size(); ++t) {
    const std::size_t n = count[t];
    const auto ni = static_cast<Eigen::Index>(n);
    SetFeatures f;
    f.safe.resize(n);
    f.maximizer.resize(n);
    f.expander.resize(n);
    f.expander_count.resize(n);
    f.p_safe.resize(ni);
    f.p_improve.resize(ni);
    if (p_expand) f.p_expand.resize(ni);
    f.threshold = out[t].threshold.value_or(-std::numeric_limits<double>::infinity());
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t r = first[t] + k;
      const std::size_t i = table.point[r];
      const auto ii = static_cast<Eigen::Index>(i);
      if (i >= n) fail(ErrorCode::kDataIntegrity, "long table rows are not grouped by trial");
      f.safe[i] = table.column("safe")[r] != 0.0;
      f.maximizer[i] = table.column("maximizer")[r] != 0.0;
      f.expander[i] = table.column("expander")[r] != 0.0;
      f.expander_count[i] = static_cast<int>(table.column("expander_count")[r]);
      f.p_safe(ii) = table.column("p_safe")[r];
      f.p_improve(ii) = table.column("p_improve")[r];
      if (p_expand) f.p_expand(ii) = (*p_expand)[r];
      if (table.outcome[r]) out[t].choice = i;
    }
    out[t].features = std::move(f);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Logistic regression

double LogisticFit::coefficient(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return coefficients[i];
  fail(ErrorCode::kNotFound, "no coefficient named '" + name + "'");
}

double LogisticFit::standard_error(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return standard_errors[i];
  fail(ErrorCode::kNotFound, "no coefficient named '" + name + "'");
}

namespace {

double log1pexp(double eta) { return std::max(eta, 0.0) + std::log1p(std::exp(-std::abs(eta))); }

double sigmoid(double eta) {
  if (eta >= 0) return 1.0 / (1.0 + std::exp(-eta));
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

}  // namespace

LogisticFit logistic_fit(const LongTable& table, const std::vector<std::string>& features, bool subject_dummies,
                         const LogisticOptions& options) {
  const std::size_t n = table.rows();
  std::size_t positives = 0;
  for (auto o : table.outcome) positives += o;
  if (positives == 0 || positives == n)
    fail(ErrorCode::kInvalidInput, "logistic fit needs both chosen and unchosen rows");

  LogisticFit fit;
  fit.n = n;
  fit.names.push_back("intercept");
  for (const auto& f : features) fit.names.push_back(f);
  std::vector<std::size_t> subject;
  std::vector<std::string> subjects;
  if (subject_dummies) {
    subject = table.subject_index(&subjects);
    for (std::size_t s = 1; s < subjects.size(); ++s) fit.names.push_back("subject:" + subjects[s]);
  }
  const auto p = static_cast<Eigen::Index>(fit.names.size());
  const auto rows = static_cast<Eigen::Index>(n);

  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(rows, p);
  x.col(0).setOnes();
  for (std::size_t j = 0; j < features.size(); ++j) {
    const auto& col = table.column(features[j]);
    x.col(static_cast<Eigen::Index>(j + 1)) = Eigen::Map<const Eigen::VectorXd>(col.data(), rows);
  }
  const auto dummy0 = static_cast<Eigen::Index>(features.size() + 1);
  if (subject_dummies)
    for (Eigen::Index r = 0; r < rows; ++r)
      if (const auto s = subject[static_cast<std::size_t>(r)]; s > 0) x(r, dummy0 + static_cast<Eigen::Index>(s) - 1) = 1.0;
  Eigen::VectorXd y(rows);
  for (Eigen::Index r = 0; r < rows; ++r) y(r) = table.outcome[static_cast<std::size_t>(r)];

  // Rank check on the column-normalised Gram matrix.
  const Eigen::MatrixXd gram = x.transpose() * x;
  for (Eigen::Index j = 0; j < p; ++j)
    if (!(gram(j, j) > 0.0))
      fail(ErrorCode::kCollinearity, "column '" + fit.names[static_cast<std::size_t>(j)] + "' is identically zero");
  const Eigen::VectorXd scale = gram.diagonal().cwiseSqrt().cwiseInverse();
  const Eigen::MatrixXd corr = scale.asDiagonal() * gram * scale.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(corr, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < 1e-10)
    fail(ErrorCode::kCollinearity, "design matrix is rank deficient (smallest normalised eigenvalue " +
                                       std::to_string(eig.eigenvalues().minCoeff()) + ")");

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  Eigen::MatrixXd info(p, p);
  Eigen::VectorXd eta(rows), w(rows), resid(rows);
  auto evaluate = [&] {
    eta = x * beta;
    for (Eigen::Index r = 0; r < rows; ++r) {
      const double mu = sigmoid(eta(r));
      w(r) = mu * (1.0 - mu);
      resid(r) = y(r) - mu;
    }
    info = x.transpose() * w.asDiagonal() * x;
  };

  for (fit.iterations = 1; fit.iterations <= options.max_iterations; ++fit.iterations) {
    evaluate();
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
      fail(ErrorCode::kSeparation, "information matrix degenerated; outcome is separated by the features");
    const Eigen::VectorXd step = ldlt.solve(x.transpose() * resid);
    if (!step.allFinite()) fail(ErrorCode::kSeparation, "Newton step is not finite; outcome is separated");
    beta += step;
    if (beta.cwiseAbs().maxCoeff() > options.divergence_bound)
      fail(ErrorCode::kSeparation, "coefficients diverge; outcome is separated by the features");
    if (step.cwiseAbs().maxCoeff() < options.tolerance) {
      fit.converged = true;
      break;
    }
  }
  if (!fit.converged)
    fail(ErrorCode::kSeparation,
         "no convergence after " + std::to_string(options.max_iterations) + " iterations; outcome may be separated");

  evaluate();
  Eigen::LLT<Eigen::MatrixXd> llt(info);
  if (llt.info() != Eigen::Success) fail(ErrorCode::kCollinearity, "information matrix is singular at the optimum");
  const Eigen::MatrixXd cov = llt.solve(Eigen::MatrixXd::Identity(p, p));
  double ll = 0.0;
  for (Eigen::Index r = 0; r < rows; ++r) ll += y(r) * eta(r) - log1pexp(eta(r));
  fit.log_likelihood = ll;
  fit.coefficients.assign(beta.data(), beta.data() + p);
  fit.standard_errors.resize(static_cast<std::size_t>(p));
  for (Eigen::Index j = 0; j < p; ++j) fit.standard_errors[static_cast<std::size_t>(j)] = std::sqrt(cov(j, j));
  return fit;
}

// ---------------------------------------------------------------------------
// Threshold trees

namespace {

constexpr int kCuts = 101;     // cut k = k / 100, k = 0..100
constexpr int kBuckets = 102;  // bucket k holds (k-1)/100 < x <= k/100; 101 holds x > 1

int bucket(double x) {
  if (!(x > 0.0)) return 0;
  if (x > 1.0) return kBuckets - 1;
  int k = static_cast<int>(std::ceil(x * 100.0));
  k = std::clamp(k, 0, 100);
  while (k > 0 && x <= (k - 1) / 100.0) --k;
  while (k < 100 && x > k / 100.0) ++k;
  return k;
}

struct Counts {
  double n = 0.0;
  double pos = 0.0;
};

double node_loss(Counts c) {
  double loss = 0.0;
  if (c.pos > 0.0) loss -= c.pos * std::log(c.pos / c.n);
  if (c.n - c.pos > 0.0) loss -= (c.n - c.pos) * std::log((c.n - c.pos) / c.n);
  return loss;
}

using Hist = std::array<Counts, kBuckets>;

struct BestSplit {
  int feature = 0;
  int cut = 0;
  double loss = std::numeric_limits<double>::infinity();
};

// Best split of a node described by one histogram per feature.
BestSplit best_split(const std::vector<Hist>& hists) {
  BestSplit best;
  for (std::size_t g = 0; g < hists.size(); ++g) {
    Counts total;
    for (const auto& c : hists[g]) {
      total.n += c.n;
      total.pos += c.pos;
    }
    Counts left;
    for (int k = 0; k < kCuts; ++k) {
      left.n += hists[g][static_cast<std::size_t>(k)].n;
      left.pos += hists[g][static_cast<std::size_t>(k)].pos;
      const double loss = node_loss(left) + node_loss({total.n - left.n, total.pos - left.pos});
      if (loss < best.loss - 1e-9 * std::max(1.0, loss)) best = {static_cast<int>(g), k, loss};
    }
  }
  return best;
}

std::string side(const TreeSplit& s, bool right) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%.2f", right ? ">" : "<=", s.cut());
  return s.feature + buf;
}

}  // namespace

double TreeFit::predict(const std::map<std::string, double>& row) const {
  auto value = [&](const TreeSplit& s) {
    auto it = row.find(s.feature);
    if (it == row.end()) fail(ErrorCode::kInvalidInput, "row lacks feature '" + s.feature + "'");
    return bucket(it->second) > s.cut_index;
  };
  std::size_t leaf = 0;
  const bool go_right = value(root);
  const std::size_t left_leaves = left ? 2 : 1;
  if (!go_right) {
    leaf = left && value(*left) ? 1 : 0;
  } else {
    leaf = left_leaves + (right && value(*right) ? 1 : 0);
  }
  return leaves.at(leaf).rate;
}

TreeFit tree_fit(const LongTable& table, const std::vector<std::string>& features, const TreeOptions& options) {
  const std::size_t n = table.rows();
  if (n == 0) fail(ErrorCode::kInvalidInput, "tree fit needs a nonempty table");
  if (features.empty()) fail(ErrorCode::kInvalidInput, "tree fit needs at least one feature");
  if (options.max_depth != 1 && options.max_depth != 2) fail(ErrorCode::kInvalidInput, "max_depth must be 1 or 2");
  const std::size_t nf = features.size();
  const double penalty = options.split_penalty < 0.0 ? std::log(static_cast<double>(n)) : options.split_penalty;

  std::vector<std::vector<std::uint8_t>> b(nf, std::vector<std::uint8_t>(n));
  for (std::size_t f = 0; f < nf; ++f) {
    const auto& col = table.column(features[f]);
    for (std::size_t r = 0; r < n; ++r) b[f][r] = static_cast<std::uint8_t>(bucket(col[r]));
  }

  // joint[f][g][kf][kg]: counts by bucket pair. The diagonal f == g carries
  // the one-feature histograms.
  std::vector<std::vector<std::vector<Hist>>> joint(nf, std::vector<std::vector<Hist>>(nf, std::vector<Hist>(kBuckets)));
  for (std::size_t r = 0; r < n; ++r) {
    const double pos = table.outcome[r];
    for (std::size_t f = 0; f < nf; ++f)
      for (std::size_t g = 0; g < nf; ++g) {
        auto& c = joint[f][g][b[f][r]][b[g][r]];
        c.n += 1.0;
        c.pos += pos;
      }
  }

  struct Candidate {
    double objective = std::numeric_limits<double>::infinity();
    double loss = 0.0;
    int splits = 0;
    int feature = 0, cut = 0;
    std::optional<BestSplit> left, right;
  } best;

  for (std::size_t f = 0; f < nf; ++f) {
    // Running per-g histograms of the left child as the root cut moves up.
    std::vector<Hist> left_h(nf), total_h(nf);
    for (std::size_t g = 0; g < nf; ++g)
      for (int kf = 0; kf < kBuckets; ++kf)
        for (int kg = 0; kg < kBuckets; ++kg) {
          total_h[g][static_cast<std::size_t>(kg)].n += joint[f][g][static_cast<std::size_t>(kf)][static_cast<std::size_t>(kg)].n;
          total_h[g][static_cast<std::size_t>(kg)].pos += joint[f][g][static_cast<std::size_t>(kf)][static_cast<std::size_t>(kg)].pos;
        }
    for (int k = 0; k < kCuts; ++k) {
      std::vector<Hist> right_h(nf);
      for (std::size_t g = 0; g < nf; ++g) {
        for (int kg = 0; kg < kBuckets; ++kg) {
          const auto& add = joint[f][g][static_cast<std::size_t>(k)][static_cast<std::size_t>(kg)];
          left_h[g][static_cast<std::size_t>(kg)].n += add.n;
          left_h[g][static_cast<std::size_t>(kg)].pos += add.pos;
          right_h[g][static_cast<std::size_t>(kg)].n = total_h[g][static_cast<std::size_t>(kg)].n - left_h[g][static_cast<std::size_t>(kg)].n;
          right_h[g][static_cast<std::size_t>(kg)].pos = total_h[g][static_cast<std::size_t>(kg)].pos - left_h[g][static_cast<std::size_t>(kg)].pos;
        }
      }
      Counts lc, rc;
      for (const auto& c : left_h[0]) lc.n += c.n, lc.pos += c.pos;
      for (const auto& c : right_h[0]) rc.n += c.n, rc.pos += c.pos;

      Candidate cand;
      cand.feature = static_cast<int>(f);
      cand.cut = k;
      double left_loss = node_loss(lc), right_loss = node_loss(rc);
      if (options.max_depth == 2) {
        if (lc.n > 0) {
          const auto s = best_split(left_h);
          if (left_loss - s.loss > penalty) {
            cand.left = s;
            left_loss = s.loss;
          }
        }
        if (rc.n > 0) {
          const auto s = best_split(right_h);
          if (right_loss - s.loss > penalty) {
            cand.right = s;
            right_loss = s.loss;
          }
        }
      }
      cand.splits = 1 + (cand.left ? 1 : 0) + (cand.right ? 1 : 0);
      cand.loss = left_loss + right_loss;
      cand.objective = cand.loss + penalty * (cand.splits - 1);
      const double eps = 1e-9 * std::max(1.0, std::abs(cand.objective));
      const bool better = cand.objective < best.objective - eps ||
                          (std::abs(cand.objective - best.objective) <= eps && cand.splits < best.splits);
      if (better) best = cand;
    }
  }

  TreeFit fit;
  fit.n = n;
  fit.root = {features[static_cast<std::size_t>(best.feature)], best.cut};
  if (best.left) fit.left = TreeSplit{features[static_cast<std::size_t>(best.left->feature)], best.left->cut};
  if (best.right) fit.right = TreeSplit{features[static_cast<std::size_t>(best.right->feature)], best.right->cut};
  fit.depth = (fit.left || fit.right) ? 2 : 1;

  // Leaf statistics from a direct pass over the rows.
  auto col_index = [&](const TreeSplit& s) {
    return static_cast<std::size_t>(std::find(features.begin(), features.end(), s.feature) - features.begin());
  };
  const std::size_t left_leaves = fit.left ? 2 : 1;
  std::vector<Counts> leaf(left_leaves + (fit.right ? 2 : 1));
  Counts all;
  for (std::size_t r = 0; r < n; ++r) {
    std::size_t l;
    if (b[col_index(fit.root)][r] <= fit.root.cut_index) {
      l = fit.left && b[col_index(*fit.left)][r] > fit.left->cut_index ? 1 : 0;
    } else {
      l = left_leaves + (fit.right && b[col_index(*fit.right)][r] > fit.right->cut_index ? 1 : 0);
    }
    leaf[l].n += 1.0;
    leaf[l].pos += table.outcome[r];
    all.n += 1.0;
    all.pos += table.outcome[r];
  }
  std::vector<std::string> paths;
  const std::string root_l = side(fit.root, false), root_r = side(fit.root, true);
  if (fit.left) {
    paths.push_back(root_l + " & " + side(*fit.left, false));
    paths.push_back(root_l + " & " + side(*fit.left, true));
  } else {
    paths.push_back(root_l);
  }
  if (fit.right) {
    paths.push_back(root_r + " & " + side(*fit.right, false));
    paths.push_back(root_r + " & " + side(*fit.right, true));
  } else {
    paths.push_back(root_r);
  }
  double total = 0.0;
  for (std::size_t l = 0; l < leaf.size(); ++l) {
    const double rate = leaf[l].n > 0 ? leaf[l].pos / leaf[l].n : all.pos / all.n;
    fit.leaves.push_back({paths[l], rate, static_cast<std::size_t>(leaf[l].n)});
    total += node_loss(leaf[l]);
  }
  fit.total_log_loss = total;
  fit.log_loss = total / static_cast<double>(n);
  return fit;
}

// ---------------------------------------------------------------------------
// Distances

double grid_spacing(const GridDomain& domain) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < domain.size(); ++i)
    for (std::size_t j = i + 1; j < domain.size(); ++j) best = std::min(best, domain.distance(i, j));
  return std::isfinite(best) ? best : 1.0;
}

std::vector<DistanceSummary> distance_stats(const std::vector<TrialRecord>& records, const GridDomain& domain) {
  const std::size_t n = domain.size();
  const double w = grid_spacing(domain);
  double max_d = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) max_d = std::max(max_d, domain.distance(i, j));
  auto bin = [&](double d) { return static_cast<std::size_t>(std::floor(d / w + 0.5)); };
  const std::size_t bins = bin(max_d) + 1;

  std::map<std::size_t, std::pair<std::vector<double>, double>> reference_cache;
  auto reference = [&](std::size_t start) -> const std::pair<std::vector<double>, double>& {
    auto it = reference_cache.find(start);
    if (it != reference_cache.end()) return it->second;
    std::vector<double> density(bins, 0.0);
    double mean = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double d = domain.distance(start, j);
      density[bin(d)] += 1.0;
      mean += d;
    }
    for (auto& v : density) v /= static_cast<double>(n);
    mean /= static_cast<double>(n);
    return reference_cache.emplace(start, std::make_pair(std::move(density), mean)).first->second;
  };

  std::vector<DistanceSummary> out;
  auto group = [&](const std::string& name, auto&& keep) {
    DistanceSummary s;
    s.condition = name;
    s.bin_width = w;
    s.counts.assign(bins, 0);
    s.reference.assign(bins, 0.0);
    double sum = 0.0, ref_mean = 0.0;
    std::map<std::size_t, std::size_t> starts;
    for (std::size_t k = 0; k < records.size(); ++k) {
      const auto& r = records[k];
      if (r.is_start() || !keep(r)) continue;
      if (r.choice >= n || r.start_index >= n)
        fail(ErrorCode::kDataIntegrity, "record " + std::to_string(k + 1) + " references a point outside the grid");
      const double d = domain.distance(r.start_index, r.choice);
      ++s.counts[bin(d)];
      sum += d;
      ++starts[r.start_index];
      ++s.n;
    }
    if (s.n == 0) return;
    const double nn = static_cast<double>(s.n);
    s.mean = sum / nn;
    s.density.resize(bins);
    for (std::size_t b = 0; b < bins; ++b) s.density[b] = static_cast<double>(s.counts[b]) / nn;
    for (const auto& [start, count] : starts) {
      const auto& ref = reference(start);
      const double weight = static_cast<double>(count) / nn;
      for (std::size_t b = 0; b < bins; ++b) s.reference[b] += weight * ref.first[b];
      ref_mean += weight * ref.second;
    }
    s.reference_mean = ref_mean;
    out.push_back(std::move(s));
  };
  group("safe", [](const TrialRecord& r) { return r.condition == Condition::kSafe; });
  group("normal", [](const TrialRecord& r) { return r.condition == Condition::kNormal; });
  if (out.empty()) fail(ErrorCode::kInvalidInput, "no choice records to summarise");
  group("all", [](const TrialRecord&) { return true; });
  return out;
}

}  // namespace safelab
