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

// Runs analyses over a record file and writes one CSV per analysis plus a
// plain-text report.

#ifndef SAFELAB_REPORT_HPP
#define SAFELAB_REPORT_HPP

#include <string>
#include <vector>

#include "safelab/analysis.hpp"

namespace safelab {

enum class AnalysisKind { kLogistic, kTree, kDistance, kAll };

AnalysisKind parse_analysis_kind(const std::string& name);

struct ReportOptions {
  AnalysisKind kind = AnalysisKind::kAll;
  bool subject_dummies = false;
  int tree_depth = 2;
  /// Directory for <analysis>.csv and report.txt; empty writes nothing.
  std::string out_dir;
};

/// Fits are run on all choice records and, when both conditions occur, on
/// each condition separately. A fit that fails for one group is reported as
/// such; the call throws only when every requested fit failed.
std::string run_report(const std::vector<TrialRecord>& records, const GridDomain& domain,
                       const ReportOptions& options);

}  // namespace safelab

#endif  // SAFELAB_REPORT_HPP
