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

// Line-delimited trial records. One JSON object per line:
//
//   {"subject":"safeopt-0003","agent":"safeopt","experiment":1,"block":2,
//    "trial":4,"condition":"safe","choice":11,"y":0.73,"status":"active",
//    "start_index":9,"threshold":0.12,"features":{...}}
//
// trial 0 is the provided start observation (status "start", no features).
// "features" holds per-grid-point arrays computed before the choice was made:
// safe, maximizer, expander (0/1), expander_count, p_safe, p_improve and,
// when forward simulation ran, p_expand.

#ifndef SAFELAB_RECORDS_HPP
#define SAFELAB_RECORDS_HPP

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "safelab/acquisition.hpp"
#include "safelab/task.hpp"

namespace safelab {

enum class RecordStatus { kStart, kActive, kCompleted, kTerminated };

const char* to_string(RecordStatus s);
RecordStatus record_status(BlockStatus s);

struct TrialRecord {
  std::string subject;
  std::string agent;
  int experiment = 1;
  int block = 0;
  int trial = 0;
  Condition condition = Condition::kSafe;
  std::size_t choice = 0;
  double y = 0.0;
  RecordStatus status = RecordStatus::kStart;
  std::size_t start_index = 0;
  std::optional<double> threshold;
  std::optional<SetFeatures> features;

  bool is_start() const { return trial == 0; }
};

std::string to_json_line(const TrialRecord& r);
std::string features_json(const SetFeatures& f);

/// Throws Error(kDataIntegrity) naming line_no on malformed input.
TrialRecord parse_record(const std::string& line, std::size_t line_no = 0);

std::vector<TrialRecord> read_records(std::istream& in);
std::vector<TrialRecord> read_records_file(const std::string& path);
void write_records(std::ostream& out, const std::vector<TrialRecord>& records);

}  // namespace safelab

#endif  // SAFELAB_RECORDS_HPP
