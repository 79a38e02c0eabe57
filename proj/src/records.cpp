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

#include "safelab/records.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>

#include <json.hpp>

#include "safelab/error.hpp"

namespace safelab {

using nlohmann::json;

const char* to_string(RecordStatus s) {
  switch (s) {
    case RecordStatus::kStart: return "start";
    case RecordStatus::kActive: return "active";
    case RecordStatus::kCompleted: return "completed";
    case RecordStatus::kTerminated: return "terminated";
  }
  return "?";
}

RecordStatus record_status(BlockStatus s) {
  switch (s) {
    case BlockStatus::kActive: return RecordStatus::kActive;
    case BlockStatus::kCompleted: return RecordStatus::kCompleted;
    case BlockStatus::kTerminated: return RecordStatus::kTerminated;
  }
  return RecordStatus::kActive;
}

namespace {

json mask_json(const Mask& m) {
  json a = json::array();
  for (bool b : m) a.push_back(b ? 1 : 0);
  return a;
}

json vec_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

json features_object(const SetFeatures& f) {
  json j = json::object();
  j["safe"] = mask_json(f.safe);
  j["maximizer"] = mask_json(f.maximizer);
  j["expander"] = mask_json(f.expander);
  j["expander_count"] = f.expander_count;
  j["p_safe"] = vec_json(f.p_safe);
  j["p_improve"] = vec_json(f.p_improve);
  if (f.p_expand.size() > 0) j["p_expand"] = vec_json(f.p_expand);
  return j;
}

[[noreturn]] void bad_line(std::size_t line_no, const std::string& what) {
  fail(ErrorCode::kDataIntegrity, "record line " + std::to_string(line_no) + ": " + what);
}

Mask parse_mask(const json& a, std::size_t line_no, const char* name) {
  if (!a.is_array()) bad_line(line_no, std::string("features.") + name + " must be an array");
  Mask m;
  m.reserve(a.size());
  for (const auto& v : a) m.push_back(v.get<int>() != 0);
  return m;
}

Eigen::VectorXd parse_vec(const json& a, std::size_t line_no, const char* name) {
  if (!a.is_array()) bad_line(line_no, std::string("features.") + name + " must be an array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) v(static_cast<Eigen::Index>(i)) = a[i].get<double>();
  return v;
}

}  // namespace

std::string features_json(const SetFeatures& f) { return features_object(f).dump(); }

std::string to_json_line(const TrialRecord& r) {
  // ordered_json keeps the documented field order stable on disk.
  nlohmann::ordered_json j;
  j["subject"] = r.subject;
  j["agent"] = r.agent;
  j["experiment"] = r.experiment;
  j["block"] = r.block;
  j["trial"] = r.trial;
  j["condition"] = to_string(r.condition);
  j["choice"] = r.choice;
  j["y"] = r.y;
  j["status"] = to_string(r.status);
  j["start_index"] = r.start_index;
  if (r.threshold && std::isfinite(*r.threshold))
    j["threshold"] = *r.threshold;
  else
    j["threshold"] = nullptr;
  if (r.features) j["features"] = features_object(*r.features);
  return j.dump();
}

TrialRecord parse_record(const std::string& line, std::size_t line_no) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    bad_line(line_no, std::string("not valid JSON (") + e.what() + ")");
  }
  if (!j.is_object()) bad_line(line_no, "expected a JSON object");

  TrialRecord r;
  try {
    r.subject = j.at("subject").is_string() ? j.at("subject").get<std::string>() : j.at("subject").dump();
    r.agent = j.value("agent", std::string("unknown"));
    r.experiment = j.at("experiment").get<int>();
    r.block = j.at("block").get<int>();
    r.trial = j.at("trial").get<int>();
    const auto cond = j.at("condition").get<std::string>();
    if (cond == "safe")
      r.condition = Condition::kSafe;
    else if (cond == "normal")
      r.condition = Condition::kNormal;
    else
      bad_line(line_no, "condition must be safe or normal");
    const long long choice = j.at("choice").get<long long>();
    if (choice < 0) bad_line(line_no, "negative choice index");
    r.choice = static_cast<std::size_t>(choice);
    r.y = j.at("y").get<double>();
    const auto status = j.at("status").get<std::string>();
    if (status == "start")
      r.status = RecordStatus::kStart;
    else if (status == "active")
      r.status = RecordStatus::kActive;
    else if (status == "completed")
      r.status = RecordStatus::kCompleted;
    else if (status == "terminated")
      r.status = RecordStatus::kTerminated;
    else
      bad_line(line_no, "unknown status '" + status + "'");
    const long long start = j.at("start_index").get<long long>();
    if (start < 0) bad_line(line_no, "negative start_index");
    r.start_index = static_cast<std::size_t>(start);
    if (j.contains("threshold") && !j.at("threshold").is_null()) r.threshold = j.at("threshold").get<double>();
    if (j.contains("features") && !j.at("features").is_null()) {
      const json& fj = j.at("features");
      SetFeatures f;
      f.safe = parse_mask(fj.at("safe"), line_no, "safe");
      f.maximizer = parse_mask(fj.at("maximizer"), line_no, "maximizer");
      f.expander = parse_mask(fj.at("expander"), line_no, "expander");
      f.expander_count = fj.at("expander_count").get<std::vector<int>>();
      f.p_safe = parse_vec(fj.at("p_safe"), line_no, "p_safe");
      f.p_improve = parse_vec(fj.at("p_improve"), line_no, "p_improve");
      if (fj.contains("p_expand")) f.p_expand = parse_vec(fj.at("p_expand"), line_no, "p_expand");
      f.threshold = r.threshold.value_or(-std::numeric_limits<double>::infinity());
      const std::size_t n = f.safe.size();
      if (f.maximizer.size() != n || f.expander.size() != n || f.expander_count.size() != n ||
          static_cast<std::size_t>(f.p_safe.size()) != n || static_cast<std::size_t>(f.p_improve.size()) != n ||
          (f.p_expand.size() != 0 && static_cast<std::size_t>(f.p_expand.size()) != n))
        bad_line(line_no, "feature arrays differ in length");
      r.features = std::move(f);
    }
  } catch (const json::exception& e) {
    bad_line(line_no, std::string("missing or mistyped field (") + e.what() + ")");
  }
  if (r.trial < 0) bad_line(line_no, "negative trial");
  if ((r.trial == 0) != (r.status == RecordStatus::kStart))
    bad_line(line_no, "trial 0 must be exactly the start record");
  return r;
}

std::vector<TrialRecord> read_records(std::istream& in) {
  std::vector<TrialRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(parse_record(line, line_no));
  }
  return out;
}

std::vector<TrialRecord> read_records_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open records file '" + path + "'");
  return read_records(in);
}

void write_records(std::ostream& out, const std::vector<TrialRecord>& records) {
  for (const auto& r : records) out << to_json_line(r) << '\n';
}

}  // namespace safelab
