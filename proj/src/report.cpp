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

#include "safelab/report.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include "safelab/error.hpp"

namespace safelab {

AnalysisKind parse_analysis_kind(const std::string& name) {
  if (name == "logistic") return AnalysisKind::kLogistic;
  if (name == "tree") return AnalysisKind::kTree;
  if (name == "distance") return AnalysisKind::kDistance;
  if (name == "all") return AnalysisKind::kAll;
  fail(ErrorCode::kInvalidInput, "unknown analysis '" + name + "' (logistic, tree, distance, all)");
}

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

struct Group {
  std::string name;
  std::vector<TrialRecord> records;
};

std::vector<Group> groups(const std::vector<TrialRecord>& records) {
  std::vector<Group> out(3);
  out[0].name = "all";
  out[1].name = "safe";
  out[2].name = "normal";
  for (const auto& r : records) {
    out[0].records.push_back(r);
    out[r.condition == Condition::kSafe ? 1 : 2].records.push_back(r);
  }
  auto choices = [](const Group& g) {
    for (const auto& r : g.records)
      if (!r.is_start()) return true;
    return false;
  };
  if (!choices(out[1]) || !choices(out[2])) out.resize(1);
  return out;
}

void write_file(const std::string& dir, const std::string& name, const std::string& body) {
  if (dir.empty()) return;
  std::ofstream f(std::filesystem::path(dir) / name);
  f << body;
  if (!f) fail(ErrorCode::kIo, "cannot write " + (std::filesystem::path(dir) / name).string());
}

}  // namespace

std::string run_report(const std::vector<TrialRecord>& records, const GridDomain& domain,
                       const ReportOptions& options) {
  if (!options.out_dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(options.out_dir, ec);
    if (ec) fail(ErrorCode::kIo, "cannot create " + options.out_dir + ": " + ec.message());
  }
  const bool all = options.kind == AnalysisKind::kAll;
  const auto parts = groups(records);
  std::ostringstream text;
  text << "records: " << records.size() << " lines\n";
  int attempted = 0, succeeded = 0;
  std::optional<Error> first_error;
  auto attempt = [&](std::ostringstream& section, auto&& fn) {
    ++attempted;
    try {
      fn();
      ++succeeded;
    } catch (const Error& e) {
      section << "  failed (" << error_code_name(e.code()) << "): " << e.what() << "\n";
      if (!first_error) first_error = e;
    }
  };

  if (all || options.kind == AnalysisKind::kLogistic) {
    const std::vector<std::string> feats = {"safe", "maximizer", "expander"};
    std::ostringstream csv, section;
    csv << "group,term,estimate,std_error,z,n,log_likelihood\n";
    section << "\nlogistic regression of choice on set membership"
            << (options.subject_dummies ? " (subject intercepts)" : "") << "\n";
    for (const auto& g : parts) {
      section << "[" << g.name << "]\n";
      attempt(section, [&] {
        const auto table = expand_long(g.records, domain);
        const auto fit = logistic_fit(table, feats, options.subject_dummies);
        for (std::size_t j = 0; j < fit.names.size(); ++j) {
          const double z = fit.coefficients[j] / fit.standard_errors[j];
          csv << g.name << "," << fit.names[j] << "," << fmt("%.6f", fit.coefficients[j]) << ","
              << fmt("%.6f", fit.standard_errors[j]) << "," << fmt("%.3f", z) << "," << fit.n << ","
              << fmt("%.4f", fit.log_likelihood) << "\n";
          if (fit.names[j].rfind("subject:", 0) == 0) continue;
          char buf[128];
          std::snprintf(buf, sizeof buf, "  %-10s %9.3f  (SE %.3f, z %.2f)\n", fit.names[j].c_str(),
                        fit.coefficients[j], fit.standard_errors[j], z);
          section << buf;
        }
        section << "  rows " << fit.n << ", log-likelihood " << fmt("%.2f", fit.log_likelihood) << "\n";
      });
    }
    write_file(options.out_dir, "logistic.csv", csv.str());
    text << section.str();
  }

  if (all || options.kind == AnalysisKind::kTree) {
    std::ostringstream csv, section;
    csv << "group,depth,leaf,rate,n,log_loss\n";
    section << "\nlog-loss threshold tree\n";
    for (const auto& g : parts) {
      section << "[" << g.name << "]\n";
      attempt(section, [&] {
        const auto table = expand_long(g.records, domain);
        std::vector<std::string> feats = {"p_safe", "p_improve"};
        if (table.has("p_expand")) feats.push_back("p_expand");
        TreeOptions topts;
        topts.max_depth = options.tree_depth;
        const auto fit = tree_fit(table, feats, topts);
        for (const auto& l : fit.leaves)
          csv << g.name << "," << fit.depth << ",\"" << l.path << "\"," << fmt("%.6f", l.rate) << "," << l.n << ","
              << fmt("%.6f", fit.log_loss) << "\n";
        section << "  depth " << fit.depth << ", mean log-loss " << fmt("%.5f", fit.log_loss) << "\n";
        for (const auto& l : fit.leaves) {
          char buf[256];
          std::snprintf(buf, sizeof buf, "  %-40s rate %.4f  n %zu\n", l.path.c_str(), l.rate, l.n);
          section << buf;
        }
      });
    }
    write_file(options.out_dir, "tree.csv", csv.str());
    text << section.str();
  }

  if (all || options.kind == AnalysisKind::kDistance) {
    std::ostringstream csv, section;
    csv << "condition,bin,distance,count,density,reference\n";
    section << "\ndistance from start point\n";
    attempt(section, [&] {
      for (const auto& s : distance_stats(records, domain)) {
        for (std::size_t b = 0; b < s.counts.size(); ++b)
          csv << s.condition << "," << b << "," << fmt("%.6f", b * s.bin_width) << "," << s.counts[b] << ","
              << fmt("%.6f", s.density[b]) << "," << fmt("%.6f", s.reference[b]) << "\n";
        char buf[160];
        std::snprintf(buf, sizeof buf, "  %-7s n %6zu  mean %.3f  uniform reference %.3f\n", s.condition.c_str(),
                      s.n, s.mean, s.reference_mean);
        section << buf;
      }
    });
    write_file(options.out_dir, "distance.csv", csv.str());
    text << section.str();
  }

  if (attempted > 0 && succeeded == 0 && first_error) throw *first_error;
  write_file(options.out_dir, "report.txt", text.str());
  return text.str();
}

}  // namespace safelab
