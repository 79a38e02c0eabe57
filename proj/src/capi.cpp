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

#include "safelab/safelab.h"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

#include "safelab/agents.hpp"
#include "safelab/analysis.hpp"
#include "safelab/error.hpp"
#include "safelab/records.hpp"
#include "safelab/report.hpp"
#include "safelab/session.hpp"
#include "safelab/simulate.hpp"

struct safelab_config {
  safelab::TaskConfig config;
};

struct safelab_model {
  std::unique_ptr<safelab::GpModel> model;
};

struct safelab_server {
  std::unique_ptr<safelab::SessionManager> manager;
  std::unique_ptr<safelab::SessionServer> server;
};

namespace {

static_assert(static_cast<int>(safelab::ErrorCode::kInvalidInput) == SAFELAB_INVALID_INPUT);
static_assert(static_cast<int>(safelab::ErrorCode::kNumericalFailure) == SAFELAB_NUMERICAL_FAILURE);
static_assert(static_cast<int>(safelab::ErrorCode::kDataIntegrity) == SAFELAB_DATA_INTEGRITY);
static_assert(static_cast<int>(safelab::ErrorCode::kConflict) == SAFELAB_CONFLICT);
static_assert(static_cast<int>(safelab::ErrorCode::kIo) == SAFELAB_IO);

thread_local std::string last_error;

template <class Fn>
safelab_status guard(Fn&& fn) {
  try {
    fn();
    last_error.clear();
    return SAFELAB_OK;
  } catch (const safelab::Error& e) {
    last_error = e.what();
    return static_cast<safelab_status>(e.code());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
  } catch (const std::exception& e) {
    last_error = e.what();
  } catch (...) {
    last_error = "unknown failure";
  }
  return SAFELAB_INTERNAL;
}

void require(const void* p, const char* what) {
  if (!p) safelab::fail(safelab::ErrorCode::kInvalidInput, std::string(what) + " must not be null");
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) safelab::fail(safelab::ErrorCode::kIo, "cannot create " + dir + ": " + ec.message());
}

std::vector<safelab::AgentSpec> parse_agents(const std::string& list, double beta) {
  std::vector<safelab::AgentSpec> out;
  std::stringstream in(list);
  for (std::string name; std::getline(in, name, ',');) {
    if (name.empty()) continue;
    auto spec = safelab::AgentSpec::defaults(safelab::parse_agent_kind(name));
    if (beta > 0.0) spec.beta = beta;
    out.push_back(spec);
  }
  if (out.empty()) safelab::fail(safelab::ErrorCode::kInvalidInput, "no agents given");
  return out;
}

}  // namespace

extern "C" {

const char* safelab_version(void) { return "0.1.0"; }

const char* safelab_status_name(safelab_status status) {
  if (status == SAFELAB_OK) return "ok";
  if (status == SAFELAB_INTERNAL) return "internal";
  if (status >= SAFELAB_INVALID_INPUT && status <= SAFELAB_IO)
    return safelab::error_code_name(static_cast<safelab::ErrorCode>(status));
  return "unknown";
}

const char* safelab_last_error(void) { return last_error.c_str(); }

void safelab_string_free(char* s) { std::free(s); }

safelab_status safelab_config_default(int experiment, safelab_config** out) {
  return guard([&] {
    require(out, "out");
    *out = nullptr;
    auto c = std::make_unique<safelab_config>();
    c->config = safelab::TaskConfig::for_experiment(experiment);
    *out = c.release();
  });
}

safelab_status safelab_config_load(const char* path, safelab_config** out) {
  return guard([&] {
    require(path, "path");
    require(out, "out");
    *out = nullptr;
    auto c = std::make_unique<safelab_config>();
    c->config = safelab::load_config(path);
    *out = c.release();
  });
}

int safelab_config_experiment(const safelab_config* config) { return config ? config->config.experiment : 0; }

size_t safelab_config_grid_size(const safelab_config* config) {
  return config && config->config.domain ? config->config.domain->size() : 0;
}

void safelab_config_free(safelab_config* config) { delete config; }

safelab_status safelab_model_create(const safelab_config* config, double noise_var, safelab_model** out) {
  return guard([&] {
    require(config, "config");
    require(out, "out");
    *out = nullptr;
    if (!(noise_var >= 0.0)) safelab::fail(safelab::ErrorCode::kInvalidInput, "noise_var must be nonnegative");
    safelab::ObservationSet obs;
    obs.noise_var = noise_var;
    auto m = std::make_unique<safelab_model>();
    m->model = std::make_unique<safelab::GpModel>(config->config.prior(), std::move(obs));
    *out = m.release();
  });
}

safelab_status safelab_model_observe(safelab_model* model, size_t index, double y) {
  return guard([&] {
    require(model, "model");
    model->model = std::make_unique<safelab::GpModel>(model->model->with_observation(index, y));
  });
}

safelab_status safelab_model_posterior(const safelab_model* model, double* mean, double* sd, size_t n) {
  return guard([&] {
    require(model, "model");
    const auto& post = model->model->posterior();
    if (n != post.size())
      safelab::fail(safelab::ErrorCode::kInvalidInput,
                    "buffer holds " + std::to_string(n) + " entries, grid has " + std::to_string(post.size()));
    for (size_t i = 0; i < n; ++i) {
      if (mean) mean[i] = post.mean(static_cast<Eigen::Index>(i));
      if (sd) sd[i] = post.sd(static_cast<Eigen::Index>(i));
    }
  });
}

safelab_status safelab_model_features(const safelab_model* model, double j_min, double beta, int expand_samples,
                                      uint64_t seed, char** json_out) {
  return guard([&] {
    require(model, "model");
    require(json_out, "json_out");
    *json_out = nullptr;
    if (expand_samples < 0) safelab::fail(safelab::ErrorCode::kInvalidInput, "expand_samples must be >= 0");
    const auto a = safelab::assess(*model->model, j_min, {beta, expand_samples}, seed);
    *json_out = copy_string(safelab::features_json(a.features));
  });
}

void safelab_model_free(safelab_model* model) { delete model; }

void safelab_simulate_options_init(safelab_simulate_options* o) {
  if (!o) return;
  o->agents = "safeopt";
  o->runs = 10;
  o->seed = 1;
  o->beta = 0.0;
  o->expand_samples = safelab::kDefaultExpandSamples;
  o->record_features = 1;
  o->threads = 0;
}

safelab_status safelab_simulate(const safelab_config* config, const safelab_simulate_options* options,
                                const char* out_dir, char** summary_text) {
  return guard([&] {
    require(config, "config");
    require(options, "options");
    require(out_dir, "out_dir");
    if (summary_text) *summary_text = nullptr;
    if (options->expand_samples < 0) safelab::fail(safelab::ErrorCode::kInvalidInput, "expand_samples must be >= 0");
    safelab::CampaignOptions co;
    co.agents = parse_agents(options->agents ? options->agents : "", options->beta);
    co.runs = options->runs;
    co.seed = options->seed;
    co.features.expand_samples = options->expand_samples;
    co.record_features = options->record_features != 0;
    co.threads = options->threads;
    ensure_dir(out_dir);
    const auto campaign = safelab::run_campaign(config->config, co);

    const std::filesystem::path dir(out_dir);
    {
      std::ofstream f(dir / "records.jsonl");
      safelab::write_records(f, campaign.records);
      if (!f) safelab::fail(safelab::ErrorCode::kIo, "cannot write " + (dir / "records.jsonl").string());
    }
    std::ofstream csv(dir / "summary.csv");
    safelab::write_summary_csv(csv, campaign.summaries);
    const std::string text = safelab::format_summary(config->config, co, campaign.summaries);
    std::ofstream(dir / "summary.txt") << text;
    if (!csv) safelab::fail(safelab::ErrorCode::kIo, "cannot write summary into " + dir.string());
    if (summary_text) *summary_text = copy_string(text);
  });
}

void safelab_analyze_options_init(safelab_analyze_options* o) {
  if (!o) return;
  o->analysis = "all";
  o->subject_dummies = 0;
  o->tree_depth = 2;
}

safelab_status safelab_analyze(const char* records_path, const safelab_config* config,
                               const safelab_analyze_options* options, const char* out_dir, char** report_text) {
  return guard([&] {
    require(records_path, "records_path");
    require(options, "options");
    if (report_text) *report_text = nullptr;
    const auto records = safelab::read_records_file(records_path);
    if (records.empty()) safelab::fail(safelab::ErrorCode::kDataIntegrity, std::string(records_path) + " holds no records");
    safelab::TaskConfig cfg = config ? config->config : safelab::TaskConfig::for_experiment(records.front().experiment);
    for (std::size_t k = 0; k < records.size(); ++k)
      if (records[k].experiment != cfg.experiment)
        safelab::fail(safelab::ErrorCode::kDataIntegrity, "record line " + std::to_string(k + 1) +
                                                              " belongs to experiment " +
                                                              std::to_string(records[k].experiment));
    safelab::ReportOptions ro;
    ro.kind = safelab::parse_analysis_kind(options->analysis ? options->analysis : "all");
    ro.subject_dummies = options->subject_dummies != 0;
    ro.tree_depth = options->tree_depth;
    if (out_dir) ro.out_dir = out_dir;
    const std::string text = safelab::run_report(records, *cfg.domain, ro);
    if (report_text) *report_text = copy_string(text);
  });
}

void safelab_server_options_init(safelab_server_options* o) {
  if (!o) return;
  o->log_path = nullptr;
  o->static_dir = nullptr;
  o->config = nullptr;
  o->seed = 0;
  o->expand_samples = safelab::kDefaultExpandSamples;
}

safelab_status safelab_server_create(const safelab_server_options* options, safelab_server** out) {
  return guard([&] {
    require(options, "options");
    require(out, "out");
    *out = nullptr;
    safelab::SessionOptions so;
    if (options->log_path) so.log_path = options->log_path;
    so.seed = options->seed;
    so.features.expand_samples = options->expand_samples;
    if (options->config) {
      const safelab::TaskConfig custom = options->config->config;
      so.config_for = [custom](int experiment) {
        return experiment == custom.experiment ? custom : safelab::TaskConfig::for_experiment(experiment);
      };
    }
    auto s = std::make_unique<safelab_server>();
    s->manager = std::make_unique<safelab::SessionManager>(std::move(so));
    s->server = std::make_unique<safelab::SessionServer>(*s->manager, options->static_dir ? options->static_dir : "");
    *out = s.release();
  });
}

safelab_status safelab_server_bind(safelab_server* server, const char* host, int port, int* bound_port) {
  return guard([&] {
    require(server, "server");
    const int p = server->server->bind(host ? host : "0.0.0.0", port);
    if (bound_port) *bound_port = p;
  });
}

safelab_status safelab_server_run(safelab_server* server) {
  return guard([&] {
    require(server, "server");
    server->server->run();
    server->manager->flush();
  });
}

void safelab_server_stop(safelab_server* server) {
  if (server) server->server->stop();
}

void safelab_server_free(safelab_server* server) { delete server; }

}  // extern "C"
