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

// safelab command-line tool: simulate, analyze, serve.
//
// Exit codes: 0 success, 1 usage, 2 data or I/O error, 3 numerical failure.

#include <csignal>
#include <cstdio>
#include <iostream>
#include <pthread.h>
#include <sstream>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "safelab/safelab.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

int exit_code(safelab_status s) {
  switch (s) {
    case SAFELAB_OK:
      return kExitOk;
    case SAFELAB_NUMERICAL_FAILURE:
    case SAFELAB_GENERATION_FAILURE:
    case SAFELAB_SEPARATION:
    case SAFELAB_COLLINEARITY:
      return kExitNumerical;
    default:
      return kExitData;
  }
}

int report(safelab_status s, const char* what) {
  if (s == SAFELAB_OK) return kExitOk;
  std::cerr << "safelab " << what << ": " << safelab_status_name(s) << ": " << safelab_last_error() << "\n";
  return exit_code(s);
}

struct Config {
  safelab_config* handle = nullptr;
  ~Config() { safelab_config_free(handle); }
};

safelab_status load_config(const std::string& path, int experiment, Config& out) {
  if (!path.empty()) return safelab_config_load(path.c_str(), &out.handle);
  return safelab_config_default(experiment, &out.handle);
}

struct Text {
  char* s = nullptr;
  ~Text() { safelab_string_free(s); }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Safe exploration task: agent simulations, choice analyses and the participant server."};
  app.set_version_flag("--version", safelab_version());
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "Run agents through the task and write records plus a summary.");
  int sim_experiment = 1;
  std::string sim_agents = "safeopt";
  int runs = 10;
  std::uint64_t sim_seed = 1;
  double beta = 0.0;
  std::string sim_config, sim_out = "results";
  int expand_samples = 2000;
  int threads = 0;
  bool no_features = false;
  sim->add_option("--experiment", sim_experiment, "Experiment 1 or 2")->check(CLI::IsMember({1, 2}));
  sim->add_option("--agent", sim_agents, "Comma-separated agents: safeopt, tree1, tree2, random")
      ->check([](const std::string& v) -> std::string {
        std::stringstream in(v);
        for (std::string a; std::getline(in, a, ',');)
          if (a != "safeopt" && a != "tree1" && a != "tree2" && a != "random") return "unknown agent '" + a + "'";
        return {};
      });
  sim->add_option("--runs", runs, "Simulated participants per agent")->check(CLI::PositiveNumber);
  sim->add_option("--seed", sim_seed, "Campaign seed");
  sim->add_option("--beta", beta, "Confidence multiplier (default 3)")->check(CLI::PositiveNumber);
  sim->add_option("--config", sim_config, "Task configuration file (overrides --experiment)");
  sim->add_option("--out", sim_out, "Output directory, created when missing");
  sim->add_option("--expand-samples", expand_samples, "Forward simulations for p_expand (0 disables)")
      ->check(CLI::NonNegativeNumber);
  sim->add_option("--threads", threads, "Worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
  sim->add_flag("--no-features", no_features, "Omit feature snapshots from the records");

  // analyze
  auto* ana = app.add_subcommand("analyze", "Fit the choice analyses to a record file.");
  std::string records_path, analysis = "all", ana_out = "analysis", ana_config;
  bool dummies = false;
  int depth = 2;
  ana->add_option("records", records_path, "Line-delimited trial records")->required();
  ana->add_option("--analysis", analysis, "logistic, tree, distance or all")
      ->check(CLI::IsMember({"logistic", "tree", "distance", "all"}));
  ana->add_option("--out", ana_out, "Output directory, created when missing");
  ana->add_option("--config", ana_config, "Task configuration file (default: from the records)");
  ana->add_flag("--subject-dummies", dummies, "Per-subject intercepts in the logistic model");
  ana->add_option("--depth", depth, "Maximum tree depth")->check(CLI::IsMember({1, 2}));

  // serve
  auto* srv = app.add_subcommand("serve", "Serve participant sessions over HTTP.");
  int port = 8080;
  std::string host = "0.0.0.0", static_dir, log_path = "sessions.jsonl", srv_config;
  std::uint64_t srv_seed = 0;
  int srv_expand = 2000;
  srv->add_option("--port", port, "TCP port")->check(CLI::Range(0, 65535));
  srv->add_option("--host", host, "Address to bind");
  srv->add_option("--static", static_dir, "Directory of browser client assets");
  srv->add_option("--log", log_path, "Append-only session log (empty disables)");
  srv->add_option("--seed", srv_seed, "Seed for sessions created without one");
  srv->add_option("--config", srv_config, "Task configuration for its experiment");
  srv->add_option("--expand-samples", srv_expand, "Forward simulations for p_expand")->check(CLI::NonNegativeNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  if (*sim) {
    Config cfg;
    if (const int rc = report(load_config(sim_config, sim_experiment, cfg), "config")) return rc;
    safelab_simulate_options opts;
    safelab_simulate_options_init(&opts);
    opts.agents = sim_agents.c_str();
    opts.runs = runs;
    opts.seed = sim_seed;
    opts.beta = beta;
    opts.expand_samples = expand_samples;
    opts.record_features = no_features ? 0 : 1;
    opts.threads = threads;
    Text summary;
    if (const int rc = report(safelab_simulate(cfg.handle, &opts, sim_out.c_str(), &summary.s), "simulate")) return rc;
    std::cout << summary.s << "\nrecords and summary written to " << sim_out << "\n";
    return kExitOk;
  }

  if (*ana) {
    Config cfg;
    if (!ana_config.empty())
      if (const int rc = report(safelab_config_load(ana_config.c_str(), &cfg.handle), "config")) return rc;
    safelab_analyze_options opts;
    safelab_analyze_options_init(&opts);
    opts.analysis = analysis.c_str();
    opts.subject_dummies = dummies ? 1 : 0;
    opts.tree_depth = depth;
    Text text;
    if (const int rc = report(safelab_analyze(records_path.c_str(), cfg.handle, &opts, ana_out.c_str(), &text.s),
                              "analyze"))
      return rc;
    std::cout << text.s << "\nreports written to " << ana_out << "\n";
    return kExitOk;
  }

  // serve: SIGINT and SIGTERM are taken by a watcher thread that stops the
  // server, so the log is flushed before exit.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  Config cfg;
  if (!srv_config.empty())
    if (const int rc = report(safelab_config_load(srv_config.c_str(), &cfg.handle), "config")) return rc;
  safelab_server_options opts;
  safelab_server_options_init(&opts);
  opts.log_path = log_path.c_str();
  opts.static_dir = static_dir.c_str();
  opts.config = cfg.handle;
  opts.seed = srv_seed;
  opts.expand_samples = srv_expand;
  safelab_server* server = nullptr;
  if (const int rc = report(safelab_server_create(&opts, &server), "serve")) return rc;
  int bound = 0;
  if (const int rc = report(safelab_server_bind(server, host.c_str(), port, &bound), "serve")) {
    safelab_server_free(server);
    return rc;
  }
  std::cout << "listening on http://" << host << ":" << bound << std::endl;

  std::thread watcher([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    if (sig != 0) safelab_server_stop(server);
  });
  const safelab_status status = safelab_server_run(server);
  // Wake the watcher if the server ended on its own.
  pthread_kill(watcher.native_handle(), SIGTERM);
  watcher.join();
  safelab_server_free(server);
  std::cout << "server stopped" << std::endl;
  return report(status, "serve");
}
