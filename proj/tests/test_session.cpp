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

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "safelab/agents.hpp"
#include "safelab/error.hpp"
#include "safelab/session.hpp"

// After Eigen: a system header pulled in by httplib defines macros that
// collide with Eigen's parameter names.
#include <httplib.h>
#include <json.hpp>

using namespace safelab;
using json = nlohmann::json;

namespace {

TaskConfig noiseless(int experiment) {
  auto c = TaskConfig::for_experiment(experiment);
  c.noise_sd = 0.0;
  return c;
}

SessionOptions quiet_options(std::string log = {}) {
  SessionOptions o;
  o.log_path = std::move(log);
  o.seed = 99;
  o.features.expand_samples = 0;
  o.config_for = noiseless;
  return o;
}

std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("safelab-test-" + name + "-" + std::to_string(::getpid()));
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kIo;
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

// Rebuilds the session's current block from its seed so tests can pick
// points by latent value.
BlockState mirror_block(const TaskConfig& config, std::uint64_t seed, int b) {
  const auto plan = plan_subject(config, seed);
  return make_block(config, b, plan.block_seeds[static_cast<std::size_t>(b)], plan.safe_flags[static_cast<std::size_t>(b)]);
}

struct RunningServer {
  SessionServer server;
  int port;
  std::thread thread;
  RunningServer(SessionManager& m) : server(m), port(server.bind("127.0.0.1", 0)) {
    thread = std::thread([this] { server.run(); });
    server.wait_until_ready();
  }
  ~RunningServer() {
    server.stop();
    thread.join();
  }
};

}  // namespace

TEST_SUITE("session") {

TEST_CASE("create describes the grid and the first block") {
  SessionManager m(quiet_options());
  const auto a = json::parse(m.create(1, 5));
  CHECK(a["grid"]["size"] == 21);
  CHECK(a["grid"]["dim"] == 1);
  CHECK(a["block"]["threshold_visible"] == true);
  CHECK(a["block"].contains("threshold"));
  CHECK(a["block"]["trials_remaining"] == 10);
  CHECK(a["blocks_total"] == 9);
  CHECK(a["block"]["observations"].size() == 1);
  CHECK(code_of([&] { m.create(7); }) == ErrorCode::kInvalidInput);

  // Experiment 2 blocks come in a permuted order; find a normal one first.
  bool saw_normal = false;
  for (std::uint64_t seed = 0; seed < 20 && !saw_normal; ++seed) {
    const auto b = json::parse(m.create(2, seed));
    CHECK(b["grid"]["size"] == 441);
    if (b["block"]["condition"] == "normal") {
      saw_normal = true;
      CHECK(b["block"]["threshold_visible"] == false);
      CHECK_FALSE(b["block"].contains("threshold"));
    } else {
      CHECK(b["block"]["threshold_visible"] == true);
    }
  }
  CHECK(saw_normal);
  // Seeds are reproducible; ids are unique.
  const auto c = json::parse(m.create(1, 5));
  CHECK(c["session_id"] != a["session_id"]);
  CHECK(c["block"] == a["block"]);
}

TEST_CASE("choices drive the block state machine") {
  SessionManager m(quiet_options());
  const auto created = json::parse(m.create(1, 11));
  const std::string id = created["session_id"];
  const auto cfg = noiseless(1);

  CHECK(code_of([&] { m.submit("nope", 0); }) == ErrorCode::kNotFound);
  CHECK(code_of([&] { m.submit(id, 21); }) == ErrorCode::kInvalidInput);
  CHECK(code_of([&] { m.submit(id, -1); }) == ErrorCode::kInvalidInput);

  // Block 0: revisit the start ten times; noiseless outputs stay above the line.
  const auto b0 = mirror_block(cfg, 11, 0);
  json r;
  for (int t = 1; t <= 10; ++t) {
    r = json::parse(m.submit(id, static_cast<long long>(b0.start_index)));
    CHECK(r["request_id"] == t);
    if (t < 10) CHECK(r["status"] == "active");
  }
  CHECK(r["status"] == "completed");
  CHECK(r["next_block"] == true);
  CHECK(r["blocks_done"] == 1);
  CHECK(r["block"]["index"] == 1);
  CHECK(r["total_score"].get<double>() == doctest::Approx(11 * b0.latent(static_cast<Eigen::Index>(b0.start_index))));

  // Block 1: the lowest point is below the median threshold.
  const auto b1 = mirror_block(cfg, 11, 1);
  Eigen::Index low;
  b1.latent.minCoeff(&low);
  r = json::parse(m.submit(id, low));
  CHECK(r["status"] == "terminated");
  CHECK(r["ended_block"]["trials_done"] == 1);
  CHECK(r["blocks_done"] == 2);

  // Records: 1 start + 10 choices, 1 start + 1 choice, then the next start.
  const auto recs = lines(m.records(id));
  CHECK(recs.size() == 14);
  const auto last_choice = parse_record(recs[12]);
  CHECK(last_choice.status == RecordStatus::kTerminated);
  CHECK(last_choice.features.has_value());
  CHECK(parse_record(recs[13]).is_start());

  // Finish the session and check that it refuses further choices.
  for (int guard = 0; guard < 200 && !json::parse(m.state(id))["finished"].get<bool>(); ++guard)
    m.submit(id, low);
  const auto st = json::parse(m.state(id));
  CHECK(st["finished"] == true);
  CHECK(st["blocks_done"] == 9);
  CHECK(code_of([&] { m.submit(id, 0); }) == ErrorCode::kConflict);
  CHECK(lines(m.records(id)).size() <= 9 + 90);
}

TEST_CASE("request ids make submissions idempotent") {
  SessionManager m(quiet_options());
  const std::string id = json::parse(m.create(1, 3))["session_id"];
  const auto first = m.submit(id, 4, 1);
  const auto before = m.records(id);
  CHECK(m.submit(id, 4, 1) == first);
  CHECK(m.submit(id, 9, 1) == first);
  CHECK(m.records(id) == before);
  CHECK(code_of([&] { m.submit(id, 4, 3); }) == ErrorCode::kConflict);
  CHECK(code_of([&] { m.submit(id, 4, 0); }) == ErrorCode::kConflict);
  CHECK(json::parse(m.submit(id, 4, 2))["request_id"] == 2);
  CHECK(json::parse(m.submit(id, 4))["request_id"] == 3);
}

TEST_CASE("restart replays the log") {
  const auto dir = temp_dir("replay");
  const auto log = (dir / "sessions.jsonl").string();
  std::vector<std::string> ids;
  std::vector<std::string> recs, states;
  {
    SessionManager m(quiet_options(log));
    for (int e : {1, 2, 1}) ids.push_back(json::parse(m.create(e))["session_id"]);
    for (int k = 0; k < 25; ++k) m.submit(ids[k % 3], (k * 7) % 21);
    for (const auto& id : ids) {
      recs.push_back(m.records(id));
      states.push_back(m.state(id));
    }
  }
  SessionManager again(quiet_options(log));
  CHECK(again.size() == 3);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    CHECK(again.records(ids[i]) == recs[i]);
    CHECK(again.state(ids[i]) == states[i]);
  }
  // New sessions continue the numbering.
  const std::string next = json::parse(again.create(1))["session_id"];
  CHECK(std::find(ids.begin(), ids.end(), next) == ids.end());

  std::ofstream(log, std::ios::app) << "{\"event\":\"choice\",\"id\":\"missing\",\"choice\":1,\"request_id\":1}\n";
  try {
    SessionManager broken(quiet_options(log));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kDataIntegrity);
    CHECK(std::string(e.what()).find("line 30") != std::string::npos);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("http interface") {
  SessionManager m(quiet_options());
  RunningServer srv(m);
  httplib::Client cli("127.0.0.1", srv.port);

  auto res = cli.Post("/sessions", R"({"experiment": 1, "seed": 7})", "application/json");
  REQUIRE(res);
  CHECK(res->status == 201);
  const auto created = json::parse(res->body);
  const std::string id = created["session_id"];

  res = cli.Post("/sessions", R"({"experiment": 7})", "application/json");
  CHECK(res->status == 400);
  CHECK(json::parse(res->body)["error"] == "invalid_input");
  res = cli.Post("/sessions", "not json", "application/json");
  CHECK(res->status == 400);
  res = cli.Get("/sessions/unknown/state");
  CHECK(res->status == 404);

  res = cli.Get(("/sessions/" + id + "/records").c_str());
  CHECK(res->status == 200);
  CHECK(lines(res->body).size() == 1);

  res = cli.Post(("/sessions/" + id + "/choices").c_str(), R"({"choice": 3, "request_id": 1})", "application/json");
  CHECK(res->status == 200);
  const auto body = res->body;
  res = cli.Post(("/sessions/" + id + "/choices").c_str(), R"({"choice": 3, "request_id": 1})", "application/json");
  CHECK(res->body == body);
  res = cli.Post(("/sessions/" + id + "/choices").c_str(), R"({"choice": 3, "request_id": 5})", "application/json");
  CHECK(res->status == 409);
  res = cli.Post(("/sessions/" + id + "/choices").c_str(), R"({"choice": 99})", "application/json");
  CHECK(res->status == 400);
  res = cli.Post(("/sessions/" + id + "/choices").c_str(), R"({"choice": "x"})", "application/json");
  CHECK(res->status == 400);
  res = cli.Post("/sessions/unknown/choices", R"({"choice": 1})", "application/json");
  CHECK(res->status == 404);

  res = cli.Get(("/sessions/" + id + "/state").c_str());
  CHECK(res->status == 200);
  CHECK(json::parse(res->body)["last_request_id"] == 1);
  res = cli.Get(("/sessions/" + id + "/records").c_str());
  CHECK(res->get_header_value("Content-Type") == "application/x-ndjson");
  CHECK(lines(res->body).size() == 2);
}

TEST_CASE("agent choices replayed over http give identical records") {
  SessionOptions opts;
  opts.features.expand_samples = 100;
  SessionManager m(opts);
  RunningServer srv(m);
  httplib::Client cli("127.0.0.1", srv.port);
  const std::uint64_t seed = 4242;
  auto res = cli.Post("/sessions", json{{"experiment", 1}, {"seed", seed}}.dump(), "application/json");
  REQUIRE(res);
  const std::string id = json::parse(res->body)["session_id"];

  const auto cfg = TaskConfig::experiment1();
  const auto plan = plan_subject(cfg, seed);
  RunOptions ropts;
  ropts.subject = id;
  ropts.features = opts.features;
  std::vector<std::string> expected;
  long long request = 0;
  for (int b = 0; b < 3; ++b) {
    auto run = run_block(AgentSpec::defaults(AgentKind::kSafeOpt), cfg,
                         make_block(cfg, b, plan.block_seeds[b], plan.safe_flags[b]), ropts);
    for (auto& r : run.records) {
      r.agent = "human";
      expected.push_back(to_json_line(r));
      if (r.is_start()) continue;
      res = cli.Post(("/sessions/" + id + "/choices").c_str(),
                     json{{"choice", r.choice}, {"request_id", ++request}}.dump(), "application/json");
      REQUIRE(res->status == 200);
    }
  }
  res = cli.Get(("/sessions/" + id + "/records").c_str());
  const auto got = lines(res->body);
  REQUIRE(got.size() == expected.size() + 1);  // plus the start of block 3
  for (std::size_t k = 0; k < expected.size(); ++k) CHECK(got[k] == expected[k]);
}

}  // TEST_SUITE
