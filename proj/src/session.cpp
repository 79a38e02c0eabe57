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

#include "safelab/session.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "safelab/agents.hpp"
#include "safelab/error.hpp"
#include "safelab/records.hpp"
#include "safelab/rng.hpp"

namespace safelab {

using json = nlohmann::ordered_json;

struct SessionManager::Session {
  std::mutex mutex;
  std::string id;
  std::uint64_t seed = 0;
  TaskConfig config;
  SubjectPlan plan;
  BlockState block;
  int blocks_done = 0;
  double total_score = 0.0;
  bool finished = false;
  std::vector<std::string> records;
  long long last_request = 0;
  std::string last_response;
};

struct SessionManager::Log {
  std::mutex mutex;
  std::ofstream out;
};

namespace {

constexpr const char* kParticipant = "human";

json block_view(const TaskConfig& config, const BlockState& b) {
  json v;
  v["index"] = b.block_index;
  v["condition"] = to_string(b.condition);
  v["threshold_visible"] = b.terminating && b.threshold.has_value();
  if (b.terminating && b.threshold) v["threshold"] = *b.threshold;
  v["start_index"] = b.start_index;
  v["start_y"] = b.history.front().y;
  v["trials_done"] = b.trials_done();
  v["trials_remaining"] = config.trials_per_block - b.trials_done();
  v["status"] = to_string(b.status);
  v["score"] = b.score;
  json obs = json::array();
  for (const auto& o : b.history) obs.push_back({{"index", o.index}, {"y", o.y}});
  v["observations"] = std::move(obs);
  return v;
}

json grid_view(const GridDomain& g) {
  json pts = json::array();
  for (std::size_t i = 0; i < g.size(); ++i) {
    json p = json::array();
    for (int d = 0; d < g.dim(); ++d) p.push_back(g.points()(static_cast<Eigen::Index>(i), d));
    pts.push_back(std::move(p));
  }
  return {{"dim", g.dim()}, {"size", g.size()}, {"points", std::move(pts)}};
}

BlockState open_block(const TaskConfig& config, const SubjectPlan& plan, int b) {
  const auto i = static_cast<std::size_t>(b);
  return make_block(config, b, plan.block_seeds[i], plan.safe_flags[i]);
}

}  // namespace

SessionManager::SessionManager(SessionOptions options) : options_(std::move(options)) {
  if (options_.log_path.empty()) return;
  const std::filesystem::path path(options_.log_path);
  if (std::filesystem::exists(path)) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::kIo, "cannot read session log " + options_.log_path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      const std::string where = "session log line " + std::to_string(line_no) + ": ";
      json e;
      try {
        e = json::parse(line);
        const std::string kind = e.at("event").get<std::string>();
        if (kind == "create") {
          const std::string id = create_locked(e.at("experiment").get<int>(), e.at("seed").get<std::uint64_t>(), false);
          const auto body = json::parse(id);
          if (body.at("session_id").get<std::string>() != e.at("id").get<std::string>())
            fail(ErrorCode::kDataIntegrity, "replayed session id differs from the logged one");
        } else if (kind == "choice") {
          auto s = find(e.at("id").get<std::string>());
          std::lock_guard lock(s->mutex);
          submit_locked(*s, e.at("choice").get<long long>(), e.at("request_id").get<long long>(), false);
        } else {
          fail(ErrorCode::kDataIntegrity, "unknown event '" + kind + "'");
        }
      } catch (const Error& err) {
        fail(ErrorCode::kDataIntegrity, where + err.what());
      } catch (const std::exception& err) {
        fail(ErrorCode::kDataIntegrity, where + err.what());
      }
    }
  } else if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  log_ = std::make_unique<Log>();
  log_->out.open(path, std::ios::app);
  if (!log_->out) fail(ErrorCode::kIo, "cannot open session log " + options_.log_path);
}

SessionManager::~SessionManager() {
  if (log_) log_->out.flush();
}

std::size_t SessionManager::size() const {
  std::shared_lock lock(mutex_);
  return sessions_.size();
}

void SessionManager::flush() {
  if (!log_) return;
  std::lock_guard lock(log_->mutex);
  log_->out.flush();
}

void SessionManager::append_log(const std::string& line) {
  if (!log_) return;
  std::lock_guard lock(log_->mutex);
  log_->out << line << '\n';
  log_->out.flush();
  if (!log_->out) fail(ErrorCode::kIo, "cannot append to session log " + options_.log_path);
}

std::shared_ptr<SessionManager::Session> SessionManager::find(const std::string& id) const {
  std::shared_lock lock(mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) fail(ErrorCode::kNotFound, "no session '" + id + "'");
  return it->second;
}

std::string SessionManager::create(int experiment, std::optional<std::uint64_t> seed) {
  std::uint64_t s;
  {
    std::shared_lock lock(mutex_);
    s = seed.value_or(derive_seed(options_.seed, {created_}));
  }
  return create_locked(experiment, s, true);
}

std::string SessionManager::create_locked(int experiment, std::uint64_t seed, bool log) {
  if (experiment != 1 && experiment != 2)
    fail(ErrorCode::kInvalidInput, "experiment must be 1 or 2, got " + std::to_string(experiment));
  auto s = std::make_shared<Session>();
  s->seed = seed;
  s->config = options_.config_for(experiment);
  s->config.validate();
  s->plan = plan_subject(s->config, seed);
  s->block = open_block(s->config, s->plan, 0);

  std::unique_lock lock(mutex_);
  char id[40];
  std::snprintf(id, sizeof id, "s%04llu-%08llx", static_cast<unsigned long long>(created_),
                static_cast<unsigned long long>(mix_seed(seed ^ created_) & 0xffffffffULL));
  s->id = id;
  s->records.push_back(to_json_line(start_record(s->config, s->block, s->id, kParticipant)));
  ++created_;

  json body;
  body["session_id"] = s->id;
  body["experiment"] = experiment;
  body["seed"] = seed;
  body["grid"] = grid_view(*s->config.domain);
  body["blocks_total"] = s->config.blocks;
  body["blocks_done"] = 0;
  body["total_score"] = 0.0;
  body["finished"] = false;
  body["block"] = block_view(s->config, s->block);
  sessions_.emplace(s->id, s);
  lock.unlock();

  if (log) append_log(json{{"event", "create"}, {"id", s->id}, {"experiment", experiment}, {"seed", seed}}.dump());
  return body.dump();
}

std::string SessionManager::submit(const std::string& id, long long choice, std::optional<long long> request_id) {
  auto s = find(id);
  std::lock_guard lock(s->mutex);
  if (request_id && *request_id == s->last_request && s->last_request > 0) return s->last_response;
  const long long expected = s->last_request + 1;
  if (request_id && *request_id != expected)
    fail(ErrorCode::kConflict, "request_id " + std::to_string(*request_id) + " is out of sequence; expected " +
                                   std::to_string(expected));
  return submit_locked(*s, choice, expected, true);
}

std::string SessionManager::submit_locked(Session& s, long long choice, long long request_id, bool log) {
  if (s.finished) fail(ErrorCode::kConflict, "session " + s.id + " has finished every block");
  if (request_id != s.last_request + 1) fail(ErrorCode::kConflict, "request_id out of sequence");
  const auto n = static_cast<long long>(s.config.domain->size());
  if (choice < 0 || choice >= n)
    fail(ErrorCode::kInvalidInput, "choice " + std::to_string(choice) + " is outside the grid [0, " +
                                       std::to_string(n) + ")");
  const auto c = static_cast<std::size_t>(choice);

  auto assessment = assess_block(s.config, s.block, options_.features);
  const int trial = s.block.trials_done() + 1;
  const std::uint64_t noise_seed = trial_seed(s.block, trial);
  auto result = step(std::move(s.block), c, s.config, noise_seed);
  s.block = std::move(result.block);
  s.records.push_back(
      to_json_line(choice_record(s.config, s.block, s.id, kParticipant, std::move(assessment.features))));

  json body;
  body["session_id"] = s.id;
  body["request_id"] = request_id;
  body["choice"] = c;
  body["y"] = result.y;
  body["status"] = to_string(s.block.status);
  body["block_score"] = s.block.score;
  body["trials_remaining"] = s.config.trials_per_block - s.block.trials_done();
  if (s.block.status != BlockStatus::kActive) {
    body["ended_block"] = block_view(s.config, s.block);
    s.total_score += s.block.score;
    ++s.blocks_done;
    if (s.blocks_done < s.config.blocks) {
      s.block = open_block(s.config, s.plan, s.blocks_done);
      s.records.push_back(to_json_line(start_record(s.config, s.block, s.id, kParticipant)));
    } else {
      s.finished = true;
    }
  }
  body["total_score"] = s.total_score;
  body["blocks_done"] = s.blocks_done;
  body["finished"] = s.finished;
  body["next_block"] = s.block.trials_done() == 0 && s.blocks_done > 0 && !s.finished;
  body["block"] = block_view(s.config, s.block);

  s.last_request = request_id;
  s.last_response = body.dump();
  if (log) append_log(json{{"event", "choice"}, {"id", s.id}, {"choice", c}, {"request_id", request_id}}.dump());
  return s.last_response;
}

std::string SessionManager::records(const std::string& id) const {
  auto s = find(id);
  std::lock_guard lock(s->mutex);
  std::string out;
  for (const auto& line : s->records) {
    out += line;
    out += '\n';
  }
  return out;
}

std::string SessionManager::state(const std::string& id) const {
  auto s = find(id);
  std::lock_guard lock(s->mutex);
  json body;
  body["session_id"] = s->id;
  body["experiment"] = s->config.experiment;
  body["seed"] = s->seed;
  body["blocks_total"] = s->config.blocks;
  body["blocks_done"] = s->blocks_done;
  body["total_score"] = s->total_score;
  body["finished"] = s->finished;
  body["last_request_id"] = s->last_request;
  body["block"] = block_view(s->config, s->block);
  return body.dump();
}

// ---------------------------------------------------------------------------
// HTTP

struct SessionServer::Impl {
  SessionManager& manager;
  httplib::Server server;
  explicit Impl(SessionManager& m) : manager(m) {}
};

namespace {

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidInput:
      return 400;
    case ErrorCode::kNotFound:
      return 404;
    case ErrorCode::kConflict:
    case ErrorCode::kInvalidState:
      return 409;
    default:
      return 500;
  }
}

void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message) {
  res.status = status;
  res.set_content(json{{"error", code}, {"message", message}}.dump(), "application/json");
}

template <class Fn>
void guarded(httplib::Response& res, Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    send_error(res, http_status(e.code()), error_code_name(e.code()), e.what());
  } catch (const json::exception& e) {
    send_error(res, 400, error_code_name(ErrorCode::kInvalidInput), std::string("malformed request: ") + e.what());
  } catch (const std::exception& e) {
    send_error(res, 500, "internal", e.what());
  }
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  json body = json::parse(req.body);
  if (!body.is_object()) fail(ErrorCode::kInvalidInput, "request body must be a JSON object");
  return body;
}

}  // namespace

SessionServer::SessionServer(SessionManager& manager, std::string static_dir) : impl_(std::make_unique<Impl>(manager)) {
  auto& srv = impl_->server;
  auto& mgr = impl_->manager;
  // SO_REUSEADDR only: with SO_REUSEPORT a second server would share the port.
  srv.set_socket_options([](socket_t sock) {
    int on = 1;
    ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&on), sizeof on);
  });
  if (!static_dir.empty() && !srv.set_mount_point("/", static_dir))
    fail(ErrorCode::kIo, "static directory " + static_dir + " does not exist");

  srv.Post("/sessions", [&mgr](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const json body = parse_body(req);
      if (!body.contains("experiment") || !body.at("experiment").is_number_integer())
        fail(ErrorCode::kInvalidInput, "experiment must be an integer");
      std::optional<std::uint64_t> seed;
      if (body.contains("seed") && !body.at("seed").is_null()) {
        if (!body.at("seed").is_number_unsigned()) fail(ErrorCode::kInvalidInput, "seed must be a nonnegative integer");
        seed = body.at("seed").get<std::uint64_t>();
      }
      res.status = 201;
      res.set_content(mgr.create(body.at("experiment").get<int>(), seed), "application/json");
    });
  });
  srv.Post(R"(/sessions/([^/]+)/choices)", [&mgr](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const json body = parse_body(req);
      if (!body.contains("choice") || !body.at("choice").is_number_integer())
        fail(ErrorCode::kInvalidInput, "choice must be an integer grid index");
      std::optional<long long> request_id;
      if (body.contains("request_id") && !body.at("request_id").is_null()) {
        if (!body.at("request_id").is_number_integer()) fail(ErrorCode::kInvalidInput, "request_id must be an integer");
        request_id = body.at("request_id").get<long long>();
      }
      res.set_content(mgr.submit(req.matches[1], body.at("choice").get<long long>(), request_id), "application/json");
    });
  });
  srv.Get(R"(/sessions/([^/]+)/records)", [&mgr](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { res.set_content(mgr.records(req.matches[1]), "application/x-ndjson"); });
  });
  srv.Get(R"(/sessions/([^/]+)/state)", [&mgr](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { res.set_content(mgr.state(req.matches[1]), "application/json"); });
  });
}

SessionServer::~SessionServer() { stop(); }

int SessionServer::bind(const std::string& host, int port) {
  auto& srv = impl_->server;
  if (port == 0) {
    const int p = srv.bind_to_any_port(host);
    if (p < 0) fail(ErrorCode::kIo, "cannot bind " + host);
    return p;
  }
  if (!srv.bind_to_port(host, port)) fail(ErrorCode::kIo, "cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void SessionServer::run() { impl_->server.listen_after_bind(); }

void SessionServer::stop() {
  if (impl_) impl_->server.stop();
  if (impl_) impl_->manager.flush();
}

void SessionServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace safelab
