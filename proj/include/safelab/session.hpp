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

// Interactive sessions for human participants. A session walks one
// participant through every block of an experiment; each accepted choice is
// stepped through the task, logged, and recorded with the same feature
// snapshot an agent would have seen.
//
// Persistence is an append-only JSON-lines event log ("create" and "choice"
// events). On start the log is replayed, which rebuilds every session
// exactly because all randomness derives from the session seed.

#ifndef SAFELAB_SESSION_HPP
#define SAFELAB_SESSION_HPP

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>

#include "safelab/acquisition.hpp"
#include "safelab/task.hpp"

namespace safelab {

struct SessionOptions {
  /// Empty disables persistence.
  std::string log_path;
  /// Sessions created without a seed draw one from this.
  std::uint64_t seed = 0;
  FeatureOptions features;
  std::function<TaskConfig(int experiment)> config_for = TaskConfig::for_experiment;
};

class SessionManager {
 public:
  /// Replays log_path when it exists. Throws Error(kDataIntegrity) naming the
  /// line of a malformed event.
  explicit SessionManager(SessionOptions options);
  ~SessionManager();

  SessionManager(const SessionManager&) = delete;
  SessionManager& operator=(const SessionManager&) = delete;

  // All of these return JSON bodies and throw Error: kInvalidInput (bad
  // request), kNotFound (unknown session), kConflict (out-of-sequence
  // request or finished session).
  std::string create(int experiment, std::optional<std::uint64_t> seed = std::nullopt);
  /// request_id, when given, must be the previous id + 1; repeating the
  /// previous id returns the previous response without side effects.
  std::string submit(const std::string& id, long long choice, std::optional<long long> request_id = std::nullopt);
  /// Line-delimited records, one per line.
  std::string records(const std::string& id) const;
  std::string state(const std::string& id) const;

  std::size_t size() const;
  void flush();

  struct Session;

 private:
  std::shared_ptr<Session> find(const std::string& id) const;
  std::string create_locked(int experiment, std::uint64_t seed, bool log);
  std::string submit_locked(Session& s, long long choice, long long request_id, bool log);
  void append_log(const std::string& line);

  SessionOptions options_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t created_ = 0;
  struct Log;
  std::unique_ptr<Log> log_;
};

/// HTTP front end:
///   POST /sessions                 {"experiment": 1|2, "seed": n?}
///   POST /sessions/{id}/choices    {"choice": i, "request_id": n?}
///   GET  /sessions/{id}/records    application/x-ndjson
///   GET  /sessions/{id}/state
/// Errors are {"error": code, "message": text} with status 400, 404, 409 or 500.
class SessionServer {
 public:
  SessionServer(SessionManager& manager, std::string static_dir = {});
  ~SessionServer();

  /// Port 0 picks a free port. Returns the bound port; throws Error(kIo).
  int bind(const std::string& host, int port);
  /// Blocks until stop().
  void run();
  void stop();
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace safelab

#endif  // SAFELAB_SESSION_HPP
