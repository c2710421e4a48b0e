// Copyright 2026 The vqserve Authors.
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

// Append-only simulation event log and its JSONL form.

#pragma once

#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vqserve/core.hpp"

namespace vqs {

enum class EventKind {
  kArrival,
  kRejected,
  kGroupFormed,
  kEstimate,     // value: predicted wait at classification time
  kSolve,        // value: charged solver latency; note: solver name
  kScaleUp,      // value: objective of an infeasible plan
  kPlanApplied,  // value: objective
  kPlanDropped,  // note: reason
  kPull,
  kRestore,      // value: transfer seconds
  kEvictStart,   // value: footprint tokens
  kEvictDone,
  kSwapStart,    // value: occupancy seconds; note: target model
  kSwapDone,
  kFirstToken,
  kCompletion,
  kPreemption,   // value: footprint tokens
  kFlush,        // value: tokens discarded
  kFailure,
  kInstanceSummary,  // value: busy seconds
};

inline const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::kArrival: return "arrival";
    case EventKind::kRejected: return "rejected";
    case EventKind::kGroupFormed: return "group-formed";
    case EventKind::kEstimate: return "estimate";
    case EventKind::kSolve: return "solve";
    case EventKind::kScaleUp: return "scale-up-required";
    case EventKind::kPlanApplied: return "plan-applied";
    case EventKind::kPlanDropped: return "plan-dropped";
    case EventKind::kPull: return "pull";
    case EventKind::kRestore: return "restore";
    case EventKind::kEvictStart: return "evict-start";
    case EventKind::kEvictDone: return "evict-done";
    case EventKind::kSwapStart: return "swap-start";
    case EventKind::kSwapDone: return "swap-done";
    case EventKind::kFirstToken: return "first-token";
    case EventKind::kCompletion: return "completion";
    case EventKind::kPreemption: return "preemption";
    case EventKind::kFlush: return "flush";
    case EventKind::kFailure: return "failure";
    case EventKind::kInstanceSummary: return "instance-summary";
  }
  return "?";
}

inline EventKind event_kind_from_string(const std::string& s) {
  for (int k = 0; k <= static_cast<int>(EventKind::kInstanceSummary); ++k)
    if (s == to_string(static_cast<EventKind>(k))) return static_cast<EventKind>(k);
  throw MalformedLogError("unknown event kind '" + s + "'");
}

struct Event {
  Seconds t = 0.0;
  EventKind kind = EventKind::kArrival;
  std::int64_t request = -1;  // trace index
  std::int64_t group = -1;
  int instance = -1;
  double value = std::numeric_limits<double>::quiet_NaN();
  std::string note;
};

class EventLog {
 public:
  void append(Event e) {
    if (!events_.empty() && e.t < events_.back().t)
      throw InvariantViolation("event log timestamps must be nondecreasing");
    events_.push_back(std::move(e));
  }
  const std::vector<Event>& events() const { return events_; }
  std::size_t size() const { return events_.size(); }
  bool empty() const { return events_.empty(); }

 private:
  std::vector<Event> events_;
};

// Request and instance indices are rendered as their ids/names.
inline void write_event_log(std::ostream& out, const EventLog& log,
                            const std::vector<std::string>& request_ids,
                            const std::vector<std::string>& instance_names) {
  for (const Event& e : log.events()) {
    nlohmann::json j;
    j["t"] = e.t;
    j["kind"] = to_string(e.kind);
    if (e.request >= 0) j["request"] = request_ids.at(e.request);
    if (e.group >= 0) j["group"] = e.group;
    if (e.instance >= 0) j["instance"] = instance_names.at(e.instance);
    if (!std::isnan(e.value)) j["value"] = e.value;
    if (!e.note.empty()) j["note"] = e.note;
    out << j.dump() << '\n';
  }
}

inline EventLog read_event_log(std::istream& in, const std::vector<std::string>& request_ids,
                               const std::vector<std::string>& instance_names) {
  std::map<std::string, std::int64_t> req;
  for (std::size_t i = 0; i < request_ids.size(); ++i) req[request_ids[i]] = i;
  std::map<std::string, int> inst;
  for (std::size_t i = 0; i < instance_names.size(); ++i) inst[instance_names[i]] = i;
  EventLog log;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(lineno, e.what());
    }
    Event e;
    e.t = j.at("t").get<double>();
    e.kind = event_kind_from_string(j.at("kind").get<std::string>());
    if (j.contains("request")) e.request = req.at(j["request"].get<std::string>());
    if (j.contains("group")) e.group = j["group"].get<std::int64_t>();
    if (j.contains("instance")) e.instance = inst.at(j["instance"].get<std::string>());
    if (j.contains("value")) e.value = j["value"].get<double>();
    if (j.contains("note")) e.note = j["note"].get<std::string>();
    log.append(std::move(e));
  }
  return log;
}

}  // namespace vqs
