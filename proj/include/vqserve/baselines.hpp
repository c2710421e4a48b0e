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

// Request-level baseline policies. None of them evicts or considers model
// swap costs; static batching additionally forgoes continuous admission.

#pragma once

#include <algorithm>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "vqserve/core.hpp"
#include "vqserve/estimator.hpp"

namespace vqs {

enum class Policy { kQlm, kEdf, kFcfs, kStaticBatch };

inline const char* to_string(Policy p) {
  switch (p) {
    case Policy::kQlm: return "qlm";
    case Policy::kEdf: return "edf";
    case Policy::kFcfs: return "fcfs";
    case Policy::kStaticBatch: return "static";
  }
  return "?";
}

inline Policy policy_from_string(const std::string& s) {
  if (s == "qlm") return Policy::kQlm;
  if (s == "edf") return Policy::kEdf;
  if (s == "fcfs") return Policy::kFcfs;
  if (s == "static" || s == "static_batch") return Policy::kStaticBatch;
  throw ConfigError("unknown policy '" + s + "'");
}

// Strict weak orders over request-table indices.
struct FcfsLess {
  std::span<const Request> table;
  bool operator()(std::size_t a, std::size_t b) const {
    if (table[a].arrival_time != table[b].arrival_time)
      return table[a].arrival_time < table[b].arrival_time;
    return a < b;
  }
};

struct EdfLess {
  std::span<const Request> table;
  bool operator()(std::size_t a, std::size_t b) const {
    if (table[a].deadline() != table[b].deadline())
      return table[a].deadline() < table[b].deadline();
    return FcfsLess{table}(a, b);
  }
};

// Instance as seen by a dispatcher: which models it can host.
struct DispatchTarget {
  int instance = 0;
  std::vector<std::string> models;

  bool hosts(const ModelId& m) const {
    return std::find(models.begin(), models.end(), m.name) != models.end();
  }
};

// Per-model rotation over the instances able to host that model.
class RoundRobin {
 public:
  int next(const ModelId& model, std::span<const DispatchTarget> targets) {
    std::vector<int> capable;
    for (const auto& t : targets)
      if (t.hosts(model)) capable.push_back(t.instance);
    if (capable.empty()) return -1;
    std::size_t& c = counter_[model.name];
    return capable[c++ % capable.size()];
  }

 private:
  std::map<std::string, std::size_t> counter_;
};

struct StaticBatch {
  int instance = -1;
  std::vector<std::size_t> requests;
  Seconds duration = 0.0;
  Seconds earliest_deadline = 0.0;
};

struct PolicyDecision {
  // Ordered waiting requests per instance (index = DispatchTarget::instance).
  std::map<int, std::vector<std::size_t>> per_instance;
  std::vector<StaticBatch> batches;  // static batching only
  std::vector<std::size_t> unplaceable;
};

namespace detail {

template <typename Less>
PolicyDecision sorted_dispatch(std::span<const Request> table,
                               std::span<const std::size_t> waiting,
                               std::span<const DispatchTarget> targets, Less less) {
  std::vector<std::size_t> order(waiting.begin(), waiting.end());
  std::stable_sort(order.begin(), order.end(), less);
  PolicyDecision d;
  for (const auto& t : targets) d.per_instance[t.instance];
  RoundRobin rr;
  for (std::size_t i : order) {
    const int inst = rr.next(table[i].model, targets);
    if (inst < 0) {
      d.unplaceable.push_back(i);
      continue;
    }
    d.per_instance[inst].push_back(i);
  }
  return d;
}

}  // namespace detail

// Global sort by absolute deadline, dealt round-robin over capable instances.
inline PolicyDecision edf_order(std::span<const Request> table,
                                std::span<const std::size_t> waiting,
                                std::span<const DispatchTarget> targets) {
  return detail::sorted_dispatch(table, waiting, targets, EdfLess{table});
}

inline PolicyDecision fcfs_order(std::span<const Request> table,
                                 std::span<const std::size_t> waiting,
                                 std::span<const DispatchTarget> targets) {
  return detail::sorted_dispatch(table, waiting, targets, FcfsLess{table});
}

// Worst-case duration of one fixed batch: prefill plus the longest possible
// generation at the profiled per-token cost.
inline Seconds static_batch_duration(const InstanceProfile& p) {
  return p.prefill + estimate_decode_time(p);
}

// Fixed-size single-model batches cut from the deadline order, then ordered
// by their earliest deadline and dealt round-robin. `profile_of` maps
// (instance, model) to the profile used for the batch duration.
template <typename ProfileOf>
PolicyDecision static_batch_schedule(std::span<const Request> table,
                                     std::span<const std::size_t> waiting,
                                     std::span<const DispatchTarget> targets,
                                     std::size_t batch_size, ProfileOf profile_of) {
  if (batch_size < 1) throw ConfigError("static batching: batch_size must be >= 1");
  std::vector<std::size_t> order(waiting.begin(), waiting.end());
  std::stable_sort(order.begin(), order.end(), EdfLess{table});
  std::map<std::string, std::vector<std::size_t>> by_model;
  std::vector<std::string> models;
  for (std::size_t i : order) {
    if (!by_model.count(table[i].model.name)) models.push_back(table[i].model.name);
    by_model[table[i].model.name].push_back(i);
  }
  PolicyDecision d;
  for (const auto& m : models) {
    const auto& list = by_model[m];
    for (std::size_t k = 0; k < list.size(); k += batch_size) {
      StaticBatch b;
      b.requests.assign(list.begin() + k,
                        list.begin() + std::min(list.size(), k + batch_size));
      b.earliest_deadline = table[b.requests.front()].deadline();
      d.batches.push_back(std::move(b));
    }
  }
  std::stable_sort(d.batches.begin(), d.batches.end(),
                   [](const StaticBatch& a, const StaticBatch& b) {
                     return a.earliest_deadline < b.earliest_deadline;
                   });
  RoundRobin rr;
  for (auto& b : d.batches) {
    b.instance = rr.next(table[b.requests.front()].model, targets);
    if (b.instance < 0) {
      d.unplaceable.insert(d.unplaceable.end(), b.requests.begin(), b.requests.end());
      continue;
    }
    b.duration = static_batch_duration(profile_of(b.instance, table[b.requests.front()].model));
    auto& q = d.per_instance[b.instance];
    q.insert(q.end(), b.requests.begin(), b.requests.end());
  }
  return d;
}

}  // namespace vqs
