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

// Request waiting-time estimator. Only token statistics and profile constants
// are consulted; per-request output lengths are never read here.

#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "vqserve/core.hpp"
#include "vqserve/grouping.hpp"

namespace vqs {

struct WaitEstimate {
  Seconds mean = 0.0;
  Seconds std = 0.0;
  double basis_tokens = 0.0;  // expected output tokens ahead
};

// The sum of output tokens ahead is modelled as Normal((q-1)mu, (q-1)sigma^2)
// and drained at the profiled throughput.
inline WaitEstimate estimate_waiting_time(std::int64_t requests_ahead,
                                          const TokenStats& s,
                                          const InstanceProfile& p) {
  if (requests_ahead < 0) throw ValidationError("estimate_waiting_time: q-1 < 0");
  const auto n = static_cast<double>(requests_ahead);
  WaitEstimate w;
  w.basis_tokens = n * s.mean_output;
  w.mean = w.basis_tokens / p.theta;
  w.std = std::sqrt(n) * s.std_output / p.theta;
  return w;
}

enum class DecodeTail {
  kMaxOutput,  // conservative: the model's generation cap
  kMean,       // sensitivity mode: the class mean
};

inline Seconds estimate_decode_time(const InstanceProfile& p,
                                    DecodeTail mode = DecodeTail::kMaxOutput,
                                    const TokenStats* s = nullptr) {
  const double tokens = (mode == DecodeTail::kMean && s)
                            ? s->mean_output
                            : static_cast<double>(p.max_output_tokens);
  return tokens * p.inefficiency * p.decode_per_token;
}

// Completion of the request at 1-based queue position q.
inline Seconds estimate_request_completion(std::int64_t q, const TokenStats& s,
                                           const InstanceProfile& p,
                                           DecodeTail mode = DecodeTail::kMaxOutput) {
  if (q < 1) throw ValidationError("estimate_request_completion: q < 1");
  return estimate_waiting_time(q - 1, s, p).mean + p.prefill +
         estimate_decode_time(p, mode, &s);
}

struct GroupCompletionEstimate {
  Seconds serve_time = 0.0;       // token drain of the whole group
  Seconds completion_time = 0.0;  // last member's wait plus its own tail
};

inline GroupCompletionEstimate estimate_group_completion(
    std::size_t group_size, const TokenStats& s, const InstanceProfile& p,
    DecodeTail mode = DecodeTail::kMaxOutput) {
  if (group_size == 0) throw ValidationError("estimate_group_completion: empty group");
  GroupCompletionEstimate e;
  e.serve_time = static_cast<double>(group_size) * s.mean_output / p.theta;
  // The last member waits behind the other size-1 members. The solver's
  // bounds rely on completion never undercutting the serve time.
  e.completion_time =
      std::max(e.serve_time,
               estimate_waiting_time(static_cast<std::int64_t>(group_size) - 1, s, p).mean +
                   p.prefill + estimate_decode_time(p, mode, &s));
  return e;
}

inline GroupCompletionEstimate estimate_group_completion(
    const RequestGroup& g, const InstanceProfile& p,
    DecodeTail mode = DecodeTail::kMaxOutput) {
  return estimate_group_completion(g.members.size(), g.stats, p, mode);
}

// ---------------------------------------------------------------------------
// Queue-level prediction
// ---------------------------------------------------------------------------

struct QueuedGroup {
  RequestGroupId id;
  ModelId model;
  Seconds slo = 0.0;
  Seconds serve_time = 0.0;
  Seconds completion_time = 0.0;
  Seconds swap_time = 0.0;  // cost of loading `model` on this queue's instance
};

struct QueueView {
  VirtualQueueId id;
  std::optional<ModelId> resident;
  std::vector<QueuedGroup> groups;
};

// Predicted start wait of every group in queue order. A group followed by a
// model change contributes its completion time (the batch must fully drain
// before the swap), otherwise its serve time; every transition up to and
// including the group's own slot adds that model's swap time.
inline std::vector<Seconds> predicted_waits(const QueueView& q) {
  std::vector<Seconds> wt(q.groups.size(), 0.0);
  const ModelId* prev = q.resident ? &*q.resident : nullptr;
  Seconds base = 0.0;  // wait of the previous group including its own swap
  for (std::size_t j = 0; j < q.groups.size(); ++j) {
    const QueuedGroup& g = q.groups[j];
    const bool transition = !prev || !(g.model == *prev);
    Seconds w = base;
    if (j > 0) {
      const QueuedGroup& before = q.groups[j - 1];
      w += transition ? before.completion_time : before.serve_time;
    }
    if (transition) w += g.swap_time;
    wt[j] = w;
    base = w;
    prev = &g.model;
  }
  return wt;
}

// Reports every group whose predicted wait exceeds its SLO, ordered by queue
// then position.
inline std::vector<SloViolationReport> detect_slo_violation(
    std::span<const QueueView> queues) {
  std::vector<SloViolationReport> out;
  for (const QueueView& q : queues) {
    const std::vector<Seconds> wt = predicted_waits(q);
    for (std::size_t j = 0; j < wt.size(); ++j) {
      if (wt[j] <= q.groups[j].slo) continue;
      out.push_back({q.groups[j].id, q.id, wt[j], q.groups[j].slo,
                     q.groups[j].slo - wt[j]});
    }
  }
  return out;
}

}  // namespace vqs
