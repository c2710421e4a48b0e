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

// Deterministic discrete-event simulator of continuous-batching instances.
//
// Time advances in decode iterations per instance. At every iteration
// boundary an instance (1) credits one token to each request that took part
// in the iteration, (2) preempts the most recently admitted requests until the
// next iteration's growth fits in memory, (3) lets the policy evict, swap the
// model or pull new work, and (4) starts the next iteration. An iteration
// lasts one decode step, plus one prefill if it contains a new admission.
//
// Memory is counted in tokens: a request holds input + generated tokens.
// Preempted and evicted requests keep their progress in host memory
// (kv_held) and are restored over the KV transfer link. A model swap flushes
// whatever is still running; those requests restart from scratch.

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <spdlog/spdlog.h>

#include "vqserve/baselines.hpp"
#include "vqserve/core.hpp"
#include "vqserve/estimator.hpp"
#include "vqserve/grouping.hpp"
#include "vqserve/scheduler.hpp"
#include "vqserve/sim/event_log.hpp"
#include "vqserve/sim/hardware.hpp"
#include "vqserve/workload.hpp"

namespace vqs {

using ProfileKey = std::pair<std::string, std::string>;  // (model, gpu)
using ProfileMap = std::map<ProfileKey, InstanceProfile>;

struct ProfilingHarness {
  int batch_requests = 0;     // 0: eight times the average batch size
  std::uint64_t seed = 1;
  double saturation = 0.9;    // fraction of capacity that marks steady state
};

InstanceProfile profile_instance(const InstanceHardware& hw, const TokenStats& stats,
                                 const ProfilingHarness& harness = {});

struct QlmOptions {
  bool eviction = true;
  bool prefetch = true;
  Seconds solver_latency = 0.05;      // charged in simulated time
  Seconds min_solve_interval = 2.0;
  int exact_slot_limit = 8;
  std::int64_t exact_node_budget = 200000;
  int heuristic_passes = 50;
  double violation_weight = 1000.0;
  bool auto_batch_size = true;        // derive avg_batch_size from the profile
  GroupingConfig grouping;
  DecodeTail decode_tail = DecodeTail::kMaxOutput;
};

struct FailureSpec {
  Seconds t = 0.0;
  int instance = 0;
};

struct SimOptions {
  Policy policy = Policy::kQlm;
  std::uint64_t seed = 0;
  Seconds horizon = kInf;
  QlmOptions qlm;
  std::size_t static_batch_size = 0;  // 0: reference average batch size
  std::optional<TokenHistory> history;
  ProfileMap profiles;                // missing entries are profiled on demand
  std::vector<FailureSpec> failures;
  bool check_invariants = true;
  bool record_iterations = false;
};

struct IterationRecord {
  int instance = 0;
  Seconds start = 0.0;
  Seconds duration = 0.0;
  int ready = 0;            // requests decoding in this iteration
  int inflight = 0;         // admitted and unfinished, incl. kv_held
  TokenCount tokens = 0;    // tokens produced by the iteration
  TokenCount footprint = 0; // memory held by running requests at start
  std::size_t backlog = 0;  // requests still waiting for admission
  bool prefill = false;
};

struct SimResult {
  EventLog log;
  std::vector<IterationRecord> iterations;
  std::vector<std::string> request_ids;
  std::vector<std::string> instance_names;
  ProfileMap profiles;
  std::int64_t solves = 0;
  std::int64_t plans_applied = 0;
  std::int64_t plan_transitions = 0;
  double solver_wall_seconds = 0.0;  // measured; excluded from reports
};

class Simulator {
 public:
  Simulator(const Trace& trace, const ClusterConfig& cluster, SimOptions opt)
      : trace_(trace), cluster_(cluster), opt_(std::move(opt)) {
    cluster_.validate();
    for (const auto& r : trace_.requests) r.validate();
    for (std::size_t i = 1; i < trace_.requests.size(); ++i)
      if (trace_.requests[i].arrival_time < trace_.requests[i - 1].arrival_time)
        throw ValidationError("simulator: trace must be sorted by arrival");
    table_ = trace_.requests;
    req_.resize(table_.size());
    for (std::size_t i = 0; i < cluster_.instances.size(); ++i) {
      Inst in;
      in.index = static_cast<int>(i);
      in.spec = cluster_.instances[i];
      in.resident = in.spec.initial_model;
      insts_.push_back(std::move(in));
    }
    for (const auto& f : opt_.failures)
      if (f.instance < 0 || f.instance >= static_cast<int>(insts_.size()))
        throw ConfigError("failure injection: bad instance index");
    history_ = opt_.history ? *opt_.history : build_history(trace_);
  }

  SimResult run() {
    SimResult res;
    for (const auto& r : table_) res.request_ids.push_back(r.id);
    for (const auto& in : insts_) res.instance_names.push_back(in.spec.name);
    if (table_.empty()) return res;
    prepare_policy();
    for (std::size_t i = 0; i < table_.size(); ++i)
      push(table_[i].arrival_time, kArrival, static_cast<std::int64_t>(i));
    for (const auto& f : opt_.failures) push(f.t, kFailure, f.instance);

    while (!events_.empty()) {
      const Ev ev = events_.top();
      events_.pop();
      if (ev.t > opt_.horizon) break;
      now_ = ev.t;
      switch (ev.type) {
        case kArrival: on_arrival(static_cast<std::size_t>(ev.a)); break;
        case kFailure: on_failure(static_cast<int>(ev.a)); break;
        case kPlanReady: on_plan_ready(static_cast<std::size_t>(ev.a)); break;
        case kControl: on_control(); break;
        case kLog: log_.append(deferred_[static_cast<std::size_t>(ev.a)]); break;
        case kStaticFirst: on_static_first(static_cast<std::size_t>(ev.a)); break;
        case kStaticDone: on_static_done(static_cast<std::size_t>(ev.a)); break;
        case kBoundary: on_boundary(static_cast<int>(ev.a), ev.b); break;
      }
    }
    for (auto& in : insts_)
      log({now_, EventKind::kInstanceSummary, -1, -1, in.index, in.busy_time, ""});
    if (opt_.check_invariants) {
      check_partition();
      if (!std::isfinite(opt_.horizon)) {
        for (std::size_t i = 0; i < req_.size(); ++i)
          if (req_[i].phase != Phase::kCompleted && req_[i].phase != Phase::kRejected)
            throw InvariantViolation("request " + table_[i].id + " never completed");
      }
    }
    res.log = std::move(log_);
    res.iterations = std::move(iterations_);
    res.profiles = profiles_;
    res.solves = solves_;
    res.plans_applied = plans_applied_;
    res.plan_transitions = plan_transitions_;
    res.solver_wall_seconds = solver_wall_;
    return res;
  }

 private:
  // ------------------------------------------------------------------ state
  enum class Phase : std::uint8_t {
    kPending, kUngrouped, kQueued, kRunning, kKvHeld, kCompleted, kRejected
  };

  struct ReqState {
    Phase phase = Phase::kPending;
    int instance = -1;
    TokenCount generated = 0;
    TokenCount discarded = 0;
    bool prefill_pending = false;
    Seconds ready_at = 0.0;     // restore finished
    Seconds kv_ready_at = 0.0;  // host copy finished
    Seconds first_pull = kNaN;
    Seconds first_token = kNaN;
    std::int64_t admit_seq = 0;
    std::int64_t preempt_seq = 0;
    RequestGroupId group;
    std::size_t group_pos = 0;
  };

  struct WarmEntry {
    std::string model;
    Seconds ready = 0.0;
    std::uint64_t last_use = 0;
  };

  struct Inst {
    int index = 0;
    InstanceSpec spec;
    bool failed = false;
    std::optional<ModelId> resident;
    std::vector<WarmEntry> warm;
    std::vector<std::size_t> running;  // admission order
    std::vector<std::size_t> kv_held;  // preemption order
    std::vector<std::size_t> iter_members;
    Seconds busy_until = 0.0;
    Seconds busy_time = 0.0;
    bool iterating = false;
    bool boundary_pending = false;
    std::uint64_t epoch = 0;
    bool plan_head_changed = false;
    std::vector<std::size_t> queue;        // baselines: waiting, policy order
    std::vector<RequestGroupId> vq;        // qlm: virtual queue
    bool static_busy = false;
  };

  struct GroupRt {
    int instance = -1;
    std::size_t cursor = 0;
    std::size_t done = 0;
    bool started = false;
  };

  struct PendingPlan {
    std::vector<std::vector<RequestGroupId>> orders;  // per instance
    double objective = 0.0;
    std::string solver;
    int transitions = 0;
  };

  enum EvType { kArrival = 0, kFailure, kPlanReady, kControl, kLog, kStaticFirst,
                kStaticDone, kBoundary };

  struct Ev {
    Seconds t;
    int type;
    std::uint64_t seq;
    std::int64_t a;
    std::uint64_t b;
    bool operator>(const Ev& o) const {
      if (t != o.t) return t > o.t;
      if (type != o.type) return type > o.type;
      return seq > o.seq;
    }
  };

  static constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
  static constexpr Seconds kNoStake = 1e9;

  // ---------------------------------------------------------------- helpers
  void push(Seconds t, int type, std::int64_t a, std::uint64_t b = 0) {
    events_.push(Ev{t, type, seq_++, a, b});
  }

  void log(Event e) { log_.append(std::move(e)); }

  void log_later(Event e) {
    deferred_.push_back(e);
    push(e.t, kLog, static_cast<std::int64_t>(deferred_.size() - 1));
  }

  TokenCount out_tokens(std::size_t i) const { return GroundTruth::output_tokens(table_[i]); }
  TokenCount footprint(std::size_t i) const { return table_[i].input_tokens + req_[i].generated; }

  const InstanceHardware* hw(const Inst& in, const ModelId& m) const {
    return cluster_.find(m, in.spec.gpu_type);
  }
  const InstanceHardware& resident_hw(const Inst& in) const {
    return cluster_.hardware(*in.resident, in.spec.gpu_type);
  }
  TokenCount capacity(const Inst& in) const {
    return in.resident ? resident_hw(in).token_capacity : 0;
  }

  // Memory the running set needs for its next iteration.
  TokenCount need(const Inst& in) const {
    TokenCount s = 0;
    for (std::size_t r : in.running) s += footprint(r) + 1;
    return s;
  }
  bool fits(const Inst& in, TokenCount extra) const {
    return need(in) + extra <= capacity(in);
  }

  bool hostable(std::size_t i) const {
    const TokenCount total = GroundTruth::total_tokens(table_[i]) + 1;
    for (const auto& in : insts_) {
      if (in.failed) continue;
      const InstanceHardware* h = hw(in, table_[i].model);
      if (h && h->token_capacity >= total && out_tokens(i) <= h->max_output_tokens) return true;
    }
    return false;
  }

  bool can_host(const Inst& in, std::size_t i) const {
    if (in.failed) return false;
    const InstanceHardware* h = hw(in, table_[i].model);
    return h && h->token_capacity >= GroundTruth::total_tokens(table_[i]) + 1;
  }

  std::vector<DispatchTarget> targets() const {
    std::vector<DispatchTarget> t;
    for (const auto& in : insts_) {
      if (in.failed) continue;
      DispatchTarget d;
      d.instance = in.index;
      for (const auto& h : cluster_.catalog)
        if (h.gpu_type == in.spec.gpu_type) d.models.push_back(h.model.name);
      t.push_back(std::move(d));
    }
    return t;
  }

  // ------------------------------------------------------------- profiles
  TokenStats model_stats(const ModelId& m) const {
    std::size_t n = 0;
    for (const auto& r : table_) n += r.model == m;
    if (n >= 2)
      return fit_token_stats(trace_, [&](const Request& r) { return r.model == m; });
    return history_.fallback();
  }

  const InstanceProfile& profile(const ModelId& m, const std::string& gpu) {
    const ProfileKey key{m.name, gpu};
    auto it = profiles_.find(key);
    if (it != profiles_.end()) return it->second;
    auto given = opt_.profiles.find(key);
    InstanceProfile p = given != opt_.profiles.end()
                            ? given->second
                            : profile_instance(cluster_.hardware(m, gpu), model_stats(m));
    return profiles_.emplace(key, p).first->second;
  }

  void prepare_policy() {
    if (opt_.policy == Policy::kQlm || opt_.policy == Policy::kStaticBatch) {
      // Reference: the most frequent model on the first instance's GPU type.
      std::map<std::string, std::size_t> freq;
      for (const auto& r : table_) ++freq[r.model.name];
      std::string best;
      std::size_t best_n = 0;
      for (const auto& [m, n] : freq)
        if (n > best_n) best = m, best_n = n;
      const std::string gpu = insts_.front().spec.gpu_type;
      double avg_batch = 32.0;
      if (const InstanceHardware* h = cluster_.find(best, gpu)) {
        const TokenStats s = model_stats(best);
        avg_batch = static_cast<double>(h->token_capacity) / (s.mean_input + s.mean_output);
      }
      if (opt_.policy == Policy::kQlm) {
        GroupingConfig g = opt_.qlm.grouping;
        if (opt_.qlm.auto_batch_size) g.avg_batch_size = std::max(1.0, avg_batch);
        g.seed = opt_.seed;
        groups_.emplace(g, history_);
      } else if (opt_.static_batch_size == 0) {
        opt_.static_batch_size = std::max<std::size_t>(1, static_cast<std::size_t>(avg_batch));
      }
    }
  }

  // ---------------------------------------------------------- bookkeeping
  void set_phase(std::size_t i, Phase p) { req_[i].phase = p; }

  void wake(Inst& in) {
    if (in.failed || in.iterating || in.boundary_pending) return;
    in.boundary_pending = true;
    push(std::max(now_, in.busy_until), kBoundary, in.index, in.epoch);
  }

  void admit(Inst& in, std::size_t r) {
    ReqState& s = req_[r];
    set_phase(r, Phase::kRunning);
    s.instance = in.index;
    s.prefill_pending = true;
    s.ready_at = now_;
    s.admit_seq = ++admit_counter_;
    if (std::isnan(s.first_pull)) s.first_pull = now_;
    in.running.push_back(r);
    log({now_, EventKind::kPull, static_cast<std::int64_t>(r), group_of(r), in.index, kNaN, ""});
  }

  void restore(Inst& in, std::size_t r) {
    ReqState& s = req_[r];
    in.kv_held.erase(std::find(in.kv_held.begin(), in.kv_held.end(), r));
    const Seconds transfer =
        static_cast<double>(footprint(r)) / resident_hw(in).kv_transfer_bandwidth;
    s.ready_at = std::max(now_, s.kv_ready_at) + transfer;
    set_phase(r, Phase::kRunning);
    in.running.push_back(r);
    log({now_, EventKind::kRestore, static_cast<std::int64_t>(r), group_of(r), in.index,
         s.ready_at - now_, ""});
  }

  // Moves a running request to host memory with its progress intact.
  void park(Inst& in, std::size_t r, EventKind kind) {
    ReqState& s = req_[r];
    in.running.erase(std::find(in.running.begin(), in.running.end(), r));
    const Seconds transfer =
        static_cast<double>(footprint(r)) / resident_hw(in).kv_transfer_bandwidth;
    s.kv_ready_at = std::max(now_, s.ready_at) + transfer;
    s.preempt_seq = ++preempt_counter_;
    set_phase(r, Phase::kKvHeld);
    in.kv_held.push_back(r);
    log({now_, kind, static_cast<std::int64_t>(r), group_of(r), in.index,
         static_cast<double>(footprint(r)), ""});
    if (kind == EventKind::kEvictStart)
      log_later({s.kv_ready_at, EventKind::kEvictDone, static_cast<std::int64_t>(r),
                 group_of(r), in.index, kNaN, ""});
  }

  // Returns a request to waiting with its progress discarded.
  void reset_to_waiting(std::size_t r) {
    ReqState& s = req_[r];
    s.discarded += s.generated;
    s.generated = 0;
    s.prefill_pending = false;
    s.instance = -1;
    set_phase(r, Phase::kQueued);
    if (opt_.policy == Policy::kQlm) {
      GroupRt& g = grt_.at(s.group);
      g.cursor = std::min(g.cursor, s.group_pos);
    }
  }

  std::int64_t group_of(std::size_t r) const {
    return opt_.policy == Policy::kQlm ? req_[r].group.value : -1;
  }

  // ---------------------------------------------------------------- arrival
  void on_arrival(std::size_t i) {
    log({now_, EventKind::kArrival, static_cast<std::int64_t>(i), -1, -1, kNaN, ""});
    if (!hostable(i)) {
      set_phase(i, Phase::kRejected);
      log({now_, EventKind::kRejected, static_cast<std::int64_t>(i), -1, -1, kNaN,
           "request too large for every instance"});
      return;
    }
    if (opt_.policy == Policy::kQlm) {
      set_phase(i, Phase::kUngrouped);
      buffer_.push_back(i);
      if (!control_pending_) {
        control_pending_ = true;
        push(now_, kControl, 0);
      }
      return;
    }
    dispatch(i);
  }

  void dispatch(std::size_t i) {
    const auto t = targets();
    std::vector<DispatchTarget> capable;
    for (const auto& d : t)
      if (can_host(insts_[d.instance], i)) capable.push_back(d);
    const int k = rr_.next(table_[i].model, capable);
    if (k < 0) {
      set_phase(i, Phase::kRejected);
      log({now_, EventKind::kRejected, static_cast<std::int64_t>(i), -1, -1, kNaN,
           "no surviving instance can host the request"});
      return;
    }
    set_phase(i, Phase::kQueued);
    enqueue(insts_[k], i);
    wake(insts_[k]);
  }

  void enqueue(Inst& in, std::size_t i) {
    auto pos = opt_.policy == Policy::kFcfs
                   ? std::upper_bound(in.queue.begin(), in.queue.end(), i, FcfsLess{table_})
                   : std::upper_bound(in.queue.begin(), in.queue.end(), i, EdfLess{table_});
    in.queue.insert(pos, i);
  }

  // ------------------------------------------------------------- boundaries
  void on_boundary(int k, std::uint64_t epoch) {
    Inst& in = insts_[k];
    if (in.epoch != epoch || in.failed) return;
    in.boundary_pending = false;
    if (now_ < in.busy_until) {
      wake(in);
      return;
    }
    if (opt_.policy == Policy::kStaticBatch) {
      static_boundary(in);
      return;
    }
    if (in.iterating) finish_iteration(in);
    in.iterating = false;
    if (in.resident) enforce_capacity(in);
    if (opt_.policy == Policy::kQlm)
      qlm_actuate(in);
    else
      baseline_actuate(in);
    if (now_ < in.busy_until) {  // a swap started
      wake(in);
      return;
    }
    if (opt_.check_invariants) check_capacity(in);
    start_iteration(in);
    if (opt_.check_invariants && (++boundaries_ % 4096) == 0) check_partition();
  }

  void finish_iteration(Inst& in) {
    for (std::size_t r : in.iter_members) {
      ReqState& s = req_[r];
      if (s.phase != Phase::kRunning || s.instance != in.index) continue;
      ++s.generated;
      if (s.prefill_pending) {
        s.prefill_pending = false;
        if (std::isnan(s.first_token)) {
          s.first_token = now_;
          log({now_, EventKind::kFirstToken, static_cast<std::int64_t>(r), group_of(r),
               in.index, kNaN, ""});
        }
      }
      if (s.generated > out_tokens(r))
        throw InvariantViolation("request " + table_[r].id + " over-generated");
      if (s.generated == out_tokens(r)) complete(in, r);
    }
    in.iter_members.clear();
  }

  void complete(Inst& in, std::size_t r) {
    in.running.erase(std::find(in.running.begin(), in.running.end(), r));
    set_phase(r, Phase::kCompleted);
    req_[r].instance = -1;
    log({now_, EventKind::kCompletion, static_cast<std::int64_t>(r), group_of(r), in.index,
         kNaN, ""});
    if (opt_.policy == Policy::kQlm) group_member_done(r);
  }

  // Most recently admitted requests go to host memory until the next
  // iteration's growth fits.
  void enforce_capacity(Inst& in) {
    const TokenCount cap = capacity(in);
    TokenCount n = need(in);
    while (n > cap && !in.running.empty()) {
      auto victim = std::max_element(in.running.begin(), in.running.end(),
                                     [&](std::size_t a, std::size_t b) {
                                       return req_[a].admit_seq < req_[b].admit_seq;
                                     });
      const std::size_t r = *victim;
      n -= footprint(r) + 1;
      park(in, r, EventKind::kPreemption);
    }
  }

  void start_iteration(Inst& in) {
    if (in.running.empty()) return;
    std::vector<std::size_t> ready;
    Seconds next_ready = kInf;
    bool prefill = false;
    for (std::size_t r : in.running) {
      if (req_[r].ready_at <= now_) {
        ready.push_back(r);
        prefill = prefill || req_[r].prefill_pending;
      } else {
        next_ready = std::min(next_ready, req_[r].ready_at);
      }
    }
    if (ready.empty()) {
      in.boundary_pending = true;
      push(next_ready, kBoundary, in.index, in.epoch);
      return;
    }
    const InstanceHardware& h = resident_hw(in);
    const Seconds dur = h.decode_iteration + (prefill ? h.prefill : 0.0);
    if (opt_.record_iterations) {
      IterationRecord rec;
      rec.instance = in.index;
      rec.start = now_;
      rec.duration = dur;
      rec.ready = static_cast<int>(ready.size());
      rec.inflight = static_cast<int>(in.running.size() + in.kv_held.size());
      rec.tokens = static_cast<TokenCount>(ready.size());
      for (std::size_t r : in.running) rec.footprint += footprint(r);
      rec.backlog = backlog(in);
      rec.prefill = prefill;
      iterations_.push_back(rec);
    }
    in.iter_members = std::move(ready);
    in.iterating = true;
    in.boundary_pending = true;
    in.busy_time += dur;
    push(now_ + dur, kBoundary, in.index, in.epoch);
  }

  std::size_t backlog(const Inst& in) const {
    if (opt_.policy != Policy::kQlm) return in.queue.size() + in.kv_held.size();
    std::size_t n = in.kv_held.size();
    for (RequestGroupId g : in.vq)
      for (std::size_t r : groups_->at(g).members) n += req_[r].phase == Phase::kQueued;
    return n;
  }

  // -------------------------------------------------------------- swapping
  Seconds swap_cost(const Inst& in, const ModelId& m) const {
    const InstanceHardware& h = cluster_.hardware(m, in.spec.gpu_type);
    for (const auto& w : in.warm)
      if (w.model == m.name) return std::max(0.0, w.ready - now_) + h.swap_warm;
    return h.swap_cold + h.swap_warm;
  }

  void trim_warm(Inst& in) {
    while (static_cast<int>(in.warm.size()) > in.spec.cpu_model_slots) {
      auto lru = std::min_element(in.warm.begin(), in.warm.end(),
                                  [](const WarmEntry& a, const WarmEntry& b) {
                                    return a.last_use < b.last_use;
                                  });
      in.warm.erase(lru);
    }
  }

  void touch_warm(Inst& in, const std::string& model, Seconds ready) {
    for (auto& w : in.warm)
      if (w.model == model) {
        w.last_use = ++warm_clock_;
        return;
      }
    in.warm.push_back({model, ready, ++warm_clock_});
  }

  // Occupies the instance while `target` is loaded. Whatever still runs is
  // flushed and restarts later.
  void swap_model(Inst& in, const ModelId& target) {
    if (in.resident && *in.resident == target) return;
    const Seconds cost = swap_cost(in, target);
    for (std::size_t r : std::vector<std::size_t>(in.running)) {
      log({now_, EventKind::kFlush, static_cast<std::int64_t>(r), group_of(r), in.index,
           static_cast<double>(req_[r].generated), ""});
      in.running.erase(std::find(in.running.begin(), in.running.end(), r));
      reset_to_waiting(r);
      if (opt_.policy != Policy::kQlm) enqueue(in, r);
    }
    log({now_, EventKind::kSwapStart, -1, -1, in.index, cost, target.name});
    if (in.resident) touch_warm(in, in.resident->name, now_);
    touch_warm(in, target.name, now_ + cost);
    trim_warm(in);
    in.resident = target;
    in.busy_until = now_ + cost;
    in.busy_time += cost;
    log_later({in.busy_until, EventKind::kSwapDone, -1, -1, in.index, kNaN, target.name});
  }

  // Keeps the models of upcoming groups in the host tier, in queue order.
  void prefetch(Inst& in) {
    if (!opt_.qlm.prefetch || in.spec.cpu_model_slots <= 0) return;
    std::vector<std::string> want;
    for (RequestGroupId g : in.vq) {
      const std::string& m = groups_->at(g).model.name;
      if (in.resident && in.resident->name == m) continue;
      if (std::find(want.begin(), want.end(), m) == want.end()) want.push_back(m);
      if (static_cast<int>(want.size()) >= in.spec.cpu_model_slots) break;
    }
    if (want.empty()) return;
    for (std::size_t k = 0; k < want.size(); ++k) {
      bool have = false;
      for (auto& w : in.warm)
        if (w.model == want[k]) {
          have = true;
          w.last_use = ++warm_clock_;
        }
      if (have) continue;
      if (static_cast<int>(in.warm.size()) >= in.spec.cpu_model_slots) {
        // Drop the least recently used entry that is not wanted.
        auto victim = in.warm.end();
        for (auto it = in.warm.begin(); it != in.warm.end(); ++it) {
          if (std::find(want.begin(), want.end(), it->model) != want.end()) continue;
          if (victim == in.warm.end() || it->last_use < victim->last_use) victim = it;
        }
        if (victim == in.warm.end()) break;
        in.warm.erase(victim);
      }
      const InstanceHardware& h = cluster_.hardware(want[k], in.spec.gpu_type);
      in.warm.push_back({want[k], now_ + h.swap_cold, ++warm_clock_});
    }
  }

  // ------------------------------------------------------------- baselines
  void baseline_actuate(Inst& in) {
    if (in.resident) {
      // Host-held requests come back first, in preemption order; while any
      // remain, nothing new is admitted.
      std::vector<std::size_t> held = in.kv_held;
      for (std::size_t r : held) {
        if (!fits(in, footprint(r) + 1)) break;
        restore(in, r);
      }
      if (in.kv_held.empty()) {
        while (!in.queue.empty()) {
          const std::size_t r = in.queue.front();
          if (!(table_[r].model == *in.resident)) break;
          if (!fits(in, table_[r].input_tokens + 1)) break;
          in.queue.erase(in.queue.begin());
          admit(in, r);
        }
      }
    }
    if (in.running.empty() && in.kv_held.empty() && !in.queue.empty()) {
      const ModelId& m = table_[in.queue.front()].model;
      if (!in.resident || !(*in.resident == m)) swap_model(in, m);
    }
  }

  // Fixed batches with a worst-case deterministic occupancy.
  void static_boundary(Inst& in) {
    in.static_busy = false;
    if (in.queue.empty()) return;
    const ModelId model = table_[in.queue.front()].model;
    if (!in.resident || !(*in.resident == model)) {
      swap_model(in, model);
      wake(in);
      return;
    }
    const InstanceHardware& h = resident_hw(in);
    std::vector<std::size_t> batch;
    TokenCount mem = 0;
    for (auto it = in.queue.begin(); it != in.queue.end() && batch.size() < opt_.static_batch_size;) {
      const std::size_t r = *it;
      if (!(table_[r].model == model)) {
        ++it;
        continue;
      }
      const TokenCount t = GroundTruth::total_tokens(table_[r]);
      if (mem + t > h.token_capacity) break;
      mem += t;
      batch.push_back(r);
      it = in.queue.erase(it);
    }
    const InstanceProfile& p = profile(model, in.spec.gpu_type);
    const Seconds dur = static_batch_duration(p);
    for (std::size_t r : batch) {
      ReqState& s = req_[r];
      set_phase(r, Phase::kRunning);
      s.instance = in.index;
      s.first_pull = now_;
      s.admit_seq = ++admit_counter_;
      in.running.push_back(r);
      log({now_, EventKind::kPull, static_cast<std::int64_t>(r), -1, in.index, kNaN, ""});
      push(now_ + h.prefill + h.decode_iteration, kStaticFirst, static_cast<std::int64_t>(r));
      push(now_ + h.prefill + static_cast<double>(out_tokens(r)) * h.decode_iteration,
           kStaticDone, static_cast<std::int64_t>(r));
    }
    if (opt_.check_invariants && mem > h.token_capacity)
      throw InvariantViolation("static batch exceeds capacity");
    in.static_busy = true;
    in.busy_until = now_ + dur;
    in.busy_time += dur;
    in.boundary_pending = true;
    push(in.busy_until, kBoundary, in.index, in.epoch);
  }

  void on_static_first(std::size_t r) {
    ReqState& s = req_[r];
    if (s.phase != Phase::kRunning || !std::isnan(s.first_token)) return;
    s.first_token = now_;
    log({now_, EventKind::kFirstToken, static_cast<std::int64_t>(r), -1, s.instance, kNaN, ""});
  }

  void on_static_done(std::size_t r) {
    ReqState& s = req_[r];
    if (s.phase != Phase::kRunning) return;
    s.generated = out_tokens(r);
    complete(insts_[s.instance], r);
  }

  // ----------------------------------------------------------------- qlm
  const InstanceProfile* profile_for(const Inst& in, const ModelId& m) {
    if (!hw(in, m)) return nullptr;
    return &profile(m, in.spec.gpu_type);
  }

  std::size_t remaining(const RequestGroup& g) const { return g.members.size() - grt_.at(g.id).done; }

  // Remaining slack of the earliest unserved member; groups whose members are
  // all in flight have nothing at stake.
  Seconds group_slack(const RequestGroup& g) const {
    Seconds d = kInf;
    for (std::size_t r : g.members)
      if (std::isnan(req_[r].first_pull) && req_[r].phase != Phase::kRejected)
        d = std::min(d, table_[r].deadline());
    return std::isfinite(d) ? d - now_ : kNoStake;
  }

  GroupCompletionEstimate group_estimate(const Inst& in, const RequestGroup& g) {
    const InstanceProfile* p = profile_for(in, g.model);
    if (!p) return {kInf, kInf};
    return estimate_group_completion(remaining(g), g.stats, *p, opt_.qlm.decode_tail);
  }

  QueuedGroup queued(const Inst& in, RequestGroupId id) {
    const RequestGroup& g = groups_->at(id);
    const GroupCompletionEstimate e = group_estimate(in, g);
    return {id, g.model, group_slack(g), e.serve_time, e.completion_time,
            hw(in, g.model) ? swap_cost(in, g.model) : kInf};
  }

  QueueView view(const Inst& in) {
    QueueView v;
    v.id = VirtualQueueId(in.index);
    v.resident = in.resident;
    for (RequestGroupId g : in.vq) v.groups.push_back(queued(in, g));
    return v;
  }

  double queue_cost(const QueueView& v) const {
    const std::vector<Seconds> wt = predicted_waits(v);
    double c = 0.0;
    for (std::size_t j = 0; j < wt.size(); ++j)
      c += penalty_cost(wt[j] - v.groups[j].slo, opt_.qlm.violation_weight);
    return c;
  }

  bool running_group(RequestGroupId id) const { return grt_.at(id).started; }

  // Cheapest insertion of a new group over all queues and positions.
  void place_group(RequestGroupId id) {
    const RequestGroup& g = groups_->at(id);
    int best_inst = -1;
    std::size_t best_pos = 0;
    double best_delta = kInf;
    for (Inst& in : insts_) {
      if (in.failed || !hw(in, g.model)) continue;
      QueueView v = view(in);
      const double before = queue_cost(v);
      const QueuedGroup cand = queued(in, id);
      std::size_t first = 0;
      if (!opt_.qlm.eviction && !in.vq.empty() && running_group(in.vq.front())) first = 1;
      for (std::size_t pos = first; pos <= v.groups.size(); ++pos) {
        QueueView w = v;
        w.groups.insert(w.groups.begin() + pos, cand);
        const double delta = queue_cost(w) - before;
        if (delta < best_delta - 1e-9 ||
            (std::abs(delta - best_delta) <= 1e-9 && in.index == best_inst && pos > best_pos)) {
          best_delta = delta;
          best_inst = in.index;
          best_pos = pos;
        }
      }
    }
    if (best_inst < 0) throw ValidationError("no instance can host group " + std::to_string(id.value));
    Inst& in = insts_[best_inst];
    in.vq.insert(in.vq.begin() + best_pos, id);
    grt_[id].instance = best_inst;
    wake(in);
  }

  void on_control() {
    control_pending_ = false;
    std::vector<RequestGroupId> fresh;
    std::vector<std::size_t> batch = std::move(buffer_);
    buffer_.clear();
    if (batch.size() >= 2) {
      fresh = groups_->form(table_, batch);
    } else if (batch.size() == 1) {
      const RequestGroupId id = groups_->assign_incoming(table_, batch[0]);
      if (!grt_.count(id)) fresh.push_back(id);
      const RequestGroup& g = groups_->at(id);
      req_[batch[0]].group = id;
      req_[batch[0]].group_pos = g.members.size() - 1;
    }
    for (RequestGroupId id : fresh) {
      grt_[id];
      const RequestGroup& g = groups_->at(id);
      for (std::size_t k = 0; k < g.members.size(); ++k) {
        req_[g.members[k]].group = id;
        req_[g.members[k]].group_pos = k;
      }
      log({now_, EventKind::kGroupFormed, -1, id.value, -1, static_cast<double>(g.size()),
           g.model.name});
    }
    for (std::size_t r : batch) set_phase(r, Phase::kQueued);
    for (RequestGroupId id : fresh) place_group(id);
    for (std::size_t r : batch) {
      Inst& in = insts_[grt_.at(req_[r].group).instance];
      log_estimate(in, r);
      wake(in);
    }
    dirty_ = true;
    maybe_solve(false);
  }

  void log_estimate(Inst& in, std::size_t r) {
    const RequestGroupId id = req_[r].group;
    const RequestGroup& g = groups_->at(id);
    const QueueView v = view(in);
    const std::vector<Seconds> wt = predicted_waits(v);
    std::size_t pos = 0;
    while (pos < in.vq.size() && in.vq[pos] != id) ++pos;
    std::size_t ahead = 0;
    for (std::size_t k = 0; k < req_[r].group_pos; ++k)
      if (std::isnan(req_[g.members[k]].first_pull)) ++ahead;
    const InstanceProfile* p = profile_for(in, g.model);
    const Seconds est = wt[pos] + static_cast<double>(ahead) * g.stats.mean_output / p->theta;
    log({now_, EventKind::kEstimate, static_cast<std::int64_t>(r), id.value, in.index, est, ""});
  }

  void maybe_solve(bool force) {
    if (pending_plan_ || !dirty_) return;
    if (!force && now_ < next_solve_) return;
    std::vector<QueueView> views;
    bool idle_with_work = false;
    std::size_t waiting_groups = 0;
    for (Inst& in : insts_) {
      if (in.failed) continue;
      views.push_back(view(in));
      for (RequestGroupId g : in.vq) waiting_groups += !running_group(g);
    }
    for (Inst& in : insts_)
      if (!in.failed && in.vq.empty() && in.running.empty() && waiting_groups > 0)
        idle_with_work = true;
    if (!force && !idle_with_work && detect_slo_violation(views).empty()) return;
    solve();
  }

  void solve() {
    dirty_ = false;
    next_solve_ = now_ + opt_.qlm.min_solve_interval;
    std::vector<int> live;
    for (const Inst& in : insts_)
      if (!in.failed) live.push_back(in.index);
    std::vector<QueueInput> queues;
    std::vector<GroupInput> ginputs;
    EstimateTable est;
    std::map<int, int> qindex;
    for (int k : live) {
      Inst& in = insts_[k];
      QueueInput q;
      q.id = VirtualQueueId(k);
      q.resident = in.resident;
      for (const auto& h : cluster_.catalog)
        if (h.gpu_type == in.spec.gpu_type) q.swap_time[h.model.name] = swap_cost(in, h.model);
      qindex[k] = static_cast<int>(queues.size());
      queues.push_back(std::move(q));
    }
    for (int k : live)
      for (RequestGroupId id : insts_[k].vq) {
        const RequestGroup& g = groups_->at(id);
        GroupInput gi;
        gi.id = id;
        gi.creation_time = g.creation_time;
        gi.model = g.model;
        gi.slo = group_slack(g);
        if (running_group(id)) {
          gi.pinned_queue = qindex[k];
          gi.pinned_head = !opt_.qlm.eviction;
        }
        ginputs.push_back(gi);
        for (int h : live) est[{id, VirtualQueueId(h)}] = group_estimate(insts_[h], g);
      }
    if (ginputs.empty()) return;
    // Head pins beyond one per queue cannot occur: only the head runs when
    // eviction is off. Guard anyway by unpinning extra heads.
    std::map<int, int> heads;
    for (auto& gi : ginputs)
      if (gi.pinned_head && heads[gi.pinned_queue]++ > 0) gi.pinned_head = false;

    const AssignmentProblem P =
        build_problem(ginputs, queues, est, 0, opt_.qlm.violation_weight);
    const auto t0 = std::chrono::steady_clock::now();
    SolverOptions so;
    so.time_budget = 1e9;  // determinism: bounded by node and pass limits only
    so.node_budget = opt_.qlm.exact_node_budget;
    so.max_passes = opt_.qlm.heuristic_passes;
    const bool exact = P.total_slots() <= opt_.qlm.exact_slot_limit;
    const SchedulePlan plan = exact ? solve_exact(P, so) : solve_heuristic(P, so);
    solver_wall_ += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    ++solves_;
    log({now_, EventKind::kSolve, -1, -1, -1, opt_.qlm.solver_latency, plan.solver});
    if (opt_.check_invariants) validate_assignment(P, plan.assignment);
    if (!plan.feasible)
      log({now_, EventKind::kScaleUp, -1, -1, -1, plan.objective, plan.solver});

    // Current order in problem indices, for comparison.
    std::map<RequestGroupId, int> gindex;
    for (int i = 0; i < static_cast<int>(P.groups.size()); ++i)
      if (!P.groups[i].padding) gindex[P.groups[i].id] = i;
    std::vector<std::vector<int>> current(queues.size());
    for (int k : live)
      for (RequestGroupId id : insts_[k].vq) current[qindex[k]].push_back(gindex.at(id));
    const double current_obj = detail::objective_of(P, current);
    if (!(plan.objective < current_obj - 1e-6)) return;

    PendingPlan pp;
    pp.orders.assign(insts_.size(), {});
    for (int k : live) pp.orders[k] = plan.queue_order(P, qindex[k]);
    pp.objective = plan.objective;
    pp.solver = plan.solver;
    pp.transitions = count_transitions(P, plan);
    plans_.push_back(std::move(pp));
    pending_plan_ = true;
    push(now_ + opt_.qlm.solver_latency, kPlanReady, static_cast<std::int64_t>(plans_.size() - 1));
  }

  void on_plan_ready(std::size_t idx) {
    pending_plan_ = false;
    const PendingPlan& pp = plans_[idx];
    for (const auto& order : pp.orders)
      for (RequestGroupId id : order)
        if (!groups_->contains(id) || insts_[grt_.at(id).instance].failed) {
          log({now_, EventKind::kPlanDropped, -1, id.value, -1, kNaN, "stale plan"});
          dirty_ = true;
          return;
        }
    std::vector<std::vector<RequestGroupId>> next(insts_.size());
    std::set<RequestGroupId> planned;
    for (std::size_t k = 0; k < insts_.size(); ++k)
      for (RequestGroupId id : pp.orders[k]) {
        planned.insert(id);
        // Groups that started since the snapshot stay where they run.
        const int home = grt_.at(id).instance;
        if (running_group(id) && home != static_cast<int>(k)) continue;
        next[k].push_back(id);
      }
    for (std::size_t k = 0; k < insts_.size(); ++k) {
      for (RequestGroupId id : insts_[k].vq) {
        if (std::find(next[k].begin(), next[k].end(), id) != next[k].end()) continue;
        bool elsewhere = false;
        for (std::size_t h = 0; h < insts_.size(); ++h)
          if (h != k && std::find(next[h].begin(), next[h].end(), id) != next[h].end())
            elsewhere = true;
        if (elsewhere) continue;
        if (planned.count(id) && running_group(id))
          next[k].insert(next[k].begin(), id);
        else
          next[k].push_back(id);
      }
    }
    ++plans_applied_;
    plan_transitions_ += pp.transitions;
    log({now_, EventKind::kPlanApplied, -1, -1, -1, pp.objective, pp.solver});
    for (std::size_t k = 0; k < insts_.size(); ++k) {
      Inst& in = insts_[k];
      if (next[k] == in.vq) continue;
      const bool head_changed =
          !next[k].empty() && (in.vq.empty() || in.vq.front() != next[k].front());
      in.vq = next[k];
      for (RequestGroupId id : in.vq) grt_.at(id).instance = static_cast<int>(k);
      if (head_changed) in.plan_head_changed = true;
      wake(in);
    }
    if (opt_.check_invariants) check_queues();
  }

  // Evicts requests of groups ranked after position `pos` (latest group,
  // latest admission first) until `extra` tokens fit. Evicts nothing if that
  // cannot succeed.
  bool make_room(Inst& in, std::size_t pos, TokenCount extra) {
    if (fits(in, extra)) return true;
    if (!opt_.qlm.eviction) return false;
    std::map<RequestGroupId, std::size_t> rank;
    for (std::size_t k = 0; k < in.vq.size(); ++k) rank[in.vq[k]] = k;
    std::vector<std::size_t> victims;
    for (std::size_t r : in.running) {
      auto it = rank.find(req_[r].group);
      if (it == rank.end() || it->second > pos) victims.push_back(r);
    }
    std::sort(victims.begin(), victims.end(), [&](std::size_t a, std::size_t b) {
      const std::size_t ra = rank.count(req_[a].group) ? rank[req_[a].group] : in.vq.size();
      const std::size_t rb = rank.count(req_[b].group) ? rank[req_[b].group] : in.vq.size();
      if (ra != rb) return ra > rb;
      return req_[a].admit_seq > req_[b].admit_seq;
    });
    TokenCount freed = 0;
    std::size_t count = 0;
    const TokenCount over = need(in) + extra - capacity(in);
    while (count < victims.size() && freed < over) freed += footprint(victims[count++]) + 1;
    if (freed < over) return false;
    for (std::size_t k = 0; k < count; ++k) park(in, victims[k], EventKind::kEvictStart);
    return true;
  }

  void evict_all_but(Inst& in, std::optional<RequestGroupId> keep) {
    for (std::size_t r : std::vector<std::size_t>(in.running))
      if (!keep || req_[r].group != *keep) park(in, r, EventKind::kEvictStart);
  }

  void qlm_actuate(Inst& in) {
    if (in.vq.empty()) {
      in.plan_head_changed = false;
      return;
    }
    prefetch(in);
    const RequestGroup& head = groups_->at(in.vq.front());
    if (in.plan_head_changed) {
      in.plan_head_changed = false;
      if (opt_.qlm.eviction) evict_all_but(in, head.id);
    }
    if (!in.resident || !(*in.resident == head.model)) {
      if (!in.running.empty()) {
        if (!opt_.qlm.eviction) return;  // drain first
        evict_all_but(in, std::nullopt);
      }
      swap_model(in, head.model);
      return;
    }
    for (std::size_t pos = 0; pos < in.vq.size(); ++pos) {
      RequestGroup& g = groups_->at(in.vq[pos]);
      if (!(g.model == *in.resident)) return;
      GroupRt& rt = grt_.at(g.id);
      std::vector<std::size_t> held;
      for (std::size_t r : in.kv_held)
        if (req_[r].group == g.id) held.push_back(r);
      for (std::size_t r : held) {
        if (!make_room(in, pos, footprint(r) + 1)) return;
        restore(in, r);
      }
      while (rt.cursor < g.members.size() && req_[g.members[rt.cursor]].phase != Phase::kQueued)
        ++rt.cursor;
      for (std::size_t k = rt.cursor; k < g.members.size(); ++k) {
        const std::size_t r = g.members[k];
        if (req_[r].phase != Phase::kQueued) continue;
        if (!make_room(in, pos, table_[r].input_tokens + 1)) return;
        if (opt_.check_invariants && std::isnan(req_[r].first_pull))
          for (std::size_t e = 0; e < k; ++e)
            if (std::isnan(req_[g.members[e]].first_pull) &&
                req_[g.members[e]].phase != Phase::kRejected)
              throw InvariantViolation("FCFS within group violated in group " +
                                       std::to_string(g.id.value));
        admit(in, r);
        if (!rt.started) {
          rt.started = true;
          g.state = GroupState::kRunning;
        }
      }
    }
  }

  void group_member_done(std::size_t r) {
    const RequestGroupId id = req_[r].group;
    GroupRt& rt = grt_.at(id);
    RequestGroup& g = groups_->at(id);
    if (++rt.done < g.members.size()) return;
    Inst& in = insts_[rt.instance];
    in.vq.erase(std::find(in.vq.begin(), in.vq.end(), id));
    groups_->erase(id);
    dirty_ = true;
    for (const Inst& other : insts_)
      if (!other.failed && other.vq.empty()) {
        maybe_solve(true);
        break;
      }
  }

  // --------------------------------------------------------------- failure
  void on_failure(int k) {
    Inst& in = insts_[k];
    if (in.failed) return;
    log({now_, EventKind::kFailure, -1, -1, k, kNaN, ""});
    in.failed = true;
    ++in.epoch;
    in.iterating = false;
    in.boundary_pending = false;
    std::vector<std::size_t> lost = in.running;
    lost.insert(lost.end(), in.kv_held.begin(), in.kv_held.end());
    in.running.clear();
    in.kv_held.clear();
    in.iter_members.clear();
    in.resident.reset();
    for (std::size_t r : lost) {
      log({now_, EventKind::kFlush, static_cast<std::int64_t>(r), group_of(r), k,
           static_cast<double>(req_[r].generated), "instance failure"});
      reset_to_waiting(r);
    }
    if (opt_.policy == Policy::kQlm) {
      std::vector<RequestGroupId> orphans = std::move(in.vq);
      in.vq.clear();
      for (RequestGroupId id : orphans) {
        grt_.at(id).started = false;
        place_group(id);
      }
      dirty_ = true;
      pending_plan_ = false;
      maybe_solve(true);
    } else {
      std::vector<std::size_t> orphans = std::move(in.queue);
      in.queue.clear();
      orphans.insert(orphans.end(), lost.begin(), lost.end());
      std::sort(orphans.begin(), orphans.end());
      for (std::size_t r : orphans) dispatch(r);
    }
  }

  // ------------------------------------------------------------ invariants
  void check_capacity(const Inst& in) const {
    if (!in.resident) {
      if (!in.running.empty()) throw InvariantViolation("running requests without a model");
      return;
    }
    TokenCount fp = 0;
    for (std::size_t r : in.running) fp += footprint(r);
    if (fp > capacity(in) || need(in) > capacity(in))
      throw InvariantViolation("token capacity exceeded on " + in.spec.name);
  }

  void check_queues() const {
    std::set<RequestGroupId> seen;
    for (const Inst& in : insts_)
      for (RequestGroupId id : in.vq) {
        if (!seen.insert(id).second)
          throw InvariantViolation("group " + std::to_string(id.value) + " in two queues");
        if (grt_.at(id).instance != in.index)
          throw InvariantViolation("group/queue map out of sync");
      }
  }

  // Every arrived request is in exactly one state container.
  void check_partition() const {
    std::vector<int> where(req_.size(), 0);
    for (const Inst& in : insts_) {
      for (std::size_t r : in.running) {
        if (req_[r].phase != Phase::kRunning || req_[r].instance != in.index)
          throw InvariantViolation("running set out of sync for " + table_[r].id);
        ++where[r];
      }
      for (std::size_t r : in.kv_held) {
        if (req_[r].phase != Phase::kKvHeld)
          throw InvariantViolation("kv_held set out of sync for " + table_[r].id);
        ++where[r];
      }
      for (std::size_t r : in.queue) {
        if (req_[r].phase != Phase::kQueued)
          throw InvariantViolation("queue out of sync for " + table_[r].id);
        ++where[r];
      }
    }
    if (opt_.policy == Policy::kQlm) {
      for (const Inst& in : insts_)
        for (RequestGroupId id : in.vq)
          for (std::size_t r : groups_->at(id).members)
            if (req_[r].phase == Phase::kQueued) ++where[r];
      for (std::size_t r : buffer_) ++where[r];
    }
    for (std::size_t r = 0; r < req_.size(); ++r) {
      const Phase p = req_[r].phase;
      const int expect = (p == Phase::kPending || p == Phase::kCompleted ||
                          p == Phase::kRejected)
                             ? 0
                             : 1;
      if (where[r] != expect)
        throw InvariantViolation("request " + table_[r].id + " is in " +
                                 std::to_string(where[r]) + " containers");
      if (p == Phase::kCompleted && req_[r].generated != out_tokens(r))
        throw InvariantViolation("token count mismatch for " + table_[r].id);
    }
  }

  // ------------------------------------------------------------------ data
  const Trace& trace_;
  ClusterConfig cluster_;
  SimOptions opt_;
  std::vector<Request> table_;
  std::vector<ReqState> req_;
  std::vector<Inst> insts_;
  TokenHistory history_;
  ProfileMap profiles_;
  std::optional<GroupSet> groups_;
  std::map<RequestGroupId, GroupRt> grt_;
  std::vector<std::size_t> buffer_;
  std::vector<PendingPlan> plans_;
  RoundRobin rr_;
  EventLog log_;
  std::vector<Event> deferred_;
  std::vector<IterationRecord> iterations_;
  std::priority_queue<Ev, std::vector<Ev>, std::greater<Ev>> events_;
  Seconds now_ = 0.0;
  Seconds next_solve_ = 0.0;
  std::uint64_t seq_ = 0;
  std::uint64_t warm_clock_ = 0;
  std::int64_t admit_counter_ = 0;
  std::int64_t preempt_counter_ = 0;
  std::uint64_t boundaries_ = 0;
  std::int64_t solves_ = 0;
  std::int64_t plans_applied_ = 0;
  std::int64_t plan_transitions_ = 0;
  double solver_wall_ = 0.0;
  bool control_pending_ = false;
  bool pending_plan_ = false;
  bool dirty_ = false;
};

inline SimResult run_simulation(const Trace& trace, const ClusterConfig& cluster,
                                SimOptions options) {
  return Simulator(trace, cluster, std::move(options)).run();
}

inline SimResult run_simulation(const Trace& trace, const ClusterConfig& cluster,
                                Policy policy, std::uint64_t seed) {
  SimOptions o;
  o.policy = policy;
  o.seed = seed;
  return run_simulation(trace, cluster, std::move(o));
}

}  // namespace vqs

#include "vqserve/sim/profiling.hpp"
