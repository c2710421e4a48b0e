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

// Offline profiling: saturate one simulated instance and read off its
// steady-state throughput, batch size and preemption slowdown.

#pragma once

#include <algorithm>
#include <cmath>
#include <random>

#include "vqserve/sim/simulator.hpp"

namespace vqs {

namespace detail {

inline TokenCount moment_matched_lognormal(std::mt19937_64& rng, double mean, double std,
                                           TokenCount lo, TokenCount hi) {
  const double s2 = std::log1p((std * std) / (mean * mean));
  std::lognormal_distribution<double> d(std::log(mean) - s2 / 2.0, std::sqrt(s2));
  const auto v = static_cast<TokenCount>(std::llround(d(rng)));
  return std::clamp(v, lo, hi);
}

}  // namespace detail

// Steady state is the stretch where requests are still waiting for
// admission, minus the first (prefill-only) iteration.
inline InstanceProfile profile_instance(const InstanceHardware& hw, const TokenStats& stats,
                                        const ProfilingHarness& harness) {
  hw.validate();
  stats.validate();
  const double avg_batch =
      static_cast<double>(hw.token_capacity) / (stats.mean_input + stats.mean_output);
  const int n = harness.batch_requests > 0
                    ? harness.batch_requests
                    : std::max(16, static_cast<int>(std::ceil(8.0 * avg_batch)));

  std::seed_seq seq{harness.seed, static_cast<std::uint64_t>(hw.token_capacity)};
  std::mt19937_64 rng(seq);
  Trace trace;
  trace.provenance = "profiling harness";
  for (int i = 0; i < n; ++i) {
    const TokenCount out = detail::moment_matched_lognormal(
        rng, stats.mean_output, stats.std_output, 1,
        std::min<TokenCount>(hw.max_output_tokens, hw.token_capacity / 2));
    const TokenCount in = detail::moment_matched_lognormal(
        rng, stats.mean_input, stats.std_input, 1, hw.token_capacity - out - 1);
    trace.requests.emplace_back(request_id(static_cast<std::size_t>(i)), 0.0, hw.model, 1e9,
                                in, out);
  }

  ClusterConfig cluster;
  cluster.catalog = {hw};
  InstanceSpec spec;
  spec.name = "profiler";
  spec.gpu_type = hw.gpu_type;
  spec.initial_model = hw.model;
  cluster.instances = {spec};

  SimOptions opt;
  opt.policy = Policy::kFcfs;
  opt.record_iterations = true;
  opt.history = TokenHistory{};
  const SimResult res = run_simulation(trace, cluster, opt);

  // Window of iterations.
  const auto& it = res.iterations;
  std::size_t lo = 1, hi = 1;
  while (hi < it.size() && it[hi].backlog > 0) ++hi;
  if (hi <= lo) {
    Seconds first_completion = kInf;
    for (const Event& e : res.log.events())
      if (e.kind == EventKind::kCompletion) {
        first_completion = e.t;
        break;
      }
    while (hi < it.size() && it[hi].start + it[hi].duration <= first_completion) ++hi;
  }
  if (hi <= lo) throw ProfilingError("profiling: no steady-state iterations for " + hw.model.name);

  const Seconds w0 = it[lo].start;
  const Seconds w1 = it[hi - 1].start + it[hi - 1].duration;
  double tokens = 0.0, busy = 0.0, inflight_time = 0.0;
  for (std::size_t k = lo; k < hi; ++k) {
    tokens += static_cast<double>(it[k].tokens);
    busy += it[k].duration;
    inflight_time += static_cast<double>(it[k].inflight) * it[k].duration;
  }
  const double theta = tokens / (w1 - w0);

  // Per-token decode latency of requests that decoded entirely in the window.
  std::vector<Seconds> first(trace.requests.size(), kInf), done(trace.requests.size(), kInf);
  for (const Event& e : res.log.events()) {
    if (e.kind == EventKind::kFirstToken) first[e.request] = e.t;
    if (e.kind == EventKind::kCompletion) done[e.request] = e.t;
  }
  auto slowdown = [&](bool windowed) {
    double time = 0.0, toks = 0.0;
    for (std::size_t r = 0; r < trace.requests.size(); ++r) {
      const TokenCount out = GroundTruth::output_tokens(trace.requests[r]);
      if (out < 2 || !std::isfinite(done[r])) continue;
      if (windowed && (first[r] < w0 || done[r] > w1)) continue;
      time += done[r] - first[r];
      toks += static_cast<double>(out - 1);
    }
    return toks > 0.0 ? time / toks / hw.decode_iteration : 0.0;
  };
  double eps = slowdown(true);
  if (eps == 0.0) eps = slowdown(false);

  InstanceProfile p;
  p.model = hw.model;
  p.gpu_type = hw.gpu_type;
  p.theta = theta;
  p.decode_per_token = hw.decode_iteration;
  p.inefficiency = std::max(1.0, eps);
  p.prefill = hw.prefill;
  p.token_capacity = hw.token_capacity;
  p.swap_cold = hw.swap_cold;
  p.swap_warm = hw.swap_warm;
  p.kv_transfer_bandwidth = hw.kv_transfer_bandwidth;
  p.max_output_tokens = hw.max_output_tokens;
  spdlog::debug("profile {}@{}: theta={:.1f} tok/s, batch={:.1f}, eps={:.3f}", hw.model.name,
                hw.gpu_type, theta, inflight_time / busy, p.inefficiency);
  p.validate();
  return p;
}

// Average number of requests in flight over the steady-state window.
inline double profiled_batch_size(const SimResult& res) {
  double t = 0.0, w = 0.0;
  for (const auto& r : res.iterations) {
    if (r.backlog == 0) continue;
    t += r.duration;
    w += static_cast<double>(r.inflight) * r.duration;
  }
  return t > 0.0 ? w / t : 0.0;
}

}  // namespace vqs
