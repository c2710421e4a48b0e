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

#include "vqserve/estimator.hpp"

#include <gtest/gtest.h>

#include "vqserve/scenarios.hpp"
#include "vqserve/stats.hpp"

namespace vqs {
namespace {

InstanceProfile profile(double theta = 1000.0) {
  InstanceProfile p;
  p.model = "m";
  p.gpu_type = "a100";
  p.theta = theta;
  p.decode_per_token = 0.025;
  p.inefficiency = 1.2;
  p.prefill = 0.5;
  p.token_capacity = 16384;
  p.swap_cold = 20.0;
  p.swap_warm = 6.0;
  p.max_output_tokens = 2048;
  return p;
}

const TokenStats kStats{200.0, 100.0, 100.0, 50.0};

TEST(EstimateWaitingTime, EmptyQueueWaitsZero) {
  const WaitEstimate w = estimate_waiting_time(0, kStats, profile());
  EXPECT_DOUBLE_EQ(w.mean, 0.0);
  EXPECT_DOUBLE_EQ(w.std, 0.0);
}

TEST(EstimateWaitingTime, TokensAheadOverThroughput) {
  const WaitEstimate w = estimate_waiting_time(25, kStats, profile());
  EXPECT_DOUBLE_EQ(w.mean, 5.0);
  EXPECT_DOUBLE_EQ(w.std, 0.5);
  EXPECT_DOUBLE_EQ(w.basis_tokens, 5000.0);
}

TEST(EstimateWaitingTime, NegativeQueueIsAnError) {
  EXPECT_THROW(estimate_waiting_time(-1, kStats, profile()), ValidationError);
}

TEST(EstimateDecodeTime, MaxOutputTimesSlowdown) {
  EXPECT_NEAR(estimate_decode_time(profile()), 61.44, 1e-9);
  InstanceProfile p = profile();
  p.inefficiency = 1.0;
  EXPECT_DOUBLE_EQ(estimate_decode_time(p), 2048 * 0.025);
  EXPECT_NEAR(estimate_decode_time(profile(), DecodeTail::kMean, &kStats), 200 * 1.2 * 0.025,
              1e-12);
}

TEST(EstimateRequestCompletion, HeadOfQueue) {
  EXPECT_NEAR(estimate_request_completion(1, kStats, profile()), 61.94, 1e-9);
  EXPECT_THROW(estimate_request_completion(0, kStats, profile()), ValidationError);
}

TEST(EstimateRequestCompletion, MonotoneInPosition) {
  for (int q = 1; q < 200; ++q)
    EXPECT_GE(estimate_request_completion(q + 1, kStats, profile()),
              estimate_request_completion(q, kStats, profile()));
}

TEST(EstimateGroupCompletion, SingletonIsPrefillPlusDecode) {
  const auto e = estimate_group_completion(1, kStats, profile());
  EXPECT_NEAR(e.completion_time, 0.5 + 61.44, 1e-9);
}

TEST(EstimateGroupCompletion, ServeTimeDrainsTheGroup) {
  const auto e = estimate_group_completion(40, kStats, profile());
  EXPECT_DOUBLE_EQ(e.serve_time, 8.0);
  EXPECT_NEAR(e.completion_time, 7.8 + 61.94, 1e-9);
  EXPECT_THROW(estimate_group_completion(0, kStats, profile()), ValidationError);
}

QueuedGroup qg(int id, const char* model, Seconds slo, Seconds serve, Seconds completion,
               Seconds swap = 0.0) {
  return {RequestGroupId(id), model, slo, serve, completion, swap};
}

TEST(DetectSloViolation, EmptyQueuesReportNothing) {
  EXPECT_TRUE(detect_slo_violation({}).empty());
  const std::vector<QueueView> qs{{VirtualQueueId(0), ModelId("m"), {}}};
  EXPECT_TRUE(detect_slo_violation(qs).empty());
}

TEST(DetectSloViolation, ReportsNegativeSlack) {
  const std::vector<QueueView> qs{
      {VirtualQueueId(0), ModelId("m"), {qg(0, "m", 10, 8, 20), qg(1, "m", 5, 1, 2)}}};
  const auto v = detect_slo_violation(qs);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].group, RequestGroupId(1));
  EXPECT_DOUBLE_EQ(v[0].predicted_wait, 8.0);
  EXPECT_DOUBLE_EQ(v[0].slack, -3.0);
  EXPECT_TRUE(v[0].violated());
}

// Interleaving X, Y, X, Y pays three swaps and waits on full completions;
// grouping X, X, Y, Y pays one.
TEST(PredictedWaits, InterleavingCostsExtraTransitions) {
  const Seconds S = 20.0, serve = 5.0, done = 30.0;
  auto queue = [&](std::vector<const char*> models) {
    QueueView q{VirtualQueueId(0), ModelId("X"), {}};
    for (std::size_t i = 0; i < models.size(); ++i)
      q.groups.push_back(qg(static_cast<int>(i), models[i], 1e6, serve, done, S));
    return q;
  };
  const auto inter = predicted_waits(queue({"X", "Y", "X", "Y"}));
  const auto grouped = predicted_waits(queue({"X", "X", "Y", "Y"}));
  EXPECT_EQ(inter, (std::vector<Seconds>{0, done + S, 2 * (done + S), 3 * (done + S)}));
  EXPECT_EQ(grouped, (std::vector<Seconds>{0, serve, serve + done + S, 2 * serve + done + S}));
  // Two extra transitions, each a swap plus waiting on a completion instead
  // of a serve time.
  EXPECT_DOUBLE_EQ(inter.back() - grouped.back(), 2 * S + 2 * (done - serve));
}

TEST(PredictedWaits, NoResidentModelPaysTheFirstSwap) {
  QueueView q{VirtualQueueId(0), std::nullopt, {qg(0, "X", 100, 5, 30, 12)}};
  EXPECT_EQ(predicted_waits(q), (std::vector<Seconds>{12.0}));
}

// ---------------------------------------------------------------------------
// Simulator as oracle
// ---------------------------------------------------------------------------

std::vector<Seconds> first_of(const SimResult& r, EventKind kind, std::size_t n) {
  std::vector<Seconds> t(n, kInf);
  for (const Event& e : r.log.events())
    if (e.kind == kind && e.request >= 0 && t[e.request] == kInf) t[e.request] = e.t;
  return t;
}

InstanceProfile profiled(const scenarios::Scenario& s) {
  const InstanceHardware& hw = s.cluster.catalog.front();
  return profile_instance(hw, fit_token_stats(s.trace));
}

TEST(EstimatorVsSimulation, QueuedWaitsFitEstimates) {
  const auto s = scenarios::queued_backlog(500, 2);
  SimOptions o;
  o.policy = Policy::kFcfs;
  const SimResult r = run_simulation(s.trace, s.cluster, o);
  const InstanceProfile p = profiled(s);
  const TokenStats st = fit_token_stats(s.trace);
  const auto pull = first_of(r, EventKind::kPull, s.trace.requests.size());
  std::vector<double> est, real;
  for (std::size_t i = 0; i < pull.size(); ++i) {
    est.push_back(estimate_waiting_time(static_cast<std::int64_t>(i), st, p).mean);
    real.push_back(pull[i]);
  }
  EXPECT_GE(stats::linear_fit(est, real).r2, 0.95);
}

TEST(EstimatorVsSimulation, IsolatedMaxOutputDecodeIsBounded) {
  auto s = scenarios::queued_backlog(1, 1);
  const TokenCount max_out = s.cluster.catalog.front().max_output_tokens;
  GroundTruth::set_output_tokens(s.trace.requests[0], max_out);
  s.trace.requests[0].input_tokens = 100;
  SimOptions o;
  o.policy = Policy::kFcfs;
  const SimResult r = run_simulation(s.trace, s.cluster, o);
  const Seconds first = first_of(r, EventKind::kFirstToken, 1)[0];
  const Seconds done = first_of(r, EventKind::kCompletion, 1)[0];
  InstanceProfile p = profile();
  p.decode_per_token = s.cluster.catalog.front().decode_iteration;
  p.inefficiency = 1.0;
  EXPECT_LE(done - first, estimate_decode_time(p));
}

// Relative error of the completion estimate falls as the waiting term comes
// to dominate the conservative decode tail.
TEST(EstimatorVsSimulation, RelativeErrorShrinksWithPosition) {
  const auto s = scenarios::queued_backlog(1000, 3);
  SimOptions o;
  o.policy = Policy::kFcfs;
  const SimResult r = run_simulation(s.trace, s.cluster, o);
  const InstanceProfile p = profiled(s);
  const TokenStats st = fit_token_stats(s.trace);
  const auto done = first_of(r, EventKind::kCompletion, s.trace.requests.size());
  auto mean_rel_error = [&](std::size_t lo, std::size_t hi) {
    double sum = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
      const Seconds e = estimate_request_completion(static_cast<std::int64_t>(i + 1), st, p);
      sum += std::abs(e - done[i]) / done[i];
    }
    return sum / static_cast<double>(hi - lo);
  };
  const double early = mean_rel_error(0, 50), mid = mean_rel_error(200, 300),
               late = mean_rel_error(900, 1000);
  EXPECT_GT(early, mid);
  EXPECT_GT(mid, late);
}

TEST(EstimatorVsSimulation, GroupDrainIsConservativeMostSeeds) {
  const int seeds = 20;
  int within = 0;
  for (int seed = 1; seed <= seeds; ++seed) {
    const auto s = scenarios::queued_backlog(300, static_cast<std::uint64_t>(seed));
    SimOptions o;
    o.policy = Policy::kFcfs;
    const SimResult r = run_simulation(s.trace, s.cluster, o);
    Seconds drain = 0.0;
    for (const Event& e : r.log.events())
      if (e.kind == EventKind::kCompletion) drain = std::max(drain, e.t);
    const auto est =
        estimate_group_completion(s.trace.requests.size(), fit_token_stats(s.trace), profiled(s));
    within += drain <= est.completion_time;
  }
  EXPECT_GE(within, 19);
}

TEST(EstimatorVsSimulation, SingleGroupEstimateIsConservative) {
  const auto s = scenarios::queued_backlog(64, 5);
  SimOptions o;
  o.policy = Policy::kFcfs;
  const SimResult r = run_simulation(s.trace, s.cluster, o);
  const InstanceProfile p = profiled(s);
  const TokenStats st = fit_token_stats(s.trace);
  const auto pull = first_of(r, EventKind::kPull, s.trace.requests.size());
  double est = 0.0, real = 0.0;
  for (std::size_t i = 0; i < pull.size(); ++i) {
    est += estimate_waiting_time(static_cast<std::int64_t>(i), st, p).mean;
    real += pull[i];
  }
  EXPECT_GE(est, real);
}

}  // namespace
}  // namespace vqs
