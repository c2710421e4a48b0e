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

#include "vqserve/baselines.hpp"

#include <gtest/gtest.h>

#include "vqserve/metrics.hpp"
#include "vqserve/scenarios.hpp"

namespace vqs {
namespace {

std::vector<std::size_t> all(std::size_t n) {
  std::vector<std::size_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = i;
  return v;
}

const std::vector<DispatchTarget> kOne{{0, {"m", "x"}}};

TEST(EdfOrder, SortsByDeadline) {
  const std::vector<Request> t{{"a", 0, "m", 30, 1, 1}, {"b", 0, "m", 10, 1, 1},
                               {"c", 0, "m", 20, 1, 1}};
  const auto d = edf_order(t, all(3), kOne);
  EXPECT_EQ(d.per_instance.at(0), (std::vector<std::size_t>{1, 2, 0}));
}

TEST(EdfOrder, TiesGoToEarlierArrival) {
  const std::vector<Request> t{{"a", 5, "m", 10, 1, 1}, {"b", 0, "m", 15, 1, 1},
                               {"c", 2, "m", 13, 1, 1}};
  const auto d = edf_order(t, all(3), kOne);
  EXPECT_EQ(d.per_instance.at(0), (std::vector<std::size_t>{1, 2, 0}));
}

TEST(FcfsOrder, KeepsArrivalOrder) {
  const std::vector<Request> t{{"a", 0, "m", 30, 1, 1}, {"b", 1, "m", 10, 1, 1},
                               {"c", 2, "m", 20, 1, 1}};
  const std::vector<std::size_t> shuffled{2, 0, 1};
  EXPECT_EQ(fcfs_order(t, shuffled, kOne).per_instance.at(0),
            (std::vector<std::size_t>{0, 1, 2}));
}

TEST(FcfsOrder, SingleRequestMatchesEdf) {
  const std::vector<Request> t{{"a", 3, "m", 30, 1, 1}};
  EXPECT_EQ(fcfs_order(t, all(1), kOne).per_instance, edf_order(t, all(1), kOne).per_instance);
}

TEST(Dispatch, RoundRobinPerModelOverCapableInstances) {
  const std::vector<DispatchTarget> targets{{0, {"a"}}, {1, {"a", "b"}}, {2, {"a", "b"}}};
  std::vector<Request> t;
  for (int i = 0; i < 4; ++i) t.emplace_back(request_id(i), i, "b", 60, 1, 1);
  t.emplace_back("z", 9, "c", 60, 1, 1);
  const auto d = fcfs_order(t, all(5), targets);
  EXPECT_TRUE(d.per_instance.at(0).empty());
  EXPECT_EQ(d.per_instance.at(1), (std::vector<std::size_t>{0, 2}));
  EXPECT_EQ(d.per_instance.at(2), (std::vector<std::size_t>{1, 3}));
  EXPECT_EQ(d.unplaceable, (std::vector<std::size_t>{4}));
}

TEST(PolicyNames, RoundTrip) {
  for (Policy p : {Policy::kQlm, Policy::kEdf, Policy::kFcfs, Policy::kStaticBatch})
    EXPECT_EQ(policy_from_string(to_string(p)), p);
  EXPECT_THROW(policy_from_string("lifo"), ConfigError);
}

InstanceProfile profile() {
  InstanceProfile p;
  p.model = "m";
  p.gpu_type = "a100";
  p.theta = 1000;
  p.decode_per_token = 0.025;
  p.inefficiency = 1.2;
  p.prefill = 0.5;
  p.token_capacity = 16384;
  p.max_output_tokens = 2048;
  return p;
}

TEST(StaticBatch, DurationIsWorstCase) {
  EXPECT_NEAR(static_batch_duration(profile()), 0.5 + 2048 * 1.2 * 0.025, 1e-9);
}

TEST(StaticBatch, CutsSingleModelBatchesInDeadlineOrder) {
  std::vector<Request> t;
  for (int i = 0; i < 5; ++i) t.emplace_back(request_id(i), 0, i < 3 ? "m" : "x", 100 - i, 1, 1);
  const auto d =
      static_batch_schedule(t, all(5), kOne, 2, [](int, const ModelId&) { return profile(); });
  ASSERT_EQ(d.batches.size(), 3u);
  EXPECT_EQ(d.batches[0].requests, (std::vector<std::size_t>{4, 3}));
  EXPECT_EQ(d.batches[1].requests, (std::vector<std::size_t>{2, 1}));
  EXPECT_EQ(d.batches[2].requests, (std::vector<std::size_t>{0}));
  for (const auto& b : d.batches) EXPECT_DOUBLE_EQ(b.duration, static_batch_duration(profile()));
  EXPECT_THROW(
      static_batch_schedule(t, all(5), kOne, 0, [](int, const ModelId&) { return profile(); }),
      ConfigError);
}

// ---------------------------------------------------------------------------
// End to end
// ---------------------------------------------------------------------------

MetricsReport run(const scenarios::Scenario& s, Policy policy, std::size_t batch = 0) {
  SimOptions o;
  o.policy = policy;
  o.static_batch_size = batch;
  const SimResult r = run_simulation(s.trace, s.cluster, o);
  return compute_metrics(r.log, s.trace);
}

TEST(EdfEndToEnd, InterleavedModelsSwapOnEveryAlternation) {
  const auto s = scenarios::interleaved_models(1, 20, 20.0, 30.0);
  EXPECT_GE(run(s, Policy::kEdf).swaps, 19u);
}

TEST(FcfsEndToEnd, InteractiveStuckBehindBatch) {
  const auto s = scenarios::hol_blocking(1, 300, 5, 10.0);
  const MetricsReport f = run(s, Policy::kFcfs), q = run(s, Policy::kQlm);
  EXPECT_GT(f.per_class.at(20.0).mean_ttft, 20.0);
  EXPECT_LT(q.per_class.at(20.0).mean_ttft, f.per_class.at(20.0).mean_ttft / 10.0);
}

TEST(StaticEndToEnd, LowerThroughputThanContinuousBatching) {
  const auto s = scenarios::queued_backlog(400, 4);
  EXPECT_LT(run(s, Policy::kStaticBatch).throughput, run(s, Policy::kFcfs).throughput);
}

// Worst-case batch durations force static batching onto more instances to
// reach the same attainment.
TEST(StaticEndToEnd, NeedsMoreInstancesForSameSlo) {
  const json base = {{"workload",
                      {{"duration", 120.0},
                       {"classes", json::array({{{"name", "batch-1"},
                                                 {"slo", 60},
                                                 {"rate", 6.0},
                                                 {"models", {"vicuna-13b"}}}})}}},
                     {"cluster",
                      {{"instances", instances(1, "a100", "vicuna-13b")},
                       {"catalog", default_catalog()}}}};
  auto needed = [&](Policy policy) {
    for (int n = 1; n <= 8; ++n) {
      json doc = base;
      doc["cluster"]["instances"] = instances(n, "a100", "vicuna-13b");
      const ExperimentConfig c = parse_experiment(doc);
      const Trace t = build_trace(c, 1);
      if (run_one(c, t, policy, 1, "n").report.report.attainment >= 0.99) return n;
    }
    return 99;
  };
  const int edf = needed(Policy::kEdf), fixed = needed(Policy::kStaticBatch);
  EXPECT_LE(edf, 8);
  EXPECT_GT(fixed, edf);
}

}  // namespace
}  // namespace vqs
