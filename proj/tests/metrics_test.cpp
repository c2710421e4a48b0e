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

#include "vqserve/metrics.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

namespace vqs {
namespace {

Event ev(Seconds t, EventKind kind, std::int64_t request = -1, double value = NAN) {
  Event e;
  e.t = t;
  e.kind = kind;
  e.request = request;
  e.value = value;
  return e;
}

// Two requests: r0 (slo 20) answers in 2 s, r1 (slo 60) in 61 s.
TEST(ComputeMetrics, HandBuiltLog) {
  Trace t;
  t.requests = {{"r0", 0.0, "m", 20.0, 10, 5}, {"r1", 1.0, "m", 60.0, 10, 5}};
  EventLog log;
  log.append(ev(2.0, EventKind::kFirstToken, 0));
  log.append(ev(4.0, EventKind::kCompletion, 0));
  log.append(ev(10.0, EventKind::kSwapStart, -1, 6.0));
  log.append(ev(62.0, EventKind::kFirstToken, 1));
  log.append(ev(64.0, EventKind::kCompletion, 1));
  const MetricsReport m = compute_metrics(log, t);
  EXPECT_EQ(m.requests, 2u);
  EXPECT_EQ(m.completed, 2u);
  EXPECT_DOUBLE_EQ(m.attainment, 0.5);
  EXPECT_DOUBLE_EQ(m.per_class.at(20.0).attainment, 1.0);
  EXPECT_DOUBLE_EQ(m.per_class.at(60.0).attainment, 0.0);
  EXPECT_DOUBLE_EQ(m.per_class.at(20.0).p99_ttft, 2.0);
  EXPECT_DOUBLE_EQ(m.per_class.at(60.0).p99_ttft, 61.0);
  EXPECT_DOUBLE_EQ(m.drain_time, 64.0);
  EXPECT_DOUBLE_EQ(m.throughput, 2.0 / 64.0);
  EXPECT_EQ(m.swaps, 1u);
  EXPECT_FALSE(m.partial);
  EXPECT_TRUE(std::isnan(m.estimator_r2));
}

TEST(ComputeMetrics, NinetyNineOfHundred) {
  // TTFTs 0.1, 0.2, ..., 9.9 s meet the 20 s SLO; the last request takes 25 s.
  Trace t;
  EventLog log;
  for (int i = 0; i < 100; ++i) t.requests.emplace_back(request_id(i), 0.0, "m", 20.0, 1, 1);
  for (int i = 0; i < 100; ++i)
    log.append(ev(i < 99 ? 0.1 * (i + 1) : 25.0, EventKind::kFirstToken, i));
  for (int i = 0; i < 100; ++i) log.append(ev(30.0, EventKind::kCompletion, i));
  const MetricsReport m = compute_metrics(log, t);
  EXPECT_DOUBLE_EQ(m.per_class.at(20.0).attainment, 0.99);
  EXPECT_EQ(m.per_class.at(20.0).met, 99u);
  // Nearest rank: ceil(0.99 * 100) = 99th smallest value.
  EXPECT_DOUBLE_EQ(m.per_class.at(20.0).p99_ttft, 0.1 * 99);
}

TEST(ComputeMetrics, AllMeetGivesFullAttainment) {
  Trace t;
  EventLog log;
  for (int i = 0; i < 5; ++i) t.requests.emplace_back(request_id(i), i, "m", 20.0, 1, 1);
  for (int i = 0; i < 5; ++i) log.append(ev(i + 1.0, EventKind::kFirstToken, i));
  for (int i = 0; i < 5; ++i) log.append(ev(10.0, EventKind::kCompletion, i));
  const MetricsReport m = compute_metrics(log, t);
  EXPECT_DOUBLE_EQ(m.attainment, 1.0);
  EXPECT_DOUBLE_EQ(m.per_class.at(20.0).attainment, 1.0);
}

TEST(ComputeMetrics, IncompleteLogIsPartial) {
  Trace t;
  t.requests = {{"a", 0.0, "m", 20.0, 1, 1}, {"b", 0.0, "m", 20.0, 1, 1}};
  EventLog log;
  log.append(ev(1.0, EventKind::kFirstToken, 0));
  log.append(ev(2.0, EventKind::kCompletion, 0));
  const MetricsReport m = compute_metrics(log, t);
  EXPECT_TRUE(m.partial);
  EXPECT_DOUBLE_EQ(m.attainment, 0.5);
  EXPECT_TRUE(std::isinf(m.per_class.at(20.0).p99_ttft));
}

TEST(ComputeMetrics, RejectedRequestsAreNotPartial) {
  Trace t;
  t.requests = {{"a", 0.0, "m", 20.0, 1, 1}};
  EventLog log;
  log.append(ev(0.0, EventKind::kRejected, 0));
  const MetricsReport m = compute_metrics(log, t);
  EXPECT_FALSE(m.partial);
  EXPECT_EQ(m.rejected, 1u);
  EXPECT_DOUBLE_EQ(m.attainment, 0.0);
}

TEST(ComputeMetrics, DoubleCompletionIsMalformed) {
  Trace t;
  t.requests = {{"a", 0.0, "m", 20.0, 1, 1}};
  EventLog log;
  log.append(ev(1.0, EventKind::kCompletion, 0));
  log.append(ev(2.0, EventKind::kCompletion, 0));
  EXPECT_THROW(compute_metrics(log, t), MalformedLogError);
}

TEST(ComputeMetrics, EstimatorFitAgainstRealizedWaits) {
  Trace t;
  EventLog log;
  for (int i = 0; i < 4; ++i) t.requests.emplace_back(request_id(i), 0.0, "m", 1e4, 1, 1);
  for (int i = 0; i < 4; ++i) log.append(ev(0.0, EventKind::kEstimate, i, 2.0 * i));
  for (int i = 0; i < 4; ++i) log.append(ev(1.0 + i, EventKind::kPull, i));
  for (int i = 0; i < 4; ++i) log.append(ev(5.0 + i, EventKind::kFirstToken, i));
  for (int i = 0; i < 4; ++i) log.append(ev(9.0 + i, EventKind::kCompletion, i));
  const MetricsReport m = compute_metrics(log, t);
  EXPECT_EQ(m.estimates, 4u);
  EXPECT_NEAR(m.estimator_r2, 1.0, 1e-12);
}

TEST(ComputeMetrics, ThroughputTimesMakespanIsCompletedCount) {
  Trace t;
  EventLog log;
  for (int i = 0; i < 7; ++i) t.requests.emplace_back(request_id(i), 0.3 * i, "m", 20.0, 1, 1);
  for (int i = 0; i < 7; ++i) log.append(ev(3.0 + 1.7 * i, EventKind::kFirstToken, i));
  for (int i = 0; i < 7; ++i) log.append(ev(20.0 + 0.9 * i, EventKind::kCompletion, i));
  const MetricsReport m = compute_metrics(log, t);
  EXPECT_EQ(std::llround(m.throughput * m.drain_time), 7);
}

TEST(ComputeMetrics, BusyFractionFromInstanceSummaries) {
  Trace t;
  t.requests = {{"a", 0.0, "m", 20.0, 1, 1}};
  EventLog log;
  log.append(ev(1.0, EventKind::kFirstToken, 0));
  log.append(ev(10.0, EventKind::kCompletion, 0));
  log.append(ev(10.0, EventKind::kInstanceSummary, -1, 8.0));
  log.append(ev(10.0, EventKind::kInstanceSummary, -1, 2.0));
  EXPECT_DOUBLE_EQ(compute_metrics(log, t).gpu_busy_fraction, 0.5);
}

LabeledReport sample(std::uint64_t seed) {
  LabeledReport r;
  r.key = {"rate_scale=1", seed, "qlm"};
  r.report.per_class[20.0] = {10, 9, 0.9, kInf, 3.25};
  r.report.attainment = 0.9;
  r.report.requests = 10;
  r.report.completed = 10;
  r.report.throughput = 1.0 / 3.0;
  r.report.drain_time = 30.0;
  r.report.swaps = 2;
  r.report.estimator_r2 = std::numeric_limits<double>::quiet_NaN();
  r.report.gpu_busy_fraction = 0.75;
  return r;
}

TEST(EmitReport, EmptyListIsHeaderOnly) {
  std::ostringstream out;
  emit_report(out, {}, ReportFormat::kCsv);
  EXPECT_EQ(out.str(), "point,seed,policy,metric,value\n");
}

TEST(EmitReport, LongFormatSixDigits) {
  std::ostringstream out;
  emit_report(out, {sample(1)}, ReportFormat::kCsv);
  const std::string s = out.str();
  EXPECT_NE(s.find("rate_scale=1,1,qlm,attainment,0.9\n"), std::string::npos);
  EXPECT_NE(s.find("rate_scale=1,1,qlm,throughput,0.333333\n"), std::string::npos);
  EXPECT_NE(s.find("rate_scale=1,1,qlm,p99_ttft[slo=20],inf\n"), std::string::npos);
  EXPECT_NE(s.find("rate_scale=1,1,qlm,estimator_r2,nan\n"), std::string::npos);
  std::size_t lines = 0;
  for (char c : s) lines += c == '\n';
  EXPECT_EQ(lines, 1 + sample(1).report.rows().size());
}

TEST(EmitReport, JsonRoundTrip) {
  const std::vector<LabeledReport> reports{sample(1), sample(2)};
  std::ostringstream out;
  emit_report(out, reports, ReportFormat::kJson);
  const auto back = reports_from_json(nlohmann::json::parse(out.str()));
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back[i].key.seed, reports[i].key.seed);
    EXPECT_EQ(back[i].key.point, reports[i].key.point);
    // NaN never compares equal, so compare everything else field by field.
    MetricsReport a = back[i].report, b = reports[i].report;
    EXPECT_TRUE(std::isnan(a.estimator_r2));
    a.estimator_r2 = b.estimator_r2 = 0.0;
    EXPECT_EQ(a, b);
  }
}

TEST(EmitReport, SameInputSameBytes) {
  std::ostringstream a, b;
  emit_report(a, {sample(3)}, ReportFormat::kCsv);
  emit_report(b, {sample(3)}, ReportFormat::kCsv);
  EXPECT_EQ(a.str(), b.str());
}

}  // namespace
}  // namespace vqs
