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

#include "vqserve/workload.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

namespace vqs {
namespace {

WorkloadConfig one_class(double rate, Seconds duration, std::uint64_t seed) {
  WorkloadConfig w;
  w.duration = duration;
  w.seed = seed;
  SloClassConfig c;
  c.name = "batch";
  c.slo = 60.0;
  c.arrival_rate = rate;
  c.models = {{ModelId("vicuna-13b"), 1.0}};
  w.classes = {c};
  return w;
}

std::string dump(const Trace& t) {
  std::ostringstream out;
  write_trace(out, t);
  return out.str();
}

TEST(GenerateWorkload, PoissonCountMatchesRate) {
  const Trace t = generate_workload(one_class(1.0, 3500.0, 7));
  const double n = static_cast<double>(t.requests.size());
  EXPECT_NEAR(n, 3500.0, 3.0 * std::sqrt(3500.0));
}

TEST(GenerateWorkload, RejectsZeroRate) {
  EXPECT_THROW(generate_workload(one_class(0.0, 100.0, 1)), ConfigError);
}

TEST(GenerateWorkload, RejectsWeightsNotSummingToOne) {
  WorkloadConfig w = one_class(1.0, 10.0, 1);
  w.classes[0].models = {{ModelId("a"), 0.5}, {ModelId("b"), 0.6}};
  EXPECT_THROW(generate_workload(w), ConfigError);
}

TEST(GenerateWorkload, SameSeedGivesIdenticalBytes) {
  EXPECT_EQ(dump(generate_workload(one_class(2.0, 200.0, 42))),
            dump(generate_workload(one_class(2.0, 200.0, 42))));
  EXPECT_NE(dump(generate_workload(one_class(2.0, 200.0, 42))),
            dump(generate_workload(one_class(2.0, 200.0, 43))));
}

TEST(GenerateWorkload, SortedAndWithinCaps) {
  const Trace t = generate_workload(one_class(5.0, 200.0, 3));
  const TokenDistParams caps = TokenDistParams::sharegpt();
  for (std::size_t i = 0; i < t.requests.size(); ++i) {
    const Request& r = t.requests[i];
    EXPECT_EQ(r.id, request_id(i));
    if (i > 0) {
      EXPECT_GE(r.arrival_time, t.requests[i - 1].arrival_time);
    }
    EXPECT_LE(GroundTruth::output_tokens(r), caps.max_output);
    EXPECT_LE(GroundTruth::total_tokens(r), caps.truncation);
    EXPECT_LT(r.arrival_time, 200.0);
  }
}

TEST(GenerateWorkload, AddingAClassLeavesOthersIntact) {
  WorkloadConfig a = one_class(1.0, 300.0, 5);
  WorkloadConfig b = a;
  SloClassConfig extra = a.classes[0];
  extra.name = "interactive";
  extra.slo = 20.0;
  b.classes.push_back(extra);
  std::vector<Seconds> ta, tb;
  for (const auto& r : generate_workload(a).requests) ta.push_back(r.arrival_time);
  for (const auto& r : generate_workload(b).requests)
    if (r.slo == 60.0) tb.push_back(r.arrival_time);
  EXPECT_EQ(ta, tb);
}

TEST(GenerateWorkload, RateScheduleThinsArrivals) {
  WorkloadConfig w = one_class(4.0, 2000.0, 9);
  w.classes[0].rate_schedule = {{0.0, 1.0}, {1000.0, 0.25}};
  std::size_t early = 0, late = 0;
  for (const auto& r : generate_workload(w).requests) (r.arrival_time < 1000.0 ? early : late)++;
  EXPECT_NEAR(static_cast<double>(early), 4000.0, 3.0 * std::sqrt(4000.0));
  EXPECT_NEAR(static_cast<double>(late), 1000.0, 3.0 * std::sqrt(1000.0));
}

TEST(GenerateWorkload, ModelMixFollowsWeights) {
  WorkloadConfig w = one_class(10.0, 1000.0, 11);
  w.classes[0].models = {{ModelId("a"), 0.25}, {ModelId("b"), 0.75}};
  double a = 0.0, n = 0.0;
  for (const auto& r : generate_workload(w).requests) {
    a += r.model.name == "a";
    n += 1.0;
  }
  EXPECT_NEAR(a / n, 0.25, 0.02);
}

TEST(GenerateWorkload, EmpiricalHistogramOnlyYieldsItsBins) {
  WorkloadConfig w = one_class(5.0, 100.0, 2);
  TokenDistParams& p = w.classes[0].token_dist;
  p.family = TokenFamily::kEmpirical;
  p.input.histogram = {{10, 1.0}, {20, 1.0}};
  p.output.histogram = {{100, 3.0}};
  for (const auto& r : generate_workload(w).requests) {
    EXPECT_TRUE(r.input_tokens == 10 || r.input_tokens == 20);
    EXPECT_EQ(GroundTruth::output_tokens(r), 100);
  }
}

constexpr const char* kThree =
    R"({"id":"a","arrival_s":0.0,"model":"m","slo_s":20,"input_tokens":5,"output_tokens":7}
{"id":"b","arrival_s":1.5,"model":"m","slo_s":60,"input_tokens":6,"output_tokens":8}
{"id":"c","arrival_s":2.0,"model":"n","slo_s":20,"input_tokens":9,"output_tokens":1}
)";

TEST(ReadTrace, ParsesValidLines) {
  std::istringstream in(kThree);
  const Trace t = read_trace(in);
  ASSERT_EQ(t.requests.size(), 3u);
  EXPECT_EQ(t.requests[1].id, "b");
  EXPECT_DOUBLE_EQ(t.requests[1].arrival_time, 1.5);
  EXPECT_EQ(t.requests[2].model.name, "n");
  EXPECT_EQ(GroundTruth::output_tokens(t.requests[0]), 7);
}

TEST(ReadTrace, RoundTripsThroughWriter) {
  std::istringstream in(kThree);
  const Trace t = read_trace(in);
  std::istringstream again(dump(t));
  EXPECT_EQ(dump(read_trace(again)), dump(t));
}

TEST(ReadTrace, ZeroInputTokensIsSchemaError) {
  std::istringstream in(
      R"({"id":"a","arrival_s":0,"model":"m","slo_s":20,"input_tokens":0,"output_tokens":7})");
  try {
    read_trace(in);
    FAIL() << "expected SchemaError";
  } catch (const SchemaError& e) {
    EXPECT_EQ(e.field(), "input_tokens");
  }
}

TEST(ReadTrace, MissingFieldAndBadJson) {
  std::istringstream missing(R"({"id":"a","arrival_s":0,"model":"m","slo_s":20})");
  EXPECT_THROW(read_trace(missing), SchemaError);
  std::istringstream broken("{not json}\n");
  try {
    read_trace(broken);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 1u);
  }
}

TEST(ReadTrace, DuplicateIdsRejected) {
  std::istringstream in(
      R"({"id":"a","arrival_s":0,"model":"m","slo_s":20,"input_tokens":1,"output_tokens":1}
{"id":"a","arrival_s":1,"model":"m","slo_s":20,"input_tokens":1,"output_tokens":1})");
  EXPECT_THROW(read_trace(in), SchemaError);
}

TEST(ReadTrace, OutOfOrderArrivalsAreResorted) {
  std::istringstream sorted(kThree);
  std::istringstream shuffled(
      R"({"id":"c","arrival_s":2.0,"model":"n","slo_s":20,"input_tokens":9,"output_tokens":1}
{"id":"a","arrival_s":0.0,"model":"m","slo_s":20,"input_tokens":5,"output_tokens":7}
{"id":"b","arrival_s":1.5,"model":"m","slo_s":60,"input_tokens":6,"output_tokens":8}
)");
  EXPECT_EQ(dump(read_trace(shuffled)), dump(read_trace(sorted)));
}

Trace with_outputs(std::vector<TokenCount> outs) {
  Trace t;
  for (std::size_t i = 0; i < outs.size(); ++i)
    t.requests.emplace_back(request_id(i), 0.0, "m", 20.0, 10, outs[i]);
  return t;
}

TEST(FitTokenStats, TwoPointSampleMoments) {
  const TokenStats s = fit_token_stats(with_outputs({100, 300}));
  EXPECT_DOUBLE_EQ(s.mean_output, 200.0);
  EXPECT_NEAR(s.std_output, 141.42, 0.01);
  EXPECT_DOUBLE_EQ(s.mean_input, 10.0);
  EXPECT_DOUBLE_EQ(s.std_input, 0.0);
}

TEST(FitTokenStats, IdenticalOutputsHaveZeroStd) {
  EXPECT_DOUBLE_EQ(fit_token_stats(with_outputs({50, 50, 50})).std_output, 0.0);
}

TEST(FitTokenStats, NeedsTwoMatches) {
  EXPECT_THROW(fit_token_stats(with_outputs({50})), ValidationError);
  EXPECT_THROW(fit_token_stats(with_outputs({50, 60}), [](const Request&) { return false; }),
               ValidationError);
}

TEST(FitTokenStats, LognormalMeanMatchesAnalytic) {
  // Parameters whose tail beyond the caps is negligible.
  WorkloadConfig w = one_class(10.0, 1000.0, 13);
  w.classes[0].token_dist.input = {4.0, 0.5, {}};
  w.classes[0].token_dist.output = {5.0, 0.5, {}};
  const Trace t = generate_workload(w);
  ASSERT_GE(t.requests.size(), 9500u);
  const TokenStats s = fit_token_stats(t);
  EXPECT_NEAR(s.mean_output / lognormal_mean(5.0, 0.5), 1.0, 0.02);
  EXPECT_NEAR(s.mean_input / lognormal_mean(4.0, 0.5), 1.0, 0.02);
}

TEST(TokenHistory, PerClassWithFallback) {
  Trace t = with_outputs({100, 300});
  t.requests.emplace_back("x", 1.0, "m", 60.0, 10, 1000);
  t.requests.emplace_back("y", 1.0, "m", 60.0, 10, 2000);
  const TokenHistory h = build_history(t);
  ASSERT_NE(h.find("m", 20.0), nullptr);
  ASSERT_NE(h.find("m", 60.0), nullptr);
  EXPECT_DOUBLE_EQ(h.find("m", 20.0)->mean_output, 200.0);
  EXPECT_DOUBLE_EQ(h.find("m", 60.0)->mean_output, 1500.0);
  EXPECT_EQ(h.find("other", 20.0), nullptr);
  EXPECT_DOUBLE_EQ(h.lookup("other", 20.0).mean_output, 850.0);
}

TEST(InjectMegaPrompts, ZeroFractionIsIdentity) {
  const Trace t = generate_workload(one_class(5.0, 100.0, 1));
  EXPECT_EQ(dump(inject_mega_prompts(t, 0.0, 3000, 4000, 1, 16384)), dump(t));
}

TEST(InjectMegaPrompts, FivePercentInRange) {
  const Trace t = generate_workload(one_class(5.0, 400.0, 1));
  const Trace m = inject_mega_prompts(t, 0.05, 3000, 4000, 1, 16384);
  std::size_t changed = 0, in_range = 0;
  for (std::size_t i = 0; i < t.requests.size(); ++i) {
    const TokenCount total = GroundTruth::total_tokens(m.requests[i]);
    if (total != GroundTruth::total_tokens(t.requests[i]) ||
        m.requests[i].input_tokens != t.requests[i].input_tokens) {
      ++changed;
      in_range += total >= 3000 && total <= 4000;
    }
  }
  const auto expect = static_cast<std::size_t>(std::llround(0.05 * t.requests.size()));
  EXPECT_EQ(changed, expect);
  EXPECT_EQ(in_range, expect);
}

TEST(InjectMegaPrompts, FullFractionCoversEveryRequest) {
  const Trace m = inject_mega_prompts(generate_workload(one_class(5.0, 50.0, 1)), 1.0, 3000,
                                      4000, 2, 16384);
  for (const auto& r : m.requests) {
    EXPECT_GE(GroundTruth::total_tokens(r), 3000);
    EXPECT_LE(GroundTruth::total_tokens(r), 4000);
  }
}

TEST(InjectMegaPrompts, RejectsBadArguments) {
  const Trace t = with_outputs({1, 2});
  EXPECT_THROW(inject_mega_prompts(t, 1.5, 3000, 4000, 1, 16384), ConfigError);
  EXPECT_THROW(inject_mega_prompts(t, 0.5, 4000, 3000, 1, 16384), ConfigError);
  EXPECT_THROW(inject_mega_prompts(t, 0.5, 3000, 4000, 1, 2048), ConfigError);
}

}  // namespace
}  // namespace vqs
