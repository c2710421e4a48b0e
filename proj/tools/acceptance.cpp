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

// Acceptance harness: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria.

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <spdlog/cfg/env.h>
#include <spdlog/spdlog.h>

#include "vqserve/experiment.hpp"
#include "vqserve/random_problem.hpp"
#include "vqserve/scenarios.hpp"
#include "vqserve/stats.hpp"

namespace vqs {
namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

bool g_invariant_failure = false;

using Clock = std::chrono::steady_clock;
double since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::vector<Seconds> first_events(const SimResult& r, EventKind kind, std::size_t n) {
  std::vector<Seconds> t(n, kInf);
  for (const Event& e : r.log.events())
    if (e.kind == kind && e.request >= 0 && t[e.request] == kInf) t[e.request] = e.t;
  return t;
}

// 1. Realized wait grows linearly with queue position.
Outcome waiting_time_linearity() {
  const auto s = scenarios::queued_backlog(1000, 1);
  SimOptions o;
  o.policy = Policy::kFcfs;
  const SimResult r = run_simulation(s.trace, s.cluster, o);
  const auto pull = first_events(r, EventKind::kPull, s.trace.requests.size());
  std::vector<double> pos, wait;
  for (std::size_t i = 0; i < pull.size(); ++i) {
    pos.push_back(static_cast<double>(i + 1));
    wait.push_back(pull[i] - s.trace.requests[i].arrival_time);
  }
  const double r2 = stats::linear_fit(pos, wait).r2;
  return {r2 >= 0.95, fmt::format("R^2 = {:.4f} over 1000 queued requests (need >= 0.95)", r2)};
}

// 2. Estimates track realized waits better as more groups queue up.
Outcome estimator_accuracy() {
  const InstanceHardware hw =
      hardware_from_json(default_catalog()[0]);  // vicuna-13b on a100
  const TokenDistParams d = TokenDistParams::sharegpt();
  const double mean_in = lognormal_mean(d.input.log_mean, d.input.log_std);
  const double mean_out = lognormal_mean(d.output.log_mean, d.output.log_std);
  const auto group_size = static_cast<std::size_t>(
      4.0 * static_cast<double>(hw.token_capacity) / (mean_in + mean_out));
  std::vector<double> r2s;
  double est_mean1 = 0.0, real_mean1 = 0.0;
  for (int groups : {1, 2, 4, 8}) {
    double r2_sum = 0.0;
    const int seeds = 5;
    for (int seed = 1; seed <= seeds; ++seed) {
      const auto s = scenarios::queued_groups(groups, group_size, static_cast<std::uint64_t>(seed));
      SimOptions o;
      o.policy = Policy::kQlm;
      o.seed = static_cast<std::uint64_t>(seed);
      const SimResult r = run_simulation(s.trace, s.cluster, o);
      const MetricsReport m = compute_metrics(r.log, s.trace);
      r2_sum += m.estimator_r2;
      if (groups == 1) {
        const auto pull = first_events(r, EventKind::kPull, s.trace.requests.size());
        for (const Event& e : r.log.events())
          if (e.kind == EventKind::kEstimate) est_mean1 += e.value;
        for (std::size_t i = 0; i < pull.size(); ++i)
          real_mean1 += pull[i] - s.trace.requests[i].arrival_time;
      }
    }
    r2s.push_back(r2_sum / seeds);
  }
  bool monotone = true;
  for (std::size_t i = 1; i < r2s.size(); ++i) monotone = monotone && r2s[i] >= r2s[i - 1];
  const bool conservative = est_mean1 >= real_mean1;
  const bool pass = monotone && r2s[2] >= 0.95 && conservative;
  return {pass, fmt::format("R^2 at 1/2/4/8 groups = {:.4f}/{:.4f}/{:.4f}/{:.4f}; "
                            "1-group mean estimate {:.2f}s vs realized {:.2f}s",
                            r2s[0], r2s[1], r2s[2], r2s[3],
                            est_mean1 / (5.0 * static_cast<double>(group_size)),
                            real_mean1 / (5.0 * static_cast<double>(group_size)))};
}

double mean_interactive_wait(const scenarios::Scenario& s, const SimResult& r) {
  const auto first = first_events(r, EventKind::kFirstToken, s.trace.requests.size());
  double sum = 0.0;
  int n = 0;
  for (std::size_t i = 0; i < first.size(); ++i)
    if (s.trace.requests[i].slo == 20.0) {
      sum += first[i] - s.trace.requests[i].arrival_time;
      ++n;
    }
  return sum / n;
}

// 3. Eviction removes head-of-line blocking for interactive requests. The
// blocked reference is the default continuous-batching scheduler (FCFS, no
// eviction); the qlm-without-eviction and EDF ratios are reported alongside.
Outcome eviction_vs_hol() {
  const auto s = scenarios::hol_blocking(1);
  auto wait_of = [&](Policy policy, bool eviction) {
    SimOptions o;
    o.policy = policy;
    o.qlm.eviction = eviction;
    const SimResult r = run_simulation(s.trace, s.cluster, o);
    return std::make_pair(mean_interactive_wait(s, r), r.profiles);
  };
  const auto [w, profiles] = wait_of(Policy::kQlm, true);
  const double fcfs = wait_of(Policy::kFcfs, false).first;
  const double no_evict = wait_of(Policy::kQlm, false).first;
  const double edf = wait_of(Policy::kEdf, false).first;
  const InstanceProfile& p = profiles.at({"vicuna-13b", "a100"});
  const double bound = p.prefill + 2.0 * p.decode_per_token * p.inefficiency;
  const bool pass = w <= bound && fcfs / w >= 50.0;
  return {pass, fmt::format("interactive wait {:.3f}s with eviction (bound {:.3f}s); fcfs {:.2f}s "
                            "(ratio {:.0f}x, need >= 50x); qlm without eviction {:.2f}s ({:.0f}x); "
                            "edf {:.2f}s ({:.0f}x)",
                            w, bound, fcfs, fcfs / w, no_evict, no_evict / w, edf, edf / w)};
}

// 4. Grouping amortizes model swaps on an interleaved two-model trace.
Outcome grouped_swapping() {
  const auto s = scenarios::interleaved_models(1);
  SimOptions o;
  o.policy = Policy::kQlm;
  const MetricsReport q = compute_metrics(run_simulation(s.trace, s.cluster, o).log, s.trace);
  o.policy = Policy::kEdf;
  const MetricsReport e = compute_metrics(run_simulation(s.trace, s.cluster, o).log, s.trace);
  const bool pass = static_cast<double>(q.swaps) <= static_cast<double>(e.swaps) / 5.0 &&
                    q.drain_time <= 0.8 * e.drain_time;
  return {pass, fmt::format("swaps qlm {} vs edf {}; drain {:.1f}s vs {:.1f}s ({:.2f}x)", q.swaps,
                            e.swaps, q.drain_time, e.drain_time, q.drain_time / e.drain_time)};
}

// 5. Exact solver matches enumeration; heuristic stays close.
Outcome solver_optimality() {
  int mismatches = 0, heuristic_below = 0, close = 0;
  const int n = 500;
  for (int seed = 1; seed <= n; ++seed) {
    const AssignmentProblem p = testing::random_problem(static_cast<std::uint64_t>(seed), 10);
    const double exact = solve_exact(p).objective;
    const double brute = brute_force_oracle(p).objective;
    const double heur = solve_heuristic(p).objective;
    mismatches += exact != brute;
    heuristic_below += heur < exact;
    close += (heur - exact) <= 0.1 * std::abs(exact);
  }
  const bool pass = mismatches == 0 && heuristic_below == 0 && close >= 0.9 * n;
  return {pass, fmt::format("{} exact/oracle mismatches, {} heuristic below exact, heuristic "
                            "within 10% on {}/{}",
                            mismatches, heuristic_below, close, n)};
}

std::map<std::string, MetricsReport> run_preset(const std::string& name) {
  const ExperimentConfig c = parse_experiment(json{{"preset", name}});
  const Trace t = build_trace(c, 1);
  std::map<std::string, MetricsReport> out;
  for (Policy p : c.policies) out[to_string(p)] = run_one(c, t, p, 1, name).report.report;
  return out;
}

// 6. Single-model overload: SLO attainment and throughput ordering.
Outcome single_model_ordering() {
  const auto m = run_preset("W_A");
  const double q = m.at("qlm").attainment, e = m.at("edf").attainment,
               f = m.at("fcfs").attainment;
  const double tq = m.at("qlm").throughput, ts = m.at("static").throughput;
  const bool pass = f < 0.5 && q >= e && e >= f && q >= f + 0.2 && tq >= 1.2 * ts;
  return {pass, fmt::format("attainment qlm {:.3f}, edf {:.3f}, fcfs {:.3f}; throughput qlm "
                            "{:.3f}/s vs static {:.3f}/s ({:.1f}x)",
                            q, e, f, tq, ts, tq / ts)};
}

// 7. Multi-model throughput.
Outcome multi_model_throughput() {
  const auto m = run_preset("W_B");
  const double tq = m.at("qlm").throughput, tf = m.at("fcfs").throughput;
  return {tq >= 2.0 * tf, fmt::format("throughput qlm {:.3f}/s vs fcfs {:.3f}/s ({:.1f}x, swaps "
                                      "{} vs {})",
                                      tq, tf, tq / tf, m.at("qlm").swaps, m.at("fcfs").swaps)};
}

// 8. Sums of sampled output lengths are close to normal.
Outcome clt_property() {
  std::mt19937_64 rng(2024);
  const TokenDistParams dist = TokenDistParams::sharegpt();
  std::vector<double> sums;
  for (int k = 0; k < 1000; ++k) {
    double s = 0.0;
    for (int i = 0; i < 200; ++i) s += static_cast<double>(detail::draw_pair(dist, rng).second);
    sums.push_back(s);
  }
  const double mu = stats::mean(sums), sd = stats::sample_std(sums);
  std::vector<double> z;
  for (double s : sums) z.push_back((s - mu) / sd);
  const double d = stats::ks_statistic(z, [](double x) { return stats::normal_cdf(x); });
  const double pvalue = stats::ks_pvalue(d, z.size());
  return {pvalue >= 0.01, fmt::format("KS D = {:.4f}, p = {:.3f} (need >= 0.01)", d, pvalue)};
}

std::string run_fingerprint(const std::string& preset, Policy policy) {
  const ExperimentConfig c = parse_experiment(json{{"preset", preset}});
  const Trace t = build_trace(c, 7);
  const RunArtifacts a = run_one(c, t, policy, 7, preset);
  std::ostringstream out;
  write_event_log(out, a.sim.log, a.sim.request_ids, a.sim.instance_names);
  emit_report(out, {a.report}, ReportFormat::kCsv);
  return out.str();
}

// 9. Invariants held everywhere; reruns are byte-identical.
Outcome conservation_and_determinism() {
  bool identical = true;
  std::size_t bytes = 0;
  for (const char* preset : {"W_A", "W_B", "W_C"})
    for (Policy p : {Policy::kQlm, Policy::kEdf}) {
      const std::string a = run_fingerprint(preset, p), b = run_fingerprint(preset, p);
      identical = identical && a == b;
      bytes += a.size();
    }
  // Failure injection: one of two instances dies mid-run; nothing is lost.
  bool failure_ok = true;
  const ExperimentConfig c = parse_experiment(
      json{{"preset", "W_A"}, {"failures", {{{"t", 100.0}, {"instance", 0}}}}});
  const Trace t = build_trace(c, 3);
  for (Policy p : {Policy::kQlm, Policy::kEdf}) {
    const MetricsReport m = run_one(c, t, p, 3, "failure").report.report;
    failure_ok = failure_ok && m.completed + m.rejected == m.requests && !m.partial;
  }
  const bool pass = identical && failure_ok && !g_invariant_failure;
  return {pass, fmt::format("invariants {}; reruns {} over {} bytes of logs and metrics; "
                            "failure injection {}",
                            g_invariant_failure ? "VIOLATED" : "held on every run",
                            identical ? "byte-identical" : "DIFFER", bytes,
                            failure_ok ? "lost no request" : "LOST REQUESTS")};
}

// 10. Solver wall-clock budgets on a 64-group, 8-queue instance.
Outcome scheduler_overhead() {
  const AssignmentProblem p = testing::random_problem(42, 64, 8, 4);
  SolverOptions h;
  h.time_budget = 5.0;
  auto t0 = Clock::now();
  const SchedulePlan hp = solve_heuristic(p, h);
  const double ht = since(t0);
  SolverOptions e;
  e.time_budget = 1.0;
  t0 = Clock::now();
  const SchedulePlan ep = solve_exact(p, e);
  const double et = since(t0);
  const bool pass = ht <= 5.0 && et <= 1.0 + 0.25 && !ep.optimal && ep.objective <= hp.objective;
  return {pass, fmt::format("heuristic {:.3f}s (budget 5s); exact stopped after {:.3f}s "
                            "(budget 1s), optimal flag {}, objective {:.1f} vs heuristic {:.1f}",
                            ht, et, ep.optimal ? "true" : "false", ep.objective, hp.objective)};
}

struct Criterion {
  int id;
  const char* name;
  double limit_seconds;
  std::function<Outcome()> run;
};

}  // namespace
}  // namespace vqs

int main() {
  using namespace vqs;
  spdlog::set_level(spdlog::level::err);
  spdlog::cfg::load_env_levels();
  const std::vector<Criterion> criteria = {
      {1, "waiting-time linearity", 10, waiting_time_linearity},
      {2, "estimator accuracy vs queue depth", 30, estimator_accuracy},
      {3, "eviction vs head-of-line blocking", 10, eviction_vs_hol},
      {4, "grouped swapping vs edf", 10, grouped_swapping},
      {5, "solver optimality", 60, solver_optimality},
      {6, "single-model ordering", 60, single_model_ordering},
      {7, "multi-model throughput", 60, multi_model_throughput},
      {8, "clt property", 10, clt_property},
      {9, "conservation and determinism", 60, conservation_and_determinism},
      {10, "scheduler overhead", 60, scheduler_overhead},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    Outcome o;
    const auto t0 = Clock::now();
    try {
      o = c.run();
    } catch (const InvariantViolation& e) {
      g_invariant_failure = true;
      o = {false, std::string("invariant violation: ") + e.what()};
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double t = since(t0);
    const bool in_time = t < c.limit_seconds;
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::printf("criterion %2d %s  %s: %s [%.2fs, limit %.0fs%s]\n", c.id, pass ? "PASS" : "FAIL",
                c.name, o.detail.c_str(), t, c.limit_seconds, in_time ? "" : ", TOO SLOW");
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed,
              criteria.size());
  return failed;
}
