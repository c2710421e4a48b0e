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

// Metrics computed from an event log, and their CSV/JSON forms.

#pragma once

#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "vqserve/core.hpp"
#include "vqserve/sim/event_log.hpp"
#include "vqserve/stats.hpp"
#include "vqserve/workload.hpp"

namespace vqs {

struct ClassMetrics {
  std::size_t requests = 0;
  std::size_t met = 0;
  double attainment = 0.0;
  Seconds p99_ttft = 0.0;
  Seconds mean_ttft = 0.0;

  bool operator==(const ClassMetrics&) const = default;
};

struct MetricsReport {
  std::map<Seconds, ClassMetrics> per_class;  // keyed by SLO seconds
  double attainment = 0.0;
  std::size_t requests = 0;
  std::size_t completed = 0;
  std::size_t rejected = 0;
  double throughput = 0.0;  // completions per second of makespan
  Seconds drain_time = 0.0; // last completion minus first arrival
  std::size_t swaps = 0;
  std::size_t evictions = 0;
  std::size_t preemptions = 0;
  std::size_t flushes = 0;
  double estimator_r2 = std::numeric_limits<double>::quiet_NaN();
  std::size_t estimates = 0;
  Seconds solver_time = 0.0;  // charged solver latency
  std::size_t solves = 0;
  double gpu_busy_fraction = 0.0;
  bool partial = false;

  bool operator==(const MetricsReport&) const = default;

  // Long-format rows in a fixed order.
  std::vector<std::pair<std::string, double>> rows() const {
    std::vector<std::pair<std::string, double>> r;
    r.emplace_back("attainment", attainment);
    for (const auto& [slo, c] : per_class) {
      const std::string key = "[slo=" + format(slo) + "]";
      r.emplace_back("attainment" + key, c.attainment);
      r.emplace_back("p99_ttft" + key, c.p99_ttft);
      r.emplace_back("mean_ttft" + key, c.mean_ttft);
      r.emplace_back("requests" + key, static_cast<double>(c.requests));
    }
    r.emplace_back("requests", static_cast<double>(requests));
    r.emplace_back("completed", static_cast<double>(completed));
    r.emplace_back("rejected", static_cast<double>(rejected));
    r.emplace_back("throughput", throughput);
    r.emplace_back("drain_time", drain_time);
    r.emplace_back("swaps", static_cast<double>(swaps));
    r.emplace_back("evictions", static_cast<double>(evictions));
    r.emplace_back("preemptions", static_cast<double>(preemptions));
    r.emplace_back("flushes", static_cast<double>(flushes));
    r.emplace_back("estimator_r2", estimator_r2);
    r.emplace_back("solver_time", solver_time);
    r.emplace_back("solves", static_cast<double>(solves));
    r.emplace_back("gpu_busy_fraction", gpu_busy_fraction);
    r.emplace_back("partial", partial ? 1.0 : 0.0);
    return r;
  }

  // Six significant digits, the precision used in every report file.
  static std::string format(double v) {
    if (std::isnan(v)) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
  }
};

// Requests without a first token count as misses; a log in which some
// request neither completed nor was rejected is flagged partial.
inline MetricsReport compute_metrics(const EventLog& log, const Trace& trace) {
  const std::size_t n = trace.requests.size();
  constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
  std::vector<Seconds> first(n, kNaN), done(n, kNaN), pulled(n, kNaN), estimate(n, kNaN);
  std::vector<bool> rejected(n, false);
  MetricsReport m;
  m.requests = n;
  double busy = 0.0;
  std::size_t instances = 0;
  for (const Event& e : log.events()) {
    if (e.request >= static_cast<std::int64_t>(n))
      throw MalformedLogError("event references request index beyond the trace");
    const auto r = static_cast<std::size_t>(e.request);
    switch (e.kind) {
      case EventKind::kFirstToken: first[r] = e.t; break;
      case EventKind::kCompletion:
        if (!std::isnan(done[r])) throw MalformedLogError("request completed twice");
        done[r] = e.t;
        break;
      case EventKind::kPull:
        if (std::isnan(pulled[r])) pulled[r] = e.t;
        break;
      case EventKind::kEstimate: estimate[r] = e.value; break;
      case EventKind::kRejected: rejected[r] = true; break;
      case EventKind::kSwapStart: ++m.swaps; break;
      case EventKind::kEvictStart: ++m.evictions; break;
      case EventKind::kPreemption: ++m.preemptions; break;
      case EventKind::kFlush: ++m.flushes; break;
      case EventKind::kSolve:
        ++m.solves;
        if (!std::isnan(e.value)) m.solver_time += e.value;
        break;
      case EventKind::kInstanceSummary:
        ++instances;
        busy += e.value;
        break;
      default: break;
    }
  }

  std::map<Seconds, std::vector<Seconds>> ttfts;
  std::size_t met_total = 0;
  Seconds first_arrival = kInf, last_completion = -kInf;
  std::vector<double> est, real;
  for (std::size_t i = 0; i < n; ++i) {
    const Request& r = trace.requests[i];
    first_arrival = std::min(first_arrival, r.arrival_time);
    ClassMetrics& c = m.per_class[r.slo];
    ++c.requests;
    if (rejected[i]) ++m.rejected;
    if (!std::isnan(done[i])) {
      ++m.completed;
      last_completion = std::max(last_completion, done[i]);
    } else if (!rejected[i]) {
      m.partial = true;
    }
    if (!std::isnan(first[i])) {
      const Seconds t = ttft(r, first[i]);
      ttfts[r.slo].push_back(t);
      if (t <= r.slo) {
        ++c.met;
        ++met_total;
      }
    }
    if (!std::isnan(estimate[i]) && !std::isnan(pulled[i])) {
      est.push_back(estimate[i]);
      real.push_back(pulled[i] - r.arrival_time);
    }
  }
  for (auto& [slo, c] : m.per_class) {
    c.attainment = static_cast<double>(c.met) / static_cast<double>(c.requests);
    auto it = ttfts.find(slo);
    if (it != ttfts.end() && !it->second.empty()) {
      // Missing first tokens rank as infinitely late.
      std::vector<Seconds> v = it->second;
      v.resize(c.requests, kInf);
      c.p99_ttft = stats::nearest_rank(v, 99.0);
      c.mean_ttft = stats::mean(it->second);
    } else {
      c.p99_ttft = kInf;
      c.mean_ttft = kNaN;
    }
  }
  if (n > 0) m.attainment = static_cast<double>(met_total) / static_cast<double>(n);
  if (m.completed > 0) {
    m.drain_time = last_completion - first_arrival;
    m.throughput = m.drain_time > 0.0 ? static_cast<double>(m.completed) / m.drain_time : 0.0;
  }
  m.estimates = est.size();
  if (est.size() >= 3) m.estimator_r2 = stats::linear_fit(est, real).r2;
  if (instances > 0 && m.drain_time > 0.0)
    m.gpu_busy_fraction = std::min(1.0, busy / (static_cast<double>(instances) * m.drain_time));
  return m;
}

// One run's identity in the report files.
struct ReportKey {
  std::string point;
  std::uint64_t seed = 0;
  std::string policy;
};

struct LabeledReport {
  ReportKey key;
  MetricsReport report;
};

inline void write_csv_header(std::ostream& out) { out << "point,seed,policy,metric,value\n"; }

inline void emit_csv(std::ostream& out, const std::vector<LabeledReport>& reports) {
  write_csv_header(out);
  for (const auto& r : reports)
    for (const auto& [metric, value] : r.report.rows())
      out << r.key.point << ',' << r.key.seed << ',' << r.key.policy << ',' << metric << ','
          << MetricsReport::format(value) << '\n';
}

inline nlohmann::json to_json(const MetricsReport& m) {
  auto num = [](double v) -> nlohmann::json {
    return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(MetricsReport::format(v));
  };
  nlohmann::json classes = nlohmann::json::array();
  for (const auto& [slo, c] : m.per_class)
    classes.push_back({{"slo", slo}, {"requests", c.requests}, {"met", c.met},
                       {"attainment", c.attainment}, {"p99_ttft", num(c.p99_ttft)},
                       {"mean_ttft", num(c.mean_ttft)}});
  return {{"per_class", classes},
          {"attainment", m.attainment},
          {"requests", m.requests},
          {"completed", m.completed},
          {"rejected", m.rejected},
          {"throughput", m.throughput},
          {"drain_time", m.drain_time},
          {"swaps", m.swaps},
          {"evictions", m.evictions},
          {"preemptions", m.preemptions},
          {"flushes", m.flushes},
          {"estimator_r2", num(m.estimator_r2)},
          {"estimates", m.estimates},
          {"solver_time", m.solver_time},
          {"solves", m.solves},
          {"gpu_busy_fraction", m.gpu_busy_fraction},
          {"partial", m.partial}};
}

inline MetricsReport report_from_json(const nlohmann::json& j) {
  auto num = [](const nlohmann::json& v) -> double {
    if (v.is_number()) return v.get<double>();
    const std::string s = v.get<std::string>();
    if (s == "inf") return kInf;
    if (s == "-inf") return -kInf;
    return std::numeric_limits<double>::quiet_NaN();
  };
  MetricsReport m;
  for (const auto& c : j.at("per_class")) {
    ClassMetrics x;
    x.requests = c.at("requests").get<std::size_t>();
    x.met = c.at("met").get<std::size_t>();
    x.attainment = c.at("attainment").get<double>();
    x.p99_ttft = num(c.at("p99_ttft"));
    x.mean_ttft = num(c.at("mean_ttft"));
    m.per_class[c.at("slo").get<double>()] = x;
  }
  m.attainment = j.at("attainment").get<double>();
  m.requests = j.at("requests").get<std::size_t>();
  m.completed = j.at("completed").get<std::size_t>();
  m.rejected = j.at("rejected").get<std::size_t>();
  m.throughput = j.at("throughput").get<double>();
  m.drain_time = j.at("drain_time").get<double>();
  m.swaps = j.at("swaps").get<std::size_t>();
  m.evictions = j.at("evictions").get<std::size_t>();
  m.preemptions = j.at("preemptions").get<std::size_t>();
  m.flushes = j.at("flushes").get<std::size_t>();
  m.estimator_r2 = num(j.at("estimator_r2"));
  m.estimates = j.at("estimates").get<std::size_t>();
  m.solver_time = j.at("solver_time").get<double>();
  m.solves = j.at("solves").get<std::size_t>();
  m.gpu_busy_fraction = j.at("gpu_busy_fraction").get<double>();
  m.partial = j.at("partial").get<bool>();
  return m;
}

inline nlohmann::json to_json(const std::vector<LabeledReport>& reports) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& r : reports)
    a.push_back({{"point", r.key.point}, {"seed", r.key.seed}, {"policy", r.key.policy},
                 {"metrics", to_json(r.report)}});
  return a;
}

inline std::vector<LabeledReport> reports_from_json(const nlohmann::json& j) {
  std::vector<LabeledReport> out;
  for (const auto& e : j) {
    LabeledReport r;
    r.key.point = e.at("point").get<std::string>();
    r.key.seed = e.at("seed").get<std::uint64_t>();
    r.key.policy = e.at("policy").get<std::string>();
    r.report = report_from_json(e.at("metrics"));
    out.push_back(std::move(r));
  }
  return out;
}

enum class ReportFormat { kCsv, kJson };

inline void emit_report(std::ostream& out, const std::vector<LabeledReport>& reports,
                        ReportFormat format) {
  if (format == ReportFormat::kCsv)
    emit_csv(out, reports);
  else
    out << to_json(reports).dump(2) << '\n';
}

}  // namespace vqs
