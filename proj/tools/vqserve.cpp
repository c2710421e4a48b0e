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

// Command-line front end: simulate, profile, sweep and estimate.
//
// Exit codes: 0 success, 1 invariant violation during simulation, 2 bad
// input (config, trace, profile or flags), 3 any other failure.

#include <sstream>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/cfg/env.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "vqserve/estimator.hpp"
#include "vqserve/experiment.hpp"

namespace vqs {
namespace {

using json = nlohmann::json;

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

// A sweep value is parsed as JSON when it can be, otherwise kept as a string.
json parse_value(const std::string& s) {
  try {
    return json::parse(s);
  } catch (const json::parse_error&) {
    return json(s);
  }
}

void print_reports(const std::vector<LabeledReport>& reports) {
  emit_report(std::cout, reports, ReportFormat::kCsv);
}

int simulate(const std::string& config, const std::string& policy, std::uint64_t seed,
             const std::string& out) {
  json doc = resolve_preset(read_json_file(config));
  doc["policies"] = json::array({policy});
  doc["seeds"] = json::array({seed});
  doc["output_dir"] = out;
  doc.erase("sweep");
  const ExperimentOutput res = run_experiment(parse_experiment(doc));
  print_reports(res.reports);
  return 0;
}

int sweep(const std::string& config, const std::vector<std::string>& axes,
          const std::string& out) {
  json doc = resolve_preset(read_json_file(config));
  if (!axes.empty()) doc["sweep"] = json::object();
  for (const std::string& a : axes) {
    const auto eq = a.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == a.size())
      throw ConfigError("--axis expects key=v1,v2,... but got '" + a + "'");
    json values = json::array();
    std::stringstream ss(a.substr(eq + 1));
    std::string v;
    while (std::getline(ss, v, ',')) values.push_back(parse_value(v));
    doc["sweep"][a.substr(0, eq)] = values;
  }
  doc["output_dir"] = out;
  const ExperimentConfig c = parse_experiment(doc);
  expand_sweep(c);  // validates every axis before any run starts
  const ExperimentOutput res = run_experiment(c);
  print_reports(res.reports);
  return 0;
}

// Profiles one (model, gpu) pair against the token statistics of the
// config's workload at its first seed, and prints the profile as JSON.
int profile(const std::string& model, const std::string& gpu, const std::string& config,
            const std::string& out) {
  const ExperimentConfig c = load_experiment(config);
  const InstanceHardware& hw = c.cluster.hardware(ModelId(model), gpu);
  const Trace trace = build_trace(c, c.seeds.front());
  std::size_t n = 0;
  for (const auto& r : trace.requests) n += r.model.name == model;
  const TokenStats stats =
      n >= 2 ? fit_token_stats(trace, [&](const Request& r) { return r.model.name == model; })
             : build_history(trace).fallback();
  const std::string text = to_json(profile_instance(hw, stats)).dump(2) + "\n";
  std::cout << text;
  if (!out.empty()) detail::write_file(out, text);
  return 0;
}

// Treats the trace, in arrival order, as one FCFS queue in front of the
// profiled instance and prints the estimate for every position.
int estimate(const std::string& trace_path, const std::string& profile_path) {
  const Trace trace = load_trace(trace_path);
  const InstanceProfile p = profile_from_json(read_json_file(profile_path));
  const TokenStats stats = build_history(trace).fallback();
  std::cout << "position,id,wait_mean,wait_std,completion\n";
  for (std::size_t i = 0; i < trace.requests.size(); ++i) {
    const auto q = static_cast<std::int64_t>(i + 1);
    const WaitEstimate w = estimate_waiting_time(q - 1, stats, p);
    std::cout << q << ',' << trace.requests[i].id << ',' << MetricsReport::format(w.mean) << ','
              << MetricsReport::format(w.std) << ','
              << MetricsReport::format(estimate_request_completion(q, stats, p)) << '\n';
  }
  return 0;
}

}  // namespace
}  // namespace vqs

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("vqserve"));
  spdlog::cfg::load_env_levels();  // SPDLOG_LEVEL=debug, warn, ...

  CLI::App app{"Queue-management simulator for multi-model LLM serving"};
  app.require_subcommand(1);

  std::string config, policy = "qlm", out = "out", model, gpu, trace, prof, prof_out;
  std::uint64_t seed = 1;
  std::vector<std::string> axes;

  auto* sim = app.add_subcommand("simulate", "Run one policy and seed");
  sim->add_option("--config", config, "Experiment config (JSON)")->required();
  sim->add_option("--policy", policy, "qlm, edf, fcfs or static")
      ->check(CLI::IsMember({"qlm", "edf", "fcfs", "static"}));
  sim->add_option("--seed", seed, "Workload seed");
  sim->add_option("--out", out, "Output directory");

  auto* pro = app.add_subcommand("profile", "Profile one model on one GPU type");
  pro->add_option("--model", model, "Model id")->required();
  pro->add_option("--gpu", gpu, "GPU type")->required();
  pro->add_option("--config", config, "Experiment config (JSON)")->required();
  pro->add_option("--out", prof_out, "Also write the profile to this file");

  auto* swp = app.add_subcommand("sweep", "Run a parameter grid");
  swp->add_option("--config", config, "Experiment config (JSON)")->required();
  swp->add_option("--axis", axes, "key=v1,v2,... (repeatable)");
  swp->add_option("--out", out, "Output directory");

  auto* est = app.add_subcommand("estimate", "Per-position waiting-time estimates");
  est->add_option("--trace", trace, "Trace (JSONL)")->required();
  est->add_option("--profile", prof, "Instance profile (JSON)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (*sim) return vqs::simulate(config, policy, seed, out);
    if (*pro) return vqs::profile(model, gpu, config, prof_out);
    if (*swp) return vqs::sweep(config, axes, out);
    return vqs::estimate(trace, prof);
  } catch (const vqs::InvariantViolation& e) {
    spdlog::critical("invariant violation: {}", e.what());
    return 1;
  } catch (const vqs::ConfigError& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const vqs::ParseError& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const vqs::SchemaError& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const vqs::ValidationError& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 3;
  }
}
