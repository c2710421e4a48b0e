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

// Experiment configuration (JSON), scenario presets, and the sweep runner.
//
// A config is a JSON document. "preset" names a built-in scenario whose
// document is merged under the user's keys (RFC 7386 merge patch). Sweep axes
// are dotted paths into the merged document, e.g. "qlm.eviction" or
// "workload.classes.0.rate", plus the top-level multiplier "rate_scale".

#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "vqserve/baselines.hpp"
#include "vqserve/metrics.hpp"
#include "vqserve/sim/simulator.hpp"
#include "vqserve/workload.hpp"

namespace vqs {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Field helpers
// ---------------------------------------------------------------------------

namespace detail {

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.is_object() || !j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

template <typename T>
T require(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key))
    throw ConfigError(where + ": missing required key '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

inline void reject_unknown(const json& j, const std::set<std::string>& known,
                           const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key()))
      throw ConfigError(where + ": unknown key '" + it.key() + "'");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Component (de)serialization
// ---------------------------------------------------------------------------

inline LengthDist length_from_json(const json& j, const LengthDist& fallback) {
  if (j.is_null()) return fallback;
  detail::reject_unknown(j, {"log_mean", "log_std", "histogram"}, "tokens");
  LengthDist d = fallback;
  d.log_mean = detail::get_or(j, "log_mean", d.log_mean);
  d.log_std = detail::get_or(j, "log_std", d.log_std);
  if (j.contains("histogram")) {
    d.histogram.clear();
    for (const auto& bin : j.at("histogram"))
      d.histogram.emplace_back(bin.at(0).get<TokenCount>(), bin.at(1).get<double>());
  }
  return d;
}

inline json to_json(const LengthDist& d) {
  json j = {{"log_mean", d.log_mean}, {"log_std", d.log_std}};
  if (!d.histogram.empty()) {
    j["histogram"] = json::array();
    for (auto [len, w] : d.histogram) j["histogram"].push_back({len, w});
  }
  return j;
}

inline TokenDistParams tokens_from_json(const json& j) {
  TokenDistParams p = TokenDistParams::sharegpt();
  if (j.is_null()) return p;
  detail::reject_unknown(j, {"family", "input", "output", "truncation", "max_output"},
                         "tokens");
  const std::string fam = detail::get_or<std::string>(j, "family", "lognormal");
  if (fam == "lognormal")
    p.family = TokenFamily::kLognormal;
  else if (fam == "empirical")
    p.family = TokenFamily::kEmpirical;
  else
    throw ConfigError("tokens.family: unknown '" + fam + "'");
  p.input = length_from_json(j.value("input", json()), p.input);
  p.output = length_from_json(j.value("output", json()), p.output);
  p.truncation = detail::get_or(j, "truncation", p.truncation);
  p.max_output = detail::get_or(j, "max_output", p.max_output);
  return p;
}

inline json to_json(const TokenDistParams& p) {
  return {{"family", p.family == TokenFamily::kLognormal ? "lognormal" : "empirical"},
          {"input", to_json(p.input)},
          {"output", to_json(p.output)},
          {"truncation", p.truncation},
          {"max_output", p.max_output}};
}

struct MegaPromptSpec {
  double fraction = 0.0;
  TokenCount min_total = 3000;
  TokenCount max_total = 4000;
};

inline WorkloadConfig workload_from_json(const json& j, double rate_scale = 1.0) {
  detail::reject_unknown(j, {"duration", "classes", "mega_prompts"}, "workload");
  WorkloadConfig w;
  w.duration = detail::require<double>(j, "duration", "workload");
  for (const auto& c : detail::require<json>(j, "classes", "workload")) {
    detail::reject_unknown(c, {"name", "slo", "rate", "models", "tokens", "rate_schedule"},
                           "workload.classes[]");
    SloClassConfig k;
    k.name = detail::require<std::string>(c, "name", "class");
    k.slo = detail::require<double>(c, "slo", "class " + k.name);
    k.arrival_rate = detail::require<double>(c, "rate", "class " + k.name) * rate_scale;
    for (const auto& m : detail::require<json>(c, "models", "class " + k.name)) {
      if (m.is_string())
        k.models.push_back({ModelId(m.get<std::string>()), 1.0});
      else
        k.models.push_back({ModelId(detail::require<std::string>(m, "name", "model")),
                            detail::get_or(m, "weight", 1.0)});
    }
    if (!k.models.empty() && std::all_of(c.at("models").begin(), c.at("models").end(),
                                         [](const json& m) { return m.is_string(); }))
      for (auto& m : k.models) m.weight = 1.0 / static_cast<double>(k.models.size());
    k.token_dist = tokens_from_json(c.value("tokens", json()));
    for (const auto& ph : c.value("rate_schedule", json::array()))
      k.rate_schedule.push_back(
          {detail::require<double>(ph, "start", "rate_schedule"),
           detail::require<double>(ph, "multiplier", "rate_schedule")});
    w.classes.push_back(std::move(k));
  }
  w.validate();
  return w;
}

inline MegaPromptSpec mega_from_json(const json& workload) {
  MegaPromptSpec m;
  if (!workload.contains("mega_prompts")) return m;
  const json& j = workload.at("mega_prompts");
  detail::reject_unknown(j, {"fraction", "min_total", "max_total"}, "mega_prompts");
  m.fraction = detail::get_or(j, "fraction", m.fraction);
  m.min_total = detail::get_or(j, "min_total", m.min_total);
  m.max_total = detail::get_or(j, "max_total", m.max_total);
  return m;
}

inline InstanceHardware hardware_from_json(const json& j) {
  detail::reject_unknown(j, {"model", "gpu", "decode_iteration", "prefill", "token_capacity",
                             "swap_cold", "swap_warm", "kv_transfer_bandwidth",
                             "max_output_tokens"},
                         "catalog[]");
  InstanceHardware h;
  h.model = ModelId(detail::require<std::string>(j, "model", "catalog[]"));
  h.gpu_type = detail::require<std::string>(j, "gpu", "catalog[]");
  h.decode_iteration = detail::get_or(j, "decode_iteration", h.decode_iteration);
  h.prefill = detail::get_or(j, "prefill", h.prefill);
  h.token_capacity = detail::get_or(j, "token_capacity", h.token_capacity);
  h.swap_cold = detail::get_or(j, "swap_cold", h.swap_cold);
  h.swap_warm = detail::get_or(j, "swap_warm", h.swap_warm);
  h.kv_transfer_bandwidth = detail::get_or(j, "kv_transfer_bandwidth", h.kv_transfer_bandwidth);
  h.max_output_tokens = detail::get_or(j, "max_output_tokens", h.max_output_tokens);
  h.validate();
  return h;
}

inline json to_json(const InstanceHardware& h) {
  return {{"model", h.model.name},
          {"gpu", h.gpu_type},
          {"decode_iteration", h.decode_iteration},
          {"prefill", h.prefill},
          {"token_capacity", h.token_capacity},
          {"swap_cold", h.swap_cold},
          {"swap_warm", h.swap_warm},
          {"kv_transfer_bandwidth", h.kv_transfer_bandwidth},
          {"max_output_tokens", h.max_output_tokens}};
}

inline ClusterConfig cluster_from_json(const json& j) {
  detail::reject_unknown(j, {"instances", "catalog"}, "cluster");
  ClusterConfig c;
  for (const auto& h : detail::require<json>(j, "catalog", "cluster"))
    c.catalog.push_back(hardware_from_json(h));
  for (const auto& i : detail::require<json>(j, "instances", "cluster")) {
    detail::reject_unknown(i, {"name", "gpu", "initial_model", "cpu_model_slots"},
                           "cluster.instances[]");
    InstanceSpec s;
    s.name = detail::require<std::string>(i, "name", "instance");
    s.gpu_type = detail::require<std::string>(i, "gpu", "instance " + s.name);
    if (i.contains("initial_model") && !i.at("initial_model").is_null())
      s.initial_model = ModelId(i.at("initial_model").get<std::string>());
    s.cpu_model_slots = detail::get_or(i, "cpu_model_slots", s.cpu_model_slots);
    c.instances.push_back(std::move(s));
  }
  c.validate();
  return c;
}

inline json to_json(const InstanceProfile& p) {
  return {{"model", p.model.name},
          {"gpu", p.gpu_type},
          {"theta", p.theta},
          {"decode_per_token", p.decode_per_token},
          {"inefficiency", p.inefficiency},
          {"prefill", p.prefill},
          {"token_capacity", p.token_capacity},
          {"swap_cold", p.swap_cold},
          {"swap_warm", p.swap_warm},
          {"kv_transfer_bandwidth", p.kv_transfer_bandwidth},
          {"max_output_tokens", p.max_output_tokens}};
}

inline InstanceProfile profile_from_json(const json& j) {
  InstanceProfile p;
  const std::string where = "profile";
  p.model = ModelId(detail::require<std::string>(j, "model", where));
  p.gpu_type = detail::require<std::string>(j, "gpu", where);
  p.theta = detail::require<double>(j, "theta", where);
  p.decode_per_token = detail::require<double>(j, "decode_per_token", where);
  p.inefficiency = detail::require<double>(j, "inefficiency", where);
  p.prefill = detail::require<double>(j, "prefill", where);
  p.token_capacity = detail::require<TokenCount>(j, "token_capacity", where);
  p.swap_cold = detail::require<double>(j, "swap_cold", where);
  p.swap_warm = detail::require<double>(j, "swap_warm", where);
  p.kv_transfer_bandwidth = detail::require<double>(j, "kv_transfer_bandwidth", where);
  p.max_output_tokens = detail::require<TokenCount>(j, "max_output_tokens", where);
  p.validate();
  return p;
}

inline QlmOptions qlm_from_json(const json& j) {
  QlmOptions q;
  if (j.is_null()) return q;
  detail::reject_unknown(j, {"eviction", "prefetch", "solver_latency", "min_solve_interval",
                             "exact_slot_limit", "exact_node_budget", "heuristic_passes",
                             "violation_weight", "group_size_multiple", "avg_batch_size",
                             "k", "decode_tail", "max_iterations"},
                         "qlm");
  q.eviction = detail::get_or(j, "eviction", q.eviction);
  q.prefetch = detail::get_or(j, "prefetch", q.prefetch);
  q.solver_latency = detail::get_or(j, "solver_latency", q.solver_latency);
  q.min_solve_interval = detail::get_or(j, "min_solve_interval", q.min_solve_interval);
  q.exact_slot_limit = detail::get_or(j, "exact_slot_limit", q.exact_slot_limit);
  q.exact_node_budget = detail::get_or(j, "exact_node_budget", q.exact_node_budget);
  q.heuristic_passes = detail::get_or(j, "heuristic_passes", q.heuristic_passes);
  q.violation_weight = detail::get_or(j, "violation_weight", q.violation_weight);
  q.grouping.group_size_multiple =
      detail::get_or(j, "group_size_multiple", q.grouping.group_size_multiple);
  q.grouping.k = detail::get_or(j, "k", q.grouping.k);
  q.grouping.max_iterations = detail::get_or(j, "max_iterations", q.grouping.max_iterations);
  if (j.contains("avg_batch_size") && !j.at("avg_batch_size").is_null()) {
    q.auto_batch_size = false;
    q.grouping.avg_batch_size = j.at("avg_batch_size").get<double>();
  }
  const std::string tail = detail::get_or<std::string>(j, "decode_tail", "max_output");
  if (tail == "max_output")
    q.decode_tail = DecodeTail::kMaxOutput;
  else if (tail == "mean")
    q.decode_tail = DecodeTail::kMean;
  else
    throw ConfigError("qlm.decode_tail: expected 'max_output' or 'mean'");
  if (q.min_solve_interval < 0.0 || q.solver_latency < 0.0)
    throw ConfigError("qlm: negative solver timing");
  q.grouping.validate();
  return q;
}

// ---------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------

// Timing constants for the simulated A100/A10 fleet.
inline json default_catalog() {
  auto entry = [](const char* model, const char* gpu, double d, double p, TokenCount cap,
                  double warm, double cold) {
    return json{{"model", model},           {"gpu", gpu},        {"decode_iteration", d},
                {"prefill", p},             {"token_capacity", cap}, {"swap_warm", warm},
                {"swap_cold", cold},        {"kv_transfer_bandwidth", 2e5},
                {"max_output_tokens", 2048}};
  };
  return json::array({entry("vicuna-13b", "a100", 0.025, 0.10, 16384, 6, 20),
                      entry("mistral-7b", "a100", 0.018, 0.06, 24576, 4, 12),
                      entry("llama-70b", "a100", 0.045, 0.25, 12288, 20, 60),
                      entry("vicuna-13b", "a10", 0.05, 0.20, 5461, 10, 30),
                      entry("mistral-7b", "a10", 0.035, 0.12, 8192, 8, 24)});
}

inline json instances(int n, const char* gpu, const char* model) {
  json a = json::array();
  for (int i = 0; i < n; ++i)
    a.push_back({{"name", std::string(gpu) + "-" + std::to_string(i)},
                 {"gpu", gpu},
                 {"initial_model", model},
                 {"cpu_model_slots", 2}});
  return a;
}

inline json slo_class(const char* name, double slo, double rate, json models,
                      json tokens = json::object()) {
  return {{"name", name}, {"slo", slo}, {"rate", rate}, {"models", std::move(models)},
          {"tokens", std::move(tokens)}};
}

// Arrival rates are set relative to simulated capacity: W_A offers roughly
// 1.4x what two instances can drain, which is where request-level policies
// fall below half attainment.
inline json preset(const std::string& name) {
  const json long_batch = {{"output", {{"log_mean", 6.5}, {"log_std", 0.7}}}};
  json base = {
      {"name", name},
      {"workload",
       {{"duration", 600.0},
        {"classes",
         json::array({slo_class("interactive", 20, 3.0, {"vicuna-13b"}),
                      slo_class("batch-1", 60, 3.0, {"vicuna-13b"}),
                      slo_class("batch-2", 3600, 2.5, {"vicuna-13b"}, long_batch)})}}},
      {"cluster", {{"instances", instances(2, "a100", "vicuna-13b")},
                   {"catalog", default_catalog()}}},
      {"policies", {"qlm", "edf", "fcfs", "static"}},
      {"seeds", {1}},
      {"rate_scale", 1.0},
  };
  if (name == "W_A") return base;
  if (name == "W_B") {
    base["workload"]["classes"] = json::array(
        {slo_class("batch-1", 60, 1.0, {"mistral-7b", "llama-70b"}),
         slo_class("batch-2", 3600, 1.0, {"vicuna-13b", "llama-70b"}, long_batch)});
    return base;
  }
  if (name == "W_C") {
    base["workload"]["mega_prompts"] = {{"fraction", 0.05}, {"min_total", 3000},
                                        {"max_total", 4000}};
    return base;
  }
  throw ConfigError("unknown preset '" + name + "' (expected W_A, W_B or W_C)");
}

// ---------------------------------------------------------------------------
// Experiment config
// ---------------------------------------------------------------------------

struct ExperimentConfig {
  json document;  // merged, preset resolved; echoed into outputs
  std::string name;
  WorkloadConfig workload;
  MegaPromptSpec mega;
  ClusterConfig cluster;
  std::vector<Policy> policies;
  std::vector<std::uint64_t> seeds;
  QlmOptions qlm;
  std::size_t static_batch_size = 0;
  Seconds horizon = kInf;
  std::vector<FailureSpec> failures;
  ProfileMap profiles;
  std::vector<std::pair<std::string, std::vector<json>>> sweep;  // axes in key order
  std::string output_dir = "out";
};

inline const std::set<std::string>& top_level_keys() {
  static const std::set<std::string> k = {
      "preset", "name",     "workload",          "cluster", "policies", "seeds",
      "qlm",    "rate_scale", "static_batch_size", "horizon", "failures", "profiles",
      "sweep",  "output_dir"};
  return k;
}

inline json resolve_preset(const json& user) {
  if (!user.is_object()) throw ConfigError("config: expected a JSON object");
  if (!user.contains("preset")) return user;
  json doc = preset(user.at("preset").get<std::string>());
  json patch = user;
  patch.erase("preset");
  doc.merge_patch(patch);
  return doc;
}

inline ExperimentConfig parse_experiment(const json& user) {
  const json doc = resolve_preset(user);
  detail::reject_unknown(doc, top_level_keys(), "config");
  ExperimentConfig c;
  c.document = doc;
  c.name = detail::get_or<std::string>(doc, "name", "experiment");
  const double scale = detail::get_or(doc, "rate_scale", 1.0);
  if (!(scale > 0.0)) throw ConfigError("rate_scale must be > 0");
  c.workload = workload_from_json(detail::require<json>(doc, "workload", "config"), scale);
  c.mega = mega_from_json(doc.at("workload"));
  c.cluster = cluster_from_json(detail::require<json>(doc, "cluster", "config"));
  for (const auto& p : detail::get_or(doc, "policies", json::array({"qlm"})))
    c.policies.push_back(policy_from_string(p.get<std::string>()));
  if (c.policies.empty()) throw ConfigError("config: policies is empty");
  for (const auto& s : detail::get_or(doc, "seeds", json::array({1})))
    c.seeds.push_back(s.get<std::uint64_t>());
  if (c.seeds.empty()) throw ConfigError("config: need at least one seed");
  c.qlm = qlm_from_json(doc.value("qlm", json()));
  c.static_batch_size = detail::get_or<std::size_t>(doc, "static_batch_size", 0);
  c.horizon = detail::get_or(doc, "horizon", kInf);
  for (const auto& f : doc.value("failures", json::array()))
    c.failures.push_back({detail::require<double>(f, "t", "failures[]"),
                          detail::require<int>(f, "instance", "failures[]")});
  for (const auto& p : doc.value("profiles", json::array())) {
    const InstanceProfile prof = profile_from_json(p);
    c.profiles[{prof.model.name, prof.gpu_type}] = prof;
  }
  if (doc.contains("sweep")) {
    for (auto it = doc.at("sweep").begin(); it != doc.at("sweep").end(); ++it) {
      if (!it.value().is_array() || it.value().empty())
        throw ConfigError("sweep axis '" + it.key() + "' needs a nonempty list");
      c.sweep.emplace_back(it.key(), std::vector<json>(it.value().begin(), it.value().end()));
    }
  }
  c.output_dir = detail::get_or<std::string>(doc, "output_dir", c.output_dir);
  return c;
}

inline ExperimentConfig load_experiment(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_experiment(j);
}

// Sets a dotted path that must already exist in `doc` ("rate_scale" may be
// absent). Numeric segments index arrays.
inline void set_config_path(json& doc, const std::string& path, const json& value) {
  if (path == "rate_scale" || path == "policy") {
    if (path == "policy")
      doc["policies"] = json::array({value});
    else
      doc[path] = value;
    return;
  }
  json* node = &doc;
  std::stringstream ss(path);
  std::string seg;
  std::vector<std::string> segs;
  while (std::getline(ss, seg, '.')) segs.push_back(seg);
  if (segs.empty()) throw ConfigError("empty sweep axis");
  for (std::size_t i = 0; i < segs.size(); ++i) {
    const std::string& s = segs[i];
    json* next = nullptr;
    if (node->is_array()) {
      const bool numeric = !s.empty() && std::all_of(s.begin(), s.end(), ::isdigit);
      if (numeric && std::stoul(s) < node->size()) next = &(*node)[std::stoul(s)];
    } else if (node->is_object() && node->contains(s)) {
      next = &(*node)[s];
    } else if (node->is_object() && i == segs.size() - 1 && i == 1 && segs[0] == "qlm") {
      next = &(*node)[s];  // qlm options may be absent from the document
    }
    if (!next) throw ConfigError("sweep axis '" + path + "' does not name a config key");
    node = next;
  }
  *node = value;
}

struct SweepPoint {
  std::string label;  // "axis=value,..." or "base"
  json document;
};

inline std::vector<SweepPoint> expand_sweep(const ExperimentConfig& c) {
  std::vector<SweepPoint> pts{{"", c.document}};
  for (const auto& [axis, values] : c.sweep) {
    std::vector<SweepPoint> next;
    for (const auto& p : pts)
      for (const auto& v : values) {
        SweepPoint q = p;
        if (axis != "policy" && !q.document.contains("qlm") && axis.rfind("qlm.", 0) == 0)
          q.document["qlm"] = json::object();
        set_config_path(q.document, axis, v);
        q.label += (q.label.empty() ? "" : ";") + axis + "=" + v.dump();
        next.push_back(std::move(q));
      }
    pts = std::move(next);
  }
  for (auto& p : pts) {
    p.document.erase("sweep");
    if (p.label.empty()) p.label = "base";
  }
  return pts;
}

// ---------------------------------------------------------------------------
// Running
// ---------------------------------------------------------------------------

inline Trace build_trace(const ExperimentConfig& c, std::uint64_t seed) {
  WorkloadConfig w = c.workload;
  w.seed = seed;
  Trace t = generate_workload(w);
  if (c.mega.fraction > 0.0) {
    TokenCount cap = 0;
    for (const auto& h : c.cluster.catalog) cap = std::max(cap, h.token_capacity);
    t = inject_mega_prompts(t, c.mega.fraction, c.mega.min_total, c.mega.max_total, seed, cap);
  }
  return t;
}

inline SimOptions sim_options(const ExperimentConfig& c, Policy policy, std::uint64_t seed) {
  SimOptions o;
  o.policy = policy;
  o.seed = seed;
  o.horizon = c.horizon;
  o.qlm = c.qlm;
  o.static_batch_size = c.static_batch_size;
  o.failures = c.failures;
  o.profiles = c.profiles;
  return o;
}

struct RunArtifacts {
  LabeledReport report;
  SimResult sim;
};

inline RunArtifacts run_one(const ExperimentConfig& c, const Trace& trace, Policy policy,
                            std::uint64_t seed, const std::string& point) {
  RunArtifacts a;
  a.sim = run_simulation(trace, c.cluster, sim_options(c, policy, seed));
  a.report.key = {point, seed, to_string(policy)};
  a.report.report = compute_metrics(a.sim.log, trace);
  return a;
}

struct ExperimentOptions {
  bool write_event_logs = true;
  bool write_files = true;
};

struct ExperimentOutput {
  std::vector<LabeledReport> reports;
  std::vector<std::string> points;  // "label|policy", one per point
};

namespace detail {

inline void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write " + p.string());
  out << content;
  if (!out) throw Error("write failed: " + p.string());
}

inline std::string safe_name(std::string s) {
  for (char& ch : s)
    if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '-' && ch != '.' && ch != '_')
      ch = '_';
  return s;
}

}  // namespace detail

// One row per (point, seed) with metrics as columns.
inline void emit_runs_csv(std::ostream& out, const std::vector<LabeledReport>& reports) {
  std::vector<std::string> cols;
  std::set<std::string> seen;
  for (const auto& r : reports)
    for (const auto& [m, v] : r.report.rows())
      if (seen.insert(m).second) cols.push_back(m);
  out << "point,policy,seed";
  for (const auto& c : cols) out << ',' << c;
  out << '\n';
  for (const auto& r : reports) {
    std::map<std::string, double> row;
    for (const auto& [m, v] : r.report.rows()) row[m] = v;
    out << r.key.point << ',' << r.key.policy << ',' << r.key.seed;
    for (const auto& c : cols) {
      out << ',';
      if (row.count(c)) out << MetricsReport::format(row[c]);
    }
    out << '\n';
  }
}

// Mean and sample standard deviation over seeds, one row per point.
inline void emit_summary_csv(std::ostream& out, const std::vector<LabeledReport>& reports) {
  std::vector<std::pair<std::string, std::string>> order;
  std::map<std::pair<std::string, std::string>, std::map<std::string, std::vector<double>>> agg;
  std::vector<std::string> cols;
  std::set<std::string> seen;
  for (const auto& r : reports) {
    const auto key = std::make_pair(r.key.point, r.key.policy);
    if (!agg.count(key)) order.push_back(key);
    for (const auto& [m, v] : r.report.rows()) {
      agg[key][m].push_back(v);
      if (seen.insert(m).second) cols.push_back(m);
    }
  }
  out << "point,policy,seeds";
  for (const auto& c : cols) out << ',' << c << "_mean," << c << "_std";
  out << '\n';
  for (const auto& key : order) {
    auto& m = agg[key];
    std::size_t n = 0;
    for (const auto& [k, v] : m) n = std::max(n, v.size());
    out << key.first << ',' << key.second << ',' << n;
    for (const auto& c : cols) {
      out << ',';
      if (!m.count(c)) {
        out << ',';
        continue;
      }
      const auto& v = m[c];
      out << MetricsReport::format(stats::mean(v)) << ','
          << MetricsReport::format(v.size() > 1 ? stats::sample_std(v) : 0.0);
    }
    out << '\n';
  }
}

inline ExperimentOutput run_experiment(const ExperimentConfig& base,
                                       const ExperimentOptions& opt = {}) {
  namespace fs = std::filesystem;
  ExperimentOutput result;
  const fs::path dir = base.output_dir;
  if (opt.write_files) {
    std::error_code ec;
    fs::create_directories(dir / "events", ec);
    if (!ec) fs::create_directories(dir / "traces", ec);
    if (ec) throw Error("cannot create output directory " + dir.string() + ": " + ec.message());
    detail::write_file(dir / "config.json", base.document.dump(2) + "\n");
  }
  for (const SweepPoint& pt : expand_sweep(base)) {
    const ExperimentConfig c = parse_experiment(pt.document);
    if (opt.write_files)
      for (std::uint64_t seed : c.seeds) {
        std::ostringstream t;
        write_trace(t, build_trace(c, seed));
        detail::write_file(
            dir / "traces" / (detail::safe_name(pt.label) + "_" + std::to_string(seed) + ".jsonl"),
            t.str());
      }
    for (Policy policy : c.policies) {
      result.points.push_back(pt.label + "|" + to_string(policy));
      for (std::uint64_t seed : c.seeds) {
        const Trace trace = build_trace(c, seed);
        spdlog::info("run point={} policy={} seed={} requests={}", pt.label, to_string(policy),
                     seed, trace.requests.size());
        RunArtifacts a = run_one(c, trace, policy, seed, pt.label);
        if (opt.write_files && opt.write_event_logs) {
          std::ostringstream log;
          write_event_log(log, a.sim.log, a.sim.request_ids, a.sim.instance_names);
          detail::write_file(dir / "events" /
                                 (detail::safe_name(pt.label) + "_" + to_string(policy) + "_" +
                                  std::to_string(seed) + ".jsonl"),
                             log.str());
        }
        result.reports.push_back(std::move(a.report));
      }
    }
  }
  if (opt.write_files) {
    std::ostringstream csv, runs, summary;
    emit_report(csv, result.reports, ReportFormat::kCsv);
    emit_runs_csv(runs, result.reports);
    emit_summary_csv(summary, result.reports);
    detail::write_file(dir / "reports.csv", csv.str());
    detail::write_file(dir / "reports.json", to_json(result.reports).dump(2) + "\n");
    detail::write_file(dir / "runs.csv", runs.str());
    detail::write_file(dir / "summary.csv", summary.str());
  }
  return result;
}

}  // namespace vqs
