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

// Synthetic workload generation, trace files and token statistics.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "vqserve/core.hpp"
#include "vqserve/stats.hpp"

namespace vqs {

enum class TokenFamily { kLognormal, kEmpirical };

// One length distribution. For the lognormal family log_mean/log_std are the
// parameters of the underlying normal; for the empirical family `histogram`
// holds (length, weight) bins.
struct LengthDist {
  double log_mean = 0.0;
  double log_std = 0.0;
  std::vector<std::pair<TokenCount, double>> histogram;
};

struct TokenDistParams {
  TokenFamily family = TokenFamily::kLognormal;
  LengthDist input;
  LengthDist output;
  TokenCount truncation = 4096;   // cap on input + output
  TokenCount max_output = 2048;   // model generation cap

  // Lognormal fit to public ShareGPT length histograms: median input ~100
  // tokens, median output ~200 tokens, heavy right tails.
  static TokenDistParams sharegpt() {
    TokenDistParams p;
    p.input = {4.6, 1.0, {}};
    p.output = {5.3, 0.9, {}};
    return p;
  }

  void validate() const {
    if (truncation < 2) throw ConfigError("token_dist: truncation must be >= 2");
    if (max_output < 1) throw ConfigError("token_dist: max_output must be >= 1");
    for (const LengthDist* d : {&input, &output}) {
      if (family == TokenFamily::kLognormal) {
        if (!std::isfinite(d->log_mean) || !(d->log_std >= 0.0))
          throw ConfigError("token_dist: invalid lognormal parameters");
      } else {
        if (d->histogram.empty())
          throw ConfigError("token_dist: empty histogram");
        double w = 0.0;
        for (auto [len, wt] : d->histogram) {
          if (len < 1 || len > truncation || wt < 0.0)
            throw ConfigError("token_dist: histogram bin out of range");
          w += wt;
        }
        if (!(w > 0.0)) throw ConfigError("token_dist: zero histogram weight");
      }
    }
  }
};

// Analytic moments of the lognormal distribution with parameters (mu, sigma).
inline double lognormal_mean(double mu, double sigma) {
  return std::exp(mu + sigma * sigma / 2.0);
}
inline double lognormal_std(double mu, double sigma) {
  const double s2 = sigma * sigma;
  return std::sqrt((std::exp(s2) - 1.0) * std::exp(2.0 * mu + s2));
}

struct ModelWeight {
  ModelId model;
  double weight = 1.0;
};

// Rate multiplier applied from `start` until the next phase begins.
struct RatePhase {
  Seconds start = 0.0;
  double multiplier = 1.0;
};

struct SloClassConfig {
  std::string name;
  Seconds slo = 0.0;
  double arrival_rate = 0.0;
  std::vector<ModelWeight> models;
  TokenDistParams token_dist = TokenDistParams::sharegpt();
  std::vector<RatePhase> rate_schedule;  // empty means constant rate
};

struct WorkloadConfig {
  Seconds duration = 0.0;
  std::vector<SloClassConfig> classes;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(duration > 0.0)) throw ConfigError("workload: duration must be > 0");
    if (classes.empty()) throw ConfigError("workload: need at least one class");
    for (const auto& c : classes) {
      if (!(c.slo > 0.0)) throw ConfigError("class " + c.name + ": slo <= 0");
      if (!(c.arrival_rate > 0.0))
        throw ConfigError("class " + c.name + ": arrival_rate must be > 0");
      if (c.models.empty()) throw ConfigError("class " + c.name + ": no models");
      double w = 0.0;
      for (const auto& m : c.models) {
        if (m.weight < 0.0) throw ConfigError("class " + c.name + ": weight < 0");
        w += m.weight;
      }
      if (std::abs(w - 1.0) > 1e-6)
        throw ConfigError("class " + c.name + ": model weights must sum to 1");
      for (const auto& ph : c.rate_schedule)
        if (ph.multiplier < 0.0 || ph.start < 0.0)
          throw ConfigError("class " + c.name + ": bad rate phase");
      c.token_dist.validate();
    }
  }
};

struct Trace {
  std::vector<Request> requests;
  std::string provenance;
};

// ---------------------------------------------------------------------------
// Generation
// ---------------------------------------------------------------------------

namespace detail {

inline TokenCount draw_length(const LengthDist& d, TokenFamily family,
                              std::mt19937_64& rng) {
  if (family == TokenFamily::kLognormal) {
    std::lognormal_distribution<double> dist(d.log_mean, d.log_std);
    return std::max<TokenCount>(1, std::llround(dist(rng)));
  }
  std::vector<double> w;
  w.reserve(d.histogram.size());
  for (const auto& bin : d.histogram) w.push_back(bin.second);
  std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
  return d.histogram[pick(rng)].first;
}

// Draws (input, output) by rejection until the pair respects both caps; the
// last resort clamps so generation always terminates.
inline std::pair<TokenCount, TokenCount> draw_pair(const TokenDistParams& p,
                                                   std::mt19937_64& rng) {
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const TokenCount in = draw_length(p.input, p.family, rng);
    const TokenCount out = draw_length(p.output, p.family, rng);
    if (out <= p.max_output && in + out <= p.truncation) return {in, out};
  }
  return {1, 1};
}

inline double rate_multiplier(const std::vector<RatePhase>& schedule, Seconds t) {
  double m = 1.0;
  for (const auto& ph : schedule)
    if (ph.start <= t) m = ph.multiplier;
  return m;
}

}  // namespace detail

inline std::string request_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "r%06zu", index);
  return buf;
}

// Poisson arrivals per class, merged and renumbered in arrival order. Each
// class draws from its own stream so adding a class leaves the others intact.
inline Trace generate_workload(const WorkloadConfig& config) {
  config.validate();
  struct Draft {
    Request req;
    std::size_t cls;
    std::size_t seq;
  };
  std::vector<Draft> drafts;
  for (std::size_t c = 0; c < config.classes.size(); ++c) {
    const auto& cls = config.classes[c];
    std::seed_seq seq{static_cast<std::uint64_t>(config.seed),
                      static_cast<std::uint64_t>(c), std::uint64_t{0x5eed}};
    std::mt19937_64 rng(seq);
    double max_mult = 1.0;
    if (!cls.rate_schedule.empty()) {
      max_mult = 0.0;
      for (const auto& ph : cls.rate_schedule) max_mult = std::max(max_mult, ph.multiplier);
      if (max_mult <= 0.0) continue;
    }
    std::exponential_distribution<double> gap(cls.arrival_rate * max_mult);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> weights;
    for (const auto& m : cls.models) weights.push_back(m.weight);
    std::discrete_distribution<std::size_t> pick_model(weights.begin(), weights.end());
    Seconds t = 0.0;
    std::size_t n = 0;
    while (true) {
      t += gap(rng);
      if (t >= config.duration) break;
      // Thinning only when a schedule is present keeps constant-rate streams
      // free of extra draws.
      if (!cls.rate_schedule.empty() &&
          unit(rng) * max_mult > detail::rate_multiplier(cls.rate_schedule, t))
        continue;
      const ModelId& model = cls.models[pick_model(rng)].model;
      auto [in, out] = detail::draw_pair(cls.token_dist, rng);
      drafts.push_back({Request("", t, model, cls.slo, in, out), c, n++});
    }
  }
  std::sort(drafts.begin(), drafts.end(), [](const Draft& a, const Draft& b) {
    if (a.req.arrival_time != b.req.arrival_time)
      return a.req.arrival_time < b.req.arrival_time;
    if (a.cls != b.cls) return a.cls < b.cls;
    return a.seq < b.seq;
  });
  Trace trace;
  trace.provenance = "generated:seed=" + std::to_string(config.seed);
  trace.requests.reserve(drafts.size());
  for (std::size_t i = 0; i < drafts.size(); ++i) {
    drafts[i].req.id = request_id(i);
    trace.requests.push_back(std::move(drafts[i].req));
  }
  return trace;
}

// ---------------------------------------------------------------------------
// Trace files (JSONL)
// ---------------------------------------------------------------------------

inline nlohmann::json request_to_json(const Request& r) {
  return nlohmann::json{{"id", r.id},
                        {"arrival_s", r.arrival_time},
                        {"model", r.model.name},
                        {"slo_s", r.slo},
                        {"input_tokens", r.input_tokens},
                        {"output_tokens", GroundTruth::output_tokens(r)}};
}

inline Request request_from_json(const nlohmann::json& j) {
  auto field = [&](const char* name) -> const nlohmann::json& {
    if (!j.contains(name)) throw SchemaError(name, "missing");
    return j.at(name);
  };
  auto number = [&](const char* name) {
    const auto& v = field(name);
    if (!v.is_number()) throw SchemaError(name, "must be a number");
    return v.get<double>();
  };
  auto integer = [&](const char* name) {
    const auto& v = field(name);
    if (!v.is_number_integer()) throw SchemaError(name, "must be an integer");
    return v.get<TokenCount>();
  };
  const auto& id = field("id");
  if (!id.is_string()) throw SchemaError("id", "must be a string");
  const auto& model = field("model");
  if (!model.is_string()) throw SchemaError("model", "must be a string");
  Request r(id.get<std::string>(), number("arrival_s"), model.get<std::string>(),
            number("slo_s"), integer("input_tokens"), integer("output_tokens"));
  r.validate();
  return r;
}

inline void write_trace(std::ostream& out, const Trace& trace) {
  for (const auto& r : trace.requests) out << request_to_json(r).dump() << '\n';
}

inline void save_trace(const std::string& path, const Trace& trace) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write trace: " + path);
  write_trace(out, trace);
}

// Parses JSONL from a stream. Out-of-order arrivals are re-sorted (stable)
// with a warning; duplicate ids are rejected.
inline Trace read_trace(std::istream& in, std::string provenance = "stream") {
  Trace trace;
  trace.provenance = std::move(provenance);
  std::string line;
  std::size_t lineno = 0;
  std::set<std::string> ids;
  bool sorted = true;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(lineno, e.what());
    }
    if (!j.is_object()) throw ParseError(lineno, "expected a JSON object");
    Request r;
    try {
      r = request_from_json(j);
    } catch (const SchemaError& e) {
      throw SchemaError(e.field(), "line " + std::to_string(lineno) + ": " + e.what());
    }
    if (!ids.insert(r.id).second)
      throw SchemaError("id", "duplicate id '" + r.id + "' at line " +
                                  std::to_string(lineno));
    if (!trace.requests.empty() &&
        r.arrival_time < trace.requests.back().arrival_time)
      sorted = false;
    trace.requests.push_back(std::move(r));
  }
  if (!sorted) {
    spdlog::warn("trace {}: arrivals out of order, re-sorting", trace.provenance);
    std::stable_sort(trace.requests.begin(), trace.requests.end(),
                     [](const Request& a, const Request& b) {
                       return a.arrival_time < b.arrival_time;
                     });
  }
  return trace;
}

inline Trace load_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open trace: " + path);
  return read_trace(in, path);
}

// ---------------------------------------------------------------------------
// Token statistics
// ---------------------------------------------------------------------------

using RequestPredicate = std::function<bool(const Request&)>;

// Sample moments over matching requests. This reads ground-truth output
// lengths: it builds the offline history dataset, not an online estimate.
inline TokenStats fit_token_stats(const Trace& trace,
                                  const RequestPredicate& pred = nullptr) {
  std::vector<double> in, out;
  for (const auto& r : trace.requests) {
    if (pred && !pred(r)) continue;
    in.push_back(static_cast<double>(r.input_tokens));
    out.push_back(static_cast<double>(GroundTruth::output_tokens(r)));
  }
  if (in.size() < 2)
    throw ValidationError("fit_token_stats: need at least 2 matching requests, got " +
                          std::to_string(in.size()));
  return TokenStats{stats::mean(out), stats::sample_std(out), stats::mean(in),
                    stats::sample_std(in)};
}

// Per-(model, slo) output statistics plus a scenario-wide fallback.
class TokenHistory {
 public:
  TokenHistory() = default;
  explicit TokenHistory(TokenStats fallback) : fallback_(fallback) {}

  void set(const ModelId& model, Seconds slo, const TokenStats& s) {
    by_class_[{model.name, slo}] = s;
  }
  void set_fallback(const TokenStats& s) { fallback_ = s; }
  const TokenStats& fallback() const { return fallback_; }
  bool empty() const { return by_class_.empty(); }
  const std::map<std::pair<std::string, Seconds>, TokenStats>& classes() const {
    return by_class_;
  }

  // Returns nullptr when the class is unknown.
  const TokenStats* find(const ModelId& model, Seconds slo) const {
    auto it = by_class_.find({model.name, slo});
    return it == by_class_.end() ? nullptr : &it->second;
  }

  const TokenStats& lookup(const ModelId& model, Seconds slo) const {
    if (const TokenStats* s = find(model, slo)) return *s;
    if (warned_.insert({model.name, slo}).second)
      spdlog::warn("no token history for ({}, {}s); using scenario default",
                 model.name, slo);
    return fallback_;
  }

 private:
  std::map<std::pair<std::string, Seconds>, TokenStats> by_class_;
  mutable std::set<std::pair<std::string, Seconds>> warned_;
  TokenStats fallback_{300.0, 250.0, 160.0, 180.0};
};

// Fits per-class history from a trace; classes with fewer than two requests
// are left to the fallback.
inline TokenHistory build_history(const Trace& trace) {
  TokenHistory h;
  std::map<std::pair<std::string, Seconds>, int> counts;
  for (const auto& r : trace.requests) ++counts[{r.model.name, r.slo}];
  for (const auto& [key, n] : counts) {
    if (n < 2) continue;
    h.set(key.first, key.second, fit_token_stats(trace, [&](const Request& r) {
            return r.model.name == key.first && r.slo == key.second;
          }));
  }
  if (trace.requests.size() >= 2) h.set_fallback(fit_token_stats(trace));
  return h;
}

// ---------------------------------------------------------------------------
// Mega prompts
// ---------------------------------------------------------------------------

// Rewrites a seeded subset of requests so input + output falls uniformly in
// [min_total, max_total], split evenly. `max_capacity` is the largest token
// capacity of any instance in the scenario.
inline Trace inject_mega_prompts(const Trace& trace, double fraction,
                                 TokenCount min_total, TokenCount max_total,
                                 std::uint64_t seed, TokenCount max_capacity) {
  if (!(fraction >= 0.0 && fraction <= 1.0))
    throw ConfigError("mega prompts: fraction must be in [0, 1]");
  if (min_total < 2 || min_total > max_total)
    throw ConfigError("mega prompts: need 2 <= min <= max");
  if (max_total > max_capacity)
    throw ConfigError("mega prompts: range exceeds every instance's capacity");
  Trace out = trace;
  const std::size_t n = out.requests.size();
  const auto count = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  if (count == 0) return out;
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  std::uniform_int_distribution<TokenCount> total(min_total, max_total);
  for (std::size_t k = 0; k < count; ++k) {
    Request& r = out.requests[idx[k]];
    const TokenCount t = total(rng);
    r.input_tokens = t / 2;
    GroundTruth::set_output_tokens(r, t - t / 2);
  }
  out.provenance += ";mega=" + std::to_string(fraction);
  return out;
}

}  // namespace vqs
