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

// Request groups: k-means over (SLO, input length, class output length) with
// the model as a hard partition, arrival-order splitting of oversized
// clusters, and online classification of new arrivals.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <utility>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <spdlog/spdlog.h>

#include "vqserve/core.hpp"
#include "vqserve/workload.hpp"

namespace vqs {

using Features = std::array<double, 3>;

struct GroupingConfig {
  int k = 0;                          // 0 selects one cluster per (model, SLO)
  double group_size_multiple = 4.0;
  double avg_batch_size = 32.0;
  int max_iterations = 50;
  std::uint64_t seed = 0;

  std::size_t size_threshold() const {
    return std::max<std::size_t>(
        1, static_cast<std::size_t>(std::floor(group_size_multiple * avg_batch_size)));
  }

  void validate() const {
    if (k < 0) throw ConfigError("grouping: k must be >= 1 (or 0 for auto)");
    if (!(group_size_multiple >= 1.0))
      throw ConfigError("grouping: group_size_multiple must be >= 1");
    if (!(avg_batch_size > 0.0))
      throw ConfigError("grouping: avg_batch_size must be > 0");
    if (max_iterations < 1) throw ConfigError("grouping: max_iterations < 1");
  }
};

enum class GroupState { kWaiting, kRunning, kComplete };

inline const char* to_string(GroupState s) {
  switch (s) {
    case GroupState::kWaiting: return "waiting";
    case GroupState::kRunning: return "running";
    case GroupState::kComplete: return "complete";
  }
  return "?";
}

struct RequestGroup {
  RequestGroupId id;
  ModelId model;
  Seconds slo = 0.0;       // min member SLO
  Seconds max_slo = 0.0;   // max member SLO
  std::vector<std::size_t> members;  // request-table indices, arrival order
  TokenStats stats;
  Features centroid{};     // mean raw feature vector of the members
  GroupState state = GroupState::kWaiting;
  Seconds creation_time = 0.0;

  // Running sums backing incremental updates.
  Features feature_sum{};
  double input_sum = 0.0;
  double input_sq_sum = 0.0;
  std::map<Seconds, std::size_t> slo_counts;

  std::size_t size() const { return members.size(); }
};

// Raw features and the z-score used to compare them.
struct FeatureScaler {
  Features mean{0.0, 0.0, 0.0};
  Features scale{1.0, 1.0, 1.0};

  static Features raw(const Request& r, const TokenHistory& history) {
    const TokenStats* s = history.find(r.model, r.slo);
    const double out = s ? s->mean_output : history.fallback().mean_output;
    return {std::log(r.slo), std::log(static_cast<double>(r.input_tokens)),
            std::log(std::max(out, 1.0))};
  }

  // Z-score over a batch. Constant dimensions map to 0.
  static FeatureScaler fit(std::span<const Features> xs) {
    FeatureScaler s;
    if (xs.empty()) return s;
    const double n = static_cast<double>(xs.size());
    for (int d = 0; d < 3; ++d) {
      double m = 0.0;
      for (const auto& x : xs) m += x[d];
      m /= n;
      double v = 0.0;
      for (const auto& x : xs) v += (x[d] - m) * (x[d] - m);
      s.mean[d] = m;
      s.scale[d] = std::sqrt(v / n);
    }
    return s;
  }

  // Scaler anchored on the history's classes, used before any batch is seen.
  // The input dimension takes the lognormal spread implied by the fallback
  // moments.
  static FeatureScaler from_history(const TokenHistory& h) {
    std::vector<Features> xs;
    for (const auto& [key, st] : h.classes())
      xs.push_back({std::log(key.second), std::log(st.mean_input),
                    std::log(st.mean_output)});
    const TokenStats& f = h.fallback();
    if (xs.empty())
      xs.push_back({0.0, std::log(f.mean_input), std::log(f.mean_output)});
    FeatureScaler s = fit(xs);
    const double cv = f.std_input / f.mean_input;
    s.scale[1] = std::sqrt(std::log1p(cv * cv));
    return s;
  }

  Features normalize(const Features& x) const {
    Features z{};
    for (int d = 0; d < 3; ++d) z[d] = scale[d] > 0.0 ? (x[d] - mean[d]) / scale[d] : 0.0;
    return z;
  }
};

inline double squared_distance(const Features& a, const Features& b) {
  double s = 0.0;
  for (int d = 0; d < 3; ++d) s += (a[d] - b[d]) * (a[d] - b[d]);
  return s;
}

// Output moments are the member-weighted mixture of the history classes
// present in the group; input moments come from the members themselves.
inline TokenStats group_token_stats(const RequestGroup& g, const TokenHistory& history) {
  if (g.members.empty()) throw ValidationError("group_token_stats: empty group");
  double n = 0.0, m1 = 0.0, m2 = 0.0;
  for (const auto& [slo, count] : g.slo_counts) {
    const TokenStats& s = history.lookup(g.model, slo);
    const double w = static_cast<double>(count);
    n += w;
    m1 += w * s.mean_output;
    m2 += w * (s.std_output * s.std_output + s.mean_output * s.mean_output);
  }
  TokenStats out;
  out.mean_output = m1 / n;
  out.std_output = std::sqrt(std::max(0.0, m2 / n - out.mean_output * out.mean_output));
  const double k = static_cast<double>(g.members.size());
  out.mean_input = g.input_sum / k;
  out.std_input = k < 2 ? 0.0
                        : std::sqrt(std::max(0.0, (g.input_sq_sum - k * out.mean_input *
                                                                        out.mean_input) /
                                                      (k - 1.0)));
  return out;
}

namespace detail {

inline void add_member(RequestGroup& g, const Request& r, std::size_t index,
                       const Features& raw) {
  if (g.members.empty()) {
    g.model = r.model;
    g.slo = g.max_slo = r.slo;
    g.creation_time = r.arrival_time;
  }
  g.members.push_back(index);
  g.slo = std::min(g.slo, r.slo);
  g.max_slo = std::max(g.max_slo, r.slo);
  const auto in = static_cast<double>(r.input_tokens);
  g.input_sum += in;
  g.input_sq_sum += in * in;
  ++g.slo_counts[r.slo];
  for (int d = 0; d < 3; ++d) {
    g.feature_sum[d] += raw[d];
    g.centroid[d] = g.feature_sum[d] / static_cast<double>(g.members.size());
  }
}

// Halves `members` (already in arrival order) until every piece fits.
inline void split_half(std::vector<std::size_t> members, std::size_t threshold,
                       std::vector<std::vector<std::size_t>>& out) {
  if (members.size() <= threshold) {
    out.push_back(std::move(members));
    return;
  }
  const std::size_t half = (members.size() + 1) / 2;
  split_half({members.begin(), members.begin() + half}, threshold, out);
  split_half({members.begin() + half, members.end()}, threshold, out);
}

// Lloyd's algorithm from the given centers. Returns one label per point and
// the within-cluster sum of squares.
inline std::pair<std::vector<int>, double> lloyd(const std::vector<Features>& x,
                                                 std::vector<Features> centers, int max_iter) {
  const std::size_t n = x.size();
  std::vector<int> label(n, -1);
  std::vector<double> dist(n, 0.0);
  for (int iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      int arg = 0;
      double bd = squared_distance(x[i], centers[0]);
      for (std::size_t c = 1; c < centers.size(); ++c) {
        const double d = squared_distance(x[i], centers[c]);
        if (d < bd) {
          bd = d;
          arg = static_cast<int>(c);
        }
      }
      dist[i] = bd;
      if (label[i] != arg) {
        label[i] = arg;
        changed = true;
      }
    }
    if (!changed) break;
    std::vector<Features> sum(centers.size(), Features{});
    std::vector<int> count(centers.size(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      for (int d = 0; d < 3; ++d) sum[label[i]][d] += x[i][d];
      ++count[label[i]];
    }
    for (std::size_t c = 0; c < centers.size(); ++c)
      if (count[c] > 0)
        for (int d = 0; d < 3; ++d) centers[c][d] = sum[c][d] / count[c];
  }
  return {label, std::accumulate(dist.begin(), dist.end(), 0.0)};
}

inline constexpr int kKmeansRestarts = 8;

// Best of several seeded Lloyd runs: the first starts from farthest-point
// centers, the rest from k-means++ draws. Returns one label per point.
inline std::vector<int> kmeans(const std::vector<Features>& x, int k, int max_iter,
                               std::mt19937_64& rng) {
  const std::size_t n = x.size();
  std::vector<int> best_label;
  double best_sse = std::numeric_limits<double>::infinity();
  for (int run = 0; run < kKmeansRestarts; ++run) {
    std::vector<Features> centers;
    std::uniform_int_distribution<std::size_t> first(0, n - 1);
    centers.push_back(x[first(rng)]);
    std::vector<double> near(n);
    for (std::size_t i = 0; i < n; ++i) near[i] = squared_distance(x[i], centers[0]);
    while (static_cast<int>(centers.size()) < k) {
      std::size_t arg = 0;
      for (std::size_t i = 1; i < n; ++i)
        if (near[i] > near[arg]) arg = i;
      if (near[arg] <= 0.0) break;
      if (run > 0) {
        std::discrete_distribution<std::size_t> pick(near.begin(), near.end());
        arg = pick(rng);
      }
      centers.push_back(x[arg]);
      for (std::size_t i = 0; i < n; ++i)
        near[i] = std::min(near[i], squared_distance(x[i], centers.back()));
    }
    auto [label, sse] = lloyd(x, std::move(centers), max_iter);
    if (sse < best_sse) {
      best_sse = sse;
      best_label = std::move(label);
    }
  }
  return best_label;
}

}  // namespace detail

// Live groups plus the state needed to classify arrivals into them.
class GroupSet {
 public:
  GroupSet(GroupingConfig config, TokenHistory history)
      : config_(config),
        history_(std::move(history)),
        scaler_(FeatureScaler::from_history(history_)) {
    config_.validate();
  }

  const GroupingConfig& config() const { return config_; }
  const TokenHistory& history() const { return history_; }
  const std::map<RequestGroupId, RequestGroup>& groups() const { return groups_; }

  RequestGroup& at(RequestGroupId id) { return groups_.at(id); }
  const RequestGroup& at(RequestGroupId id) const { return groups_.at(id); }
  bool contains(RequestGroupId id) const { return groups_.count(id) != 0; }
  void erase(RequestGroupId id) { groups_.erase(id); }

  // Clusters `subset` (indices into `table`) into new groups, returned in
  // (creation time, first member) order.
  std::vector<RequestGroupId> form(std::span<const Request> table,
                                   std::span<const std::size_t> subset) {
    if (subset.empty()) throw ValidationError("form_request_groups: no requests");
    const std::size_t threshold = config_.size_threshold();

    std::vector<Features> raw(subset.size());
    for (std::size_t i = 0; i < subset.size(); ++i)
      raw[i] = FeatureScaler::raw(table[subset[i]], history_);
    const FeatureScaler batch = FeatureScaler::fit(raw);

    // Hard partition by model in order of first appearance.
    std::vector<std::string> order;
    std::map<std::string, std::vector<std::size_t>> parts;
    std::set<std::pair<std::string, Seconds>> classes;
    for (std::size_t i = 0; i < subset.size(); ++i) {
      const Request& r = table[subset[i]];
      if (!parts.count(r.model.name)) order.push_back(r.model.name);
      parts[r.model.name].push_back(i);
      classes.insert({r.model.name, r.slo});
    }
    const std::size_t k_total = config_.k > 0 ? static_cast<std::size_t>(config_.k)
                                              : classes.size();

    std::vector<std::vector<std::size_t>> clusters;  // positions into subset
    for (std::size_t p = 0; p < order.size(); ++p) {
      const auto& part = parts[order[p]];
      std::vector<Features> x(part.size());
      std::set<Features> distinct;
      std::set<Seconds> slos;
      for (std::size_t i = 0; i < part.size(); ++i) {
        x[i] = batch.normalize(raw[part[i]]);
        distinct.insert(x[i]);
        slos.insert(table[subset[part[i]]].slo);
      }
      std::size_t k = config_.k > 0
                          ? std::max<std::size_t>(
                                1, static_cast<std::size_t>(std::llround(
                                       static_cast<double>(k_total) * part.size() /
                                       static_cast<double>(subset.size()))))
                          : slos.size();
      if (k > distinct.size()) {
        spdlog::warn("grouping: k={} exceeds {} distinct points for model {}; reducing",
                     k, distinct.size(), order[p]);
        k = distinct.size();
      }
      std::seed_seq seq{config_.seed, static_cast<std::uint64_t>(p)};
      std::mt19937_64 rng(seq);
      const std::vector<int> label =
          detail::kmeans(x, static_cast<int>(k), config_.max_iterations, rng);
      std::map<int, std::vector<std::size_t>> by_label;
      for (std::size_t i = 0; i < part.size(); ++i) by_label[label[i]].push_back(part[i]);
      for (auto& [l, members] : by_label) clusters.push_back(std::move(members));
    }

    std::vector<std::vector<std::size_t>> pieces;
    for (auto& c : clusters) {
      std::vector<std::size_t> members;
      for (std::size_t pos : c) members.push_back(subset[pos]);
      std::stable_sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
        if (table[a].arrival_time != table[b].arrival_time)
          return table[a].arrival_time < table[b].arrival_time;
        return a < b;
      });
      detail::split_half(std::move(members), threshold, pieces);
    }
    std::sort(pieces.begin(), pieces.end(), [&](const auto& a, const auto& b) {
      const Seconds ta = table[a.front()].arrival_time, tb = table[b.front()].arrival_time;
      if (ta != tb) return ta < tb;
      return a.front() < b.front();
    });

    std::vector<RequestGroupId> ids;
    for (const auto& piece : pieces) {
      RequestGroup g;
      g.id = RequestGroupId(next_id_++);
      for (std::size_t idx : piece)
        detail::add_member(g, table[idx], idx, FeatureScaler::raw(table[idx], history_));
      g.stats = group_token_stats(g, history_);
      ids.push_back(g.id);
      groups_.emplace(g.id, std::move(g));
    }
    return ids;
  }

  // Joins the nearest same-model, under-threshold, unfinished group whose
  // member SLO range covers the request's SLO; otherwise opens a singleton.
  // Ties go to the earlier creation time, then the lower id.
  RequestGroupId assign_incoming(std::span<const Request> table, std::size_t index) {
    const Request& r = table[index];
    const Features raw = FeatureScaler::raw(r, history_);
    const Features z = scaler_.normalize(raw);
    const std::size_t threshold = config_.size_threshold();
    RequestGroup* best = nullptr;
    double best_d = std::numeric_limits<double>::infinity();
    for (auto& [id, g] : groups_) {
      if (g.state == GroupState::kComplete || !(g.model == r.model)) continue;
      if (g.members.size() >= threshold) continue;
      if (r.slo < g.slo || r.slo > g.max_slo) continue;
      const double d = squared_distance(z, scaler_.normalize(g.centroid));
      if (!best || d < best_d ||
          (d == best_d && g.creation_time < best->creation_time)) {
        best = &g;
        best_d = d;
      }
    }
    if (best) {
      detail::add_member(*best, r, index, raw);
      best->stats = group_token_stats(*best, history_);
      return best->id;
    }
    RequestGroup g;
    g.id = RequestGroupId(next_id_++);
    detail::add_member(g, r, index, raw);
    g.stats = group_token_stats(g, history_);
    const RequestGroupId id = g.id;
    groups_.emplace(id, std::move(g));
    return id;
  }

 private:
  GroupingConfig config_;
  TokenHistory history_;
  FeatureScaler scaler_;
  std::map<RequestGroupId, RequestGroup> groups_;
  std::int64_t next_id_ = 0;
};

// Stateless form of GroupSet::form over a whole request list.
inline std::vector<RequestGroup> form_request_groups(std::span<const Request> requests,
                                                     const GroupingConfig& config,
                                                     const TokenHistory& history) {
  GroupSet set(config, history);
  std::vector<std::size_t> all(requests.size());
  std::iota(all.begin(), all.end(), 0);
  std::vector<RequestGroup> out;
  for (RequestGroupId id : set.form(requests, all)) out.push_back(set.at(id));
  return out;
}

}  // namespace vqs
