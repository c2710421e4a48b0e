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

// Small hand-built scenarios used by the acceptance harness and tests.

#pragma once

#include <random>
#include <string>
#include <vector>

#include "vqserve/experiment.hpp"

namespace vqs::scenarios {

struct Scenario {
  Trace trace;
  ClusterConfig cluster;
};

inline ClusterConfig one_instance(const std::string& initial_model,
                                  std::vector<InstanceHardware> catalog = {}) {
  ClusterConfig c;
  if (catalog.empty())
    for (const auto& h : default_catalog()) catalog.push_back(hardware_from_json(h));
  c.catalog = std::move(catalog);
  InstanceSpec s;
  s.name = "a100-0";
  s.gpu_type = "a100";
  s.initial_model = ModelId(initial_model);
  c.instances = {s};
  c.validate();
  return c;
}

inline Request draw_request(std::size_t i, Seconds t, const std::string& model, Seconds slo,
                            const TokenDistParams& dist, std::mt19937_64& rng) {
  const auto [in, out] = detail::draw_pair(dist, rng);
  return Request(request_id(i), t, ModelId(model), slo, in, out);
}

// `n` requests queued at once on one idle instance, served FCFS.
inline Scenario queued_backlog(std::size_t n, std::uint64_t seed) {
  Scenario s;
  s.cluster = one_instance("vicuna-13b");
  std::mt19937_64 rng(seed);
  const TokenDistParams dist = TokenDistParams::sharegpt();
  for (std::size_t i = 0; i < n; ++i)
    s.trace.requests.push_back(draw_request(i, 0.0, "vicuna-13b", 1e6, dist, rng));
  return s;
}

// `groups` blocks of `group_size` requests, each block its own SLO class,
// queued at once behind each other on one instance.
inline Scenario queued_groups(int groups, std::size_t group_size, std::uint64_t seed) {
  Scenario s;
  s.cluster = one_instance("vicuna-13b");
  std::mt19937_64 rng(seed);
  const TokenDistParams dist = TokenDistParams::sharegpt();
  std::size_t id = 0;
  for (int g = 0; g < groups; ++g)
    for (std::size_t k = 0; k < group_size; ++k, ++id)
      s.trace.requests.push_back(
          draw_request(id, 0.0, "vicuna-13b", 10000.0 + 1000.0 * g, dist, rng));
  return s;
}

// A saturating batch backlog with isolated interactive arrivals on top. The
// interactive gap exceeds one interactive request's service time, so every
// arrival meets the batch work alone.
inline Scenario hol_blocking(std::uint64_t seed, std::size_t batch = 1000,
                             std::size_t interactive = 20, Seconds gap = 30.0) {
  Scenario s;
  s.cluster = one_instance("vicuna-13b");
  std::mt19937_64 rng(seed);
  TokenDistParams long_out = TokenDistParams::sharegpt();
  long_out.output = {6.5, 0.7, {}};
  const TokenDistParams chat = TokenDistParams::sharegpt();
  std::vector<Request> reqs;
  for (std::size_t i = 0; i < batch; ++i)
    reqs.push_back(draw_request(0, 5.0 * static_cast<double>(i) / static_cast<double>(batch),
                                "vicuna-13b", 3600.0, long_out, rng));
  for (std::size_t i = 0; i < interactive; ++i)
    reqs.push_back(draw_request(0, 30.0 + gap * static_cast<double>(i), "vicuna-13b", 20.0,
                                chat, rng));
  std::stable_sort(reqs.begin(), reqs.end(), [](const Request& a, const Request& b) {
    return a.arrival_time < b.arrival_time;
  });
  for (std::size_t i = 0; i < reqs.size(); ++i) reqs[i].id = request_id(i);
  s.trace.requests = std::move(reqs);
  return s;
}

// Strictly alternating two-model arrivals on one instance whose swaps all
// cost `swap_warm` seconds once the models are in host memory.
inline Scenario interleaved_models(std::uint64_t seed, std::size_t n = 200,
                                   Seconds swap_warm = 20.0, Seconds gap = 0.5) {
  std::vector<InstanceHardware> catalog;
  for (const auto& h : default_catalog()) {
    InstanceHardware hw = hardware_from_json(h);
    hw.swap_warm = swap_warm;
    hw.swap_cold = std::max(hw.swap_cold, swap_warm);
    catalog.push_back(hw);
  }
  Scenario s;
  s.cluster = one_instance("vicuna-13b", catalog);
  std::mt19937_64 rng(seed);
  const TokenDistParams dist = TokenDistParams::sharegpt();
  for (std::size_t i = 0; i < n; ++i)
    s.trace.requests.push_back(draw_request(i, gap * static_cast<double>(i),
                                            i % 2 ? "mistral-7b" : "vicuna-13b", 3600.0, dist,
                                            rng));
  return s;
}

}  // namespace vqs::scenarios
