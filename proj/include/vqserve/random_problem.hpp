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

// Seeded random assignment problems for solver cross-checks. Every time is a
// multiple of 0.25 s so objectives are exact in binary floating point.

#pragma once

#include <random>

#include "vqserve/scheduler.hpp"

namespace vqs::testing {

inline double grid(std::mt19937_64& rng, int lo, int hi) {
  std::uniform_int_distribution<int> d(lo, hi);
  return d(rng) * 0.25;
}

// At most `max_slots` slots; pins appear in roughly one instance in four.
inline AssignmentProblem random_problem(std::uint64_t seed, int max_slots = 10) {
  std::mt19937_64 rng(seed);
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  const int nq = pick(1, 3);
  const int len = pick(1, max_slots / nq);
  const int n = pick(1, nq * len);
  const int nm = pick(1, 3);
  std::vector<GroupInput> groups;
  std::vector<QueueInput> queues;
  EstimateTable est;
  const char* names[] = {"m0", "m1", "m2"};
  for (int q = 0; q < nq; ++q) {
    QueueInput qi;
    qi.id = VirtualQueueId(q);
    const int r = pick(-1, nm - 1);
    if (r >= 0) qi.resident = ModelId(names[r]);
    for (int m = 0; m < nm; ++m) qi.swap_time[names[m]] = grid(rng, 0, 40);
    queues.push_back(qi);
  }
  for (int i = 0; i < n; ++i) {
    GroupInput g;
    g.id = RequestGroupId(i);
    g.creation_time = pick(0, 5);
    g.model = ModelId(names[pick(0, nm - 1)]);
    g.slo = grid(rng, 1, 200);
    groups.push_back(g);
    for (int q = 0; q < nq; ++q) {
      const double w = grid(rng, 1, 60);
      est[{g.id, VirtualQueueId(q)}] = {w, w + grid(rng, 0, 40)};
    }
  }
  if (pick(0, 3) == 0) {
    GroupInput& g = groups[pick(0, n - 1)];
    g.pinned_queue = pick(0, nq - 1);
    g.pinned_head = pick(0, 1) == 1;
  }
  std::uniform_real_distribution<double> unit(0, 1);
  const double weight = unit(rng) < 0.5 ? 1000.0 : 4.0;
  return build_problem(groups, queues, est, len, weight);
}

// A fixed-shape instance for timing studies: `groups` real groups over
// `queues` queues and `models` models, queue length ceil(groups/queues) + 2.
inline AssignmentProblem random_problem(std::uint64_t seed, int groups, int queues, int models) {
  std::mt19937_64 rng(seed);
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  std::vector<GroupInput> gs;
  std::vector<QueueInput> qs;
  EstimateTable est;
  for (int q = 0; q < queues; ++q) {
    QueueInput qi;
    qi.id = VirtualQueueId(q);
    qi.resident = ModelId("m" + std::to_string(pick(0, models - 1)));
    for (int m = 0; m < models; ++m) qi.swap_time["m" + std::to_string(m)] = grid(rng, 8, 80);
    qs.push_back(qi);
  }
  for (int i = 0; i < groups; ++i) {
    GroupInput g;
    g.id = RequestGroupId(i);
    g.creation_time = i;
    g.model = ModelId("m" + std::to_string(pick(0, models - 1)));
    g.slo = grid(rng, 40, 2400);
    gs.push_back(g);
    for (int q = 0; q < queues; ++q) {
      const double w = grid(rng, 8, 240);
      est[{g.id, VirtualQueueId(q)}] = {w, w + grid(rng, 4, 80)};
    }
  }
  return build_problem(gs, qs, est);
}

}  // namespace vqs::testing
