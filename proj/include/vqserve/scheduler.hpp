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

// Assignment of request groups to virtual-queue slots.
//
// Every slot holds exactly one group; short queues are filled with padding
// groups that take no time, never violate and never change the model. The
// predicted wait of the group in slot j of queue g is
//
//   wt_j = sum_{k<j} cost_k + sum_{k<=j} t_k * S_g(model_k)
//
// where t_k marks a model change relative to the previous real group (or the
// resident model), and cost_k is the completion time of group k when the next
// real group changes the model, otherwise its serve time. The penalty is
// p_j = wt_j - slo_j. SLOs are soft: the objective is
//
//   sum_j p_j + M * sum_j max(0, p_j)
//
// so a plan that meets every SLO is always preferred, and when none exists
// the solvers still return the least-violating plan.

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "vqserve/core.hpp"
#include "vqserve/estimator.hpp"

namespace vqs {


struct QueueSpec {
  VirtualQueueId id;
  int max_length = 0;
  int resident = -1;  // model index, -1 when nothing is loaded
};

struct GroupSpec {
  RequestGroupId id;
  Seconds creation_time = 0.0;
  int model = -1;  // -1 for padding
  Seconds slo = kInf;
  std::vector<Seconds> serve_time;       // per queue; +inf when not allowed
  std::vector<Seconds> completion_time;  // per queue
  int pinned_queue = -1;
  bool pinned_head = false;
  bool padding = false;

  bool allowed_on(int q) const {
    if (padding) return true;
    if (pinned_queue >= 0 && pinned_queue != q) return false;
    return std::isfinite(serve_time[q]) && std::isfinite(completion_time[q]);
  }
};

struct AssignmentProblem {
  std::vector<std::string> models;
  std::vector<QueueSpec> queues;
  std::vector<GroupSpec> groups;                  // real groups then padding
  std::vector<std::vector<Seconds>> swap_time;    // [queue][model]
  double violation_weight = 1000.0;

  int total_slots() const {
    int s = 0;
    for (const auto& q : queues) s += q.max_length;
    return s;
  }
  int real_groups() const {
    int n = 0;
    for (const auto& g : groups) n += g.padding ? 0 : 1;
    return n;
  }

  void validate() const {
    const auto nq = queues.size();
    if (swap_time.size() != nq) throw ValidationError("problem: swap_time rows");
    for (const auto& row : swap_time) {
      if (row.size() != models.size()) throw ValidationError("problem: swap_time cols");
      for (Seconds s : row)
        if (!(s >= 0.0)) throw ValidationError("problem: negative swap time");
    }
    if (static_cast<int>(groups.size()) != total_slots())
      throw ValidationError("problem: groups (with padding) must equal slots");
    std::vector<int> heads(nq, 0), pinned(nq, 0);
    for (const auto& g : groups) {
      if (g.padding) continue;
      if (g.model < 0 || g.model >= static_cast<int>(models.size()))
        throw ValidationError("problem: group model index out of range");
      if (g.serve_time.size() != nq || g.completion_time.size() != nq)
        throw ValidationError("problem: estimates must cover every queue");
      for (std::size_t q = 0; q < nq; ++q)
        if (!(g.serve_time[q] >= 0.0) || !(g.completion_time[q] >= g.serve_time[q]))
          throw ValidationError("problem: estimates must satisfy 0 <= W <= C");
      if (g.pinned_head && g.pinned_queue < 0)
        throw ValidationError("problem: head pin without a queue");
      if (g.pinned_queue >= static_cast<int>(nq))
        throw ValidationError("problem: pinned queue out of range");
      if (g.pinned_queue >= 0) {
        ++pinned[g.pinned_queue];
        if (g.pinned_head) ++heads[g.pinned_queue];
      }
    }
    for (std::size_t q = 0; q < nq; ++q)
      if (heads[q] > 1 || pinned[q] > queues[q].max_length)
        throw ValidationError("problem: pins exceed queue " + std::to_string(q));
  }
};

struct SchedulePlan {
  // assignment[g][j] is an index into problem.groups.
  std::vector<std::vector<int>> assignment;
  std::vector<std::vector<Seconds>> predicted_wait;
  std::vector<std::vector<Seconds>> penalty;
  double objective = 0.0;
  bool feasible = true;
  bool optimal = false;
  std::string solver;
  std::int64_t nodes = 0;

  // Real group ids of queue g in order.
  std::vector<RequestGroupId> queue_order(const AssignmentProblem& p, std::size_t g) const {
    std::vector<RequestGroupId> out;
    for (int i : assignment[g])
      if (!p.groups[i].padding) out.push_back(p.groups[i].id);
    return out;
  }
};

struct SolverOptions {
  Seconds time_budget = 5.0;       // wall clock
  std::int64_t node_budget = -1;   // exact solver; -1 means unlimited
  int max_passes = 10000;          // heuristic local-search passes
};

// ---------------------------------------------------------------------------
// Problem construction
// ---------------------------------------------------------------------------

struct GroupInput {
  RequestGroupId id;
  Seconds creation_time = 0.0;
  ModelId model;
  Seconds slo = 0.0;
  int pinned_queue = -1;
  bool pinned_head = false;
};

struct QueueInput {
  VirtualQueueId id;
  std::optional<ModelId> resident;
  std::map<std::string, Seconds> swap_time;  // by model name
};

using EstimateTable =
    std::map<std::pair<RequestGroupId, VirtualQueueId>, GroupCompletionEstimate>;

// Queue length defaults to ceil(groups / queues) + 2, raised if pins need it.
// An infinite estimate marks a queue that cannot host the group.
inline AssignmentProblem build_problem(std::span<const GroupInput> groups,
                                       std::span<const QueueInput> queues,
                                       const EstimateTable& estimates,
                                       int max_length = 0,
                                       double violation_weight = 1000.0) {
  if (queues.empty()) throw ValidationError("build_problem: no queues");
  AssignmentProblem p;
  p.violation_weight = violation_weight;
  std::map<std::string, int> model_index;
  auto index_of = [&](const ModelId& m) {
    auto [it, fresh] = model_index.emplace(m.name, static_cast<int>(p.models.size()));
    if (fresh) p.models.push_back(m.name);
    return it->second;
  };
  for (const auto& g : groups) index_of(g.model);
  for (const auto& q : queues)
    if (q.resident) index_of(*q.resident);

  const int nq = static_cast<int>(queues.size());
  int length = max_length > 0
                   ? max_length
                   : (static_cast<int>(groups.size()) + nq - 1) / nq + 2;
  std::vector<int> pinned(nq, 0);
  for (const auto& g : groups)
    if (g.pinned_queue >= 0) ++pinned.at(g.pinned_queue);
  if (max_length <= 0)
    for (int c : pinned) length = std::max(length, c);

  for (int q = 0; q < nq; ++q) {
    p.queues.push_back({queues[q].id, length,
                        queues[q].resident ? index_of(*queues[q].resident) : -1});
    std::vector<Seconds> row(p.models.size(), 0.0);
    for (std::size_t m = 0; m < p.models.size(); ++m) {
      auto it = queues[q].swap_time.find(p.models[m]);
      row[m] = it == queues[q].swap_time.end() ? 0.0 : it->second;
    }
    p.swap_time.push_back(std::move(row));
  }
  for (const auto& g : groups) {
    GroupSpec s;
    s.id = g.id;
    s.creation_time = g.creation_time;
    s.model = index_of(g.model);
    s.slo = g.slo;
    s.pinned_queue = g.pinned_queue;
    s.pinned_head = g.pinned_head;
    for (const auto& q : queues) {
      auto it = estimates.find({g.id, q.id});
      if (it == estimates.end())
        throw ValidationError("build_problem: missing estimate for group " +
                              std::to_string(g.id.value) + " on queue " +
                              std::to_string(q.id.value));
      s.serve_time.push_back(it->second.serve_time);
      s.completion_time.push_back(it->second.completion_time);
    }
    p.groups.push_back(std::move(s));
  }
  const int slots = p.total_slots();
  if (static_cast<int>(groups.size()) > slots)
    throw ValidationError("build_problem: more groups than slots");
  for (int k = static_cast<int>(groups.size()); k < slots; ++k) {
    GroupSpec pad;
    pad.padding = true;
    pad.creation_time = kInf;
    pad.serve_time.assign(nq, 0.0);
    pad.completion_time.assign(nq, 0.0);
    p.groups.push_back(std::move(pad));
  }
  p.validate();
  return p;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

inline double penalty_cost(double p, double weight) {
  return p + weight * std::max(0.0, p);
}

namespace detail {

// Objective contribution of one queue; fills wt/pen when given.
inline double eval_queue(const AssignmentProblem& P, std::size_t g,
                         std::span<const int> seq, std::vector<Seconds>* wt = nullptr,
                         std::vector<Seconds>* pen = nullptr, bool* feasible = nullptr) {
  int prev_model = P.queues[g].resident;
  int last = -1;
  Seconds base = 0.0;
  double obj = 0.0;
  for (int i : seq) {
    const GroupSpec& s = P.groups[i];
    if (s.padding) {
      const Seconds w = base + (last >= 0 ? P.groups[last].serve_time[g] : 0.0);
      if (wt) wt->push_back(w);
      if (pen) pen->push_back(0.0);
      continue;
    }
    const bool t = s.model != prev_model;
    Seconds w = base;
    if (last >= 0)
      w += t ? P.groups[last].completion_time[g] : P.groups[last].serve_time[g];
    if (t) w += P.swap_time[g][s.model];
    const double p = w - s.slo;
    obj += penalty_cost(p, P.violation_weight);
    if (wt) wt->push_back(w);
    if (pen) pen->push_back(p);
    if (feasible && p > 0.0) *feasible = false;
    base = w;
    last = i;
    prev_model = s.model;
  }
  return obj;
}

inline double objective_of(const AssignmentProblem& P,
                           const std::vector<std::vector<int>>& seqs) {
  double obj = 0.0;
  for (std::size_t g = 0; g < seqs.size(); ++g) obj += eval_queue(P, g, seqs[g]);
  return obj;
}

inline bool order_before(const GroupSpec& a, const GroupSpec& b) {
  if (a.creation_time != b.creation_time) return a.creation_time < b.creation_time;
  return a.id < b.id;
}

// Real-group sequences padded at the tail to full length.
inline std::vector<std::vector<int>> pad_sequences(const AssignmentProblem& P,
                                                   std::vector<std::vector<int>> seqs) {
  std::vector<int> pads;
  for (int i = 0; i < static_cast<int>(P.groups.size()); ++i)
    if (P.groups[i].padding) pads.push_back(i);
  std::size_t next = 0;
  for (std::size_t g = 0; g < seqs.size(); ++g)
    while (static_cast<int>(seqs[g].size()) < P.queues[g].max_length)
      seqs[g].push_back(pads.at(next++));
  return seqs;
}

}  // namespace detail

// Checks the slot bijection and the pin rules; throws ValidationError.
inline void validate_assignment(const AssignmentProblem& P,
                                const std::vector<std::vector<int>>& a) {
  if (a.size() != P.queues.size()) throw ValidationError("plan: queue count mismatch");
  std::vector<int> seen(P.groups.size(), 0);
  std::size_t total = 0;
  for (std::size_t g = 0; g < a.size(); ++g) {
    if (static_cast<int>(a[g].size()) > P.queues[g].max_length)
      throw ValidationError("plan: queue " + std::to_string(g) + " exceeds its length");
    for (std::size_t j = 0; j < a[g].size(); ++j) {
      const int i = a[g][j];
      if (i < 0 || i >= static_cast<int>(P.groups.size()))
        throw ValidationError("plan: group index out of range");
      if (seen[i]++) throw ValidationError("plan: group assigned twice");
      const GroupSpec& s = P.groups[i];
      if (!s.allowed_on(static_cast<int>(g)))
        throw ValidationError("plan: group placed on a disallowed queue");
      if (s.pinned_head && j != 0) throw ValidationError("plan: head pin violated");
      ++total;
    }
  }
  if (total != P.groups.size()) throw ValidationError("plan: not every group is placed");
}

// Fills waits, penalties and objective from an assignment.
inline SchedulePlan make_plan(const AssignmentProblem& P,
                              std::vector<std::vector<int>> assignment,
                              std::string solver, bool optimal) {
  SchedulePlan plan;
  plan.assignment = std::move(assignment);
  plan.solver = std::move(solver);
  plan.optimal = optimal;
  plan.feasible = true;
  plan.objective = 0.0;
  for (std::size_t g = 0; g < plan.assignment.size(); ++g) {
    plan.predicted_wait.emplace_back();
    plan.penalty.emplace_back();
    plan.objective += detail::eval_queue(P, g, plan.assignment[g], &plan.predicted_wait[g],
                                         &plan.penalty[g], &plan.feasible);
  }
  return plan;
}

// Recomputes the objective from scratch after validating the bijection.
inline double plan_penalty(const SchedulePlan& plan, const AssignmentProblem& P) {
  if (plan.assignment.empty() && P.groups.empty()) return 0.0;
  validate_assignment(P, plan.assignment);
  return make_plan(P, plan.assignment, "", false).objective;
}

// Number of model changes per plan, counting the resident model.
inline int count_transitions(const AssignmentProblem& P, const SchedulePlan& plan) {
  int n = 0;
  for (std::size_t g = 0; g < plan.assignment.size(); ++g) {
    int prev = P.queues[g].resident;
    for (int i : plan.assignment[g]) {
      const GroupSpec& s = P.groups[i];
      if (s.padding) continue;
      if (s.model != prev) ++n;
      prev = s.model;
    }
  }
  return n;
}

// ---------------------------------------------------------------------------
// Heuristic
// ---------------------------------------------------------------------------

namespace detail {

inline bool can_place(const AssignmentProblem& P, int i, std::size_t g, std::size_t pos) {
  const GroupSpec& s = P.groups[i];
  if (!s.allowed_on(static_cast<int>(g))) return false;
  return !s.pinned_head || pos == 0;
}

// A head-pinned group must stay first: nothing may be inserted before it.
inline bool head_locked(const AssignmentProblem& P, const std::vector<int>& seq) {
  return !seq.empty() && P.groups[seq.front()].pinned_head;
}

}  // namespace detail

// Slack-ordered greedy start followed by first-improvement local search over
// pairwise swaps and single moves. Always returns a valid assignment.
inline SchedulePlan solve_heuristic(const AssignmentProblem& P,
                                    const SolverOptions& opt = {}) {
  P.validate();
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  const std::size_t nq = P.queues.size();
  std::vector<int> real;
  for (int i = 0; i < static_cast<int>(P.groups.size()); ++i)
    if (!P.groups[i].padding) real.push_back(i);
  std::sort(real.begin(), real.end(), [&](int a, int b) {
    const GroupSpec &x = P.groups[a], &y = P.groups[b];
    if (x.pinned_head != y.pinned_head) return x.pinned_head;
    if (x.slo != y.slo) return x.slo < y.slo;
    return detail::order_before(x, y);
  });

  std::vector<std::vector<int>> seqs(nq);
  auto append_cost = [&](std::size_t g, int i) {
    std::vector<Seconds> wt;
    seqs[g].push_back(i);
    detail::eval_queue(P, g, seqs[g], &wt);
    seqs[g].pop_back();
    return wt.back();
  };
  // Pins first so that every pinned group has room on its own queue.
  for (int pass = 0; pass < 2; ++pass) {
    for (int i : real) {
      const GroupSpec& s = P.groups[i];
      if ((s.pinned_queue >= 0) != (pass == 0)) continue;
      int best = -1;
      Seconds best_w = kInf;
      for (std::size_t g = 0; g < nq; ++g) {
        if (static_cast<int>(seqs[g].size()) >= P.queues[g].max_length) continue;
        if (!detail::can_place(P, i, g, seqs[g].size())) continue;
        const Seconds w = append_cost(g, i);
        if (best < 0 || w < best_w) {
          best = static_cast<int>(g);
          best_w = w;
        }
      }
      if (best < 0) {
        // Every allowed queue is full: the problem admits no placement.
        throw ValidationError("solve_heuristic: no queue can host group " +
                              std::to_string(s.id.value));
      }
      seqs[best].push_back(i);
    }
  }

  double cur = detail::objective_of(P, seqs);
  std::vector<double> qobj(nq);
  for (std::size_t g = 0; g < nq; ++g) qobj[g] = detail::eval_queue(P, g, seqs[g]);
  auto out_of_time = [&] {
    return std::chrono::duration<double>(Clock::now() - start).count() > opt.time_budget;
  };
  const double eps = 1e-9;
  bool improved = true;
  for (int pass = 0; improved && pass < opt.max_passes && !out_of_time(); ++pass) {
    improved = false;
    // Pairwise swaps.
    for (std::size_t g1 = 0; g1 < nq; ++g1)
      for (std::size_t j1 = 0; j1 < seqs[g1].size(); ++j1)
        for (std::size_t g2 = g1; g2 < nq; ++g2)
          for (std::size_t j2 = (g2 == g1 ? j1 + 1 : 0); j2 < seqs[g2].size(); ++j2) {
            const int a = seqs[g1][j1], b = seqs[g2][j2];
            if (!detail::can_place(P, a, g2, j2) || !detail::can_place(P, b, g1, j1))
              continue;
            std::swap(seqs[g1][j1], seqs[g2][j2]);
            const double n1 = detail::eval_queue(P, g1, seqs[g1]);
            const double n2 = g2 == g1 ? 0.0 : detail::eval_queue(P, g2, seqs[g2]);
            const double delta = (n1 + n2) - (qobj[g1] + (g2 == g1 ? 0.0 : qobj[g2]));
            if (delta < -eps) {
              qobj[g1] = n1;
              if (g2 != g1) qobj[g2] = n2;
              cur += delta;
              improved = true;
            } else {
              std::swap(seqs[g1][j1], seqs[g2][j2]);
            }
          }
    // Single moves.
    for (std::size_t g1 = 0; g1 < nq; ++g1)
      for (std::size_t j1 = 0; j1 < seqs[g1].size(); ++j1) {
        const int a = seqs[g1][j1];
        for (std::size_t g2 = 0; g2 < nq; ++g2) {
          if (g2 != g1 && static_cast<int>(seqs[g2].size()) >= P.queues[g2].max_length)
            continue;
          const std::size_t limit = seqs[g2].size() + (g2 == g1 ? 0 : 1);
          for (std::size_t j2 = 0; j2 < limit; ++j2) {
            if (g2 == g1 && j2 == j1) continue;
            if (!detail::can_place(P, a, g2, j2)) continue;
            seqs[g1].erase(seqs[g1].begin() + j1);
            if (j2 == 0 && detail::head_locked(P, seqs[g2])) {
              seqs[g1].insert(seqs[g1].begin() + j1, a);
              continue;
            }
            seqs[g2].insert(seqs[g2].begin() + j2, a);
            const double n1 = detail::eval_queue(P, g1, seqs[g1]);
            const double n2 = g2 == g1 ? 0.0 : detail::eval_queue(P, g2, seqs[g2]);
            const double delta = (n1 + n2) - (qobj[g1] + (g2 == g1 ? 0.0 : qobj[g2]));
            if (delta < -eps) {
              qobj[g1] = n1;
              if (g2 != g1) qobj[g2] = n2;
              cur += delta;
              improved = true;
              break;
            }
            seqs[g2].erase(seqs[g2].begin() + j2);
            seqs[g1].insert(seqs[g1].begin() + j1, a);
          }
          if (j1 >= seqs[g1].size() || seqs[g1][j1] != a) break;
        }
      }
  }
  return make_plan(P, detail::pad_sequences(P, std::move(seqs)), "heuristic", false);
}

// ---------------------------------------------------------------------------
// Exact branch and bound
// ---------------------------------------------------------------------------

namespace detail {

// Fills queues one at a time; a partial plan's bound is its exact cost plus,
// for each unplaced group, the cheapest wait it could still get anywhere.
class BranchAndBound {
 public:
  BranchAndBound(const AssignmentProblem& P, const SolverOptions& opt)
      : P_(P), opt_(opt), nq_(P.queues.size()), seqs_(nq_) {
    for (int i = 0; i < static_cast<int>(P.groups.size()); ++i)
      if (!P.groups[i].padding) real_.push_back(i);
    std::sort(real_.begin(), real_.end(),
              [&](int a, int b) { return order_before(P.groups[a], P.groups[b]); });
    placed_.assign(P.groups.size(), 0);
    pinned_left_.assign(nq_, 0);
    head_of_.assign(nq_, -1);
    for (int i : real_) {
      const GroupSpec& s = P.groups[i];
      if (s.pinned_queue >= 0) {
        ++pinned_left_[s.pinned_queue];
        if (s.pinned_head) head_of_[s.pinned_queue] = i;
      }
    }
    remaining_ = static_cast<int>(real_.size());
  }

  void seed(const std::vector<std::vector<int>>& seqs, double obj) {
    best_obj_ = obj;
    best_ = seqs;
  }

  // Returns true when the search completed.
  bool run() {
    start_ = std::chrono::steady_clock::now();
    QueueState st{P_.queues[0].resident, -1, 0.0};
    dfs(0, st, 0.0);
    return !aborted_;
  }

  const std::vector<std::vector<int>>& best() const { return best_; }
  double best_objective() const { return best_obj_; }
  std::int64_t nodes() const { return nodes_; }

 private:
  struct QueueState {
    int prev_model;
    int last;
    Seconds base;
  };

  Seconds append_wait(std::size_t g, const QueueState& st, int i) const {
    const GroupSpec& s = P_.groups[i];
    const bool t = s.model != st.prev_model;
    Seconds w = st.base;
    if (st.last >= 0)
      w += t ? P_.groups[st.last].completion_time[g] : P_.groups[st.last].serve_time[g];
    if (t) w += P_.swap_time[g][s.model];
    return w;
  }

  Seconds wait_lower_bound(std::size_t g, const QueueState& st, int i) const {
    const GroupSpec& s = P_.groups[i];
    Seconds lb = kInf;
    if (static_cast<int>(seqs_[g].size()) < P_.queues[g].max_length &&
        s.allowed_on(static_cast<int>(g)) && (!s.pinned_head || seqs_[g].empty())) {
      Seconds w = st.base;
      if (st.last >= 0) w += P_.groups[st.last].serve_time[g];
      if (s.model != st.prev_model) w += P_.swap_time[g][s.model];
      lb = w;
    }
    for (std::size_t h = g + 1; h < nq_; ++h) {
      if (!s.allowed_on(static_cast<int>(h))) continue;
      lb = std::min(lb, s.model != P_.queues[h].resident ? P_.swap_time[h][s.model] : 0.0);
    }
    return lb;
  }

  bool out_of_budget() {
    if (opt_.node_budget >= 0 && nodes_ > opt_.node_budget) return true;
    if ((nodes_ & 255) == 0) {
      const double el =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
      if (el > opt_.time_budget) return true;
    }
    return false;
  }

  static bool same_spec(const GroupSpec& a, const GroupSpec& b) {
    return a.model == b.model && a.slo == b.slo && a.serve_time == b.serve_time &&
           a.completion_time == b.completion_time && a.pinned_queue == b.pinned_queue &&
           a.pinned_head == b.pinned_head;
  }

  void dfs(std::size_t g, const QueueState& st, double acc) {
    if (aborted_) return;
    ++nodes_;
    if (out_of_budget()) {
      aborted_ = true;
      return;
    }
    if (remaining_ == 0) {
      if (acc < best_obj_) {
        best_obj_ = acc;
        best_ = seqs_;
      }
      return;
    }
    // Bound and candidate collection.
    double bound = acc;
    struct Cand {
      int i;
      Seconds w;
      double slack;
    };
    std::vector<Cand> cands;
    const bool room = static_cast<int>(seqs_[g].size()) < P_.queues[g].max_length;
    const bool head_pending = head_of_[g] >= 0 && !placed_[head_of_[g]];
    for (int i : real_) {
      if (placed_[i]) continue;
      const Seconds lb = wait_lower_bound(g, st, i);
      if (!std::isfinite(lb)) return;  // some group can no longer be placed
      bound += penalty_cost(lb - P_.groups[i].slo, P_.violation_weight);
      if (!room || !P_.groups[i].allowed_on(static_cast<int>(g))) continue;
      if (head_pending && i != head_of_[g]) continue;
      if (P_.groups[i].pinned_head && !seqs_[g].empty()) continue;
      const Seconds w = append_wait(g, st, i);
      cands.push_back({i, w, P_.groups[i].slo - w});
    }
    if (bound >= best_obj_) return;

    std::stable_sort(cands.begin(), cands.end(),
                     [](const Cand& a, const Cand& b) { return a.slack < b.slack; });
    std::vector<int> tried;
    for (const Cand& c : cands) {
      bool dup = false;
      for (int t : tried)
        if (same_spec(P_.groups[t], P_.groups[c.i])) dup = true;
      if (dup) continue;
      tried.push_back(c.i);
      const GroupSpec& s = P_.groups[c.i];
      placed_[c.i] = 1;
      --remaining_;
      if (s.pinned_queue >= 0) --pinned_left_[s.pinned_queue];
      seqs_[g].push_back(c.i);
      dfs(g, QueueState{s.model, c.i, c.w},
          acc + penalty_cost(c.w - s.slo, P_.violation_weight));
      seqs_[g].pop_back();
      if (s.pinned_queue >= 0) ++pinned_left_[s.pinned_queue];
      ++remaining_;
      placed_[c.i] = 0;
      if (aborted_) return;
    }
    // Close this queue and move on.
    if (g + 1 < nq_ && pinned_left_[g] == 0) {
      int cap = 0;
      for (std::size_t h = g + 1; h < nq_; ++h) cap += P_.queues[h].max_length;
      if (remaining_ <= cap)
        dfs(g + 1, QueueState{P_.queues[g + 1].resident, -1, 0.0}, acc);
    }
  }

  const AssignmentProblem& P_;
  SolverOptions opt_;
  std::size_t nq_;
  std::vector<int> real_;
  std::vector<char> placed_;
  std::vector<int> pinned_left_;
  std::vector<int> head_of_;
  int remaining_ = 0;
  std::vector<std::vector<int>> seqs_;
  std::vector<std::vector<int>> best_;
  double best_obj_ = kInf;
  std::int64_t nodes_ = 0;
  bool aborted_ = false;
  std::chrono::steady_clock::time_point start_;
};

}  // namespace detail

// Exact minimiser seeded with the heuristic. When the budget runs out the best
// incumbent is returned with optimal = false.
inline SchedulePlan solve_exact(const AssignmentProblem& P, const SolverOptions& opt = {}) {
  P.validate();
  const SchedulePlan seed = solve_heuristic(P, opt);
  std::vector<std::vector<int>> seed_seqs(P.queues.size());
  for (std::size_t g = 0; g < seed.assignment.size(); ++g)
    for (int i : seed.assignment[g])
      if (!P.groups[i].padding) seed_seqs[g].push_back(i);
  detail::BranchAndBound bb(P, opt);
  bb.seed(seed_seqs, detail::objective_of(P, seed_seqs));
  const bool complete = bb.run();
  SchedulePlan plan =
      make_plan(P, detail::pad_sequences(P, bb.best()), "exact", complete);
  plan.nodes = bb.nodes();
  return plan;
}

// Exhaustive enumeration of slot bijections (test oracle, at most 10 slots).
// Among equal objectives the lexicographically first assignment wins.
inline SchedulePlan brute_force_oracle(const AssignmentProblem& P) {
  P.validate();
  const int slots = P.total_slots();
  if (slots > 10) throw ValidationError("brute_force_oracle: more than 10 slots");
  std::vector<int> pads, labels;
  for (int i = 0; i < static_cast<int>(P.groups.size()); ++i) {
    if (P.groups[i].padding) {
      pads.push_back(i);
      labels.push_back(-1);
    } else {
      labels.push_back(i);
    }
  }
  std::sort(labels.begin(), labels.end());
  double best = kInf;
  std::vector<std::vector<int>> best_seqs;
  std::vector<std::vector<int>> seqs(P.queues.size());
  do {
    std::size_t k = 0, pad = 0;
    bool ok = true;
    for (std::size_t g = 0; g < P.queues.size() && ok; ++g) {
      seqs[g].clear();
      for (int j = 0; j < P.queues[g].max_length; ++j, ++k) {
        const int i = labels[k] < 0 ? pads[pad++] : labels[k];
        if (!detail::can_place(P, i, g, static_cast<std::size_t>(j))) {
          ok = false;
          break;
        }
        seqs[g].push_back(i);
      }
    }
    if (!ok) continue;
    const double obj = detail::objective_of(P, seqs);
    if (obj < best) {
      best = obj;
      best_seqs = seqs;
    }
  } while (std::next_permutation(labels.begin(), labels.end()));
  if (best_seqs.empty()) throw ValidationError("brute_force_oracle: no valid assignment");
  return make_plan(P, best_seqs, "brute_force", true);
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const AssignmentProblem& P) {
  nlohmann::json j;
  j["models"] = P.models;
  j["violation_weight"] = P.violation_weight;
  j["swap_time"] = P.swap_time;
  for (const auto& q : P.queues)
    j["queues"].push_back({{"id", q.id.value}, {"max_length", q.max_length},
                           {"resident", q.resident}});
  for (const auto& g : P.groups) {
    nlohmann::json o{{"id", g.id.value},
                     {"creation_time", g.padding ? 0.0 : g.creation_time},
                     {"model", g.model},
                     {"padding", g.padding},
                     {"pinned_queue", g.pinned_queue},
                     {"pinned_head", g.pinned_head}};
    o["slo"] = g.padding ? nlohmann::json(nullptr) : nlohmann::json(g.slo);
    auto finite = [](const std::vector<Seconds>& v) {
      nlohmann::json a = nlohmann::json::array();
      for (Seconds x : v) a.push_back(std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr));
      return a;
    };
    o["serve_time"] = finite(g.serve_time);
    o["completion_time"] = finite(g.completion_time);
    j["groups"].push_back(std::move(o));
  }
  return j;
}

inline AssignmentProblem problem_from_json(const nlohmann::json& j) {
  AssignmentProblem P;
  P.models = j.at("models").get<std::vector<std::string>>();
  P.violation_weight = j.at("violation_weight").get<double>();
  P.swap_time = j.at("swap_time").get<std::vector<std::vector<Seconds>>>();
  for (const auto& q : j.at("queues"))
    P.queues.push_back({VirtualQueueId(q.at("id").get<std::int64_t>()),
                        q.at("max_length").get<int>(), q.at("resident").get<int>()});
  auto seconds = [](const nlohmann::json& a) {
    std::vector<Seconds> v;
    for (const auto& x : a) v.push_back(x.is_null() ? kInf : x.get<double>());
    return v;
  };
  for (const auto& o : j.at("groups")) {
    GroupSpec g;
    g.id = RequestGroupId(o.at("id").get<std::int64_t>());
    g.padding = o.at("padding").get<bool>();
    g.creation_time = g.padding ? kInf : o.at("creation_time").get<double>();
    g.model = o.at("model").get<int>();
    g.slo = o.at("slo").is_null() ? kInf : o.at("slo").get<double>();
    g.serve_time = seconds(o.at("serve_time"));
    g.completion_time = seconds(o.at("completion_time"));
    g.pinned_queue = o.at("pinned_queue").get<int>();
    g.pinned_head = o.at("pinned_head").get<bool>();
    P.groups.push_back(std::move(g));
  }
  P.validate();
  return P;
}

inline nlohmann::json to_json(const SchedulePlan& plan) {
  return {{"assignment", plan.assignment}, {"predicted_wait", plan.predicted_wait},
          {"penalty", plan.penalty},       {"objective", plan.objective},
          {"feasible", plan.feasible},     {"optimal", plan.optimal},
          {"solver", plan.solver},         {"nodes", plan.nodes}};
}

inline SchedulePlan plan_from_json(const nlohmann::json& j) {
  SchedulePlan p;
  p.assignment = j.at("assignment").get<std::vector<std::vector<int>>>();
  p.predicted_wait = j.at("predicted_wait").get<std::vector<std::vector<Seconds>>>();
  p.penalty = j.at("penalty").get<std::vector<std::vector<Seconds>>>();
  p.objective = j.at("objective").get<double>();
  p.feasible = j.at("feasible").get<bool>();
  p.optimal = j.at("optimal").get<bool>();
  p.solver = j.at("solver").get<std::string>();
  p.nodes = j.at("nodes").get<std::int64_t>();
  return p;
}

}  // namespace vqs
