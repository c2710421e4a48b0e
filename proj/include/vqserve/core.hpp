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

// Shared domain types. All durations are seconds on the simulation clock and
// all memory quantities are token counts.

#pragma once

#include <cmath>
#include <compare>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

namespace vqs {

using Seconds = double;
using TokenCount = std::int64_t;

inline constexpr Seconds kInf = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Raised by operations whose inputs break a documented invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class SchemaError : public Error {
 public:
  SchemaError(std::string field, const std::string& what)
      : Error("field '" + field + "': " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

class MalformedLogError : public Error {
 public:
  using Error::Error;
};

class InvariantViolation : public Error {
 public:
  using Error::Error;
};

class ProfilingError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Identifiers
// ---------------------------------------------------------------------------

template <typename Tag>
struct StrongId {
  std::int64_t value = -1;

  constexpr StrongId() = default;
  constexpr explicit StrongId(std::int64_t v) : value(v) {}
  constexpr bool valid() const { return value >= 0; }
  constexpr auto operator<=>(const StrongId&) const = default;
};

struct GroupTag {};
struct QueueTag {};
using RequestGroupId = StrongId<GroupTag>;
using VirtualQueueId = StrongId<QueueTag>;

// Models compare by name; parameter_scale is informational.
struct ModelId {
  std::string name;
  std::int64_t parameter_scale = 0;

  ModelId() = default;
  ModelId(std::string n, std::int64_t scale = 0)  // NOLINT: implicit by design
      : name(std::move(n)), parameter_scale(scale) {}
  ModelId(const char* n) : name(n) {}  // NOLINT

  bool operator==(const ModelId& o) const { return name == o.name; }
  bool operator<(const ModelId& o) const { return name < o.name; }
};

// ---------------------------------------------------------------------------
// Request
// ---------------------------------------------------------------------------

class GroundTruth;

// One prompt plus metadata. The output length is simulator ground truth and
// is reachable only through GroundTruth, so estimator and scheduler code
// cannot read it by accident.
class Request {
 public:
  Request() = default;
  Request(std::string id, Seconds arrival, ModelId model, Seconds slo,
          TokenCount input_tokens, TokenCount output_tokens)
      : id(std::move(id)),
        arrival_time(arrival),
        model(std::move(model)),
        slo(slo),
        input_tokens(input_tokens),
        output_tokens_(output_tokens) {}

  std::string id;
  Seconds arrival_time = 0.0;
  ModelId model;
  Seconds slo = 0.0;
  TokenCount input_tokens = 1;
  std::optional<RequestGroupId> group;

  Seconds deadline() const { return arrival_time + slo; }

  // Throws SchemaError naming the first offending field.
  void validate() const {
    if (id.empty()) throw SchemaError("id", "must be non-empty");
    if (!(arrival_time >= 0.0) || !std::isfinite(arrival_time))
      throw SchemaError("arrival_s", "must be a finite value >= 0");
    if (model.name.empty()) throw SchemaError("model", "must be non-empty");
    if (!(slo > 0.0)) throw SchemaError("slo_s", "must be > 0");
    if (input_tokens < 1) throw SchemaError("input_tokens", "must be >= 1");
    if (output_tokens_ < 1) throw SchemaError("output_tokens", "must be >= 1");
  }

 private:
  TokenCount output_tokens_ = 1;
  friend class GroundTruth;
};

// Accessor for simulator-only request data.
class GroundTruth {
 public:
  static TokenCount output_tokens(const Request& r) { return r.output_tokens_; }
  static void set_output_tokens(Request& r, TokenCount n) {
    r.output_tokens_ = n;
  }
  static TokenCount total_tokens(const Request& r) {
    return r.input_tokens + r.output_tokens_;
  }
};

// ---------------------------------------------------------------------------
// Profiles and statistics
// ---------------------------------------------------------------------------

struct TokenStats {
  double mean_output = 1.0;
  double std_output = 0.0;
  double mean_input = 1.0;
  double std_input = 0.0;

  void validate() const {
    if (!(mean_output > 0.0) || !(mean_input > 0.0))
      throw ValidationError("TokenStats: means must be > 0");
    if (!(std_output >= 0.0) || !(std_input >= 0.0))
      throw ValidationError("TokenStats: stds must be >= 0");
  }
  bool operator==(const TokenStats&) const = default;
};

// Timing constants for one (model, GPU type) pair.
struct InstanceProfile {
  ModelId model;
  std::string gpu_type;
  double theta = 1.0;             // tokens per second at steady state
  Seconds decode_per_token = 0.0; // one decode iteration
  double inefficiency = 1.0;      // measured slowdown under preemption
  Seconds prefill = 0.0;
  TokenCount token_capacity = 0;
  Seconds swap_cold = 0.0;
  Seconds swap_warm = 0.0;
  double kv_transfer_bandwidth = 1.0;  // tokens per second
  TokenCount max_output_tokens = 1;

  void validate() const {
    if (!(theta > 0.0)) throw ValidationError("profile: theta must be > 0");
    if (!(decode_per_token > 0.0))
      throw ValidationError("profile: decode_per_token must be > 0");
    if (!(inefficiency >= 1.0))
      throw ValidationError("profile: inefficiency must be >= 1");
    if (!(prefill >= 0.0)) throw ValidationError("profile: prefill < 0");
    if (token_capacity <= 0)
      throw ValidationError("profile: token_capacity must be > 0");
    if (!(swap_cold >= swap_warm) || !(swap_warm >= 0.0))
      throw ValidationError("profile: need swap_cold >= swap_warm >= 0");
    if (!(kv_transfer_bandwidth > 0.0))
      throw ValidationError("profile: kv_transfer_bandwidth must be > 0");
    if (max_output_tokens < 1)
      throw ValidationError("profile: max_output_tokens must be >= 1");
  }

  // Requests that fit in GPU memory at once, by the mean-footprint rule.
  double avg_batch_size(const TokenStats& s) const {
    return static_cast<double>(token_capacity) / (s.mean_input + s.mean_output);
  }
};

struct SloViolationReport {
  RequestGroupId group;
  VirtualQueueId queue;
  Seconds predicted_wait = 0.0;
  Seconds slo = 0.0;
  Seconds slack = 0.0;  // slo - predicted_wait; negative means violation

  bool violated() const { return slack < 0.0; }
};

// ---------------------------------------------------------------------------
// Request accounting
// ---------------------------------------------------------------------------

inline Seconds ttft(const Request& r, Seconds first_token_time) {
  const Seconds v = first_token_time - r.arrival_time;
  if (v < 0.0 || std::isnan(v))
    throw MalformedLogError("first token of '" + r.id +
                            "' precedes its arrival");
  return v;
}

inline bool slo_met(const Request& r, Seconds first_token_time) {
  return ttft(r, first_token_time) <= r.slo;
}

}  // namespace vqs

template <typename Tag>
struct std::hash<vqs::StrongId<Tag>> {
  std::size_t operator()(const vqs::StrongId<Tag>& id) const noexcept {
    return std::hash<std::int64_t>{}(id.value);
  }
};
