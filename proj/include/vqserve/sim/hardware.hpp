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

// Simulated hardware: per (model, GPU type) timing constants and the
// instances of a cluster.

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vqserve/core.hpp"

namespace vqs {

// Physical constants the simulator executes with. Profiling turns these into
// an InstanceProfile by measurement.
struct InstanceHardware {
  ModelId model;
  std::string gpu_type;
  Seconds decode_iteration = 0.025;
  Seconds prefill = 0.1;
  TokenCount token_capacity = 16384;
  Seconds swap_cold = 20.0;
  Seconds swap_warm = 6.0;
  double kv_transfer_bandwidth = 200000.0;
  TokenCount max_output_tokens = 2048;

  void validate() const {
    if (model.name.empty() || gpu_type.empty())
      throw ConfigError("hardware: model and gpu_type are required");
    if (!(decode_iteration > 0.0)) throw ConfigError("hardware: decode_iteration <= 0");
    if (!(prefill >= 0.0)) throw ConfigError("hardware: prefill < 0");
    if (token_capacity < 2) throw ConfigError("hardware: token_capacity < 2");
    if (!(swap_cold >= swap_warm && swap_warm >= 0.0))
      throw ConfigError("hardware: need swap_cold >= swap_warm >= 0");
    if (!(kv_transfer_bandwidth > 0.0)) throw ConfigError("hardware: kv bandwidth <= 0");
    if (max_output_tokens < 1) throw ConfigError("hardware: max_output_tokens < 1");
  }
};

struct InstanceSpec {
  std::string name;
  std::string gpu_type;
  std::optional<ModelId> initial_model;
  int cpu_model_slots = 2;  // warm-tier capacity in models
};

struct ClusterConfig {
  std::vector<InstanceSpec> instances;
  std::vector<InstanceHardware> catalog;

  const InstanceHardware* find(const ModelId& model, const std::string& gpu) const {
    for (const auto& h : catalog)
      if (h.model == model && h.gpu_type == gpu) return &h;
    return nullptr;
  }

  const InstanceHardware& hardware(const ModelId& model, const std::string& gpu) const {
    if (const InstanceHardware* h = find(model, gpu)) return *h;
    throw ConfigError("no hardware entry for model '" + model.name + "' on '" + gpu + "'");
  }

  void validate() const {
    if (instances.empty()) throw ConfigError("cluster: no instances");
    for (const auto& h : catalog) h.validate();
    for (std::size_t i = 0; i < instances.size(); ++i) {
      const auto& s = instances[i];
      if (s.name.empty()) throw ConfigError("cluster: instance without a name");
      if (s.cpu_model_slots < 0) throw ConfigError("cluster: cpu_model_slots < 0");
      if (s.initial_model) hardware(*s.initial_model, s.gpu_type);
      for (std::size_t j = 0; j < i; ++j)
        if (instances[j].name == s.name) throw ConfigError("cluster: duplicate name " + s.name);
    }
  }
};

}  // namespace vqs
