// Copyright 2026 The dmanc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dmanc/scene.hpp"

namespace dmanc {

struct CompTrainConfig {
  Eigen::Index length = 16;        // H
  double step = 0.0;               // mu_c; 0 selects 0.5 / ((H + 2 D) ||s-hat_mm||^2), D the energy centroid
  std::int64_t iterations = 200000;
  std::uint64_t seed = 7;
  double tolerance = 1e-8;         // relative weight change per window
  std::int64_t window = 1000;
  bool delta_init = false;         // start from a unit impulse instead of zeros
  // Over the final `anneal_fraction` of the budget the step decays
  // geometrically to `anneal_floor` times its initial value.
  double anneal_fraction = 0.5;
  double anneal_floor = 1e-2;
};

struct CompTrainResult {
  TapVector filter;
  std::int64_t iterations = 0;
  double final_error_power = 0.0;    // mean e^2 over the last full window
  double initial_error_power = 0.0;  // mean e^2 over the first window
};

// Offline FxLMS identification of c_mk with s_mk ~= s_mm * c_mk, driven by
// white Gaussian excitation. Throws Diverged if the windowed error power rises
// 20 dB above its first-window value.
CompTrainResult train_compensation(const AcousticScene& scene, int m, int k,
                                   const CompTrainConfig& cfg);

struct PairMetadata {
  int m = 0;
  int k = 0;
  std::int64_t iterations = 0;
  double final_error_power = 0.0;
};

// c_mk for every ordered pair; diagonal entries are unit impulses.
struct CompensationBank {
  PathMatrix filters;
  std::vector<PairMetadata> training;

  Eigen::Index length() const { return filters.taps(); }
  static CompensationBank identity(int nodes, Eigen::Index length);
};

// Trains all K(K-1) off-diagonal filters. A diverging pair is rethrown as
// Diverged naming the pair.
CompensationBank train_all(const AcousticScene& scene, const CompTrainConfig& cfg);

void save_bank(const CompensationBank& bank, const std::string& path);
CompensationBank load_bank(const std::string& path);

}  // namespace dmanc
