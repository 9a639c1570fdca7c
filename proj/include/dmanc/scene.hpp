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
#include <optional>
#include <string>
#include <vector>

#include "dmanc/dsp.hpp"
#include "dmanc/path_file.hpp"

namespace dmanc {

// K x K grid of impulse responses; entry (m, k) runs from source k to mic m.
class PathMatrix {
 public:
  PathMatrix() = default;
  PathMatrix(int nodes, Eigen::Index taps)
      : nodes_(nodes), taps_(taps),
        paths_(static_cast<std::size_t>(nodes) * nodes, TapVector::Zero(taps)) {}

  int nodes() const { return nodes_; }
  Eigen::Index taps() const { return taps_; }
  const TapVector& operator()(int m, int k) const { return paths_[index(m, k)]; }
  TapVector& operator()(int m, int k) { return paths_[index(m, k)]; }

  PathBlock to_block(const std::string& role) const;
  static PathMatrix from_block(const PathBlock& block);

 private:
  std::size_t index(int m, int k) const { return static_cast<std::size_t>(m) * nodes_ + k; }

  int nodes_ = 0;
  Eigen::Index taps_ = 0;
  std::vector<TapVector> paths_;
};

// Index of the first non-zero tap, or taps.size() for an all-zero vector.
Eigen::Index first_nonzero(const TapVector& taps);

// The K-node plant: primary paths p_m, secondary paths s_mk and the
// controller-side estimates of s_mk.
struct AcousticScene {
  int nodes = 0;
  std::vector<TapVector> primary;
  PathMatrix secondary;
  PathMatrix estimate;

  Eigen::Index path_length() const { return secondary.taps(); }
  Eigen::Index primary_length() const { return primary.empty() ? 0 : primary.front().size(); }

  // Checks dimensions, finiteness and that no cross path leads the matching
  // self path. Throws DimensionError / ParameterError.
  void validate() const;
};

struct SceneRecipe {
  std::uint64_t seed = 1;
  int nodes = 4;
  Eigen::Index path_length = 64;     // L
  Eigen::Index primary_length = 0;   // 0: same as L
  Eigen::Index self_delay_min = 1;
  Eigen::Index self_delay_max = 4;
  Eigen::Index cross_extra_delay_min = 1;
  Eigen::Index cross_extra_delay_max = 6;
  Eigen::Index primary_delay_min = 6;
  Eigen::Index primary_delay_max = 12;
  Eigen::Index tail_length = 32;     // non-zero taps after the propagation delay
  double decay = 0.1;                // envelope exp(-decay * t)
  double cross_gain = 0.7;           // L2 norm of cross paths (self paths are unit norm)

  // Cross paths built as s_mk = s_mm * c_true_mk with H-tap random c_true.
  bool exact_compensation = false;
  Eigen::Index compensation_length = 16;  // H

  // Primary paths built as sum_k s_mk * w_true_k so that an N-tap control set
  // cancels the disturbance exactly.
  bool realizable_primary = false;
  Eigen::Index control_length = 128;  // N, used with realizable_primary

  double estimate_perturbation = 0.0;  // relative Gaussian tap error on s-hat

  // Reference autocorrelation r[tau] used to normalise E[d_m^2] = 1.
  // Empty means unit-variance white.
  TapVector reference_autocorrelation;
};

struct SyntheticScene {
  AcousticScene scene;
  std::optional<PathMatrix> compensation_true;      // with exact_compensation
  std::optional<std::vector<TapVector>> control_true;  // with realizable_primary
};

SyntheticScene synthesize_scene(const SceneRecipe& recipe);

// E[(h * x)^2] for a stationary x with autocorrelation r.
double filtered_power(const TapVector& h, const TapVector& reference_autocorrelation);

struct PlantOutput {
  Eigen::VectorXd disturbance;   // d_m(n)
  Eigen::VectorXd error;         // e_m(n)
  Eigen::VectorXd self_term;     // (y_m * s_mm)(n)
  Eigen::VectorXd interference;  // sum over k != m of (y_k * s_mk)(n)
};

// Per-sample propagation through an AcousticScene.
class PlantState {
 public:
  explicit PlantState(const AcousticScene& scene);

  PlantOutput propagate(double reference, const Eigen::VectorXd& control);

 private:
  const AcousticScene* scene_;
  DelayLine<double> reference_line_;
  std::vector<DelayLine<double>> control_lines_;
};

PathFile scene_to_file(const AcousticScene& scene);
AcousticScene scene_from_file(const PathFile& file);
void save_paths(const AcousticScene& scene, const std::string& path);
AcousticScene load_paths(const std::string& path);

}  // namespace dmanc
