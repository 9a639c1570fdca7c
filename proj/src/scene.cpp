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

#include "dmanc/scene.hpp"

#include <algorithm>
#include <cmath>

#include "dmanc/signal_source.hpp"

namespace dmanc {

PathBlock PathMatrix::to_block(const std::string& role) const {
  PathBlock block = make_block(role, nodes_, nodes_, taps_);
  block.entries = paths_;
  return block;
}

PathMatrix PathMatrix::from_block(const PathBlock& block) {
  if (block.rows != block.cols) {
    throw FormatError("path matrix block '" + block.role + "' is not square");
  }
  PathMatrix out(block.rows, block.taps);
  out.paths_ = block.entries;
  return out;
}

Eigen::Index first_nonzero(const TapVector& taps) {
  for (Eigen::Index i = 0; i < taps.size(); ++i) {
    if (taps[i] != 0.0) return i;
  }
  return taps.size();
}

void AcousticScene::validate() const {
  if (nodes < 1) throw ParameterError("scene: need at least one node");
  if (static_cast<int>(primary.size()) != nodes || secondary.nodes() != nodes ||
      estimate.nodes() != nodes) {
    throw DimensionError("scene: path counts disagree with K");
  }
  if (secondary.taps() < 1 || estimate.taps() != secondary.taps()) {
    throw DimensionError("scene: secondary paths and estimates must share length L");
  }
  for (const auto& p : primary) {
    if (p.size() != primary.front().size()) throw DimensionError("scene: ragged primary paths");
    require_taps(p, "primary path");
  }
  for (int m = 0; m < nodes; ++m) {
    for (int k = 0; k < nodes; ++k) {
      require_taps(secondary(m, k), "secondary path");
      require_taps(estimate(m, k), "secondary path estimate");
    }
  }
  for (int m = 0; m < nodes; ++m) {
    for (int k = 0; k < nodes; ++k) {
      if (m == k) continue;
      const auto cross = first_nonzero(secondary(m, k));
      if (cross == secondary.taps()) continue;  // absent crosstalk
      if (first_nonzero(secondary(m, m)) > cross || first_nonzero(secondary(k, k)) > cross) {
        throw ParameterError("scene: cross path s_" + std::to_string(m) + std::to_string(k) +
                             " leads a self path");
      }
    }
  }
}

double filtered_power(const TapVector& h, const TapVector& r) {
  if (r.size() == 0) return h.squaredNorm();
  double power = 0.0;
  for (Eigen::Index i = 0; i < h.size(); ++i) {
    for (Eigen::Index j = 0; j < h.size(); ++j) {
      const Eigen::Index lag = std::abs(i - j);
      if (lag < r.size()) power += h[i] * h[j] * r[lag];
    }
  }
  return power;
}

namespace {

TapVector decaying_path(Rng& rng, Eigen::Index length, Eigen::Index delay, Eigen::Index tail,
                        double decay) {
  TapVector p = TapVector::Zero(length);
  for (Eigen::Index t = 0; t < tail; ++t) p[delay + t] = rng.normal() * std::exp(-decay * t);
  // A zero lead tap would shift the propagation delay; keep it non-zero.
  if (p[delay] == 0.0) p[delay] = 1e-3;
  return p / p.norm();
}

void check_recipe(const SceneRecipe& r) {
  auto fail = [](const std::string& what) { throw ParameterError("scene recipe: " + what); };
  if (r.nodes < 1) fail("nodes must be >= 1");
  if (r.path_length < 1 || r.tail_length < 1) fail("path and tail lengths must be >= 1");
  if (r.self_delay_min < 0 || r.self_delay_min > r.self_delay_max) fail("bad self delay range");
  if (r.cross_extra_delay_min < 0 || r.cross_extra_delay_min > r.cross_extra_delay_max) {
    fail("bad cross delay range");
  }
  if (r.primary_delay_min < 0 || r.primary_delay_min > r.primary_delay_max) {
    fail("bad primary delay range");
  }
  if (!(r.decay >= 0.0) || !(r.cross_gain >= 0.0) || !(r.estimate_perturbation >= 0.0)) {
    fail("decay, cross gain and perturbation must be non-negative");
  }
  const Eigen::Index primary_len = r.primary_length > 0 ? r.primary_length : r.path_length;
  if (r.exact_compensation) {
    if (r.compensation_length < 1) fail("compensation length must be >= 1");
    if (r.self_delay_max + r.tail_length + r.compensation_length - 1 > r.path_length) {
      fail("self delay + tail + H - 1 exceeds L");
    }
  } else if (r.self_delay_max + r.cross_extra_delay_max + r.tail_length > r.path_length) {
    fail("delay + tail exceeds L");
  }
  if (r.realizable_primary) {
    if (r.control_length < 1) fail("control length must be >= 1");
  } else if (r.primary_delay_max + r.tail_length > primary_len) {
    fail("primary delay + tail exceeds primary length");
  }
}

}  // namespace

SyntheticScene synthesize_scene(const SceneRecipe& recipe) {
  check_recipe(recipe);
  const int K = recipe.nodes;
  const Eigen::Index L = recipe.path_length;
  Rng rng(recipe.seed);

  SyntheticScene out;
  AcousticScene& scene = out.scene;
  scene.nodes = K;
  scene.secondary = PathMatrix(K, L);

  std::vector<Eigen::Index> self_delay(K);
  for (int k = 0; k < K; ++k) {
    self_delay[k] = rng.integer(recipe.self_delay_min, recipe.self_delay_max);
    scene.secondary(k, k) = decaying_path(rng, L, self_delay[k], recipe.tail_length, recipe.decay);
  }

  if (recipe.exact_compensation) {
    const Eigen::Index H = recipe.compensation_length;
    PathMatrix truth(K, H);
    for (int m = 0; m < K; ++m) {
      for (int k = 0; k < K; ++k) {
        if (m == k) {
          truth(m, k)[0] = 1.0;
          continue;
        }
        // Leading zeros keep the cross path behind both self paths.
        Eigen::Index lead = std::max<Eigen::Index>(0, self_delay[k] - self_delay[m]) +
                            rng.integer(recipe.cross_extra_delay_min, recipe.cross_extra_delay_max);
        lead = std::min(lead, H - 1);
        TapVector c = TapVector::Zero(H);
        for (Eigen::Index h = lead; h < H; ++h) c[h] = rng.normal() * std::exp(-recipe.decay * (h - lead));
        if (c[lead] == 0.0) c[lead] = 1e-3;
        const TapVector full = convolve<double>(scene.secondary(m, m), c);
        const double scale = recipe.cross_gain / full.head(L).norm();
        truth(m, k) = scale * c;
        scene.secondary(m, k) = scale * full.head(L);
      }
    }
    out.compensation_true = std::move(truth);
  } else {
    for (int m = 0; m < K; ++m) {
      for (int k = 0; k < K; ++k) {
        if (m == k) continue;
        const Eigen::Index delay =
            std::max(self_delay[m], self_delay[k]) +
            rng.integer(recipe.cross_extra_delay_min, recipe.cross_extra_delay_max);
        scene.secondary(m, k) =
            recipe.cross_gain * decaying_path(rng, L, delay, recipe.tail_length, recipe.decay);
      }
    }
  }

  const TapVector& r = recipe.reference_autocorrelation;
  if (recipe.realizable_primary) {
    const Eigen::Index N = recipe.control_length;
    std::vector<TapVector> control(K);
    for (auto& w : control) {
      w.resize(N);
      for (Eigen::Index i = 0; i < N; ++i) w[i] = rng.normal() * std::exp(-4.0 * i / N);
    }
    scene.primary.assign(K, TapVector::Zero(L + N - 1));
    for (int m = 0; m < K; ++m) {
      for (int k = 0; k < K; ++k) scene.primary[m] += convolve<double>(scene.secondary(m, k), control[k]);
    }
    double mean_power = 0.0;
    for (const auto& p : scene.primary) mean_power += filtered_power(p, r) / K;
    const double scale = 1.0 / std::sqrt(mean_power);
    for (auto& p : scene.primary) p *= scale;
    for (auto& w : control) w *= scale;
    out.control_true = std::move(control);
  } else {
    const Eigen::Index Lp = recipe.primary_length > 0 ? recipe.primary_length : L;
    scene.primary.resize(K);
    for (auto& p : scene.primary) {
      const auto delay = rng.integer(recipe.primary_delay_min, recipe.primary_delay_max);
      p = decaying_path(rng, Lp, delay, recipe.tail_length, recipe.decay);
      p /= std::sqrt(filtered_power(p, r));
    }
  }

  scene.estimate = scene.secondary;
  if (recipe.estimate_perturbation > 0.0) {
    for (int m = 0; m < K; ++m) {
      for (int k = 0; k < K; ++k) {
        TapVector& est = scene.estimate(m, k);
        for (Eigen::Index i = 0; i < L; ++i) {
          est[i] *= 1.0 + recipe.estimate_perturbation * rng.normal();
        }
      }
    }
  }
  scene.validate();
  return out;
}

PlantState::PlantState(const AcousticScene& scene)
    : scene_(&scene), reference_line_(std::max<Eigen::Index>(1, scene.primary_length())) {
  scene.validate();
  control_lines_.assign(scene.nodes, DelayLine<double>(scene.path_length()));
}

PlantOutput PlantState::propagate(double reference, const Eigen::VectorXd& control) {
  const int K = scene_->nodes;
  if (control.size() != K) throw DimensionError("propagate: control vector length != K");
  if (!std::isfinite(reference) || !control.allFinite()) {
    throw NumericFault("propagate: non-finite input");
  }
  const Eigen::Index L = scene_->path_length();
  reference_line_.push(reference);
  for (int k = 0; k < K; ++k) control_lines_[k].push(control[k]);

  PlantOutput out{Eigen::VectorXd(K), Eigen::VectorXd(K), Eigen::VectorXd(K),
                  Eigen::VectorXd(K)};
  for (int m = 0; m < K; ++m) {
    const TapVector& p = scene_->primary[m];
    out.disturbance[m] = p.dot(reference_line_.recent(p.size()));
    double interference = 0.0;
    for (int k = 0; k < K; ++k) {
      const double contribution = scene_->secondary(m, k).dot(control_lines_[k].recent(L));
      if (k == m) {
        out.self_term[m] = contribution;
      } else {
        interference += contribution;
      }
    }
    out.interference[m] = interference;
    out.error[m] = out.disturbance[m] - out.self_term[m] - interference;
  }
  return out;
}

PathFile scene_to_file(const AcousticScene& scene) {
  PathFile file;
  file.nodes = scene.nodes;
  PathBlock primary = make_block("primary", scene.nodes, 1, scene.primary_length());
  primary.entries = scene.primary;
  file.blocks.push_back(std::move(primary));
  file.blocks.push_back(scene.secondary.to_block("secondary"));
  file.blocks.push_back(scene.estimate.to_block("estimate"));
  return file;
}

AcousticScene scene_from_file(const PathFile& file) {
  AcousticScene scene;
  scene.nodes = file.nodes;
  const PathBlock& primary = file.require("primary");
  if (primary.cols != 1) throw FormatError("scene file: primary block must have one column");
  scene.primary = primary.entries;
  scene.secondary = PathMatrix::from_block(file.require("secondary"));
  if (const auto* est = file.find("estimate")) {
    scene.estimate = PathMatrix::from_block(*est);
  } else {
    scene.estimate = scene.secondary;
  }
  try {
    scene.validate();
  } catch (const DimensionError& e) {
    throw FormatError(std::string("scene file: ") + e.what());
  }
  return scene;
}

void save_paths(const AcousticScene& scene, const std::string& path) {
  save_path_file(path, scene_to_file(scene));
}

AcousticScene load_paths(const std::string& path) { return scene_from_file(load_path_file(path)); }

}  // namespace dmanc
