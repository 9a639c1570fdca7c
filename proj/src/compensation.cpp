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

#include "dmanc/compensation.hpp"

#include <algorithm>
#include <cmath>

#include "dmanc/signal_source.hpp"

namespace dmanc {

CompTrainResult train_compensation(const AcousticScene& scene, int m, int k,
                                   const CompTrainConfig& cfg) {
  const int K = scene.nodes;
  if (m < 0 || k < 0 || m >= K || k >= K) throw DimensionError("train_compensation: node out of range");
  if (m == k) throw ParameterError("train_compensation: m must differ from k");
  const Eigen::Index H = cfg.length;
  const Eigen::Index L = scene.path_length();
  if (H < 1 || H > L) throw ParameterError("train_compensation: need 1 <= H <= L");
  if (cfg.iterations < 0 || cfg.window < 1) throw ParameterError("train_compensation: bad budget");

  const TapVector& cross = scene.secondary(m, k);
  const TapVector& self = scene.secondary(m, m);
  const TapVector& self_estimate = scene.estimate(m, m);

  double step = cfg.step;
  if (step <= 0.0) {
    double centroid = 0.0;
    for (Eigen::Index i = 0; i < L; ++i) centroid += static_cast<double>(i) * self_estimate[i] * self_estimate[i];
    centroid /= self_estimate.squaredNorm();
    step = 0.5 / ((static_cast<double>(H) + 2.0 * centroid) * self_estimate.squaredNorm());
  }

  Rng rng(cfg.seed + 1000003ull * static_cast<std::uint64_t>(m * K + k));
  DelayLine<double> excitation(std::max(L, H));
  DelayLine<double> model_input(L);
  DelayLine<double> filtered(H);

  CompTrainResult result;
  TapVector& c = result.filter;
  c = TapVector::Zero(H);
  if (cfg.delta_init) c[0] = 1.0;
  TapVector window_start = c;

  const auto anneal_start = static_cast<std::int64_t>(
      std::llround((1.0 - std::clamp(cfg.anneal_fraction, 0.0, 1.0)) * cfg.iterations));
  const double anneal_span = static_cast<double>(std::max<std::int64_t>(1, cfg.iterations - anneal_start));
  const double log_floor = std::log(std::max(cfg.anneal_floor, 1e-300));

  double window_power = 0.0;
  std::int64_t n = 0;
  for (; n < cfg.iterations; ++n) {
    excitation.push(rng.normal());
    const double desired = cross.dot(excitation.recent(L));
    model_input.push(c.dot(excitation.recent(H)));
    const double error = desired - self.dot(model_input.recent(L));
    filtered.push(self_estimate.dot(excitation.recent(L)));

    double mu = step;
    if (n >= anneal_start) mu *= std::exp(log_floor * static_cast<double>(n - anneal_start) / anneal_span);
    c.noalias() += (mu * error) * filtered.history();

    window_power += error * error;
    if ((n + 1) % cfg.window == 0) {
      const double power = window_power / static_cast<double>(cfg.window);
      window_power = 0.0;
      if (!std::isfinite(power) || !c.allFinite()) {
        throw Diverged("compensation training produced non-finite values", n);
      }
      if (n + 1 == cfg.window) {
        result.initial_error_power = power;
      } else if (power > 100.0 * result.initial_error_power && power > 1e-300) {
        throw Diverged("compensation training error rose 20 dB above its initial level", n);
      }
      result.final_error_power = power;
      const double scale = std::max(c.norm(), 1e-300);
      if ((c - window_start).norm() / scale < cfg.tolerance) {
        ++n;
        break;
      }
      window_start = c;
    }
  }
  result.iterations = n;
  return result;
}

CompensationBank CompensationBank::identity(int nodes, Eigen::Index length) {
  CompensationBank bank;
  bank.filters = PathMatrix(nodes, length);
  for (int m = 0; m < nodes; ++m) {
    for (int k = 0; k < nodes; ++k) bank.filters(m, k)[0] = m == k ? 1.0 : 0.0;
  }
  return bank;
}

CompensationBank train_all(const AcousticScene& scene, const CompTrainConfig& cfg) {
  CompensationBank bank = CompensationBank::identity(scene.nodes, cfg.length);
  for (int m = 0; m < scene.nodes; ++m) {
    for (int k = 0; k < scene.nodes; ++k) {
      if (m == k) continue;
      try {
        auto trained = train_compensation(scene, m, k, cfg);
        bank.filters(m, k) = trained.filter;
        bank.training.push_back({m, k, trained.iterations, trained.final_error_power});
      } catch (const Diverged& e) {
        throw Diverged("pair (" + std::to_string(m) + "," + std::to_string(k) + "): " + e.reason(),
                       e.iteration());
      }
    }
  }
  return bank;
}

void save_bank(const CompensationBank& bank, const std::string& path) {
  PathFile file;
  file.nodes = bank.filters.nodes();
  file.blocks.push_back(bank.filters.to_block("compensation"));
  save_path_file(path, file);
}

CompensationBank load_bank(const std::string& path) {
  const PathFile file = load_path_file(path);
  CompensationBank bank;
  bank.filters = PathMatrix::from_block(file.require("compensation"));
  return bank;
}

}  // namespace dmanc
