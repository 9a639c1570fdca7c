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
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "dmanc/scene.hpp"
#include "dmanc/signal_source.hpp"

namespace dmanc {

// 10 log10(mean(e^2) / mean(d^2)); -inf for an all-zero error window.
double nse(std::span<const double> error, std::span<const double> disturbance);

// Trailing-window NSE per node.
class NseTracker {
 public:
  NseTracker(int nodes, std::int64_t window);

  void push(const Eigen::VectorXd& error, const Eigen::VectorXd& disturbance);
  // NaN while the disturbance window has no power yet.
  double nse_db(int node) const;
  std::int64_t window() const { return window_; }

 private:
  struct Channel {
    std::vector<double> e2;
    std::vector<double> d2;
    double e_sum = 0.0;
    double d_sum = 0.0;
  };
  std::int64_t window_;
  std::int64_t count_ = 0;
  std::vector<Channel> channels_;
};

// Coupled normal equations of the global cost
//   J(w) = sum_m sigma_dm^2 - 2 sum_{k,m} P_km' w_k + sum_{k,l,m} w_k' R_kl,m w_l
// stacked over all K filters of N taps.
struct WienerProblem {
  int nodes = 0;
  Eigen::Index filter_length = 0;
  Eigen::MatrixXd normal_matrix;   // blocks (k, l) = sum_m R_kl,m
  Eigen::VectorXd cross;           // block k = sum_m P_km
  Eigen::VectorXd disturbance_power;  // sigma_dm^2
  Eigen::VectorXd solution;        // stacked w_opt

  double cost(const Eigen::VectorXd& stacked) const;
  std::vector<TapVector> split(const Eigen::VectorXd& stacked) const;
  static Eigen::VectorXd stack(const std::vector<TapVector>& filters);
};

// R_kl,m as an N x N Toeplitz block from path estimates and the reference
// autocorrelation r (r[tau] for tau >= 0, zero beyond its length).
Eigen::MatrixXd filtered_correlation(const TapVector& a, const TapVector& b, const TapVector& r,
                                     Eigen::Index n);

// Expectations in closed form from the reference autocorrelation.
WienerProblem build_wiener(const AcousticScene& scene, const TapVector& reference_autocorrelation,
                           Eigen::Index filter_length);
// Expectations by averaging over `samples` reference samples.
WienerProblem build_wiener_sampled(const AcousticScene& scene, SignalSource source,
                                   Eigen::Index filter_length, std::int64_t samples);

// Solves with diagonal loading epsilon * trace / (K N). Throws
// ConditioningError if the loaded system is still numerically singular.
void solve_wiener(WienerProblem& problem, double epsilon = 1e-10);

struct EigenBoundReport {
  int nodes = 0;
  std::int64_t delay = 0;
  // eigenvalues[k][m]: spectrum of R_kk,m, ascending.
  std::vector<std::vector<Eigen::VectorXd>> eigenvalues;
  std::vector<double> eigen_sum;       // sum_m lambda_km,max
  std::vector<double> bound_no_delay;  // 2 / eigen_sum
  std::vector<double> bound_delay;     // bound_no_delay * sin(pi / (2 (2 delay + 1)))
  double global_no_delay = 0.0;
  double global_delay = 0.0;
};

double delay_factor(std::int64_t delay);

EigenBoundReport step_bounds(const AcousticScene& scene, const TapVector& reference_autocorrelation,
                             Eigen::Index filter_length, std::int64_t delay);

struct StabilityResult {
  bool stable = false;
  double max_root = std::numeric_limits<double>::quiet_NaN();  // NaN for closed-form path
  bool closed_form = false;
};

// Roots of z^(D+1) - z^D + mu * eigen_sum. Companion-matrix eigenvalues up to
// D = 512, the closed-form critical step beyond.
StabilityResult char_poly_stable(double mu, double eigen_sum, std::int64_t delay);

struct OperationCount {
  std::string algorithm;
  std::int64_t multiplications = 0;
  std::int64_t additions = 0;
};

// Per-processor multiply/add counts per sample for MCFxLMS, DFxLMS, ADFxLMS,
// MGDFxLMS and ASSS-MGDFxLMS.
std::vector<OperationCount> complexity(std::int64_t nodes, std::int64_t filter_length,
                                       std::int64_t path_length, std::int64_t compensation_length);

}  // namespace dmanc
