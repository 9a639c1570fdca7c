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

#include "dmanc/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>

namespace dmanc {

double nse(std::span<const double> error, std::span<const double> disturbance) {
  if (error.size() != disturbance.size() || error.empty()) {
    throw DimensionError("nse: windows must be non-empty and of equal length");
  }
  double e2 = 0.0;
  double d2 = 0.0;
  for (std::size_t i = 0; i < error.size(); ++i) {
    e2 += error[i] * error[i];
    d2 += disturbance[i] * disturbance[i];
  }
  if (d2 == 0.0) throw ParameterError("nse: disturbance window has zero power");
  if (e2 == 0.0) return -std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(e2 / d2);
}

NseTracker::NseTracker(int nodes, std::int64_t window) : window_(window) {
  if (window < 1) throw ParameterError("nse tracker: window must be >= 1");
  channels_.resize(nodes);
  for (auto& c : channels_) {
    c.e2.assign(static_cast<std::size_t>(window), 0.0);
    c.d2.assign(static_cast<std::size_t>(window), 0.0);
  }
}

void NseTracker::push(const Eigen::VectorXd& error, const Eigen::VectorXd& disturbance) {
  const auto slot = static_cast<std::size_t>(count_ % window_);
  const bool resum = slot == 0;
  for (std::size_t k = 0; k < channels_.size(); ++k) {
    Channel& c = channels_[k];
    const double e2 = error[k] * error[k];
    const double d2 = disturbance[k] * disturbance[k];
    c.e_sum += e2 - c.e2[slot];
    c.d_sum += d2 - c.d2[slot];
    c.e2[slot] = e2;
    c.d2[slot] = d2;
    if (resum) {
      // Periodic exact resummation bounds the drift of the running sums.
      c.e_sum = 0.0;
      c.d_sum = 0.0;
      for (std::size_t i = 0; i < c.e2.size(); ++i) {
        c.e_sum += c.e2[i];
        c.d_sum += c.d2[i];
      }
    }
  }
  ++count_;
}

double NseTracker::nse_db(int node) const {
  const Channel& c = channels_[node];
  if (!(c.d_sum > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  if (c.e_sum == 0.0) return -std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(c.e_sum / c.d_sum);
}

// --- Wiener -----------------------------------------------------------------

double WienerProblem::cost(const Eigen::VectorXd& w) const {
  return disturbance_power.sum() - 2.0 * cross.dot(w) + w.dot(normal_matrix * w);
}

std::vector<TapVector> WienerProblem::split(const Eigen::VectorXd& stacked) const {
  std::vector<TapVector> out(nodes);
  for (int k = 0; k < nodes; ++k) out[k] = stacked.segment(k * filter_length, filter_length);
  return out;
}

Eigen::VectorXd WienerProblem::stack(const std::vector<TapVector>& filters) {
  Eigen::Index total = 0;
  for (const auto& f : filters) total += f.size();
  Eigen::VectorXd out(total);
  Eigen::Index at = 0;
  for (const auto& f : filters) {
    out.segment(at, f.size()) = f;
    at += f.size();
  }
  return out;
}

namespace {

double reference_lag(const TapVector& r, Eigen::Index lag) {
  lag = std::abs(lag);
  if (r.size() == 0) return lag == 0 ? 1.0 : 0.0;
  return lag < r.size() ? r[lag] : 0.0;
}

// g[tau] = E[(a * x)(n) (b * x)(n - tau)] for tau in [lo, hi].
std::vector<double> correlation_sequence(const TapVector& a, const TapVector& b, const TapVector& r,
                                         Eigen::Index lo, Eigen::Index hi) {
  // q[delta] = sum_p a[p] b[p + delta], delta in [-(|a|-1), |b|-1].
  const Eigen::Index offset = a.size() - 1;
  std::vector<double> q(static_cast<std::size_t>(a.size() + b.size() - 1), 0.0);
  for (Eigen::Index p = 0; p < a.size(); ++p) {
    if (a[p] == 0.0) continue;
    for (Eigen::Index s = 0; s < b.size(); ++s) q[static_cast<std::size_t>(s - p + offset)] += a[p] * b[s];
  }
  const bool white = r.size() <= 1;
  std::vector<double> g(static_cast<std::size_t>(hi - lo + 1), 0.0);
  for (Eigen::Index tau = lo; tau <= hi; ++tau) {
    double acc = 0.0;
    if (white) {
      // E[x(n-p) x(n-tau-s)] is non-zero only for s - p = -tau.
      const Eigen::Index idx = -tau + offset;
      if (idx >= 0 && idx < static_cast<Eigen::Index>(q.size())) acc = q[static_cast<std::size_t>(idx)];
      if (r.size() == 1) acc *= r[0];
    } else {
      for (std::size_t i = 0; i < q.size(); ++i) {
        if (q[i] == 0.0) continue;
        const Eigen::Index delta = static_cast<Eigen::Index>(i) - offset;
        acc += q[i] * reference_lag(r, tau + delta);
      }
    }
    g[static_cast<std::size_t>(tau - lo)] = acc;
  }
  return g;
}

}  // namespace

Eigen::MatrixXd filtered_correlation(const TapVector& a, const TapVector& b, const TapVector& r,
                                     Eigen::Index n) {
  // R(i, j) = E[(a*x)(n-i) (b*x)(n-j)] = g[j - i].
  const auto g = correlation_sequence(a, b, r, -(n - 1), n - 1);
  Eigen::MatrixXd out(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) out(i, j) = g[static_cast<std::size_t>(j - i + n - 1)];
  }
  return out;
}

WienerProblem build_wiener(const AcousticScene& scene, const TapVector& r, Eigen::Index n) {
  scene.validate();
  if (n < 1) throw ParameterError("wiener: filter length must be >= 1");
  const int K = scene.nodes;
  WienerProblem problem;
  problem.nodes = K;
  problem.filter_length = n;
  problem.normal_matrix = Eigen::MatrixXd::Zero(K * n, K * n);
  problem.cross = Eigen::VectorXd::Zero(K * n);
  problem.disturbance_power.resize(K);
  for (int m = 0; m < K; ++m) {
    problem.disturbance_power[m] = filtered_power(scene.primary[m], r);
    for (int k = 0; k < K; ++k) {
      // P_km[i] = E[d_m(n) x'_km(n - i)].
      const auto p = correlation_sequence(scene.primary[m], scene.estimate(m, k), r, 0, n - 1);
      for (Eigen::Index i = 0; i < n; ++i) problem.cross[k * n + i] += p[static_cast<std::size_t>(i)];
      for (int l = k; l < K; ++l) {
        const Eigen::MatrixXd block = filtered_correlation(scene.estimate(m, k), scene.estimate(m, l), r, n);
        problem.normal_matrix.block(k * n, l * n, n, n) += block;
        if (l != k) problem.normal_matrix.block(l * n, k * n, n, n) += block.transpose();
      }
    }
  }
  return problem;
}

WienerProblem build_wiener_sampled(const AcousticScene& scene, SignalSource source, Eigen::Index n,
                                   std::int64_t samples) {
  scene.validate();
  if (n < 1 || samples < 1) throw ParameterError("wiener: need N >= 1 and a positive sample budget");
  const int K = scene.nodes;
  const Eigen::Index L = scene.path_length();
  WienerProblem problem;
  problem.nodes = K;
  problem.filter_length = n;
  problem.normal_matrix = Eigen::MatrixXd::Zero(K * n, K * n);
  problem.cross = Eigen::VectorXd::Zero(K * n);
  problem.disturbance_power = Eigen::VectorXd::Zero(K);

  DelayLine<double> x(std::max(L, scene.primary_length()));
  std::vector<DelayLine<double>> filtered(static_cast<std::size_t>(K) * K, DelayLine<double>(n));
  Eigen::VectorXd z(K * n);
  for (std::int64_t t = 0; t < samples; ++t) {
    x.push(source.next_sample());
    for (int m = 0; m < K; ++m) {
      for (int k = 0; k < K; ++k) filtered[m * K + k].push(scene.estimate(m, k).dot(x.recent(L)));
    }
    for (int m = 0; m < K; ++m) {
      const double d = scene.primary[m].dot(x.recent(scene.primary_length()));
      for (int k = 0; k < K; ++k) z.segment(k * n, n) = filtered[m * K + k].history();
      problem.normal_matrix.selfadjointView<Eigen::Lower>().rankUpdate(z);
      problem.cross.noalias() += d * z;
      problem.disturbance_power[m] += d * d;
    }
  }
  const double inv = 1.0 / static_cast<double>(samples);
  problem.normal_matrix = problem.normal_matrix.selfadjointView<Eigen::Lower>();
  problem.normal_matrix *= inv;
  problem.cross *= inv;
  problem.disturbance_power *= inv;
  return problem;
}

void solve_wiener(WienerProblem& problem, double epsilon) {
  const Eigen::Index dim = problem.normal_matrix.rows();
  const double trace = problem.normal_matrix.trace();
  if (!(trace > 0.0)) throw ConditioningError("wiener: normal matrix has no energy", 0.0);
  Eigen::MatrixXd loaded = problem.normal_matrix;
  loaded.diagonal().array() += epsilon * trace / static_cast<double>(dim);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(loaded);
  double rcond = 0.0;
  if (ldlt.info() == Eigen::Success) {
    const Eigen::VectorXd pivots = ldlt.vectorD().cwiseAbs();
    rcond = pivots.minCoeff() / pivots.maxCoeff();
  }
  if (!(rcond > 1e-15)) {
    throw ConditioningError("wiener: loaded normal matrix is singular", rcond > 0.0 ? 1.0 / rcond : INFINITY);
  }
  problem.solution = ldlt.solve(problem.cross);
}

// --- bounds -----------------------------------------------------------------

double delay_factor(std::int64_t delay) {
  if (delay < 0) throw ParameterError("delay must be non-negative");
  return std::sin(std::numbers::pi / (2.0 * (2.0 * static_cast<double>(delay) + 1.0)));
}

EigenBoundReport step_bounds(const AcousticScene& scene, const TapVector& r, Eigen::Index n,
                             std::int64_t delay) {
  scene.validate();
  const int K = scene.nodes;
  EigenBoundReport report;
  report.nodes = K;
  report.delay = delay;
  const double factor = delay_factor(delay);
  report.eigenvalues.assign(K, std::vector<Eigen::VectorXd>(K));
  report.global_no_delay = INFINITY;
  report.global_delay = INFINITY;
  for (int k = 0; k < K; ++k) {
    double sum = 0.0;
    for (int m = 0; m < K; ++m) {
      const Eigen::MatrixXd rkk = filtered_correlation(scene.estimate(m, k), scene.estimate(m, k), r, n);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(rkk, Eigen::EigenvaluesOnly);
      report.eigenvalues[k][m] = solver.eigenvalues();
      sum += solver.eigenvalues().maxCoeff();
    }
    if (!(sum > 0.0)) throw ParameterError("step_bounds: degenerate spectrum at node " + std::to_string(k));
    report.eigen_sum.push_back(sum);
    report.bound_no_delay.push_back(2.0 / sum);
    report.bound_delay.push_back(2.0 / sum * factor);
    report.global_no_delay = std::min(report.global_no_delay, 2.0 / sum);
    report.global_delay = std::min(report.global_delay, 2.0 / sum * factor);
  }
  return report;
}

StabilityResult char_poly_stable(double mu, double eigen_sum, std::int64_t delay) {
  if (!(mu > 0.0) || !(eigen_sum > 0.0) || delay < 0) {
    throw ParameterError("char_poly_stable: need mu > 0, eigen_sum > 0, delay >= 0");
  }
  const double a = mu * eigen_sum;
  StabilityResult out;
  if (delay <= 512) {
    // Companion matrix of z^(D+1) - z^D + a: first row holds -coefficients.
    const Eigen::Index deg = delay + 1;
    Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(deg, deg);
    companion(0, 0) = 1.0;
    companion(0, deg - 1) += -a;
    for (Eigen::Index i = 1; i < deg; ++i) companion(i, i - 1) = 1.0;
    Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, false);
    out.max_root = solver.eigenvalues().cwiseAbs().maxCoeff();
    out.stable = out.max_root < 1.0;
    return out;
  }
  if (delay > 100'000'000) throw CapabilityError("char_poly_stable: delay beyond supported range");
  out.closed_form = true;
  out.stable = a < 2.0 * delay_factor(delay);
  return out;
}

// --- complexity -------------------------------------------------------------

std::vector<OperationCount> complexity(std::int64_t K, std::int64_t N, std::int64_t L, std::int64_t H) {
  if (K < 1 || N < 1 || L < 1 || H < 1) throw ParameterError("complexity: counts must be >= 1");
  return {
      {"MCFxLMS", K * K * (2 * N + L) + K * N, K * K * (N + L - 1) + K * (N - 1)},
      {"DFxLMS", (K + 3) * N + L, (K + 1) * N + L - 2},
      {"ADFxLMS", (K + 1) * (K + 1) * N + K * L, (K * K + 1) * N + K * (L - 1) - 1},
      {"MGDFxLMS", L + (3 + H) * N - H * (H - 3) - 2, (K + 1) * N + L + (H - 1) * (N - H + 1) - 2},
      {"ASSS-MGDFxLMS", L + (3 + H) * N - H * (H - 3), (K + 1) * N + L + (H - 1) * (N - H + 1) - 2},
  };
}

}  // namespace dmanc
