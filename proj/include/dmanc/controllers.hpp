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
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dmanc/compensation.hpp"
#include "dmanc/network.hpp"
#include "dmanc/scene.hpp"

namespace dmanc {

// w_k for every node, each N taps.
using ControlFilterSet = std::vector<TapVector>;

// mu0 * exp(-2 * max(delays) / fs); mu0 when `delays` is empty.
double asss_mu(double mu0, std::span<const std::int64_t> delays, double fs);

// Trips when any tap leaves [-ceiling, ceiling] or turns non-finite.
void check_divergence(const ControlFilterSet& w, double ceiling, std::int64_t iteration);

// Sample-synchronous controller. Per sample the runner calls control() with
// the new reference sample, propagates the returned drive signals through the
// plant, then hands the resulting error vector to adapt().
class Controller {
 public:
  virtual ~Controller() = default;

  virtual Eigen::VectorXd control(double reference) = 0;
  virtual void adapt(const Eigen::VectorXd& error) = 0;

  virtual const ControlFilterSet& filters() const = 0;
  virtual std::string name() const = 0;
  // Step size and transmission delay in effect for node k at the last sample.
  virtual double step_size(int k) const = 0;
  virtual std::int64_t delay(int) const { return 0; }
};

struct ControllerOptions {
  Eigen::Index filter_length = 128;  // N
  double ceiling = 1e6;              // divergence threshold on |w|_inf
};

// Centralised multichannel FxLMS: one processor, all K^2 filtered references.
class McFxlms final : public Controller {
 public:
  McFxlms(const AcousticScene& scene, double mu, const ControllerOptions& opts);

  Eigen::VectorXd control(double reference) override;
  void adapt(const Eigen::VectorXd& error) override;
  const ControlFilterSet& filters() const override { return w_; }
  std::string name() const override { return "mcfxlms"; }
  double step_size(int) const override { return mu_; }

 private:
  const AcousticScene* scene_;
  double mu_;
  ControllerOptions opts_;
  ControlFilterSet w_;
  DelayLine<double> reference_;
  std::vector<DelayLine<double>> filtered_;  // index m * K + k: s-hat_mk * x
  std::int64_t n_ = 0;
};

// Independent single-channel FxLMS per node using only x'_kk and e_k.
class DecentralizedFxlms final : public Controller {
 public:
  DecentralizedFxlms(const AcousticScene& scene, std::vector<double> mu, const ControllerOptions& opts);

  Eigen::VectorXd control(double reference) override;
  void adapt(const Eigen::VectorXd& error) override;
  const ControlFilterSet& filters() const override { return w_; }
  std::string name() const override { return "decentralized"; }
  double step_size(int k) const override { return mu_[k]; }

 private:
  const AcousticScene* scene_;
  std::vector<double> mu_;
  ControllerOptions opts_;
  ControlFilterSet w_;
  DelayLine<double> reference_;
  std::vector<DelayLine<double>> filtered_;  // per node: s-hat_kk * x
  std::int64_t n_ = 0;
};

// Combination weights for diffusion: weights(k, l) = a_lk, each row sums to
// one and the diagonal is positive.
struct DiffusionTopology {
  Eigen::MatrixXd weights;

  void validate() const;
  static DiffusionTopology identity(int nodes);
  static DiffusionTopology ring(int nodes);
  static DiffusionTopology full(int nodes);
};

enum class DiffusionMode { kAdaptThenCombine, kCombineThenAdapt };

// Diffusion FxLMS exchanging local control filters with neighbours.
class DiffusionFxlms final : public Controller {
 public:
  DiffusionFxlms(const AcousticScene& scene, DiffusionTopology topology, std::vector<double> mu,
                 DiffusionMode mode, const ControllerOptions& opts);

  Eigen::VectorXd control(double reference) override;
  void adapt(const Eigen::VectorXd& error) override;
  const ControlFilterSet& filters() const override { return w_; }
  std::string name() const override {
    return mode_ == DiffusionMode::kAdaptThenCombine ? "dfxlms-atc" : "dfxlms-cta";
  }
  double step_size(int k) const override { return mu_[k]; }

 private:
  const AcousticScene* scene_;
  DiffusionTopology topology_;
  std::vector<double> mu_;
  DiffusionMode mode_;
  ControllerOptions opts_;
  ControlFilterSet w_;
  ControlFilterSet local_;  // psi_k (ATC) or combined phi_k (CTA)
  DelayLine<double> reference_;
  std::vector<DelayLine<double>> filtered_;
  std::int64_t n_ = 0;
};

struct MgdNodeConfig {
  int node = 0;
  Eigen::Index filter_length = 128;  // N
  double mu0 = 1e-3;
  bool asss = false;
  double fs = 16000.0;
  double ceiling = 1e6;
};

// One mixed-gradient node. Each sample:
//   control(): absorb the mailbox into the peer rings, pick mu(n) from the
//   largest peer delay, apply
//       w_k += mu(n) [grad_k + sum_{m != k} sum_h c_mk[h] grad_m(latest_m - h)]
//   and emit y_k = w_k' x;
//   local_gradient(): grad_k = x'_kk-history * e_k, stamped and kept for the
//   next update.
class MgdNode {
 public:
  MgdNode(const AcousticScene& scene, const CompensationBank& bank, const MgdNodeConfig& cfg);

  double control(double reference, const MailboxView& mailbox);
  GradientMessage local_gradient(double error);

  const TapVector& filter() const { return w_; }
  double step_size() const { return mu_; }
  // Largest peer transmission delay seen at the last control() call.
  std::int64_t delay() const { return delay_; }
  const GradientRing& ring(int peer) const { return rings_[peer]; }
  std::int64_t sample() const { return n_; }

 private:
  int k_;
  MgdNodeConfig cfg_;
  const TapVector* self_estimate_;
  std::vector<const TapVector*> compensation_;  // c_mk for each peer m
  TapVector w_;
  Eigen::VectorXd accumulator_;
  DelayLine<double> reference_;
  DelayLine<double> filtered_;
  std::vector<GradientRing> rings_;  // rings_[k_] holds the node's own gradients
  double mu_;
  std::int64_t delay_ = 0;
  std::int64_t n_ = 0;
};

// K MgdNodes plus the message bus, advanced together one sample at a time.
class MgdNetwork final : public Controller {
 public:
  MgdNetwork(const AcousticScene& scene, const CompensationBank& bank, double mu0, bool asss,
             double fs, MessageBus bus, const ControllerOptions& opts);

  Eigen::VectorXd control(double reference) override;
  void adapt(const Eigen::VectorXd& error) override;
  const ControlFilterSet& filters() const override { return w_; }
  std::string name() const override { return asss_ ? "asss-mgdfxlms" : "mgdfxlms"; }
  double step_size(int k) const override { return nodes_[k].step_size(); }
  std::int64_t delay(int k) const override { return nodes_[k].delay(); }

  const MgdNode& node(int k) const { return nodes_[k]; }
  const MessageBus& bus() const { return bus_; }

 private:
  std::vector<MgdNode> nodes_;
  MessageBus bus_;
  bool asss_;
  ControlFilterSet w_;
  std::int64_t n_ = 0;
};

}  // namespace dmanc
