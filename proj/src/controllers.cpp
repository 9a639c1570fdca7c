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

#include "dmanc/controllers.hpp"

#include <algorithm>
#include <cmath>

namespace dmanc {

double asss_mu(double mu0, std::span<const std::int64_t> delays, double fs) {
  if (!(fs > 0.0)) throw ParameterError("asss_mu: fs must be positive");
  std::int64_t worst = 0;
  for (auto d : delays) {
    if (d < 0) throw ParameterError("asss_mu: negative delay");
    worst = std::max(worst, d);
  }
  return mu0 * std::exp(-2.0 * static_cast<double>(worst) / fs);
}

void check_divergence(const ControlFilterSet& w, double ceiling, std::int64_t iteration) {
  for (std::size_t k = 0; k < w.size(); ++k) {
    if (!w[k].allFinite() || w[k].cwiseAbs().maxCoeff() > ceiling) {
      throw Diverged("control filter " + std::to_string(k) + " exceeded the divergence ceiling",
                     iteration);
    }
  }
}

namespace {

void check_options(const AcousticScene& scene, const ControllerOptions& opts) {
  scene.validate();
  if (opts.filter_length < 1) throw ParameterError("controller: filter length must be >= 1");
  if (!(opts.ceiling > 0.0)) throw ParameterError("controller: ceiling must be positive");
}

std::vector<double> check_steps(std::vector<double> mu, int nodes) {
  if (static_cast<int>(mu.size()) == 1 && nodes > 1) mu.assign(nodes, mu.front());
  if (static_cast<int>(mu.size()) != nodes) throw DimensionError("controller: need one step size per node");
  for (double m : mu) {
    if (!(m >= 0.0)) throw ParameterError("controller: step sizes must be non-negative");
  }
  return mu;
}

Eigen::Index reference_capacity(const AcousticScene& scene, Eigen::Index n) {
  return std::max(scene.path_length(), n);
}

}  // namespace

// --- centralised ------------------------------------------------------------

McFxlms::McFxlms(const AcousticScene& scene, double mu, const ControllerOptions& opts)
    : scene_(&scene), mu_(mu), opts_(opts) {
  check_options(scene, opts);
  if (!(mu >= 0.0)) throw ParameterError("mcfxlms: step size must be non-negative");
  const int K = scene.nodes;
  w_.assign(K, TapVector::Zero(opts.filter_length));
  reference_ = DelayLine<double>(reference_capacity(scene, opts.filter_length));
  filtered_.assign(static_cast<std::size_t>(K) * K, DelayLine<double>(opts.filter_length));
}

Eigen::VectorXd McFxlms::control(double reference) {
  const int K = scene_->nodes;
  const Eigen::Index L = scene_->path_length();
  const Eigen::Index N = opts_.filter_length;
  reference_.push(reference);
  const auto x_path = reference_.recent(L);
  for (int m = 0; m < K; ++m) {
    for (int k = 0; k < K; ++k) filtered_[m * K + k].push(scene_->estimate(m, k).dot(x_path));
  }
  Eigen::VectorXd y(K);
  const auto x = reference_.recent(N);
  for (int k = 0; k < K; ++k) y[k] = w_[k].dot(x);
  return y;
}

void McFxlms::adapt(const Eigen::VectorXd& error) {
  const int K = scene_->nodes;
  if (error.size() != K) throw DimensionError("mcfxlms: error vector length != K");
  for (int k = 0; k < K; ++k) {
    for (int m = 0; m < K; ++m) w_[k].noalias() += (mu_ * error[m]) * filtered_[m * K + k].history();
  }
  check_divergence(w_, opts_.ceiling, n_);
  ++n_;
}

// --- decentralised ----------------------------------------------------------

DecentralizedFxlms::DecentralizedFxlms(const AcousticScene& scene, std::vector<double> mu,
                                       const ControllerOptions& opts)
    : scene_(&scene), mu_(check_steps(std::move(mu), scene.nodes)), opts_(opts) {
  check_options(scene, opts);
  w_.assign(scene.nodes, TapVector::Zero(opts.filter_length));
  reference_ = DelayLine<double>(reference_capacity(scene, opts.filter_length));
  filtered_.assign(scene.nodes, DelayLine<double>(opts.filter_length));
}

Eigen::VectorXd DecentralizedFxlms::control(double reference) {
  const int K = scene_->nodes;
  reference_.push(reference);
  const auto x_path = reference_.recent(scene_->path_length());
  const auto x = reference_.recent(opts_.filter_length);
  Eigen::VectorXd y(K);
  for (int k = 0; k < K; ++k) {
    filtered_[k].push(scene_->estimate(k, k).dot(x_path));
    y[k] = w_[k].dot(x);
  }
  return y;
}

void DecentralizedFxlms::adapt(const Eigen::VectorXd& error) {
  const int K = scene_->nodes;
  if (error.size() != K) throw DimensionError("decentralized: error vector length != K");
  for (int k = 0; k < K; ++k) w_[k].noalias() += (mu_[k] * error[k]) * filtered_[k].history();
  check_divergence(w_, opts_.ceiling, n_);
  ++n_;
}

// --- diffusion --------------------------------------------------------------

void DiffusionTopology::validate() const {
  if (weights.rows() < 1 || weights.rows() != weights.cols()) {
    throw TopologyError("diffusion topology: weights must be square and non-empty");
  }
  for (Eigen::Index k = 0; k < weights.rows(); ++k) {
    if ((weights.row(k).array() < 0.0).any()) throw TopologyError("diffusion topology: negative weight");
    if (!(weights(k, k) > 0.0)) throw TopologyError("diffusion topology: node missing from own neighbourhood");
    if (std::abs(weights.row(k).sum() - 1.0) > 1e-12) {
      throw TopologyError("diffusion topology: weights of node " + std::to_string(k) + " do not sum to one");
    }
  }
}

DiffusionTopology DiffusionTopology::identity(int nodes) {
  return {Eigen::MatrixXd::Identity(nodes, nodes)};
}

DiffusionTopology DiffusionTopology::ring(int nodes) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(nodes, nodes);
  for (int k = 0; k < nodes; ++k) {
    a(k, k) = 1.0;
    a(k, (k + 1) % nodes) = 1.0;
    a(k, (k + nodes - 1) % nodes) = 1.0;
  }
  for (int k = 0; k < nodes; ++k) a.row(k) /= a.row(k).sum();
  return {a};
}

DiffusionTopology DiffusionTopology::full(int nodes) {
  return {Eigen::MatrixXd::Constant(nodes, nodes, 1.0 / nodes)};
}

DiffusionFxlms::DiffusionFxlms(const AcousticScene& scene, DiffusionTopology topology,
                               std::vector<double> mu, DiffusionMode mode, const ControllerOptions& opts)
    : scene_(&scene), topology_(std::move(topology)), mu_(check_steps(std::move(mu), scene.nodes)),
      mode_(mode), opts_(opts) {
  check_options(scene, opts);
  topology_.validate();
  if (topology_.weights.rows() != scene.nodes) throw DimensionError("dfxlms: topology size != K");
  w_.assign(scene.nodes, TapVector::Zero(opts.filter_length));
  local_ = w_;
  reference_ = DelayLine<double>(reference_capacity(scene, opts.filter_length));
  filtered_.assign(scene.nodes, DelayLine<double>(opts.filter_length));
}

Eigen::VectorXd DiffusionFxlms::control(double reference) {
  const int K = scene_->nodes;
  reference_.push(reference);
  const auto x_path = reference_.recent(scene_->path_length());
  const auto x = reference_.recent(opts_.filter_length);
  Eigen::VectorXd y(K);
  for (int k = 0; k < K; ++k) {
    filtered_[k].push(scene_->estimate(k, k).dot(x_path));
    y[k] = w_[k].dot(x);
  }
  return y;
}

void DiffusionFxlms::adapt(const Eigen::VectorXd& error) {
  const int K = scene_->nodes;
  if (error.size() != K) throw DimensionError("dfxlms: error vector length != K");
  const auto& a = topology_.weights;
  auto combine = [&](const ControlFilterSet& from, ControlFilterSet& to) {
    for (int k = 0; k < K; ++k) {
      to[k].setZero();
      for (int l = 0; l < K; ++l) {
        if (a(k, l) != 0.0) to[k].noalias() += a(k, l) * from[l];
      }
    }
  };
  if (mode_ == DiffusionMode::kAdaptThenCombine) {
    for (int k = 0; k < K; ++k) local_[k] = w_[k] + (mu_[k] * error[k]) * filtered_[k].history();
    combine(local_, w_);
  } else {
    combine(w_, local_);
    for (int k = 0; k < K; ++k) w_[k] = local_[k] + (mu_[k] * error[k]) * filtered_[k].history();
  }
  check_divergence(w_, opts_.ceiling, n_);
  ++n_;
}

// --- mixed gradients --------------------------------------------------------

MgdNode::MgdNode(const AcousticScene& scene, const CompensationBank& bank, const MgdNodeConfig& cfg)
    : k_(cfg.node), cfg_(cfg), mu_(cfg.mu0) {
  const int K = scene.nodes;
  if (k_ < 0 || k_ >= K) throw DimensionError("mgd node: index out of range");
  if (cfg.filter_length < 1) throw ParameterError("mgd node: filter length must be >= 1");
  if (!(cfg.mu0 >= 0.0) || !(cfg.fs > 0.0)) throw ParameterError("mgd node: need mu0 >= 0 and fs > 0");
  if (bank.filters.nodes() != K) throw DimensionError("mgd node: compensation bank size != K");
  const Eigen::Index H = bank.length();
  self_estimate_ = &scene.estimate(k_, k_);
  compensation_.resize(K, nullptr);
  for (int m = 0; m < K; ++m) {
    if (m != k_) compensation_[m] = &bank.filters(m, k_);
  }
  w_ = TapVector::Zero(cfg.filter_length);
  accumulator_ = Eigen::VectorXd::Zero(cfg.filter_length);
  reference_ = DelayLine<double>(std::max(scene.path_length(), cfg.filter_length));
  filtered_ = DelayLine<double>(cfg.filter_length);
  rings_.assign(K, GradientRing(H));
}

double MgdNode::control(double reference, const MailboxView& mailbox) {
  const int K = static_cast<int>(rings_.size());
  for (const auto& msg : mailbox.fresh) {
    if (msg.origin != k_ && msg.origin >= 0 && msg.origin < K) rings_[msg.origin].insert(msg.stamp, msg.grad);
  }

  // Age 1 is the causal floor (the previous sample's gradient), so the
  // transmission delay is age - 1. Unheard peers are left out.
  delay_ = 0;
  for (int m = 0; m < K && m < static_cast<int>(mailbox.age.size()); ++m) {
    if (m != k_ && mailbox.age[m]) delay_ = std::max(delay_, *mailbox.age[m] - 1);
  }
  const std::int64_t delays[] = {delay_};
  mu_ = cfg_.asss ? asss_mu(cfg_.mu0, delays, cfg_.fs) : cfg_.mu0;

  if (const auto* own = rings_[k_].at(0)) {
    accumulator_ = *own;
  } else {
    accumulator_.setZero();
  }
  for (int m = 0; m < K; ++m) {
    if (m == k_) continue;
    const TapVector& c = *compensation_[m];
    for (Eigen::Index h = 0; h < c.size(); ++h) {
      if (c[h] == 0.0) continue;
      if (const auto* grad = rings_[m].at(h)) accumulator_.noalias() += c[h] * *grad;
    }
  }
  w_.noalias() += mu_ * accumulator_;
  if (!w_.allFinite() || w_.cwiseAbs().maxCoeff() > cfg_.ceiling) {
    throw Diverged("mgd node " + std::to_string(k_) + " exceeded the divergence ceiling", n_);
  }

  reference_.push(reference);
  filtered_.push(self_estimate_->dot(reference_.recent(self_estimate_->size())));
  return w_.dot(reference_.recent(cfg_.filter_length));
}

GradientMessage MgdNode::local_gradient(double error) {
  if (!std::isfinite(error)) throw NumericFault("mgd node: non-finite error sample");
  auto grad = std::make_shared<const Eigen::VectorXd>(error * filtered_.history());
  rings_[k_].insert(n_, grad);
  GradientMessage msg{k_, n_, std::move(grad)};
  ++n_;
  return msg;
}

MgdNetwork::MgdNetwork(const AcousticScene& scene, const CompensationBank& bank, double mu0, bool asss,
                       double fs, MessageBus bus, const ControllerOptions& opts)
    : bus_(std::move(bus)), asss_(asss) {
  check_options(scene, opts);
  if (bus_.nodes() != scene.nodes) throw DimensionError("mgd network: bus size != K");
  for (int k = 0; k < scene.nodes; ++k) {
    nodes_.emplace_back(scene, bank, MgdNodeConfig{k, opts.filter_length, mu0, asss, fs, opts.ceiling});
  }
  w_.assign(scene.nodes, TapVector::Zero(opts.filter_length));
}

Eigen::VectorXd MgdNetwork::control(double reference) {
  const int K = static_cast<int>(nodes_.size());
  Eigen::VectorXd y(K);
  for (int k = 0; k < K; ++k) {
    const MailboxView view = bus_.mailbox_view(k, n_);
    y[k] = nodes_[k].control(reference, view);
    w_[k] = nodes_[k].filter();
  }
  return y;
}

void MgdNetwork::adapt(const Eigen::VectorXd& error) {
  const int K = static_cast<int>(nodes_.size());
  if (error.size() != K) throw DimensionError("mgd network: error vector length != K");
  for (int k = 0; k < K; ++k) bus_.send(nodes_[k].local_gradient(error[k]));
  bus_.deliver_until(n_);
  ++n_;
}

}  // namespace dmanc
