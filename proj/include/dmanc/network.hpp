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
#include <queue>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dmanc/error.hpp"

namespace dmanc {

// Local gradient x'_kk-history * e_k broadcast by node `origin` at `stamp`.
struct GradientMessage {
  int origin = 0;
  std::int64_t stamp = 0;
  std::shared_ptr<const Eigen::VectorXd> grad;
};

// Per-link transmission delay in samples as a function of the send stamp.
class DelaySchedule {
 public:
  enum class Kind { kConstant, kSteps, kSinusoid };

  DelaySchedule() = default;
  static DelaySchedule constant(std::int64_t delay);
  // Piecewise constant: breakpoints (start sample, delay), starts ascending.
  // The delay is zero before the first breakpoint.
  static DelaySchedule steps(std::vector<std::pair<std::int64_t, std::int64_t>> breakpoints);
  // round((sin(2*pi*rate*n/fs*index - pi/2) + 1) * amplitude), in [0, 2A].
  static DelaySchedule sinusoid(double rate_hz, double amplitude, int index, double fs);

  std::int64_t operator()(std::int64_t n) const;
  Kind kind() const { return kind_; }
  const std::vector<std::pair<std::int64_t, std::int64_t>>& breakpoints() const { return steps_; }

 private:
  Kind kind_ = Kind::kConstant;
  std::int64_t constant_ = 0;
  std::vector<std::pair<std::int64_t, std::int64_t>> steps_;
  double rate_hz_ = 0.0;
  double amplitude_ = 0.0;
  int index_ = 1;
  double fs_ = 1.0;
};

// Snapshot handed to a node before its tick.
struct MailboxView {
  // Messages delivered since the previous view, ordered by (origin, stamp).
  std::vector<GradientMessage> fresh;
  // Per peer: current sample minus the newest delivered stamp. Empty when the
  // peer has never been heard from, and for the node itself.
  std::vector<std::optional<std::int64_t>> age;
};

// Sample-synchronous gradient exchange. Messages sent at stamp t over link
// (from, to) are delivered once the bus has been advanced to t + delay(t);
// a node ticking at n reads everything delivered up to n - 1.
class MessageBus {
 public:
  // `links[from][to]` gives the schedule for that directed link.
  MessageBus(int nodes, std::vector<std::vector<DelaySchedule>> links);
  // Same schedule on every link.
  MessageBus(int nodes, const DelaySchedule& schedule);

  int nodes() const { return nodes_; }

  // Broadcasts to every other node. msg.stamp must not precede the bus clock.
  void send(const GradientMessage& msg);

  // Moves every message whose delivery sample is <= n into its mailbox.
  void deliver_until(std::int64_t n);

  // Drains node's fresh messages; ages measured against `current`.
  MailboxView mailbox_view(int node, std::int64_t current);

  std::int64_t delay(int from, int to, std::int64_t stamp) const { return links_[from][to](stamp); }
  std::optional<std::int64_t> latest_stamp(int node, int peer) const { return boxes_[node].latest[peer]; }

  std::uint64_t sent() const { return sent_; }
  std::uint64_t delivered() const { return delivered_; }
  std::size_t in_flight() const { return queue_.size(); }

 private:
  struct InFlight {
    std::int64_t delivery;
    std::int64_t stamp;
    int from;
    int to;
    std::shared_ptr<const Eigen::VectorXd> grad;
    bool operator>(const InFlight& o) const {
      if (delivery != o.delivery) return delivery > o.delivery;
      if (to != o.to) return to > o.to;
      if (from != o.from) return from > o.from;
      return stamp > o.stamp;
    }
  };
  struct Box {
    std::vector<std::optional<std::int64_t>> latest;
    std::vector<GradientMessage> fresh;
  };

  int nodes_;
  std::vector<std::vector<DelaySchedule>> links_;
  std::vector<Box> boxes_;
  std::priority_queue<InFlight, std::vector<InFlight>, std::greater<>> queue_;
  std::int64_t clock_ = -1;
  std::uint64_t sent_ = 0;
  std::uint64_t delivered_ = 0;
};

// The `depth` most recent gradients from one peer, addressed relative to the
// newest stamp seen. Slots whose stamp never arrived read as absent.
class GradientRing {
 public:
  GradientRing() = default;
  explicit GradientRing(Eigen::Index depth);

  // Returns false when the stamp is too old to fit.
  bool insert(std::int64_t stamp, std::shared_ptr<const Eigen::VectorXd> grad);
  std::optional<std::int64_t> latest() const { return latest_; }
  Eigen::Index depth() const { return static_cast<Eigen::Index>(slots_.size()); }
  // Entry with stamp latest - h, or nullptr.
  const Eigen::VectorXd* at(Eigen::Index h) const;
  // Stamps currently held, newest first.
  std::vector<std::int64_t> stamps() const;

 private:
  struct Slot {
    std::int64_t stamp = -1;
    std::shared_ptr<const Eigen::VectorXd> grad;
  };
  std::vector<Slot> slots_;
  std::optional<std::int64_t> latest_;
};

}  // namespace dmanc
