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

#include "dmanc/network.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace dmanc {

DelaySchedule DelaySchedule::constant(std::int64_t delay) {
  if (delay < 0) throw ParameterError("delay schedule: negative delay");
  DelaySchedule s;
  s.kind_ = Kind::kConstant;
  s.constant_ = delay;
  return s;
}

DelaySchedule DelaySchedule::steps(std::vector<std::pair<std::int64_t, std::int64_t>> breakpoints) {
  for (std::size_t i = 0; i < breakpoints.size(); ++i) {
    if (breakpoints[i].second < 0) throw ParameterError("delay schedule: negative delay");
    if (i > 0 && breakpoints[i].first <= breakpoints[i - 1].first) {
      throw ParameterError("delay schedule: step starts must be strictly increasing");
    }
  }
  DelaySchedule s;
  s.kind_ = Kind::kSteps;
  s.steps_ = std::move(breakpoints);
  return s;
}

DelaySchedule DelaySchedule::sinusoid(double rate_hz, double amplitude, int index, double fs) {
  if (!(fs > 0.0) || !(amplitude >= 0.0) || !(rate_hz >= 0.0) || index < 1) {
    throw ParameterError("delay schedule: sinusoid needs fs > 0, A >= 0, rate >= 0, index >= 1");
  }
  DelaySchedule s;
  s.kind_ = Kind::kSinusoid;
  s.rate_hz_ = rate_hz;
  s.amplitude_ = amplitude;
  s.index_ = index;
  s.fs_ = fs;
  return s;
}

std::int64_t DelaySchedule::operator()(std::int64_t n) const {
  switch (kind_) {
    case Kind::kConstant:
      return constant_;
    case Kind::kSteps: {
      auto it = std::upper_bound(steps_.begin(), steps_.end(), n,
                                 [](std::int64_t v, const auto& bp) { return v < bp.first; });
      return it == steps_.begin() ? 0 : std::prev(it)->second;
    }
    case Kind::kSinusoid: {
      const double phase = 2.0 * std::numbers::pi * rate_hz_ * static_cast<double>(n) / fs_ *
                               static_cast<double>(index_) -
                           std::numbers::pi / 2.0;
      return std::max<std::int64_t>(0, std::llround((std::sin(phase) + 1.0) * amplitude_));
    }
  }
  return 0;
}

MessageBus::MessageBus(int nodes, std::vector<std::vector<DelaySchedule>> links)
    : nodes_(nodes), links_(std::move(links)), boxes_(nodes) {
  if (nodes < 1) throw ParameterError("message bus: need at least one node");
  if (static_cast<int>(links_.size()) != nodes) throw DimensionError("message bus: link table rows != K");
  for (const auto& row : links_) {
    if (static_cast<int>(row.size()) != nodes) throw DimensionError("message bus: link table cols != K");
  }
  for (auto& box : boxes_) box.latest.assign(nodes, std::nullopt);
}

MessageBus::MessageBus(int nodes, const DelaySchedule& schedule)
    : MessageBus(nodes, std::vector<std::vector<DelaySchedule>>(
                            std::max(nodes, 0), std::vector<DelaySchedule>(std::max(nodes, 0), schedule))) {}

void MessageBus::send(const GradientMessage& msg) {
  if (msg.origin < 0 || msg.origin >= nodes_) throw DimensionError("message bus: bad origin");
  if (msg.stamp <= clock_) throw ParameterError("message bus: message stamped before the bus clock");
  for (int to = 0; to < nodes_; ++to) {
    if (to == msg.origin) continue;
    queue_.push(InFlight{msg.stamp + links_[msg.origin][to](msg.stamp), msg.stamp, msg.origin, to,
                         msg.grad});
    ++sent_;
  }
}

void MessageBus::deliver_until(std::int64_t n) {
  clock_ = std::max(clock_, n);
  while (!queue_.empty() && queue_.top().delivery <= n) {
    const InFlight& top = queue_.top();
    Box& box = boxes_[top.to];
    auto& latest = box.latest[top.from];
    if (!latest || *latest < top.stamp) latest = top.stamp;
    box.fresh.push_back(GradientMessage{top.from, top.stamp, top.grad});
    ++delivered_;
    queue_.pop();
  }
}

MailboxView MessageBus::mailbox_view(int node, std::int64_t current) {
  if (node < 0 || node >= nodes_) throw DimensionError("message bus: bad node");
  Box& box = boxes_[node];
  MailboxView view;
  view.fresh.swap(box.fresh);
  std::sort(view.fresh.begin(), view.fresh.end(), [](const auto& a, const auto& b) {
    return a.origin != b.origin ? a.origin < b.origin : a.stamp < b.stamp;
  });
  view.age.assign(nodes_, std::nullopt);
  for (int peer = 0; peer < nodes_; ++peer) {
    if (peer != node && box.latest[peer]) view.age[peer] = current - *box.latest[peer];
  }
  return view;
}

GradientRing::GradientRing(Eigen::Index depth) : slots_(static_cast<std::size_t>(depth)) {
  if (depth < 1) throw ParameterError("gradient ring: depth must be >= 1");
}

bool GradientRing::insert(std::int64_t stamp, std::shared_ptr<const Eigen::VectorXd> grad) {
  const auto depth = static_cast<std::int64_t>(slots_.size());
  if (latest_ && stamp <= *latest_ - depth) return false;
  Slot& slot = slots_[static_cast<std::size_t>(stamp % depth)];
  if (slot.stamp == stamp) return false;  // duplicate
  slot.stamp = stamp;
  slot.grad = std::move(grad);
  if (!latest_ || stamp > *latest_) latest_ = stamp;
  return true;
}

const Eigen::VectorXd* GradientRing::at(Eigen::Index h) const {
  if (!latest_ || h < 0 || h >= depth()) return nullptr;
  const std::int64_t stamp = *latest_ - h;
  if (stamp < 0) return nullptr;
  const Slot& slot = slots_[static_cast<std::size_t>(stamp % depth())];
  return slot.stamp == stamp ? slot.grad.get() : nullptr;
}

std::vector<std::int64_t> GradientRing::stamps() const {
  std::vector<std::int64_t> out;
  for (Eigen::Index h = 0; h < depth(); ++h) {
    if (at(h)) out.push_back(*latest_ - h);
  }
  return out;
}

}  // namespace dmanc
