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

#include <doctest.h>

#include <cmath>

#include "dmanc/network.hpp"

using namespace dmanc;

namespace {

GradientMessage message(int origin, std::int64_t stamp, double value = 1.0) {
  return GradientMessage{origin, stamp, std::make_shared<const Eigen::VectorXd>(Eigen::VectorXd::Constant(2, value))};
}

}  // namespace

TEST_CASE("delay schedules") {
  SUBCASE("constant") {
    const auto s = DelaySchedule::constant(7);
    CHECK(s(0) == 7);
    CHECK(s(123456) == 7);
    CHECK_THROWS_AS(DelaySchedule::constant(-1), ParameterError);
  }
  SUBCASE("steps hold their value until the next breakpoint") {
    const auto s = DelaySchedule::steps({{0, 4000}, {160000, 8000}, {320000, 16000}, {480000, 8000}});
    CHECK(s(0) == 4000);
    CHECK(s(159999) == 4000);
    CHECK(s(160000) == 8000);
    CHECK(s(400000) == 16000);
    CHECK(s(10000000) == 8000);
    CHECK(DelaySchedule::steps({{10, 3}})(9) == 0);
    CHECK_THROWS_AS(DelaySchedule::steps({{5, 1}, {5, 2}}), ParameterError);
  }
  SUBCASE("sinusoid starts at zero and peaks at 2A") {
    const auto s = DelaySchedule::sinusoid(0.1, 8000.0, 1, 16000.0);
    CHECK(s(0) == 0);
    CHECK(s(5 * 16000) == 16000);
    CHECK(s(10 * 16000) == 0);
    for (std::int64_t n = 0; n < 20 * 16000; n += 997) {
      CHECK(s(n) >= 0);
      CHECK(s(n) <= 16000);
    }
  }
  SUBCASE("per-node sinusoid scales the phase by the node index") {
    const auto s2 = DelaySchedule::sinusoid(0.05, 8000.0, 2, 16000.0);
    CHECK(s2(5 * 16000) == 16000);
    const auto s3 = DelaySchedule::sinusoid(0.05, 8000.0, 3, 16000.0);
    const double expected = (std::sin(2.0 * M_PI * 0.05 * 3.0 * 2.0 - M_PI / 2.0) + 1.0) * 8000.0;
    CHECK(s3(2 * 16000) == std::llround(expected));
  }
}

TEST_CASE("message bus delivery") {
  SUBCASE("zero delay is readable at the next tick") {
    MessageBus bus(2, DelaySchedule::constant(0));
    bus.send(message(0, 5));
    bus.deliver_until(5);
    const auto view = bus.mailbox_view(1, 6);
    REQUIRE(view.fresh.size() == 1);
    CHECK(view.fresh[0].stamp == 5);
    REQUIRE(view.age[0]);
    CHECK(*view.age[0] == 1);
    CHECK_FALSE(view.age[1]);
  }
  SUBCASE("constant delay of 4000 arrives at stamp + 4000") {
    MessageBus bus(2, DelaySchedule::constant(4000));
    bus.send(message(1, 10));
    bus.deliver_until(4009);
    CHECK(bus.mailbox_view(0, 4010).fresh.empty());
    bus.deliver_until(4010);
    const auto view = bus.mailbox_view(0, 4011);
    REQUIRE(view.fresh.size() == 1);
    CHECK(*view.age[1] == 4001);
  }
  SUBCASE("broadcast reaches every other node once") {
    MessageBus bus(4, DelaySchedule::constant(2));
    bus.send(message(2, 0));
    CHECK(bus.sent() == 3);
    CHECK(bus.in_flight() == 3);
    bus.deliver_until(2);
    CHECK(bus.delivered() == 3);
    CHECK(bus.mailbox_view(2, 3).fresh.empty());
    for (int k : {0, 1, 3}) CHECK(bus.mailbox_view(k, 3).fresh.size() == 1);
  }
  SUBCASE("mailbox drains and stays ordered") {
    MessageBus bus(3, DelaySchedule::constant(0));
    bus.send(message(2, 0));
    bus.send(message(1, 0));
    bus.deliver_until(0);
    bus.send(message(1, 1));
    bus.deliver_until(1);
    const auto view = bus.mailbox_view(0, 2);
    REQUIRE(view.fresh.size() == 3);
    CHECK(view.fresh[0].origin == 1);
    CHECK(view.fresh[0].stamp == 0);
    CHECK(view.fresh[1].stamp == 1);
    CHECK(view.fresh[2].origin == 2);
    CHECK(bus.mailbox_view(0, 2).fresh.empty());
  }
  SUBCASE("out-of-order arrivals keep the newest stamp as the age reference") {
    std::vector<std::vector<DelaySchedule>> links(2, std::vector<DelaySchedule>(2));
    links[0][1] = DelaySchedule::steps({{0, 10}, {1, 0}});
    MessageBus bus(2, links);
    bus.send(message(0, 0));
    bus.deliver_until(0);
    bus.send(message(0, 1));
    bus.deliver_until(10);
    const auto view = bus.mailbox_view(1, 11);
    CHECK(view.fresh.size() == 2);
    CHECK(*view.age[0] == 10);
  }
  SUBCASE("misuse") {
    MessageBus bus(2, DelaySchedule::constant(0));
    CHECK_THROWS_AS(bus.send(message(2, 0)), DimensionError);
    bus.deliver_until(5);
    CHECK_THROWS_AS(bus.send(message(0, 3)), ParameterError);
    CHECK_THROWS_AS(MessageBus(2, std::vector<std::vector<DelaySchedule>>(3)), DimensionError);
  }
}

TEST_CASE("gradient ring") {
  GradientRing ring(3);
  CHECK(ring.at(0) == nullptr);
  CHECK(ring.insert(0, message(0, 0, 1.0).grad));
  CHECK(ring.insert(1, message(0, 1, 2.0).grad));
  CHECK(ring.insert(3, message(0, 3, 4.0).grad));
  CHECK(*ring.latest() == 3);
  CHECK((*ring.at(0))[0] == 4.0);
  CHECK(ring.at(1) == nullptr);  // stamp 2 never arrived
  CHECK((*ring.at(2))[0] == 2.0);
  CHECK(ring.at(3) == nullptr);
  CHECK_FALSE(ring.insert(0, message(0, 0).grad));  // too old for the ring
  CHECK_FALSE(ring.insert(3, message(0, 3).grad));  // duplicate
  CHECK(ring.insert(2, message(0, 2, 3.0).grad));   // late but in range
  CHECK((*ring.at(1))[0] == 3.0);
  CHECK(ring.stamps() == std::vector<std::int64_t>{3, 2, 1});
  CHECK_THROWS_AS(GradientRing(0), ParameterError);
}
