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

#include "dmanc/analysis.hpp"
#include "dmanc/controllers.hpp"
#include "oracles.hpp"

using namespace dmanc;

namespace {

TapVector impulse(Eigen::Index length, Eigen::Index at, double gain = 1.0) {
  TapVector t = TapVector::Zero(length);
  t[at] = gain;
  return t;
}

// Two nodes with unit self paths and cross paths `cross_gain` times a one
// sample later copy; primaries are short random responses.
AcousticScene coupled_pair(double cross_gain, std::uint64_t seed = 3) {
  AcousticScene s;
  s.nodes = 2;
  s.secondary = PathMatrix(2, 4);
  for (int m = 0; m < 2; ++m) {
    for (int k = 0; k < 2; ++k) s.secondary(m, k) = m == k ? impulse(4, 1) : impulse(4, 2, cross_gain);
  }
  s.estimate = s.secondary;
  Rng rng(seed);
  for (int m = 0; m < 2; ++m) {
    TapVector p = TapVector::Zero(8);
    for (Eigen::Index i = 3; i < 8; ++i) p[i] = rng.normal() * std::exp(-0.3 * static_cast<double>(i));
    s.primary.push_back(p);
  }
  return s;
}

SceneRecipe white_recipe(int nodes, std::uint64_t seed = 1) {
  SceneRecipe r;
  r.nodes = nodes;
  r.seed = seed;
  r.path_length = 16;
  r.tail_length = 6;
  r.decay = 0.3;
  r.self_delay_min = 1;
  r.self_delay_max = 2;
  r.cross_extra_delay_min = 1;
  r.cross_extra_delay_max = 3;
  r.primary_delay_min = 5;
  r.primary_delay_max = 8;
  r.compensation_length = 4;
  return r;
}

template <typename Step>
void drive(const AcousticScene& scene, int samples, std::uint64_t seed, Step&& step) {
  SourceSpec spec;
  spec.seed = seed;
  SignalSource src(spec);
  PlantState plant(scene);
  for (int n = 0; n < samples; ++n) step(n, src.next_sample(), plant);
}

double max_gap(const ControlFilterSet& a, const ControlFilterSet& b) {
  double gap = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) gap = std::max(gap, (a[k] - b[k]).cwiseAbs().maxCoeff());
  return gap;
}

}  // namespace

TEST_CASE("asss_mu") {
  const std::int64_t none[] = {0};
  CHECK(asss_mu(0.01, none, 16000.0) == 0.01);
  const std::int64_t one_second_half[] = {8000};
  CHECK(asss_mu(0.01, one_second_half, 16000.0) == doctest::Approx(0.01 * std::exp(-1.0)).epsilon(1e-15));
  const std::int64_t mixed[] = {4000, 8000};
  CHECK(asss_mu(0.01, mixed, 16000.0) == asss_mu(0.01, one_second_half, 16000.0));
  const std::int64_t negative[] = {-1};
  CHECK_THROWS_AS(asss_mu(0.01, negative, 16000.0), ParameterError);
}

TEST_CASE("McFxlms") {
  SUBCASE("zero step never adapts") {
    const auto scene = synthesize_scene(white_recipe(3)).scene;
    McFxlms mc(scene, 0.0, {16, 1e6});
    drive(scene, 500, 1, [&](int, double x, PlantState& plant) {
      const auto y = mc.control(x);
      CHECK(y.isZero());
      mc.adapt(plant.propagate(x, y).error);
    });
    for (const auto& w : mc.filters()) CHECK(w.isZero());
  }
  SUBCASE("single channel with p = s reaches -30 dB") {
    AcousticScene s;
    s.nodes = 1;
    s.secondary = PathMatrix(1, 8);
    Rng rng(12);
    TapVector path = TapVector::Zero(8);
    for (Eigen::Index i = 1; i < 8; ++i) path[i] = rng.normal() * std::exp(-0.4 * static_cast<double>(i));
    s.secondary(0, 0) = path;
    s.estimate = s.secondary;
    s.primary = {path};
    McFxlms mc(s, 0.01 / path.squaredNorm(), {8, 1e6});
    NseTracker tracker(1, 2000);
    drive(s, 50000, 2, [&](int, double x, PlantState& plant) {
      const auto y = mc.control(x);
      const auto out = plant.propagate(x, y);
      tracker.push(out.error, out.disturbance);
      mc.adapt(out.error);
    });
    CHECK(tracker.nse_db(0) <= -30.0);
  }
  SUBCASE("divergence is reported") {
    const auto scene = synthesize_scene(white_recipe(2)).scene;
    McFxlms mc(scene, 10.0, {16, 1e3});
    CHECK_THROWS_AS(drive(scene, 5000, 1,
                          [&](int, double x, PlantState& plant) {
                            const auto y = mc.control(x);
                            mc.adapt(plant.propagate(x, y).error);
                          }),
                    Diverged);
  }
}

TEST_CASE("DecentralizedFxlms") {
  SUBCASE("without crosstalk it follows the centralised trajectory") {
    auto scene = coupled_pair(0.0);
    McFxlms mc(scene, 0.05, {8, 1e6});
    DecentralizedFxlms dec(scene, {0.05, 0.05}, {8, 1e6});
    PlantState plant_b(scene);
    drive(scene, 3000, 4, [&](int, double x, PlantState& plant_a) {
      const auto ya = mc.control(x);
      const auto yb = dec.control(x);
      CHECK((ya - yb).cwiseAbs().maxCoeff() < 1e-12);
      mc.adapt(plant_a.propagate(x, ya).error);
      dec.adapt(plant_b.propagate(x, yb).error);
    });
    CHECK(max_gap(mc.filters(), dec.filters()) < 1e-12);
  }
  SUBCASE("a zero step freezes only that node") {
    const auto scene = coupled_pair(0.3);
    DecentralizedFxlms dec(scene, {0.0, 0.05}, {8, 1e6});
    drive(scene, 1000, 5, [&](int, double x, PlantState& plant) {
      const auto y = dec.control(x);
      dec.adapt(plant.propagate(x, y).error);
    });
    CHECK(dec.filters()[0].isZero());
    CHECK_FALSE(dec.filters()[1].isZero());
  }
  SUBCASE("strong inverted crosstalk diverges where the centralised update converges") {
    const auto scene = coupled_pair(-1.5);
    const double mu = 0.02;
    McFxlms mc(scene, mu, {8, 1e3});
    NseTracker tracker(2, 2000);
    drive(scene, 40000, 6, [&](int, double x, PlantState& plant) {
      const auto y = mc.control(x);
      const auto out = plant.propagate(x, y);
      tracker.push(out.error, out.disturbance);
      mc.adapt(out.error);
    });
    // The coupled plant is non-minimum phase, so cancellation is partial.
    CHECK(tracker.nse_db(0) < -3.0);
    CHECK(tracker.nse_db(1) < -3.0);

    DecentralizedFxlms dec(scene, {mu, mu}, {8, 1e3});
    CHECK_THROWS_AS(drive(scene, 40000, 6,
                          [&](int, double x, PlantState& plant) {
                            const auto y = dec.control(x);
                            dec.adapt(plant.propagate(x, y).error);
                          }),
                    Diverged);
  }
}

TEST_CASE("DiffusionFxlms") {
  SUBCASE("identity topology is the decentralised update") {
    const auto scene = synthesize_scene(white_recipe(3)).scene;
    for (auto mode : {DiffusionMode::kAdaptThenCombine, DiffusionMode::kCombineThenAdapt}) {
      DiffusionFxlms dif(scene, DiffusionTopology::identity(3), {0.01}, mode, {16, 1e6});
      DecentralizedFxlms dec(scene, {0.01}, {16, 1e6});
      PlantState plant_b(scene);
      drive(scene, 2000, 7, [&](int, double x, PlantState& plant_a) {
        const auto ya = dif.control(x);
        const auto yb = dec.control(x);
        dif.adapt(plant_a.propagate(x, ya).error);
        dec.adapt(plant_b.propagate(x, yb).error);
      });
      CHECK(max_gap(dif.filters(), dec.filters()) == 0.0);
    }
  }
  SUBCASE("symmetric pair with uniform weights stays symmetric") {
    auto scene = coupled_pair(0.4);
    scene.primary[1] = scene.primary[0];
    DiffusionFxlms dif(scene, DiffusionTopology::full(2), {0.02}, DiffusionMode::kAdaptThenCombine, {8, 1e6});
    drive(scene, 2000, 8, [&](int, double x, PlantState& plant) {
      const auto y = dif.control(x);
      dif.adapt(plant.propagate(x, y).error);
      CHECK(dif.filters()[0] == dif.filters()[1]);
    });
  }
  SUBCASE("six-node ring runs") {
    const auto scene = synthesize_scene(white_recipe(6)).scene;
    DiffusionFxlms dif(scene, DiffusionTopology::ring(6), {1e-3}, DiffusionMode::kCombineThenAdapt, {16, 1e6});
    CHECK_NOTHROW(drive(scene, 2000, 9, [&](int, double x, PlantState& plant) {
      const auto y = dif.control(x);
      dif.adapt(plant.propagate(x, y).error);
    }));
    const auto& a = DiffusionTopology::ring(6).weights;
    CHECK(a(0, 0) == doctest::Approx(1.0 / 3.0));
    CHECK(a(5, 0) == doctest::Approx(1.0 / 3.0));
    CHECK(a(2, 0) == 0.0);
  }
  SUBCASE("topology validation") {
    DiffusionTopology t = DiffusionTopology::full(3);
    t.weights(0, 0) = 0.9;
    CHECK_THROWS_AS(t.validate(), TopologyError);
    t = DiffusionTopology::full(3);
    t.weights(1, 1) = 0.0;
    t.weights(0, 1) = 2.0 / 3.0;
    CHECK_THROWS_AS(t.validate(), TopologyError);
  }
}

TEST_CASE("MgdNode local gradient") {
  const auto scene = synthesize_scene(white_recipe(2)).scene;
  const auto bank = CompensationBank::identity(2, 4);
  SUBCASE("zero error gives a zero gradient") {
    MgdNode node(scene, bank, {0, 8, 0.01, false, 8000.0, 1e6});
    node.control(1.0, {});
    CHECK(node.local_gradient(0.0).grad->isZero());
  }
  SUBCASE("transparent self path gives the reference history") {
    auto s = scene;
    s.estimate(0, 0) = impulse(16, 0);
    MgdNode node(s, bank, {0, 8, 0.01, false, 8000.0, 1e6});
    std::vector<double> xs;
    for (int n = 0; n < 12; ++n) {
      xs.push_back(0.5 * n - 1.0);
      node.control(xs.back(), {});
      const auto msg = node.local_gradient(2.0);
      CHECK(msg.stamp == n);
      CHECK(msg.origin == 0);
      for (int j = 0; j < 8; ++j) {
        const double expected = n - j >= 0 ? 2.0 * xs[n - j] : 0.0;
        CHECK((*msg.grad)[j] == expected);
      }
    }
  }
  SUBCASE("matches x'_kk(n - j) e_k(n) from a replay") {
    MgdNode node(scene, bank, {1, 8, 0.0, false, 8000.0, 1e6});
    Rng rng(31);
    std::vector<double> xs;
    for (int n = 0; n < 40; ++n) {
      xs.push_back(rng.normal());
      node.control(xs.back(), {});
      const double e = rng.normal();
      const auto msg = node.local_gradient(e);
      const auto filtered = oracle::full_convolution(xs, oracle::as_vector(scene.estimate(1, 1)));
      for (int j = 0; j < 8; ++j) {
        const double expected = n - j >= 0 ? filtered[n - j] * e : 0.0;
        CHECK((*msg.grad)[j] == doctest::Approx(expected).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("MgdNode updates") {
  SUBCASE("single node equals single-channel FxLMS") {
    auto r = white_recipe(1);
    const auto scene = synthesize_scene(r).scene;
    const auto bank = CompensationBank::identity(1, 4);
    MgdNetwork mgd(scene, bank, 0.02, false, 8000.0, MessageBus(1, DelaySchedule::constant(0)), {16, 1e6});
    McFxlms mc(scene, 0.02, {16, 1e6});
    PlantState plant_b(scene);
    drive(scene, 3000, 10, [&](int, double x, PlantState& plant_a) {
      const auto ya = mgd.control(x);
      const auto yb = mc.control(x);
      CHECK(std::abs(ya[0] - yb[0]) < 1e-12);
      mgd.adapt(plant_a.propagate(x, ya).error);
      mc.adapt(plant_b.propagate(x, yb).error);
    });
  }
  SUBCASE("isolated nodes behave as decentralised FxLMS") {
    const auto scene = synthesize_scene(white_recipe(3)).scene;
    const auto bank = CompensationBank::identity(3, 4);
    std::vector<MgdNode> nodes;
    for (int k = 0; k < 3; ++k) nodes.emplace_back(scene, bank, MgdNodeConfig{k, 16, 0.01, true, 8000.0, 1e6});
    DecentralizedFxlms dec(scene, {0.01}, {16, 1e6});
    PlantState plant_b(scene);
    drive(scene, 2000, 11, [&](int, double x, PlantState& plant_a) {
      Eigen::VectorXd ya(3);
      for (int k = 0; k < 3; ++k) ya[k] = nodes[k].control(x, {});
      const auto yb = dec.control(x);
      CHECK((ya - yb).cwiseAbs().maxCoeff() < 1e-12);
      const auto e = plant_a.propagate(x, ya).error;
      for (int k = 0; k < 3; ++k) {
        nodes[k].local_gradient(e[k]);
        CHECK(nodes[k].step_size() == 0.01);
      }
      dec.adapt(plant_b.propagate(x, yb).error);
    });
  }
  SUBCASE("three-node network equals the monolithic update") {
    auto r = white_recipe(3);
    r.exact_compensation = true;
    const auto synthetic = synthesize_scene(r);
    CompensationBank bank;
    bank.filters = *synthetic.compensation_true;
    const auto& scene = synthetic.scene;
    MgdNetwork mgd(scene, bank, 0.01, false, 8000.0, MessageBus(3, DelaySchedule::constant(0)), {16, 1e6});
    oracle::MonolithicMgd ref(scene, bank, 0.01, 16);
    PlantState plant_b(scene);
    drive(scene, 3000, 12, [&](int, double x, PlantState& plant_a) {
      const auto ya = mgd.control(x);
      const auto yb = ref.control(x);
      CHECK((ya - yb).cwiseAbs().maxCoeff() < 1e-10);
      mgd.adapt(plant_a.propagate(x, ya).error);
      ref.adapt(plant_b.propagate(x, yb).error);
    });
    CHECK(max_gap(mgd.filters(), ref.filters()) < 1e-10);
    for (int k = 0; k < 3; ++k) CHECK(mgd.delay(k) == 0);
  }
  SUBCASE("ASSS shrinks the step when the delay steps from 4000 to 8000") {
    const auto scene = synthesize_scene(white_recipe(2)).scene;
    const auto bank = CompensationBank::identity(2, 4);
    const double fs = 16000.0, mu0 = 1e-4;
    MgdNetwork mgd(scene, bank, mu0, true, fs, MessageBus(2, DelaySchedule::steps({{0, 4000}, {6000, 8000}})),
                   {4, 1e6});
    std::vector<double> mu;
    std::vector<std::int64_t> delay;
    drive(scene, 16000, 13, [&](int, double x, PlantState& plant) {
      const auto y = mgd.control(x);
      mu.push_back(mgd.step_size(0));
      delay.push_back(mgd.delay(0));
      mgd.adapt(plant.propagate(x, y).error);
    });
    for (std::size_t n = 0; n < mu.size(); ++n) {
      CHECK(mu[n] == mu0 * std::exp(-2.0 * static_cast<double>(delay[n]) / fs));
    }
    CHECK(delay[4000] == 0);  // nothing has arrived yet
    CHECK(delay[4001] == 4000);
    CHECK(delay[9999] == 4000);
    CHECK(delay[14001] == 8000);
    CHECK(delay[15999] == 8000);
    CHECK(mu[15000] / mu[9000] == doctest::Approx(std::exp(-0.5)).epsilon(1e-14));
  }
}
