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
#include <numbers>

#include "dmanc/analysis.hpp"
#include "oracles.hpp"

using namespace dmanc;

namespace {

AcousticScene identity_scene(int K, Eigen::Index L) {
  AcousticScene s;
  s.nodes = K;
  s.secondary = PathMatrix(K, L);
  for (int m = 0; m < K; ++m) s.secondary(m, m)[0] = 1.0;
  s.estimate = s.secondary;
  s.primary.assign(K, TapVector::Zero(L));
  for (auto& p : s.primary) p[1] = 1.0;
  return s;
}

}  // namespace

TEST_CASE("nse") {
  std::vector<double> d = {1.0, -2.0, 0.5, 3.0};
  CHECK(nse(d, d) == 0.0);
  std::vector<double> e;
  for (double v : d) e.push_back(v / 10.0);
  CHECK(nse(e, d) == doctest::Approx(-20.0).epsilon(1e-12));
  CHECK(nse(std::vector<double>(4, 0.0), d) == -std::numeric_limits<double>::infinity());
  CHECK_THROWS_AS(nse(d, std::vector<double>(4, 0.0)), ParameterError);
  CHECK_THROWS_AS(nse(e, std::vector<double>(3, 1.0)), DimensionError);

  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> a(100), b(100);
    for (auto& v : a) v = rng.normal();
    for (auto& v : b) v = rng.normal() * 3.0;
    CHECK(nse(a, b) == doctest::Approx(oracle::nse_db(a, b)).epsilon(1e-12));
  }
}

TEST_CASE("NseTracker matches a direct window evaluation") {
  Rng rng(23);
  const int window = 50;
  NseTracker tracker(2, window);
  std::vector<double> e0, d0;
  CHECK(std::isnan(tracker.nse_db(0)));
  for (int n = 0; n < 777; ++n) {
    Eigen::VectorXd e(2), d(2);
    e << rng.normal() * 0.1, rng.normal();
    d << rng.normal(), rng.normal();
    tracker.push(e, d);
    e0.push_back(e[0]);
    d0.push_back(d[0]);
    const std::size_t start = e0.size() > window ? e0.size() - window : 0;
    const std::vector<double> we(e0.begin() + static_cast<long>(start), e0.end());
    const std::vector<double> wd(d0.begin() + static_cast<long>(start), d0.end());
    CHECK(tracker.nse_db(0) == doctest::Approx(oracle::nse_db(we, wd)).epsilon(1e-9));
  }
}

TEST_CASE("filtered_correlation") {
  SUBCASE("white reference through a unit impulse is the identity") {
    TapVector delta = TapVector::Zero(4);
    delta[0] = 1.0;
    TapVector r = TapVector::Zero(8);
    r[0] = 1.0;
    CHECK(filtered_correlation(delta, delta, r, 5).isApprox(Eigen::MatrixXd::Identity(5, 5)));
  }
  SUBCASE("coloured reference and different filters against a sample estimate") {
    Rng rng(41);
    TapVector a(3), b(5);
    for (auto& v : a) v = rng.normal();
    for (auto& v : b) v = rng.normal();
    TapVector r(12);
    for (Eigen::Index i = 0; i < 12; ++i) r[i] = std::pow(0.6, static_cast<double>(i));
    const Eigen::MatrixXd R = filtered_correlation(a, b, r, 4);
    // E[(a*x)(n-i) (b*x)(n-j)] = sum_p sum_q a_p b_q r(|i + p - j - q|)
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) {
        double expected = 0.0;
        for (int p = 0; p < 3; ++p) {
          for (int q = 0; q < 5; ++q) expected += a[p] * b[q] * r[std::abs(i + p - j - q)];
        }
        CHECK(R(i, j) == doctest::Approx(expected).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("Wiener solution") {
  SUBCASE("K=1 with p = s gives a unit impulse") {
    SceneRecipe r;
    r.nodes = 1;
    r.path_length = 32;
    r.tail_length = 8;
    r.primary_delay_min = 1;
    r.primary_delay_max = 1;
    auto scene = synthesize_scene(r).scene;
    scene.primary[0] = scene.secondary(0, 0);
    TapVector white = TapVector::Zero(64);
    white[0] = 1.0;
    WienerProblem w = build_wiener(scene, white, 8);
    solve_wiener(w);
    TapVector delta = TapVector::Zero(8);
    delta[0] = 1.0;
    CHECK((w.solution - delta).norm() < 1e-6);
    CHECK(std::abs(w.cost(w.solution)) < 1e-9);
  }
  SUBCASE("K=2, N=4, L=2 matches regression over a simulated record") {
    AcousticScene s;
    s.nodes = 2;
    s.secondary = PathMatrix(2, 2);
    s.secondary(0, 0) << 1.0, 0.5;
    s.secondary(1, 1) << 0.8, -0.3;
    s.secondary(0, 1) << 0.0, 0.4;
    s.secondary(1, 0) << 0.0, -0.6;
    s.estimate = s.secondary;
    Rng rng(3);
    for (int m = 0; m < 2; ++m) {
      TapVector p(6);
      for (auto& v : p) v = rng.normal();
      s.primary.push_back(p);
    }
    SourceSpec spec;
    spec.seed = 99;
    TapVector white = TapVector::Zero(32);
    white[0] = 1.0;
    WienerProblem w = build_wiener(s, white, 4);
    solve_wiener(w);
    const Eigen::VectorXd regression = oracle::regression_wiener(s, SignalSource(spec), 4, 200000);
    CHECK((w.solution - regression).norm() / regression.norm() < 1e-2);

    WienerProblem sampled = build_wiener_sampled(s, SignalSource(spec), 4, 200000);
    solve_wiener(sampled);
    CHECK((sampled.solution - regression).norm() / regression.norm() < 1e-2);
  }
  SUBCASE("stack and split invert each other") {
    WienerProblem w;
    w.nodes = 2;
    w.filter_length = 3;
    std::vector<TapVector> f = {TapVector::LinSpaced(3, 0, 2), TapVector::LinSpaced(3, 5, 7)};
    const auto back = w.split(WienerProblem::stack(f));
    CHECK(back[0] == f[0]);
    CHECK(back[1] == f[1]);
  }
  SUBCASE("a singular system is reported") {
    auto scene = identity_scene(2, 4);
    scene.estimate(1, 1).setZero();
    WienerProblem w = build_wiener(scene, TapVector::Ones(1), 4);
    CHECK_THROWS_AS(solve_wiener(w, 0.0), ConditioningError);
    scene.estimate(0, 0).setZero();
    WienerProblem empty = build_wiener(scene, TapVector::Ones(1), 4);
    CHECK_THROWS_AS(solve_wiener(empty), ConditioningError);
  }
}

TEST_CASE("step-size bounds") {
  SUBCASE("delay factor") {
    CHECK(delay_factor(0) == 1.0);
    CHECK(delay_factor(1) == doctest::Approx(0.5).epsilon(1e-15));
    double previous = delay_factor(0);
    for (std::int64_t d = 1; d < 2000; d += 7) {
      CHECK(delay_factor(d) < previous);
      previous = delay_factor(d);
    }
    CHECK(delay_factor(100000000) < 1e-7);
  }
  SUBCASE("identity correlations give 2/K") {
    for (int K : {1, 2, 6}) {
      const auto scene = identity_scene(K, 4);
      TapVector white = TapVector::Zero(16);
      white[0] = 1.0;
      const auto report = step_bounds(scene, white, 8, 0);
      // Only the self path is non-zero, so each node sees one unit eigenvalue.
      CHECK(report.eigen_sum[0] == doctest::Approx(1.0));
    }
    AcousticScene s = identity_scene(6, 4);
    for (int m = 0; m < 6; ++m) {
      for (int k = 0; k < 6; ++k) {
        s.secondary(m, k) = TapVector::Zero(4);
        s.secondary(m, k)[m == k ? 0 : 1] = 1.0;
      }
    }
    s.estimate = s.secondary;
    TapVector white = TapVector::Zero(16);
    white[0] = 1.0;
    const auto report = step_bounds(s, white, 8, 0);
    for (double b : report.bound_no_delay) CHECK(b == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(report.global_no_delay == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  }
  SUBCASE("delayed bound at zero delay equals the delay-free bound") {
    const auto scene = synthesize_scene(SceneRecipe{}).scene;
    TapVector white = TapVector::Zero(200);
    white[0] = 1.0;
    const auto r0 = step_bounds(scene, white, 16, 0);
    CHECK(r0.global_delay == r0.global_no_delay);
    const auto r1 = step_bounds(scene, white, 16, 1);
    CHECK(r1.global_delay == doctest::Approx(0.5 * r0.global_no_delay).epsilon(1e-14));
  }
}

TEST_CASE("characteristic polynomial stability") {
  SUBCASE("no delay: stable iff mu * sum < 2") {
    CHECK(char_poly_stable(1.9, 1.0, 0).stable);
    CHECK_FALSE(char_poly_stable(2.1, 1.0, 0).stable);
    CHECK(char_poly_stable(0.5, 1.0, 0).max_root == doctest::Approx(0.5).epsilon(1e-12));
  }
  SUBCASE("at the closed-form boundary the largest root is on the unit circle") {
    for (std::int64_t d : {1, 2, 5, 10, 33, 64}) {
      const double eigen_sum = 3.7;
      const double mu = 2.0 / eigen_sum * delay_factor(d);
      CHECK(char_poly_stable(mu, eigen_sum, d).max_root == doctest::Approx(1.0).epsilon(1e-6));
    }
  }
  SUBCASE("half the boundary is stable") {
    const double mu = 0.5 * 2.0 / 2.0 * delay_factor(10);
    const auto res = char_poly_stable(mu, 2.0, 10);
    CHECK(res.stable);
    CHECK(res.max_root < 1.0);
  }
  SUBCASE("long delays fall back to the closed form, absurd ones are refused") {
    const double bound = 2.0 * delay_factor(100000);
    CHECK(char_poly_stable(0.99 * bound, 1.0, 100000).stable);
    CHECK(char_poly_stable(0.99 * bound, 1.0, 100000).closed_form);
    CHECK_FALSE(char_poly_stable(1.01 * bound, 1.0, 100000).stable);
    CHECK_THROWS_AS(char_poly_stable(1e-12, 1.0, 1000000000), CapabilityError);
  }
}

TEST_CASE("complexity") {
  SUBCASE("K=6, N=512, L=256, H=33") {
    const auto rows = complexity(6, 512, 256, 33);
    REQUIRE(rows.size() == 5);
    CHECK(rows[0].algorithm == "MCFxLMS");
    CHECK(rows[0].multiplications == 49152);
    CHECK(rows[0].additions == 30678);
    CHECK(rows[1].multiplications == 4864);
    CHECK(rows[1].additions == 3838);
    CHECK(rows[2].multiplications == 26624);
    CHECK(rows[2].additions == 20473);
    CHECK(rows[3].multiplications == 17696);
    CHECK(rows[3].additions == 19198);
    CHECK(rows[4].multiplications == 17698);
    CHECK(rows[4].additions == 19198);
  }
  SUBCASE("single-channel MCFxLMS") {
    CHECK(complexity(1, 64, 32, 1)[0].multiplications == (2 * 64 + 32) + 64);
  }
  SUBCASE("MGDFxLMS with H=1 (hand evaluation)") {
    const auto rows = complexity(6, 512, 256, 1);
    CHECK(rows[3].multiplications == 2304);
    CHECK(rows[3].additions == 3838);
    CHECK(rows[4].multiplications == 2306);
  }
  CHECK_THROWS_AS(complexity(0, 1, 1, 1), ParameterError);
}
