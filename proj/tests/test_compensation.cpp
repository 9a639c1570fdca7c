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

#include <filesystem>

#include "dmanc/compensation.hpp"
#include "oracles.hpp"

using namespace dmanc;

namespace {

SceneRecipe small_recipe(bool exact) {
  SceneRecipe r;
  r.nodes = 3;
  r.path_length = 32;
  r.tail_length = 16;
  r.decay = 0.2;
  r.exact_compensation = exact;
  r.compensation_length = 8;
  r.primary_delay_min = 8;
  r.primary_delay_max = 12;
  r.seed = 5;
  return r;
}

}  // namespace

TEST_CASE("identical self and cross paths give a unit impulse") {
  auto scene = synthesize_scene(small_recipe(false)).scene;
  scene.secondary(0, 1) = scene.secondary(0, 0);
  scene.secondary(1, 1) = scene.secondary(0, 0);  // keep the geometry valid
  scene.estimate = scene.secondary;
  CompTrainConfig cfg;
  cfg.length = 8;
  cfg.iterations = 60000;
  const auto result = train_compensation(scene, 0, 1, cfg);
  TapVector delta = TapVector::Zero(8);
  delta[0] = 1.0;
  CHECK((result.filter - delta).norm() < 1e-3);
}

TEST_CASE("exact-compensation scene recovers the constructed filters") {
  const auto synthetic = synthesize_scene(small_recipe(true));
  CompTrainConfig cfg;
  cfg.length = 8;
  cfg.iterations = 60000;
  for (auto [m, k] : {std::pair{0, 1}, std::pair{2, 0}}) {
    const auto result = train_compensation(synthetic.scene, m, k, cfg);
    const TapVector& truth = (*synthetic.compensation_true)(m, k);
    CHECK(oracle::relative_l2(result.filter, truth) < 1e-2);
    CHECK(result.final_error_power < 1e-3 * result.initial_error_power);
  }
}

TEST_CASE("general scene matches the least-squares oracle") {
  const auto scene = synthesize_scene(small_recipe(false)).scene;
  CompTrainConfig cfg;
  cfg.length = 8;
  cfg.iterations = 100000;
  for (auto [m, k] : {std::pair{0, 2}, std::pair{1, 0}}) {
    const auto result = train_compensation(scene, m, k, cfg);
    const TapVector ls = oracle::least_squares_compensation(scene.secondary(m, m), scene.secondary(m, k), 8);
    CHECK(oracle::relative_l2(result.filter, ls) < 0.05);
  }
}

TEST_CASE("training is deterministic and validates its inputs") {
  const auto scene = synthesize_scene(small_recipe(false)).scene;
  CompTrainConfig cfg;
  cfg.length = 4;
  cfg.iterations = 3000;
  CHECK(train_compensation(scene, 0, 1, cfg).filter == train_compensation(scene, 0, 1, cfg).filter);
  CHECK_THROWS_AS(train_compensation(scene, 1, 1, cfg), ParameterError);
  CHECK_THROWS_AS(train_compensation(scene, 0, 3, cfg), DimensionError);
  cfg.length = 64;
  CHECK_THROWS_AS(train_compensation(scene, 0, 1, cfg), ParameterError);
}

TEST_CASE("an oversized step is reported as divergence") {
  const auto scene = synthesize_scene(small_recipe(false)).scene;
  CompTrainConfig cfg;
  cfg.length = 8;
  cfg.step = 5.0;
  cfg.iterations = 20000;
  CHECK_THROWS_AS(train_compensation(scene, 0, 1, cfg), Diverged);
}

TEST_CASE("train_all") {
  CompTrainConfig cfg;
  cfg.length = 4;
  cfg.iterations = 2000;
  SUBCASE("K=1 is just the identity") {
    auto r = small_recipe(false);
    r.nodes = 1;
    const auto bank = train_all(synthesize_scene(r).scene, cfg);
    CHECK(bank.training.empty());
    CHECK(bank.filters(0, 0)[0] == 1.0);
    CHECK(bank.filters(0, 0).tail(3).isZero());
  }
  SUBCASE("K=3 trains six filters") {
    const auto bank = train_all(synthesize_scene(small_recipe(false)).scene, cfg);
    CHECK(bank.training.size() == 6);
    for (int k = 0; k < 3; ++k) CHECK(bank.filters(k, k)[0] == 1.0);
  }
  SUBCASE("save and load") {
    const auto bank = train_all(synthesize_scene(small_recipe(false)).scene, cfg);
    const auto path = (std::filesystem::temp_directory_path() / "dmanc_bank.paths").string();
    save_bank(bank, path);
    const auto back = load_bank(path);
    for (int m = 0; m < 3; ++m) {
      for (int k = 0; k < 3; ++k) CHECK(back.filters(m, k) == bank.filters(m, k));
    }
    std::filesystem::remove(path);
  }
}
