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
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dmanc/analysis.hpp"
#include "dmanc/compensation.hpp"
#include "dmanc/controllers.hpp"
#include "dmanc/network.hpp"
#include "dmanc/scene.hpp"
#include "dmanc/signal_source.hpp"

namespace dmanc {

enum class Algorithm { kMcFxlms, kDecentralized, kDiffusionAtc, kDiffusionCta, kMgd, kAsssMgd };

Algorithm parse_algorithm(const std::string& name);
std::string to_string(Algorithm algorithm);
bool needs_compensation(Algorithm algorithm);

struct AlgorithmSpec {
  Algorithm kind = Algorithm::kMgd;
  // Exactly one of mu / mu_rel is used; mu_rel scales the smallest
  // delay-free eigenvalue bound of the scene.
  std::optional<double> mu;
  std::optional<double> mu_rel;
  std::string topology = "ring";  // diffusion only: ring | full | identity
  std::string label;              // defaults to the algorithm name
};

struct DelaySpec {
  enum class Kind { kNone, kConstant, kSteps, kSinusoid, kPerNodeSinusoid };
  Kind kind = Kind::kNone;
  std::int64_t samples = 0;                                  // constant
  std::vector<std::pair<std::int64_t, std::int64_t>> steps;  // (start, delay) in samples
  double rate_hz = 0.1;                                      // sinusoid
  double amplitude = 8000.0;                                 // sinusoid, samples
};

struct CompensationSpec {
  enum class Source { kTrain, kTruth, kFile };
  Source source = Source::kTrain;
  std::string file;
  CompTrainConfig train;
};

struct Scenario {
  std::string name = "scenario";
  double fs = 8000.0;
  std::int64_t duration = 0;  // samples
  Eigen::Index filter_length = 128;
  std::optional<SceneRecipe> recipe;
  std::string scene_file;
  SourceSpec noise;
  CompensationSpec compensation;
  std::vector<AlgorithmSpec> algorithms;
  DelaySpec delays;
  std::int64_t nse_window = 5000;
  std::int64_t trace_stride = 100;
  double ceiling = 1e6;
  std::string output_dir;

  // Throws ParameterError on anything that would fail mid-run.
  void validate() const;
};

enum class Preset { kDesk, kPaper };
Preset parse_preset(const std::string& name);

// Baseline scenario for a preset: scene dimensions, fs, compensation length.
Scenario preset_scenario(Preset preset);
// One of the experiment cases "A".."F" at the given scale.
Scenario case_scenario(const std::string& id, Preset preset);

// Fields present in `config` override `base`.
Scenario scenario_from_json(const nlohmann::json& config, Scenario base);
nlohmann::json scenario_to_json(const Scenario& scenario);
Scenario load_scenario(const std::string& path, Scenario base);

// Sets the scene, noise and compensation seeds from one base seed.
void apply_seed(Scenario& scenario, std::uint64_t seed);

std::string scenario_hash(const Scenario& scenario);

struct TraceRow {
  std::int64_t sample = 0;
  int node = 0;
  double nse_db = 0.0;
  double mu = 0.0;
  std::int64_t delta = 0;
};

struct AlgorithmRun {
  std::string label;
  Algorithm kind = Algorithm::kMgd;
  double mu = 0.0;
  std::vector<TraceRow> trace;
  ControlFilterSet final_filters;
  std::vector<bool> diverged;
  std::optional<std::int64_t> diverged_at;
  std::int64_t samples_run = 0;
  std::vector<double> terminal_nse_db;  // trailing-window NSE at the end of the run
  double wall_clock_s = 0.0;
};

struct RunRecord {
  std::string scenario_hash;
  std::string scenario_name;
  int nodes = 0;
  std::vector<AlgorithmRun> runs;
  std::optional<CompensationBank> bank;
  double mu_reference = 0.0;  // the bound mu_rel is scaled against (0 if unused)

  const AlgorithmRun& find(const std::string& label) const;
};

struct PreparedScene {
  AcousticScene scene;
  std::optional<PathMatrix> compensation_true;
  TapVector reference_autocorrelation;  // empty when unknown
};

PreparedScene prepare_scene(const Scenario& scenario);
MessageBus make_bus(const Scenario& scenario, int nodes);

// Runs every algorithm of the scenario against the same scene and noise.
RunRecord run(const Scenario& scenario);

// Writes <label>.csv traces, filters_<label>.paths and record.json.
void write_outputs(const RunRecord& record, const std::string& dir);
std::string trace_csv(const AlgorithmRun& run);
nlohmann::json record_to_json(const RunRecord& record);

enum class CompareMode { kWeights, kNseCurves };

struct NodeDifference {
  int node = 0;
  double relative_l2 = 0.0;  // weights mode
  double max_abs = 0.0;      // weights mode
  double nse_delta_db = 0.0; // curve mode
};

struct ComparisonReport {
  CompareMode mode = CompareMode::kWeights;
  std::string a;
  std::string b;
  bool a_diverged = false;
  bool b_diverged = false;
  std::vector<NodeDifference> nodes;
  double worst() const;
};

ComparisonReport compare(const AlgorithmRun& a, const AlgorithmRun& b, CompareMode mode);
nlohmann::json comparison_to_json(const ComparisonReport& report);

enum class SweepAxis { kCompensationLength, kStepSize, kDelay };
SweepAxis parse_sweep_axis(const std::string& name);

struct SweepResult {
  std::vector<double> values;
  std::vector<RunRecord> records;
  std::string summary_csv() const;
};

SweepResult sweep(const Scenario& base, SweepAxis axis, const std::vector<double>& values);

// Bounds, eigen summaries, Wiener residual and complexity rows as JSON.
nlohmann::json analyze(const Scenario& scenario, std::int64_t delay);

}  // namespace dmanc
