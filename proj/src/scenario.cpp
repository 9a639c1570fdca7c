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

#include "dmanc/scenario.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <set>
#include <sstream>

namespace dmanc {

using nlohmann::json;

// --- names ------------------------------------------------------------------

Algorithm parse_algorithm(const std::string& name) {
  if (name == "mcfxlms") return Algorithm::kMcFxlms;
  if (name == "decentralized") return Algorithm::kDecentralized;
  if (name == "dfxlms-atc" || name == "dfxlms") return Algorithm::kDiffusionAtc;
  if (name == "dfxlms-cta") return Algorithm::kDiffusionCta;
  if (name == "mgdfxlms") return Algorithm::kMgd;
  if (name == "asss-mgdfxlms") return Algorithm::kAsssMgd;
  throw ParameterError("unknown algorithm '" + name + "'");
}

std::string to_string(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::kMcFxlms: return "mcfxlms";
    case Algorithm::kDecentralized: return "decentralized";
    case Algorithm::kDiffusionAtc: return "dfxlms-atc";
    case Algorithm::kDiffusionCta: return "dfxlms-cta";
    case Algorithm::kMgd: return "mgdfxlms";
    case Algorithm::kAsssMgd: return "asss-mgdfxlms";
  }
  return "?";
}

bool needs_compensation(Algorithm algorithm) {
  return algorithm == Algorithm::kMgd || algorithm == Algorithm::kAsssMgd;
}

Preset parse_preset(const std::string& name) {
  if (name == "desk") return Preset::kDesk;
  if (name == "paper") return Preset::kPaper;
  throw ParameterError("unknown preset '" + name + "' (expected desk or paper)");
}

SweepAxis parse_sweep_axis(const std::string& name) {
  if (name == "H") return SweepAxis::kCompensationLength;
  if (name == "mu") return SweepAxis::kStepSize;
  if (name == "delta") return SweepAxis::kDelay;
  throw ParameterError("unknown sweep axis '" + name + "' (expected H, mu or delta)");
}

// --- presets ----------------------------------------------------------------

Scenario preset_scenario(Preset preset) {
  Scenario s;
  SceneRecipe recipe;
  if (preset == Preset::kDesk) {
    s.name = "desk";
    s.fs = 8000.0;
    s.filter_length = 128;
    recipe.nodes = 4;
    recipe.path_length = 64;
    recipe.tail_length = 32;
    recipe.decay = 0.2;
    recipe.primary_delay_min = 16;
    recipe.primary_delay_max = 24;
    recipe.cross_extra_delay_min = 4;
    recipe.cross_extra_delay_max = 10;
    recipe.cross_gain = 0.5;
    recipe.compensation_length = 16;
    s.noise.bandpass_order = 255;
  } else {
    s.name = "paper";
    s.fs = 16000.0;
    s.filter_length = 512;
    recipe.nodes = 6;
    recipe.path_length = 256;
    recipe.tail_length = 128;
    recipe.self_delay_max = 8;
    recipe.cross_extra_delay_min = 8;
    recipe.cross_extra_delay_max = 20;
    recipe.primary_delay_min = 40;
    recipe.primary_delay_max = 60;
    recipe.decay = 0.05;
    recipe.cross_gain = 0.5;
    recipe.compensation_length = 33;
    s.noise.bandpass_order = 511;
  }
  recipe.exact_compensation = true;
  recipe.control_length = s.filter_length;
  s.recipe = recipe;
  s.duration = static_cast<std::int64_t>(25 * s.fs);
  s.noise.kind = SourceKind::kBandpassBroadband;
  s.noise.fs = s.fs;
  s.noise.low_hz = 100.0;
  s.noise.high_hz = 1000.0;
  s.compensation.train.length = recipe.compensation_length;
  s.algorithms = {AlgorithmSpec{Algorithm::kMgd, std::nullopt, 0.0025, "ring", ""}};
  apply_seed(s, 1);
  return s;
}

namespace {

// Quoted case step sizes map onto fractions of the scene's eigenvalue bound,
// 1e-6 -> 0.0025.
constexpr double kStepToRelative = 0.0025 / 1e-6;

AlgorithmSpec relative(Algorithm kind, double quoted_mu) {
  return AlgorithmSpec{kind, std::nullopt, quoted_mu * kStepToRelative, "ring", ""};
}

}  // namespace

Scenario case_scenario(const std::string& id, Preset preset) {
  Scenario s = preset_scenario(preset);
  const double scale = s.fs / 16000.0;  // delays are quoted at 16 kHz
  auto samples = [&](double paper_samples) { return std::llround(paper_samples * scale); };
  auto seconds = [&](double t) { return std::llround(t * s.fs); };
  s.name = std::string("case-") + id + "-" + (preset == Preset::kDesk ? "desk" : "paper");
  if (id == "A") {
    s.duration = seconds(25.0);
    s.algorithms = {relative(Algorithm::kMcFxlms, 1e-6), relative(Algorithm::kMgd, 1e-6),
                    relative(Algorithm::kDiffusionAtc, 1e-7)};
  } else if (id == "B") {
    s.duration = seconds(25.0);
    s.algorithms = {relative(Algorithm::kMgd, 1e-6)};
  } else if (id == "C") {
    s.duration = seconds(25.0);
    s.noise.kind = SourceKind::kFilePlayback;
    s.algorithms = {relative(Algorithm::kMcFxlms, 5e-6), relative(Algorithm::kMgd, 5e-6),
                    relative(Algorithm::kDiffusionAtc, 1e-7)};
  } else if (id == "D") {
    s.duration = seconds(40.0);
    s.delays.kind = DelaySpec::Kind::kSteps;
    s.delays.steps = {{0, samples(4000)},
                      {seconds(10.0), samples(8000)},
                      {seconds(20.0), samples(16000)},
                      {seconds(30.0), samples(8000)}};
    s.algorithms = {relative(Algorithm::kAsssMgd, 3e-7), relative(Algorithm::kMgd, 1.5e-7),
                    relative(Algorithm::kDiffusionAtc, 1.5e-7)};
  } else if (id == "E") {
    s.duration = seconds(40.0);
    s.delays.kind = DelaySpec::Kind::kSinusoid;
    s.delays.rate_hz = 0.1;
    s.delays.amplitude = 8000.0 * scale;
    s.algorithms = {relative(Algorithm::kAsssMgd, 3e-7), relative(Algorithm::kMgd, 1.5e-7),
                    relative(Algorithm::kDiffusionAtc, 1.5e-7)};
  } else if (id == "F") {
    s.duration = seconds(40.0);
    s.delays.kind = DelaySpec::Kind::kPerNodeSinusoid;
    s.delays.rate_hz = 0.05;
    s.delays.amplitude = 8000.0 * scale;
    s.algorithms = {relative(Algorithm::kAsssMgd, 1e-6), relative(Algorithm::kMgd, 7e-7),
                    relative(Algorithm::kDiffusionAtc, 7e-7)};
  } else {
    throw ParameterError("unknown case '" + id + "' (expected A-F)");
  }
  return s;
}

void apply_seed(Scenario& scenario, std::uint64_t seed) {
  if (scenario.recipe) scenario.recipe->seed = seed;
  scenario.noise.seed = seed + 1;
  scenario.compensation.train.seed = seed + 2;
}

// --- JSON -------------------------------------------------------------------

namespace {

void check_keys(const json& object, const std::set<std::string>& allowed, const std::string& where) {
  if (!object.is_object()) throw ParameterError(where + ": expected an object");
  for (const auto& [key, value] : object.items()) {
    if (!allowed.count(key)) throw ParameterError(where + ": unknown key '" + key + "'");
  }
}

template <typename T>
void read(const json& object, const char* key, T& out) {
  if (object.contains(key)) {
    try {
      out = object.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ParameterError(std::string("config key '") + key + "': " + e.what());
    }
  }
}

void read_range(const json& object, const char* key, Eigen::Index& lo, Eigen::Index& hi) {
  if (!object.contains(key)) return;
  const auto& v = object.at(key);
  if (!v.is_array() || v.size() != 2) throw ParameterError(std::string("config key '") + key + "': expected [lo, hi]");
  lo = v[0].get<Eigen::Index>();
  hi = v[1].get<Eigen::Index>();
}

std::string delay_kind_name(DelaySpec::Kind kind) {
  switch (kind) {
    case DelaySpec::Kind::kNone: return "none";
    case DelaySpec::Kind::kConstant: return "constant";
    case DelaySpec::Kind::kSteps: return "steps";
    case DelaySpec::Kind::kSinusoid: return "sinusoid";
    case DelaySpec::Kind::kPerNodeSinusoid: return "per-node-sinusoid";
  }
  return "?";
}

DelaySpec::Kind parse_delay_kind(const std::string& name) {
  for (auto kind : {DelaySpec::Kind::kNone, DelaySpec::Kind::kConstant, DelaySpec::Kind::kSteps,
                    DelaySpec::Kind::kSinusoid, DelaySpec::Kind::kPerNodeSinusoid}) {
    if (delay_kind_name(kind) == name) return kind;
  }
  throw ParameterError("unknown delay kind '" + name + "'");
}

std::string compensation_source_name(CompensationSpec::Source source) {
  switch (source) {
    case CompensationSpec::Source::kTrain: return "train";
    case CompensationSpec::Source::kTruth: return "truth";
    case CompensationSpec::Source::kFile: return "file";
  }
  return "?";
}

}  // namespace

Scenario scenario_from_json(const json& c, Scenario s) {
  check_keys(c, {"name", "fs", "duration_samples", "duration_s", "filter_length", "scene", "noise",
                 "compensation", "algorithms", "delays", "nse_window", "trace_stride", "ceiling",
                 "output_dir", "seed"},
             "config");
  read(c, "name", s.name);
  read(c, "fs", s.fs);
  read(c, "filter_length", s.filter_length);
  read(c, "nse_window", s.nse_window);
  read(c, "trace_stride", s.trace_stride);
  read(c, "ceiling", s.ceiling);
  read(c, "output_dir", s.output_dir);
  s.noise.fs = s.fs;
  if (c.contains("duration_samples")) {
    read(c, "duration_samples", s.duration);
  } else if (c.contains("duration_s")) {
    s.duration = std::llround(c.at("duration_s").get<double>() * s.fs);
  }

  if (c.contains("scene")) {
    const json& sc = c.at("scene");
    if (sc.contains("file")) {
      check_keys(sc, {"file"}, "scene");
      s.scene_file = sc.at("file").get<std::string>();
      s.recipe.reset();
    } else {
      check_keys(sc, {"seed", "nodes", "path_length", "primary_length", "self_delay", "cross_extra_delay",
                      "primary_delay", "tail_length", "decay", "cross_gain", "exact_compensation",
                      "compensation_length", "realizable_primary", "estimate_perturbation"},
                 "scene");
      SceneRecipe r = s.recipe.value_or(SceneRecipe{});
      read(sc, "seed", r.seed);
      read(sc, "nodes", r.nodes);
      read(sc, "path_length", r.path_length);
      read(sc, "primary_length", r.primary_length);
      read_range(sc, "self_delay", r.self_delay_min, r.self_delay_max);
      read_range(sc, "cross_extra_delay", r.cross_extra_delay_min, r.cross_extra_delay_max);
      read_range(sc, "primary_delay", r.primary_delay_min, r.primary_delay_max);
      read(sc, "tail_length", r.tail_length);
      read(sc, "decay", r.decay);
      read(sc, "cross_gain", r.cross_gain);
      read(sc, "exact_compensation", r.exact_compensation);
      read(sc, "compensation_length", r.compensation_length);
      read(sc, "realizable_primary", r.realizable_primary);
      read(sc, "estimate_perturbation", r.estimate_perturbation);
      s.recipe = r;
      s.scene_file.clear();
    }
  }
  if (s.recipe) s.recipe->control_length = s.filter_length;

  if (c.contains("noise")) {
    const json& n = c.at("noise");
    check_keys(n, {"kind", "seed", "amplitude", "low_hz", "high_hz", "order", "frequency_hz", "file", "loop"},
               "noise");
    if (n.contains("kind")) s.noise.kind = parse_source_kind(n.at("kind").get<std::string>());
    read(n, "seed", s.noise.seed);
    read(n, "amplitude", s.noise.amplitude);
    read(n, "low_hz", s.noise.low_hz);
    read(n, "high_hz", s.noise.high_hz);
    read(n, "order", s.noise.bandpass_order);
    read(n, "frequency_hz", s.noise.frequency_hz);
    read(n, "file", s.noise.path);
    read(n, "loop", s.noise.loop);
  }

  if (c.contains("compensation")) {
    const json& cc = c.at("compensation");
    check_keys(cc, {"source", "file", "length", "step", "iterations", "seed", "tolerance", "delta_init",
                    "anneal_fraction", "anneal_floor"},
               "compensation");
    if (cc.contains("source")) {
      const auto name = cc.at("source").get<std::string>();
      if (name == "train") {
        s.compensation.source = CompensationSpec::Source::kTrain;
      } else if (name == "truth") {
        s.compensation.source = CompensationSpec::Source::kTruth;
      } else if (name == "file") {
        s.compensation.source = CompensationSpec::Source::kFile;
      } else {
        throw ParameterError("unknown compensation source '" + name + "'");
      }
    }
    read(cc, "file", s.compensation.file);
    auto& t = s.compensation.train;
    read(cc, "length", t.length);
    read(cc, "step", t.step);
    read(cc, "iterations", t.iterations);
    read(cc, "seed", t.seed);
    read(cc, "tolerance", t.tolerance);
    read(cc, "delta_init", t.delta_init);
    read(cc, "anneal_fraction", t.anneal_fraction);
    read(cc, "anneal_floor", t.anneal_floor);
  }

  if (c.contains("algorithms")) {
    const json& list = c.at("algorithms");
    if (!list.is_array()) throw ParameterError("config: 'algorithms' must be an array");
    s.algorithms.clear();
    for (const auto& a : list) {
      check_keys(a, {"kind", "mu", "mu_rel", "topology", "label"}, "algorithm");
      AlgorithmSpec spec;
      spec.kind = parse_algorithm(a.at("kind").get<std::string>());
      if (a.contains("mu")) spec.mu = a.at("mu").get<double>();
      if (a.contains("mu_rel")) spec.mu_rel = a.at("mu_rel").get<double>();
      read(a, "topology", spec.topology);
      read(a, "label", spec.label);
      s.algorithms.push_back(spec);
    }
  }

  if (c.contains("delays")) {
    const json& d = c.at("delays");
    check_keys(d, {"kind", "samples", "seconds", "steps", "unit", "rate_hz", "amplitude", "amplitude_s"},
               "delays");
    DelaySpec spec;
    if (d.contains("kind")) spec.kind = parse_delay_kind(d.at("kind").get<std::string>());
    std::string unit = "samples";
    read(d, "unit", unit);
    if (unit != "samples" && unit != "seconds") throw ParameterError("delays: unit must be samples or seconds");
    const double to_samples = unit == "seconds" ? s.fs : 1.0;
    if (d.contains("samples")) spec.samples = d.at("samples").get<std::int64_t>();
    if (d.contains("seconds")) spec.samples = std::llround(d.at("seconds").get<double>() * s.fs);
    if (d.contains("steps")) {
      for (const auto& bp : d.at("steps")) {
        if (!bp.is_array() || bp.size() != 2) throw ParameterError("delays: steps entries are [start, delay]");
        spec.steps.emplace_back(std::llround(bp[0].get<double>() * to_samples),
                                std::llround(bp[1].get<double>() * to_samples));
      }
    }
    read(d, "rate_hz", spec.rate_hz);
    read(d, "amplitude", spec.amplitude);
    if (d.contains("amplitude_s")) spec.amplitude = d.at("amplitude_s").get<double>() * s.fs;
    s.delays = spec;
  }

  if (c.contains("seed")) apply_seed(s, c.at("seed").get<std::uint64_t>());
  return s;
}

json scenario_to_json(const Scenario& s) {
  json out;
  out["name"] = s.name;
  out["fs"] = s.fs;
  out["duration_samples"] = s.duration;
  out["filter_length"] = s.filter_length;
  if (s.recipe) {
    const auto& r = *s.recipe;
    out["scene"] = {{"seed", r.seed},
                    {"nodes", r.nodes},
                    {"path_length", r.path_length},
                    {"primary_length", r.primary_length},
                    {"self_delay", {r.self_delay_min, r.self_delay_max}},
                    {"cross_extra_delay", {r.cross_extra_delay_min, r.cross_extra_delay_max}},
                    {"primary_delay", {r.primary_delay_min, r.primary_delay_max}},
                    {"tail_length", r.tail_length},
                    {"decay", r.decay},
                    {"cross_gain", r.cross_gain},
                    {"exact_compensation", r.exact_compensation},
                    {"compensation_length", r.compensation_length},
                    {"realizable_primary", r.realizable_primary},
                    {"estimate_perturbation", r.estimate_perturbation}};
  } else {
    out["scene"] = {{"file", s.scene_file}};
  }
  out["noise"] = {{"kind", to_string(s.noise.kind)}, {"seed", s.noise.seed},
                  {"amplitude", s.noise.amplitude}, {"low_hz", s.noise.low_hz},
                  {"high_hz", s.noise.high_hz},    {"order", s.noise.bandpass_order},
                  {"frequency_hz", s.noise.frequency_hz}, {"file", s.noise.path},
                  {"loop", s.noise.loop}};
  const auto& t = s.compensation.train;
  out["compensation"] = {{"source", compensation_source_name(s.compensation.source)},
                         {"file", s.compensation.file},
                         {"length", t.length},
                         {"step", t.step},
                         {"iterations", t.iterations},
                         {"seed", t.seed},
                         {"tolerance", t.tolerance},
                         {"delta_init", t.delta_init},
                         {"anneal_fraction", t.anneal_fraction},
                         {"anneal_floor", t.anneal_floor}};
  out["algorithms"] = json::array();
  for (const auto& a : s.algorithms) {
    json j = {{"kind", to_string(a.kind)}, {"topology", a.topology}};
    if (a.mu) j["mu"] = *a.mu;
    if (a.mu_rel) j["mu_rel"] = *a.mu_rel;
    if (!a.label.empty()) j["label"] = a.label;
    out["algorithms"].push_back(j);
  }
  json steps = json::array();
  for (const auto& [start, delay] : s.delays.steps) steps.push_back({start, delay});
  out["delays"] = {{"kind", delay_kind_name(s.delays.kind)}, {"samples", s.delays.samples},
                   {"steps", steps},
                   {"rate_hz", s.delays.rate_hz},
                   {"amplitude", s.delays.amplitude}};
  out["nse_window"] = s.nse_window;
  out["trace_stride"] = s.trace_stride;
  out["ceiling"] = s.ceiling;
  return out;
}

Scenario load_scenario(const std::string& path, Scenario base) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open config " + path);
  json config;
  try {
    config = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError("config " + path + ": " + e.what());
  }
  return scenario_from_json(config, std::move(base));
}

std::string scenario_hash(const Scenario& scenario) {
  const std::string canonical = scenario_to_json(scenario).dump();
  std::uint64_t h = 1469598103934665603ull;  // FNV-1a
  for (unsigned char ch : canonical) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// --- validation -------------------------------------------------------------

void Scenario::validate() const {
  auto fail = [](const std::string& what) { throw ParameterError("scenario: " + what); };
  if (!(fs > 0.0)) fail("fs must be positive");
  if (duration < 0) fail("duration must be non-negative");
  if (filter_length < 1) fail("filter_length must be >= 1");
  if (nse_window < 1 || trace_stride < 1) fail("nse_window and trace_stride must be >= 1");
  if (!(ceiling > 0.0)) fail("ceiling must be positive");
  if (!recipe && scene_file.empty()) fail("no scene recipe or scene file");
  if (!scene_file.empty() && !std::filesystem::exists(scene_file)) fail("scene file not found: " + scene_file);
  if (noise.kind == SourceKind::kFilePlayback) {
    if (noise.path.empty()) fail("file-playback noise needs noise.file");
    if (!std::filesystem::exists(noise.path)) fail("noise file not found: " + noise.path);
  }
  if (noise.kind == SourceKind::kBandpassBroadband &&
      !(noise.low_hz > 0.0 && noise.low_hz < noise.high_hz && noise.high_hz < fs / 2.0)) {
    fail("bandpass edges must satisfy 0 < low < high < fs/2");
  }
  if (algorithms.empty()) fail("no algorithms listed");
  bool wants_bank = false;
  std::set<std::string> labels;
  for (const auto& a : algorithms) {
    if (a.mu.has_value() == a.mu_rel.has_value()) fail("each algorithm needs exactly one of mu / mu_rel");
    if (!(a.mu.value_or(0.0) >= 0.0) || !(a.mu_rel.value_or(0.0) >= 0.0)) fail("step sizes must be >= 0");
    if (a.topology != "ring" && a.topology != "full" && a.topology != "identity") fail("unknown topology " + a.topology);
    const std::string label = a.label.empty() ? to_string(a.kind) : a.label;
    if (!labels.insert(label).second) fail("duplicate algorithm label " + label);
    wants_bank = wants_bank || needs_compensation(a.kind);
  }
  if (wants_bank) {
    switch (compensation.source) {
      case CompensationSpec::Source::kTrain:
        if (compensation.train.length < 1) fail("compensation length must be >= 1");
        break;
      case CompensationSpec::Source::kTruth:
        if (!recipe || !recipe->exact_compensation) fail("compensation source 'truth' needs an exact-compensation recipe");
        break;
      case CompensationSpec::Source::kFile:
        if (!std::filesystem::exists(compensation.file)) fail("compensation file not found: " + compensation.file);
        break;
    }
  }
  switch (delays.kind) {
    case DelaySpec::Kind::kConstant:
      if (delays.samples < 0) fail("negative delay");
      break;
    case DelaySpec::Kind::kSteps:
      DelaySchedule::steps(delays.steps);
      break;
    case DelaySpec::Kind::kSinusoid:
    case DelaySpec::Kind::kPerNodeSinusoid:
      DelaySchedule::sinusoid(delays.rate_hz, delays.amplitude, 1, fs);
      break;
    case DelaySpec::Kind::kNone:
      break;
  }
  if (recipe) {
    SceneRecipe r = *recipe;
    r.reference_autocorrelation.resize(0);
    synthesize_scene(r);  // throws on an inconsistent recipe
  }
}

// --- preparation ------------------------------------------------------------

namespace {

Eigen::Index correlation_lags(const Scenario& s) {
  Eigen::Index lags = s.filter_length;
  if (s.recipe) {
    const auto& r = *s.recipe;
    const Eigen::Index Lp = r.realizable_primary ? r.path_length + s.filter_length
                                                 : std::max(r.primary_length, r.path_length);
    lags += r.path_length + Lp;
  }
  return lags;
}

TapVector empirical_autocorrelation(const SourceSpec& spec, Eigen::Index max_lag, std::int64_t samples) {
  SignalSource source(spec);
  std::vector<double> x;
  x.reserve(static_cast<std::size_t>(samples));
  while (static_cast<std::int64_t>(x.size()) < samples) {
    try {
      x.push_back(source.next_sample());
    } catch (const EndOfStream&) {
      break;
    }
  }
  if (x.empty()) throw FormatError("noise source produced no samples");
  TapVector r = TapVector::Zero(max_lag + 1);
  const auto n = static_cast<Eigen::Index>(x.size());
  for (Eigen::Index tau = 0; tau <= max_lag && tau < n; ++tau) {
    double acc = 0.0;
    for (Eigen::Index i = tau; i < n; ++i) acc += x[i] * x[i - tau];
    r[tau] = acc / static_cast<double>(n);
  }
  return r;
}

TapVector reference_autocorrelation(const Scenario& s, Eigen::Index max_lag) {
  SignalSource source(s.noise);
  try {
    return source.autocorrelation(max_lag);
  } catch (const CapabilityError&) {
    return empirical_autocorrelation(s.noise, max_lag, 200000);
  }
}

}  // namespace

PreparedScene prepare_scene(const Scenario& scenario) {
  PreparedScene out;
  if (scenario.recipe) {
    SceneRecipe recipe = *scenario.recipe;
    recipe.control_length = scenario.filter_length;
    out.reference_autocorrelation = reference_autocorrelation(scenario, correlation_lags(scenario));
    recipe.reference_autocorrelation = out.reference_autocorrelation;
    SyntheticScene synthetic = synthesize_scene(recipe);
    out.scene = std::move(synthetic.scene);
    out.compensation_true = std::move(synthetic.compensation_true);
  } else {
    out.scene = load_paths(scenario.scene_file);
    const Eigen::Index lags = scenario.filter_length + out.scene.path_length() + out.scene.primary_length();
    out.reference_autocorrelation = reference_autocorrelation(scenario, lags);
  }
  return out;
}

MessageBus make_bus(const Scenario& scenario, int nodes) {
  const DelaySpec& d = scenario.delays;
  switch (d.kind) {
    case DelaySpec::Kind::kNone:
      return MessageBus(nodes, DelaySchedule::constant(0));
    case DelaySpec::Kind::kConstant:
      return MessageBus(nodes, DelaySchedule::constant(d.samples));
    case DelaySpec::Kind::kSteps:
      return MessageBus(nodes, DelaySchedule::steps(d.steps));
    case DelaySpec::Kind::kSinusoid:
      return MessageBus(nodes, DelaySchedule::sinusoid(d.rate_hz, d.amplitude, 1, scenario.fs));
    case DelaySpec::Kind::kPerNodeSinusoid: {
      std::vector<std::vector<DelaySchedule>> links(nodes, std::vector<DelaySchedule>(nodes));
      for (int from = 0; from < nodes; ++from) {
        for (int to = 0; to < nodes; ++to) {
          links[from][to] = DelaySchedule::sinusoid(d.rate_hz, d.amplitude, from + 1, scenario.fs);
        }
      }
      return MessageBus(nodes, std::move(links));
    }
  }
  throw ParameterError("unknown delay kind");
}

// --- running ----------------------------------------------------------------

const AlgorithmRun& RunRecord::find(const std::string& label) const {
  for (const auto& r : runs) {
    if (r.label == label) return r;
  }
  throw ParameterError("no run labelled '" + label + "'");
}

namespace {

DiffusionTopology make_topology(const std::string& name, int nodes) {
  if (name == "ring") return DiffusionTopology::ring(nodes);
  if (name == "full") return DiffusionTopology::full(nodes);
  if (name == "identity") return DiffusionTopology::identity(nodes);
  throw ParameterError("unknown topology '" + name + "'");
}

std::unique_ptr<Controller> make_controller(const Scenario& s, const AlgorithmSpec& spec, double mu,
                                            const AcousticScene& scene,
                                            const std::optional<CompensationBank>& bank) {
  const ControllerOptions opts{s.filter_length, s.ceiling};
  const std::vector<double> per_node(static_cast<std::size_t>(scene.nodes), mu);
  switch (spec.kind) {
    case Algorithm::kMcFxlms:
      return std::make_unique<McFxlms>(scene, mu, opts);
    case Algorithm::kDecentralized:
      return std::make_unique<DecentralizedFxlms>(scene, per_node, opts);
    case Algorithm::kDiffusionAtc:
    case Algorithm::kDiffusionCta:
      return std::make_unique<DiffusionFxlms>(
          scene, make_topology(spec.topology, scene.nodes), per_node,
          spec.kind == Algorithm::kDiffusionAtc ? DiffusionMode::kAdaptThenCombine
                                                : DiffusionMode::kCombineThenAdapt,
          opts);
    case Algorithm::kMgd:
    case Algorithm::kAsssMgd:
      return std::make_unique<MgdNetwork>(scene, *bank, mu, spec.kind == Algorithm::kAsssMgd, s.fs,
                                          make_bus(s, scene.nodes), opts);
  }
  throw ParameterError("unknown algorithm");
}

std::vector<bool> diverged_nodes(const ControlFilterSet& w, double ceiling) {
  std::vector<bool> flags(w.size(), false);
  bool any = false;
  for (std::size_t k = 0; k < w.size(); ++k) {
    if (!w[k].allFinite() || w[k].cwiseAbs().maxCoeff() > ceiling) {
      flags[k] = true;
      any = true;
    }
  }
  if (!any) flags.assign(w.size(), true);
  return flags;
}

AlgorithmRun run_one(const Scenario& s, const AlgorithmSpec& spec, double mu, const AcousticScene& scene,
                     const std::optional<CompensationBank>& bank) {
  const int K = scene.nodes;
  AlgorithmRun out;
  out.label = spec.label.empty() ? to_string(spec.kind) : spec.label;
  out.kind = spec.kind;
  out.mu = mu;
  out.diverged.assign(static_cast<std::size_t>(K), false);

  auto controller = make_controller(s, spec, mu, scene, bank);
  SignalSource source(s.noise);
  PlantState plant(scene);
  NseTracker tracker(K, s.nse_window);

  const auto start = std::chrono::steady_clock::now();
  std::int64_t n = 0;
  try {
    for (; n < s.duration; ++n) {
      double x = 0.0;
      try {
        x = source.next_sample();
      } catch (const EndOfStream&) {
        break;
      }
      const Eigen::VectorXd y = controller->control(x);
      const PlantOutput plant_out = plant.propagate(x, y);
      tracker.push(plant_out.error, plant_out.disturbance);
      controller->adapt(plant_out.error);
      if ((n + 1) % s.trace_stride == 0) {
        for (int k = 0; k < K; ++k) {
          const double db = tracker.nse_db(k);
          if (std::isnan(db)) continue;
          out.trace.push_back(TraceRow{n + 1, k, db, controller->step_size(k), controller->delay(k)});
        }
      }
    }
  } catch (const Diverged&) {
    out.diverged_at = n;
    out.diverged = diverged_nodes(controller->filters(), s.ceiling);
  } catch (const NumericFault&) {
    out.diverged_at = n;
    out.diverged = diverged_nodes(controller->filters(), s.ceiling);
  }
  out.samples_run = n;
  out.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  out.final_filters = controller->filters();
  out.terminal_nse_db.resize(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) out.terminal_nse_db[k] = tracker.nse_db(k);
  return out;
}

std::optional<CompensationBank> resolve_bank(const Scenario& s, const PreparedScene& prepared) {
  bool wanted = false;
  for (const auto& a : s.algorithms) wanted = wanted || needs_compensation(a.kind);
  if (!wanted) return std::nullopt;
  switch (s.compensation.source) {
    case CompensationSpec::Source::kTrain:
      return train_all(prepared.scene, s.compensation.train);
    case CompensationSpec::Source::kTruth: {
      if (!prepared.compensation_true) throw ParameterError("scene has no exact compensation filters");
      CompensationBank bank;
      bank.filters = *prepared.compensation_true;
      return bank;
    }
    case CompensationSpec::Source::kFile: {
      CompensationBank bank = load_bank(s.compensation.file);
      if (bank.filters.nodes() != prepared.scene.nodes) {
        throw DimensionError("compensation file node count does not match the scene");
      }
      return bank;
    }
  }
  return std::nullopt;
}

}  // namespace

RunRecord run(const Scenario& scenario) {
  scenario.validate();
  const PreparedScene prepared = prepare_scene(scenario);
  RunRecord record;
  record.scenario_hash = scenario_hash(scenario);
  record.scenario_name = scenario.name;
  record.nodes = prepared.scene.nodes;
  record.bank = resolve_bank(scenario, prepared);

  bool relative_steps = false;
  for (const auto& a : scenario.algorithms) relative_steps = relative_steps || a.mu_rel.has_value();
  if (relative_steps) {
    record.mu_reference =
        step_bounds(prepared.scene, prepared.reference_autocorrelation, scenario.filter_length, 0)
            .global_no_delay;
  }
  for (const auto& spec : scenario.algorithms) {
    const double mu = spec.mu ? *spec.mu : *spec.mu_rel * record.mu_reference;
    record.runs.push_back(run_one(scenario, spec, mu, prepared.scene, record.bank));
  }
  return record;
}

// --- outputs ----------------------------------------------------------------

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

std::string trace_csv(const AlgorithmRun& run) {
  std::ostringstream out;
  out << "sample,node,nse_db,mu,delta\n";
  for (const auto& row : run.trace) {
    out << row.sample << ',' << row.node << ',' << fmt(row.nse_db) << ',' << fmt(row.mu) << ','
        << row.delta << '\n';
  }
  return out.str();
}

json record_to_json(const RunRecord& record) {
  json out;
  out["scenario_hash"] = record.scenario_hash;
  out["scenario_name"] = record.scenario_name;
  out["nodes"] = record.nodes;
  out["mu_reference"] = record.mu_reference;
  if (record.bank) {
    json pairs = json::array();
    for (const auto& p : record.bank->training) {
      pairs.push_back({{"m", p.m}, {"k", p.k}, {"iterations", p.iterations},
                       {"final_error_power", p.final_error_power}});
    }
    out["compensation"] = {{"length", record.bank->length()}, {"training", pairs}};
  }
  out["runs"] = json::array();
  for (const auto& r : record.runs) {
    json nodes = json::array();
    for (std::size_t k = 0; k < r.terminal_nse_db.size(); ++k) {
      nodes.push_back({{"node", k},
                       {"terminal_nse_db", finite_or_null(r.terminal_nse_db[k])},
                       {"diverged", static_cast<bool>(r.diverged[k])}});
    }
    json entry = {{"label", r.label},
                  {"algorithm", to_string(r.kind)},
                  {"mu", r.mu},
                  {"samples_run", r.samples_run},
                  {"wall_clock_s", r.wall_clock_s},
                  {"nodes", nodes}};
    entry["diverged_at"] = r.diverged_at ? json(*r.diverged_at) : json(nullptr);
    out["runs"].push_back(entry);
  }
  return out;
}

void write_outputs(const RunRecord& record, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path root(dir);
  for (const auto& r : record.runs) {
    std::ofstream csv(root / (r.label + ".csv"));
    if (!csv) throw FormatError("cannot write " + (root / (r.label + ".csv")).string());
    csv << trace_csv(r);

    PathFile file;
    file.nodes = record.nodes;
    const Eigen::Index N = r.final_filters.empty() ? 0 : r.final_filters.front().size();
    PathBlock block = make_block("control", record.nodes, 1, N);
    for (int k = 0; k < record.nodes; ++k) block.at(k, 0) = r.final_filters[k];
    file.blocks.push_back(std::move(block));
    save_path_file((root / ("filters_" + r.label + ".paths")).string(), file);
  }
  if (record.bank) save_bank(*record.bank, (root / "compensation.paths").string());
  std::ofstream json_out(root / "record.json");
  if (!json_out) throw FormatError("cannot write " + (root / "record.json").string());
  json_out << record_to_json(record).dump(2) << '\n';
}

// --- comparison -------------------------------------------------------------

double ComparisonReport::worst() const {
  if (a_diverged || b_diverged) return std::numeric_limits<double>::infinity();
  double w = 0.0;
  for (const auto& n : nodes) {
    w = std::max(w, mode == CompareMode::kWeights ? n.relative_l2 : n.nse_delta_db);
  }
  return w;
}

ComparisonReport compare(const AlgorithmRun& a, const AlgorithmRun& b, CompareMode mode) {
  ComparisonReport report;
  report.mode = mode;
  report.a = a.label;
  report.b = b.label;
  report.a_diverged = a.diverged_at.has_value();
  report.b_diverged = b.diverged_at.has_value();
  if (a.final_filters.size() != b.final_filters.size()) {
    throw DimensionError("compare: runs have different node counts");
  }
  const int K = static_cast<int>(a.final_filters.size());
  report.nodes.resize(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) report.nodes[k].node = k;

  if (mode == CompareMode::kWeights) {
    for (int k = 0; k < K; ++k) {
      const TapVector& wa = a.final_filters[k];
      const TapVector& wb = b.final_filters[k];
      if (wa.size() != wb.size()) throw DimensionError("compare: filter lengths differ");
      const double diff = (wa - wb).norm();
      const double ref = wb.norm();
      report.nodes[k].relative_l2 = ref > 0.0 ? diff / ref : diff;
      report.nodes[k].max_abs = wa.size() ? (wa - wb).cwiseAbs().maxCoeff() : 0.0;
    }
  } else {
    std::map<std::pair<std::int64_t, int>, double> lookup;
    for (const auto& row : b.trace) lookup[{row.sample, row.node}] = row.nse_db;
    bool matched = false;
    for (const auto& row : a.trace) {
      const auto it = lookup.find({row.sample, row.node});
      if (it == lookup.end()) continue;
      matched = true;
      const double d = std::abs(row.nse_db - it->second);
      auto& slot = report.nodes[row.node].nse_delta_db;
      slot = std::max(slot, std::isfinite(d) ? d : std::numeric_limits<double>::infinity());
    }
    if (!matched) throw ParameterError("compare: traces share no (sample, node) rows");
  }
  return report;
}

json comparison_to_json(const ComparisonReport& report) {
  json nodes = json::array();
  for (const auto& n : report.nodes) {
    json j = {{"node", n.node}};
    if (report.mode == CompareMode::kWeights) {
      j["relative_l2"] = n.relative_l2;
      j["max_abs"] = n.max_abs;
    } else {
      j["nse_delta_db"] = finite_or_null(n.nse_delta_db);
    }
    nodes.push_back(j);
  }
  return {{"mode", report.mode == CompareMode::kWeights ? "weights" : "nse"},
          {"a", report.a},
          {"b", report.b},
          {"a_diverged", report.a_diverged},
          {"b_diverged", report.b_diverged},
          {"worst", finite_or_null(report.worst())},
          {"nodes", nodes}};
}

// --- sweeps -----------------------------------------------------------------

std::string SweepResult::summary_csv() const {
  std::ostringstream out;
  out << "value,label,node,terminal_nse_db,diverged,mu\n";
  for (std::size_t i = 0; i < records.size(); ++i) {
    for (const auto& r : records[i].runs) {
      for (std::size_t k = 0; k < r.terminal_nse_db.size(); ++k) {
        out << fmt(values[i]) << ',' << r.label << ',' << k << ',' << fmt(r.terminal_nse_db[k]) << ','
            << (r.diverged[k] ? 1 : 0) << ',' << fmt(r.mu) << '\n';
      }
    }
  }
  return out.str();
}

SweepResult sweep(const Scenario& base, SweepAxis axis, const std::vector<double>& values) {
  SweepResult result;
  for (double v : values) {
    Scenario s = base;
    switch (axis) {
      case SweepAxis::kCompensationLength: {
        const auto H = static_cast<Eigen::Index>(std::llround(v));
        if (H < 1 || std::abs(v - static_cast<double>(H)) > 1e-9) throw ParameterError("sweep: H must be a positive integer");
        s.compensation.train.length = H;
        if (s.recipe) s.recipe->compensation_length = H;
        break;
      }
      case SweepAxis::kStepSize:
        if (!(v >= 0.0)) throw ParameterError("sweep: step sizes must be non-negative");
        for (auto& a : s.algorithms) {
          if (a.mu_rel) {
            a.mu_rel = v;
          } else {
            a.mu = v;
          }
        }
        break;
      case SweepAxis::kDelay:
        if (!(v >= 0.0)) throw ParameterError("sweep: delays must be non-negative");
        s.delays = DelaySpec{};
        s.delays.kind = DelaySpec::Kind::kConstant;
        s.delays.samples = std::llround(v);
        break;
    }
    result.values.push_back(v);
    result.records.push_back(run(s));
  }
  return result;
}

// --- analysis ---------------------------------------------------------------

json analyze(const Scenario& scenario, std::int64_t delay) {
  if (delay < 0) throw ParameterError("analyze: negative delay");
  const PreparedScene prepared = prepare_scene(scenario);
  const AcousticScene& scene = prepared.scene;
  const Eigen::Index N = scenario.filter_length;
  const EigenBoundReport bounds = step_bounds(scene, prepared.reference_autocorrelation, N, delay);

  json nodes = json::array();
  for (int k = 0; k < scene.nodes; ++k) {
    json lambda = json::array();
    for (int m = 0; m < scene.nodes; ++m) lambda.push_back(bounds.eigenvalues[k][m].maxCoeff());
    const double mu_limit = bounds.bound_delay[k];
    nodes.push_back({{"node", k},
                     {"lambda_max", lambda},
                     {"eigen_sum", bounds.eigen_sum[k]},
                     {"bound_no_delay", bounds.bound_no_delay[k]},
                     {"bound_delay", mu_limit},
                     {"char_poly_stable_at_0.99_bound",
                      char_poly_stable(0.99 * mu_limit, bounds.eigen_sum[k], delay).stable},
                     {"char_poly_stable_at_1.01_bound",
                      char_poly_stable(1.01 * mu_limit, bounds.eigen_sum[k], delay).stable}});
  }

  WienerProblem wiener = build_wiener(scene, prepared.reference_autocorrelation, N);
  solve_wiener(wiener);
  const double residual = wiener.cost(wiener.solution);
  const double total_power = wiener.disturbance_power.sum();

  const Eigen::Index H = scenario.compensation.train.length;
  json rows = json::array();
  for (const auto& row : complexity(scene.nodes, N, scene.path_length(), H)) {
    rows.push_back({{"algorithm", row.algorithm},
                    {"multiplications", row.multiplications},
                    {"additions", row.additions}});
  }

  return {{"scenario_hash", scenario_hash(scenario)},
          {"nodes", scene.nodes},
          {"filter_length", N},
          {"path_length", scene.path_length()},
          {"delay", delay},
          {"delay_factor", delay_factor(delay)},
          {"global_bound_no_delay", bounds.global_no_delay},
          {"global_bound_delay", bounds.global_delay},
          {"per_node", nodes},
          {"wiener", {{"residual_power", residual},
                      {"disturbance_power", total_power},
                      {"optimal_nse_db", 10.0 * std::log10(std::max(residual, 1e-300) / total_power)}}},
          {"complexity", rows}};
}

}  // namespace dmanc
