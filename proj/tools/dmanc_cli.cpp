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

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dmanc/scenario.hpp"

namespace {

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string preset = "desk";
  std::string case_id;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config, "JSON scenario file")->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "base seed for scene, noise and compensation training");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--preset", o.preset, "scale preset")->check(CLI::IsMember({"desk", "paper"}));
  cmd->add_option("--case", o.case_id, "experiment case")->check(CLI::IsMember({"A", "B", "C", "D", "E", "F"}));
}

dmanc::Scenario resolve(const CommonOptions& o) {
  const auto preset = dmanc::parse_preset(o.preset);
  dmanc::Scenario s = o.case_id.empty() ? dmanc::preset_scenario(preset) : dmanc::case_scenario(o.case_id, preset);
  if (!o.config.empty()) s = dmanc::load_scenario(o.config, s);
  if (o.seed) dmanc::apply_seed(s, *o.seed);
  if (!o.out.empty()) s.output_dir = o.out;
  if (s.output_dir.empty()) s.output_dir = "out/" + s.name;
  return s;
}

void report(const dmanc::RunRecord& record) {
  for (const auto& r : record.runs) {
    std::printf("%-16s mu=%.4g samples=%lld %s", r.label.c_str(), r.mu,
                static_cast<long long>(r.samples_run), r.diverged_at ? "DIVERGED" : "ok");
    std::printf("  nse_db=[");
    for (std::size_t k = 0; k < r.terminal_nse_db.size(); ++k) {
      std::printf("%s%.2f", k ? ", " : "", r.terminal_nse_db[k]);
    }
    std::printf("]  %.2fs\n", r.wall_clock_s);
  }
}

std::vector<double> parse_values(const std::string& text) {
  std::vector<double> values;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto comma = text.find(',', pos);
    const std::string item = text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    try {
      std::size_t used = 0;
      values.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw dmanc::ParameterError("--values: cannot parse '" + item + "'");
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return values;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw dmanc::FormatError("cannot write " + path.string());
  out << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed multichannel active noise control simulator"};
  app.require_subcommand(1);

  CommonOptions run_opts, sweep_opts, compare_opts, analyze_opts;
  auto* run_cmd = app.add_subcommand("run", "run every algorithm of a scenario");
  add_common(run_cmd, run_opts);

  auto* sweep_cmd = app.add_subcommand("sweep", "repeat a scenario over one parameter");
  add_common(sweep_cmd, sweep_opts);
  std::string axis_name, values_text;
  sweep_cmd->add_option("--axis", axis_name, "H, mu or delta")->required();
  sweep_cmd->add_option("--values", values_text, "comma separated values")->required();

  auto* compare_cmd = app.add_subcommand("compare", "run a scenario and compare two of its algorithms");
  add_common(compare_cmd, compare_opts);
  std::string label_a, label_b, mode_name = "weights";
  compare_cmd->add_option("--a", label_a, "first run label")->required();
  compare_cmd->add_option("--b", label_b, "second run label")->required();
  compare_cmd->add_option("--mode", mode_name, "weights or nse")->check(CLI::IsMember({"weights", "nse"}));

  auto* analyze_cmd = app.add_subcommand("analyze", "step-size bounds, Wiener residual and operation counts");
  add_common(analyze_cmd, analyze_opts);
  std::int64_t analyze_delay = 0;
  analyze_cmd->add_option("--delay", analyze_delay, "communication delay in samples");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) {
      const auto s = resolve(run_opts);
      const auto record = dmanc::run(s);
      dmanc::write_outputs(record, s.output_dir);
      report(record);
      std::printf("wrote %s\n", s.output_dir.c_str());
    } else if (*sweep_cmd) {
      const auto s = resolve(sweep_opts);
      const auto axis = dmanc::parse_sweep_axis(axis_name);
      const auto result = dmanc::sweep(s, axis, parse_values(values_text));
      for (std::size_t i = 0; i < result.records.size(); ++i) {
        std::printf("%s = %g\n", axis_name.c_str(), result.values[i]);
        report(result.records[i]);
        char sub[64];
        std::snprintf(sub, sizeof sub, "%s_%g", axis_name.c_str(), result.values[i]);
        dmanc::write_outputs(result.records[i], (std::filesystem::path(s.output_dir) / sub).string());
      }
      write_text(std::filesystem::path(s.output_dir) / "sweep.csv", result.summary_csv());
      std::printf("wrote %s\n", s.output_dir.c_str());
    } else if (*compare_cmd) {
      const auto s = resolve(compare_opts);
      const auto record = dmanc::run(s);
      dmanc::write_outputs(record, s.output_dir);
      const auto mode = mode_name == "nse" ? dmanc::CompareMode::kNseCurves : dmanc::CompareMode::kWeights;
      const auto cmp = dmanc::compare(record.find(label_a), record.find(label_b), mode);
      const std::string text = dmanc::comparison_to_json(cmp).dump(2) + "\n";
      write_text(std::filesystem::path(s.output_dir) / "compare.json", text);
      std::cout << text;
    } else if (*analyze_cmd) {
      const auto s = resolve(analyze_opts);
      const std::string text = dmanc::analyze(s, analyze_delay).dump(2) + "\n";
      if (!analyze_opts.out.empty()) write_text(std::filesystem::path(s.output_dir) / "analysis.json", text);
      std::cout << text;
    }
  } catch (const dmanc::Error& e) {
    std::fprintf(stderr, "dmanc: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "dmanc: %s\n", e.what());
    return 3;
  }
  return 0;
}
