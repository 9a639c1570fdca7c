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
#include <random>
#include <string>
#include <vector>

#include "dmanc/dsp.hpp"

namespace dmanc {

// Seedable generator with a platform-independent stream: std::mt19937_64
// (fully specified by the standard) feeding hand-rolled uniform and
// Marsaglia-polar normal transforms, since the std:: distributions are
// implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [lo, hi].
  std::int64_t integer(std::int64_t lo, std::int64_t hi);
  double normal();

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

class EndOfStream : public Error {
 public:
  using Error::Error;
};

enum class SourceKind { kWhiteGaussian, kBandpassBroadband, kFilePlayback, kSine };

struct SourceSpec {
  SourceKind kind = SourceKind::kWhiteGaussian;
  std::uint64_t seed = 1;
  double amplitude = 1.0;  // std-dev for noise, peak for sine
  double fs = 16000.0;
  double low_hz = 100.0;
  double high_hz = 1000.0;
  int bandpass_order = 511;
  double frequency_hz = 0.0;  // sine
  std::string path;           // file playback: *.wav (16-bit PCM mono) or raw LE f64
  bool loop = true;
};

SourceKind parse_source_kind(const std::string& name);
std::string to_string(SourceKind kind);

class SignalSource {
 public:
  explicit SignalSource(const SourceSpec& spec);

  double next_sample();
  bool exhausted() const;
  const SourceSpec& spec() const { return spec_; }

  // r[tau] = E[x(n) x(n+tau)] for tau = 0..max_lag when it is known in
  // closed form (noise and sine sources). Throws CapabilityError otherwise.
  TapVector autocorrelation(Eigen::Index max_lag) const;

 private:
  SourceSpec spec_;
  Rng rng_;
  TapVector shaping_;
  DelayLine<double> shaping_line_;
  std::vector<double> samples_;
  std::size_t cursor_ = 0;
  std::int64_t index_ = 0;
};

// Loads a 16-bit PCM mono WAV (scaled to [-1, 1)) or a headerless stream of
// little-endian doubles, chosen by file extension.
std::vector<double> load_samples(const std::string& path);
void save_samples_f64(const std::string& path, const std::vector<double>& samples);

}  // namespace dmanc
