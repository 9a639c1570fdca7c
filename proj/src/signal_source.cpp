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

#include "dmanc/signal_source.hpp"

#include "dmanc/byte_order.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numbers>

namespace dmanc {

std::int64_t Rng::integer(std::int64_t lo, std::int64_t hi) {
  if (hi < lo) throw ParameterError("Rng::integer: empty range");
  const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
  if (span == 0) return lo + static_cast<std::int64_t>(engine_());
  // Rejection sampling keeps the draw unbiased.
  const std::uint64_t limit = engine_.max() - engine_.max() % span;
  std::uint64_t draw;
  do {
    draw = engine_();
  } while (draw >= limit);
  return lo + static_cast<std::int64_t>(draw % span);
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double scale = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * scale;
  has_spare_ = true;
  return u * scale;
}

SourceKind parse_source_kind(const std::string& name) {
  if (name == "white-gaussian") return SourceKind::kWhiteGaussian;
  if (name == "bandpass-broadband") return SourceKind::kBandpassBroadband;
  if (name == "file-playback") return SourceKind::kFilePlayback;
  if (name == "sine") return SourceKind::kSine;
  throw ParameterError("unknown source kind '" + name + "'");
}

std::string to_string(SourceKind kind) {
  switch (kind) {
    case SourceKind::kWhiteGaussian: return "white-gaussian";
    case SourceKind::kBandpassBroadband: return "bandpass-broadband";
    case SourceKind::kFilePlayback: return "file-playback";
    case SourceKind::kSine: return "sine";
  }
  return "?";
}

SignalSource::SignalSource(const SourceSpec& spec) : spec_(spec), rng_(spec.seed) {
  switch (spec_.kind) {
    case SourceKind::kBandpassBroadband:
      // Unit-energy shaping keeps the output variance equal to amplitude^2.
      shaping_ = design_bandpass(spec_.low_hz, spec_.high_hz, spec_.fs, spec_.bandpass_order);
      shaping_ /= shaping_.norm();
      shaping_line_ = DelayLine<double>(shaping_.size());
      break;
    case SourceKind::kFilePlayback:
      samples_ = load_samples(spec_.path);
      if (samples_.empty()) throw FormatError("file playback: no samples in " + spec_.path);
      break;
    case SourceKind::kSine:
      if (!(spec_.fs > 0.0)) throw ParameterError("sine source: fs must be positive");
      break;
    case SourceKind::kWhiteGaussian:
      break;
  }
}

double SignalSource::next_sample() {
  switch (spec_.kind) {
    case SourceKind::kWhiteGaussian:
      return spec_.amplitude * rng_.normal();
    case SourceKind::kBandpassBroadband:
      return spec_.amplitude * fir_step(shaping_, shaping_line_, rng_.normal());
    case SourceKind::kSine: {
      const double phase = 2.0 * std::numbers::pi * spec_.frequency_hz *
                           static_cast<double>(index_++) / spec_.fs;
      return spec_.amplitude * std::sin(phase);
    }
    case SourceKind::kFilePlayback: {
      if (cursor_ == samples_.size()) {
        if (!spec_.loop) throw EndOfStream("file playback: end of " + spec_.path);
        cursor_ = 0;
      }
      return spec_.amplitude * samples_[cursor_++];
    }
  }
  return 0.0;
}

bool SignalSource::exhausted() const {
  return spec_.kind == SourceKind::kFilePlayback && !spec_.loop &&
         cursor_ == samples_.size();
}

TapVector SignalSource::autocorrelation(Eigen::Index max_lag) const {
  const double power = spec_.amplitude * spec_.amplitude;
  switch (spec_.kind) {
    case SourceKind::kWhiteGaussian: {
      TapVector r = TapVector::Zero(max_lag + 1);
      r[0] = power;
      return r;
    }
    case SourceKind::kBandpassBroadband:
      return power * dmanc::autocorrelation(shaping_, max_lag);
    case SourceKind::kSine: {
      TapVector r(max_lag + 1);
      const double w = 2.0 * std::numbers::pi * spec_.frequency_hz / spec_.fs;
      for (Eigen::Index tau = 0; tau <= max_lag; ++tau) r[tau] = 0.5 * power * std::cos(w * tau);
      return r;
    }
    case SourceKind::kFilePlayback:
      break;
  }
  throw CapabilityError("autocorrelation: no closed form for file playback");
}

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
  if (s.size() < suffix.size()) return false;
  return std::equal(suffix.rbegin(), suffix.rend(), s.rbegin(), [](char a, char b) {
    return std::tolower(static_cast<unsigned char>(a)) == b;
  });
}

std::uint32_t read_le32(const unsigned char* p) {
  return p[0] | (p[1] << 8) | (p[2] << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_le16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::vector<double> parse_wav(const std::vector<unsigned char>& bytes, const std::string& path) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw FormatError("wav: missing RIFF/WAVE header in " + path);
  }
  std::size_t pos = 12;
  bool have_format = false;
  while (pos + 8 <= bytes.size()) {
    const auto* chunk = bytes.data() + pos;
    const std::uint32_t size = read_le32(chunk + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size()) throw FormatError("wav: truncated chunk in " + path);
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16) throw FormatError("wav: short fmt chunk in " + path);
      const auto format = read_le16(bytes.data() + body);
      const auto channels = read_le16(bytes.data() + body + 2);
      const auto bits = read_le16(bytes.data() + body + 14);
      if (format != 1 || channels != 1 || bits != 16) {
        throw FormatError("wav: only 16-bit PCM mono is supported (" + path + ")");
      }
      have_format = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (!have_format) throw FormatError("wav: data chunk before fmt in " + path);
      std::vector<double> out(size / 2);
      for (std::size_t i = 0; i < out.size(); ++i) {
        const auto raw = static_cast<std::int16_t>(read_le16(bytes.data() + body + 2 * i));
        out[i] = raw / 32768.0;
      }
      return out;
    }
    pos = body + size + (size & 1u);
  }
  throw FormatError("wav: no data chunk in " + path);
}

}  // namespace

std::vector<double> load_samples(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (ends_with(path, ".wav")) return parse_wav(bytes, path);
  if (bytes.size() % 8 != 0) throw FormatError("raw f64: size not a multiple of 8 in " + path);
  std::vector<double> out(bytes.size() / 8);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = decode_f64_le(bytes.data() + 8 * i);
  }
  return out;
}

void save_samples_f64(const std::string& path, const std::vector<double>& samples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path);
  for (double s : samples) write_f64_le(out, s);
}

}  // namespace dmanc
