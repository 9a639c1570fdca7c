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

#include "dmanc/dsp.hpp"

#include <numbers>

namespace dmanc {

TapVector autocorrelation(const TapVector& h, Eigen::Index max_lag) {
  TapVector r = TapVector::Zero(max_lag + 1);
  for (Eigen::Index tau = 0; tau <= max_lag && tau < h.size(); ++tau) {
    r[tau] = h.head(h.size() - tau).dot(h.tail(h.size() - tau));
  }
  return r;
}

namespace {

double sinc_lowpass(double cutoff_norm, double m) {
  // Ideal lowpass impulse response, cutoff as a fraction of fs.
  if (m == 0.0) return 2.0 * cutoff_norm;
  return std::sin(2.0 * std::numbers::pi * cutoff_norm * m) / (std::numbers::pi * m);
}

}  // namespace

TapVector design_bandpass(double low_hz, double high_hz, double fs, int order) {
  if (!(fs > 0.0) || !(low_hz > 0.0) || !(low_hz < high_hz) || !(high_hz < fs / 2.0)) {
    throw ParameterError("design_bandpass: need 0 < low < high < fs/2");
  }
  if (order < 3 || order % 2 == 0) {
    throw ParameterError("design_bandpass: order must be odd and >= 3");
  }
  const double f1 = low_hz / fs;
  const double f2 = high_hz / fs;
  const double center = (order - 1) / 2.0;
  TapVector taps(order);
  for (int n = 0; n < order; ++n) {
    const double m = n - center;
    const double window = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * n / (order - 1));
    taps[n] = window * (sinc_lowpass(f2, m) - sinc_lowpass(f1, m));
  }
  return taps;
}

double magnitude_response(const TapVector& taps, double hz, double fs) {
  const double w = 2.0 * std::numbers::pi * hz / fs;
  double re = 0.0;
  double im = 0.0;
  for (Eigen::Index n = 0; n < taps.size(); ++n) {
    re += taps[n] * std::cos(w * n);
    im -= taps[n] * std::sin(w * n);
  }
  return std::hypot(re, im);
}

}  // namespace dmanc
