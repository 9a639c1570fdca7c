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

#include <cmath>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "dmanc/error.hpp"

namespace dmanc {

template <typename Scalar>
using Taps = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// FIR coefficients: impulse responses, control filters, compensation filters.
using TapVector = Taps<double>;

// Throws ParameterError unless taps is non-empty and every entry is finite.
template <typename Derived>
void require_taps(const Eigen::MatrixBase<Derived>& taps, const char* what) {
  if (taps.size() < 1) {
    throw ParameterError(std::string(what) + ": empty tap vector");
  }
  if (!taps.allFinite()) {
    throw NumericFault(std::string(what) + ": non-finite tap");
  }
}

// Sample history, most recent first. Lags past the written history read as
// zero. Backed by a mirrored ring so the history is always one contiguous
// block and dot products vectorize.
template <typename Scalar>
class DelayLine {
 public:
  DelayLine() = default;
  explicit DelayLine(Eigen::Index capacity)
      : capacity_(capacity), head_(0), buffer_(Taps<Scalar>::Zero(2 * capacity)) {
    if (capacity < 1) throw ParameterError("DelayLine: capacity must be >= 1");
  }

  Eigen::Index capacity() const { return capacity_; }

  void push(Scalar sample) {
    head_ = head_ == 0 ? capacity_ - 1 : head_ - 1;
    buffer_[head_] = sample;
    buffer_[head_ + capacity_] = sample;
  }

  // Sample written `lag` pushes ago.
  Scalar operator[](Eigen::Index lag) const { return buffer_[head_ + lag]; }

  // The `n` most recent samples, newest first.
  auto recent(Eigen::Index n) const { return buffer_.segment(head_, n); }
  auto history() const { return recent(capacity_); }

  void reset() {
    buffer_.setZero();
    head_ = 0;
  }

 private:
  Eigen::Index capacity_ = 0;
  Eigen::Index head_ = 0;
  Taps<Scalar> buffer_;
};

// Pushes `sample` and returns sum_j filter[j] * line[j].
template <typename Scalar, typename Derived>
Scalar fir_step(const Eigen::MatrixBase<Derived>& filter, DelayLine<Scalar>& line,
                Scalar sample) {
  if (!std::isfinite(sample)) throw NumericFault("fir_step: non-finite input sample");
  if (line.capacity() < filter.size()) {
    throw DimensionError("fir_step: delay line shorter than filter");
  }
  line.push(sample);
  return filter.dot(line.recent(filter.size()));
}

// [x(n), x(n-1), ..., x(n-n_taps+1)].
template <typename Scalar>
Taps<Scalar> tap_history(const DelayLine<Scalar>& line, Eigen::Index n_taps) {
  if (n_taps > line.capacity() || n_taps < 0) {
    throw DimensionError("tap_history: requested more taps than the line holds");
  }
  return line.recent(n_taps);
}

// Full linear convolution, length a.size() + b.size() - 1.
template <typename Scalar>
Taps<Scalar> convolve(const Taps<Scalar>& a, const Taps<Scalar>& b) {
  Taps<Scalar> out = Taps<Scalar>::Zero(a.size() + b.size() - 1);
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    out.segment(i, b.size()) += a[i] * b;
  }
  return out;
}

// Deterministic autocorrelation r[tau] = sum_t h[t] h[t + tau], tau = 0..max_lag.
TapVector autocorrelation(const TapVector& h, Eigen::Index max_lag);

// Windowed-sinc (Hamming) linear-phase bandpass with `order` taps (odd).
TapVector design_bandpass(double low_hz, double high_hz, double fs, int order);

// |H(e^{jw})| at frequency hz.
double magnitude_response(const TapVector& taps, double hz, double fs);

}  // namespace dmanc
