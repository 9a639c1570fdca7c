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

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dmanc/dsp.hpp"

namespace dmanc {

// A rows x cols grid of equal-length tap vectors, stored row-major.
struct PathBlock {
  std::string role;
  int rows = 0;
  int cols = 0;
  Eigen::Index taps = 0;
  std::vector<TapVector> entries;

  const TapVector& at(int row, int col) const { return entries[row * cols + col]; }
  TapVector& at(int row, int col) { return entries[row * cols + col]; }
};

PathBlock make_block(std::string role, int rows, int cols, Eigen::Index taps);

// On-disk container for impulse-response sets.
//
// Layout: an ASCII header of newline-terminated lines
//
//   dmanc-paths 1
//   K <nodes>
//   block <role> <rows> <cols> <taps>     (one line per block)
//   end
//
// followed immediately by the payload: each block in header order, each
// entry (row-major over (row, col)) as `taps` little-endian IEEE-754 doubles.
struct PathFile {
  int nodes = 0;
  std::vector<PathBlock> blocks;

  const PathBlock* find(const std::string& role) const;
  const PathBlock& require(const std::string& role) const;
};

void write_path_file(std::ostream& out, const PathFile& file);
PathFile read_path_file(std::istream& in);

void save_path_file(const std::string& path, const PathFile& file);
PathFile load_path_file(const std::string& path);

}  // namespace dmanc
