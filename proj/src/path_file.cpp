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

#include "dmanc/path_file.hpp"

#include <fstream>
#include <sstream>

#include "dmanc/byte_order.hpp"

namespace dmanc {

namespace {

constexpr const char* kMagic = "dmanc-paths";
constexpr int kVersion = 1;

std::string next_line(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("path file: truncated header");
  return line;
}

}  // namespace

PathBlock make_block(std::string role, int rows, int cols, Eigen::Index taps) {
  PathBlock block{std::move(role), rows, cols, taps, {}};
  block.entries.assign(static_cast<std::size_t>(rows) * cols, TapVector::Zero(taps));
  return block;
}

const PathBlock* PathFile::find(const std::string& role) const {
  for (const auto& b : blocks) {
    if (b.role == role) return &b;
  }
  return nullptr;
}

const PathBlock& PathFile::require(const std::string& role) const {
  if (const auto* b = find(role)) return *b;
  throw FormatError("path file: missing block '" + role + "'");
}

void write_path_file(std::ostream& out, const PathFile& file) {
  out << kMagic << ' ' << kVersion << '\n' << "K " << file.nodes << '\n';
  for (const auto& b : file.blocks) {
    if (b.role.empty() || b.role.find_first_of(" \t\n") != std::string::npos) {
      throw FormatError("path file: role tags must be single words");
    }
    out << "block " << b.role << ' ' << b.rows << ' ' << b.cols << ' ' << b.taps << '\n';
  }
  out << "end\n";
  for (const auto& b : file.blocks) {
    if (b.entries.size() != static_cast<std::size_t>(b.rows) * b.cols) {
      throw DimensionError("path file: block '" + b.role + "' entry count mismatch");
    }
    for (const auto& e : b.entries) {
      if (e.size() != b.taps) {
        throw DimensionError("path file: block '" + b.role + "' tap length mismatch");
      }
      for (Eigen::Index i = 0; i < e.size(); ++i) write_f64_le(out, e[i]);
    }
  }
  if (!out) throw FormatError("path file: write failed");
}

PathFile read_path_file(std::istream& in) {
  PathFile file;
  {
    std::istringstream magic(next_line(in));
    std::string word;
    int version = 0;
    if (!(magic >> word >> version) || word != kMagic || version != kVersion) {
      throw FormatError("path file: bad magic line");
    }
  }
  {
    std::istringstream nodes(next_line(in));
    std::string key;
    if (!(nodes >> key >> file.nodes) || key != "K" || file.nodes < 1) {
      throw FormatError("path file: bad node-count line");
    }
  }
  for (;;) {
    const std::string line = next_line(in);
    if (line == "end") break;
    std::istringstream fields(line);
    std::string key, role;
    int rows = 0, cols = 0;
    long long taps = 0;
    if (!(fields >> key >> role >> rows >> cols >> taps) || key != "block") {
      throw FormatError("path file: malformed block line '" + line + "'");
    }
    if (rows < 1 || cols < 1 || taps < 1) {
      throw FormatError("path file: non-positive dimensions in block '" + role + "'");
    }
    if (rows != file.nodes || (cols != 1 && cols != file.nodes)) {
      throw FormatError("path file: block '" + role + "' does not match K=" +
                        std::to_string(file.nodes));
    }
    file.blocks.push_back(PathBlock{role, rows, cols, static_cast<Eigen::Index>(taps), {}});
  }
  for (auto& b : file.blocks) {
    b.entries.resize(static_cast<std::size_t>(b.rows) * b.cols);
    for (auto& e : b.entries) {
      e.resize(b.taps);
      for (Eigen::Index i = 0; i < b.taps; ++i) {
        if (!read_f64_le(in, e[i])) {
          throw FormatError("path file: payload truncated in block '" + b.role + "'");
        }
      }
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw FormatError("path file: trailing bytes after payload");
  }
  return file;
}

void save_path_file(const std::string& path, const PathFile& file) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path);
  write_path_file(out, file);
}

PathFile load_path_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  return read_path_file(in);
}

}  // namespace dmanc
