// Copyright 2026 The dgcspn Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DGCSPN_ERRORS_HPP_
#define DGCSPN_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace dgcspn {

// Malformed network structure. `layer` is the index into NetworkSpec::layers,
// or -1 when the problem is not tied to one layer.
class StructureError : public std::runtime_error {
 public:
  StructureError(int layer, const std::string& what)
      : std::runtime_error(layer >= 0 ? "layer " + std::to_string(layer) + ": " + what : what),
        layer_(layer) {}
  int layer() const { return layer_; }

 private:
  int layer_;
};

// Text input (structure file) that does not parse. `line` is 1-based.
class ParseError : public std::runtime_error {
 public:
  ParseError(int line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

// Binary inputs (IDX, SPNT, checkpoints) that are truncated or inconsistent.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The operation exists but does not apply to this network or checkpoint.
class UnsupportedError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

using DomainError = std::domain_error;

}  // namespace dgcspn

#endif  // DGCSPN_ERRORS_HPP_
