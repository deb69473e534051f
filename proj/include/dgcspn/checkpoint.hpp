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

#ifndef DGCSPN_CHECKPOINT_HPP_
#define DGCSPN_CHECKPOINT_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "dgcspn/params.hpp"
#include "dgcspn/structure.hpp"
#include "dgcspn/training.hpp"

namespace dgcspn {

/// A trained model on disk.
///
/// Layout (little-endian): "SPNC", u32 version, u32 length + structure
/// text, u64 seed, u32 training mode, u32 accumulator mode, u32 block
/// count, then per block: u32 name length + name, u32 rank, u32 dims, and
/// the values as 8-byte IEEE doubles in row-major order.
struct Checkpoint {
  NetworkSpec spec;
  ModelParams params;
  std::uint64_t seed = 0;
  TrainMode mode = TrainMode::kHardEm;
};

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& checkpoint);
/// Throws DataError on malformed input and StructureError/ParseError on a
/// bad embedded structure.
Checkpoint parse_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace dgcspn

#endif  // DGCSPN_CHECKPOINT_HPP_
