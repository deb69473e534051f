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

#ifndef DGCSPN_RANDOM_HPP_
#define DGCSPN_RANDOM_HPP_

#include <cstdint>
#include <random>
#include <string_view>

namespace dgcspn {

using Rng = std::mt19937_64;

/// Independent generator for a named purpose ("init", "shuffle", "dropout",
/// ...). Extra indices (epoch, sample) select further substreams, so adding
/// draws in one place never shifts the draws seen elsewhere.
Rng substream(std::uint64_t seed, std::string_view name, std::uint64_t index0 = 0,
              std::uint64_t index1 = 0);

/// Uniform double in [0, 1).
double uniform01(Rng& rng);

/// Standard normal draw (Box-Muller on uniform01).
double standard_normal(Rng& rng);

}  // namespace dgcspn

#endif  // DGCSPN_RANDOM_HPP_
