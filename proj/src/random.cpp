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

#include "dgcspn/random.hpp"

#include <cmath>
#include <numbers>

namespace dgcspn {

namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint32_t lo(std::uint64_t x) { return static_cast<std::uint32_t>(x); }
std::uint32_t hi(std::uint64_t x) { return static_cast<std::uint32_t>(x >> 32); }

}  // namespace

Rng substream(std::uint64_t seed, std::string_view name, std::uint64_t index0,
              std::uint64_t index1) {
  const std::uint64_t tag = fnv1a(name);
  std::seed_seq seq{lo(seed), hi(seed), lo(tag), hi(tag), lo(index0), hi(index0), lo(index1),
                    hi(index1)};
  return Rng(seq);
}

double uniform01(Rng& rng) {
  // 53 random mantissa bits; avoids the implementation-defined
  // uniform_real_distribution so streams match across standard libraries.
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double standard_normal(Rng& rng) {
  const double u1 = 1.0 - uniform01(rng);  // (0, 1]
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace dgcspn
