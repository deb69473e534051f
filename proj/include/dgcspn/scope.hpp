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

#ifndef DGCSPN_SCOPE_HPP_
#define DGCSPN_SCOPE_HPP_

#include <cstdint>
#include <string>
#include <vector>

namespace dgcspn {

/// Set of variable indices (row-major flattened pixel positions).
///
/// The capacity is fixed when the scope is created and all scopes of one
/// network share it; set operations between scopes of different capacity
/// are a programming error.
class Scope {
 public:
  Scope() = default;
  explicit Scope(int capacity);

  static Scope singleton(int capacity, int variable);
  static Scope full(int capacity);

  int capacity() const { return capacity_; }
  bool empty() const;
  int count() const;
  bool contains(int variable) const;
  void insert(int variable);

  Scope& operator|=(const Scope& other);
  Scope& operator&=(const Scope& other);
  friend Scope operator|(Scope a, const Scope& b) { return a |= b; }
  friend Scope operator&(Scope a, const Scope& b) { return a &= b; }
  friend bool operator==(const Scope& a, const Scope& b) = default;

  bool intersects(const Scope& other) const;
  std::vector<int> members() const;

  // "{0,1,5}"
  std::string to_string() const;

 private:
  int capacity_ = 0;
  std::vector<std::uint64_t> words_;
};

}  // namespace dgcspn

#endif  // DGCSPN_SCOPE_HPP_
