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

#include "dgcspn/scope.hpp"

#include <bit>
#include <cassert>

namespace dgcspn {

namespace {
constexpr int kWordBits = 64;
}

Scope::Scope(int capacity)
    : capacity_(capacity), words_((capacity + kWordBits - 1) / kWordBits, 0) {}

Scope Scope::singleton(int capacity, int variable) {
  Scope s(capacity);
  s.insert(variable);
  return s;
}

Scope Scope::full(int capacity) {
  Scope s(capacity);
  for (int v = 0; v < capacity; ++v) s.insert(v);
  return s;
}

bool Scope::empty() const {
  for (auto w : words_)
    if (w) return false;
  return true;
}

int Scope::count() const {
  int n = 0;
  for (auto w : words_) n += std::popcount(w);
  return n;
}

bool Scope::contains(int variable) const {
  assert(variable >= 0 && variable < capacity_);
  return (words_[variable / kWordBits] >> (variable % kWordBits)) & 1u;
}

void Scope::insert(int variable) {
  assert(variable >= 0 && variable < capacity_);
  words_[variable / kWordBits] |= std::uint64_t{1} << (variable % kWordBits);
}

Scope& Scope::operator|=(const Scope& other) {
  assert(capacity_ == other.capacity_);
  for (std::size_t i = 0; i < words_.size(); ++i) words_[i] |= other.words_[i];
  return *this;
}

Scope& Scope::operator&=(const Scope& other) {
  assert(capacity_ == other.capacity_);
  for (std::size_t i = 0; i < words_.size(); ++i) words_[i] &= other.words_[i];
  return *this;
}

bool Scope::intersects(const Scope& other) const {
  assert(capacity_ == other.capacity_);
  for (std::size_t i = 0; i < words_.size(); ++i)
    if (words_[i] & other.words_[i]) return true;
  return false;
}

std::vector<int> Scope::members() const {
  std::vector<int> out;
  for (int v = 0; v < capacity_; ++v)
    if (contains(v)) out.push_back(v);
  return out;
}

std::string Scope::to_string() const {
  std::string s = "{";
  bool first = true;
  for (int v : members()) {
    if (!first) s += ',';
    s += std::to_string(v);
    first = false;
  }
  return s + "}";
}

}  // namespace dgcspn
