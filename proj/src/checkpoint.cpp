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

#include "dgcspn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <map>

#include "dgcspn/data.hpp"
#include "dgcspn/errors.hpp"

namespace dgcspn {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

constexpr char kMagic[4] = {'S', 'P', 'N', 'C'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void u32(std::uint32_t v) { bytes(&v, 4); }
  void u64(std::uint64_t v) { bytes(&v, 8); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  void block(const std::string& name, const RowMatrixd& m) {
    str(name);
    u32(2);
    u32(static_cast<std::uint32_t>(m.rows()));
    u32(static_cast<std::uint32_t>(m.cols()));
    bytes(m.data(), sizeof(double) * static_cast<std::size_t>(m.size()));
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& b) : b_(b) {}
  void bytes(void* p, std::size_t n) {
    if (pos_ + n > b_.size())
      throw DataError("checkpoint truncated at offset " + std::to_string(pos_));
    std::memcpy(p, b_.data() + pos_, n);
    pos_ += n;
  }
  std::uint32_t u32() {
    std::uint32_t v;
    bytes(&v, 4);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v;
    bytes(&v, 8);
    return v;
  }
  std::string str() {
    const auto n = u32();
    if (n > b_.size() - pos_) throw DataError("checkpoint string overruns at offset " + std::to_string(pos_));
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }
  RowMatrixd matrix() {
    const auto at = pos_;
    if (u32() != 2) throw DataError("checkpoint block at offset " + std::to_string(at) + " is not 2-D");
    const auto rows = u32();
    const auto cols = u32();
    const std::size_t n = std::size_t{rows} * cols;
    if (n > (b_.size() - pos_) / sizeof(double))
      throw DataError("checkpoint block overruns at offset " + std::to_string(pos_));
    RowMatrixd m(rows, cols);
    bytes(m.data(), n * sizeof(double));
    return m;
  }
  bool done() const { return pos_ == b_.size(); }
  std::size_t pos() const { return pos_; }

 private:
  const std::vector<std::uint8_t>& b_;
  std::size_t pos_ = 0;
};

std::string slot_name(std::size_t slot, const char* field) {
  return "sum" + std::to_string(slot) + "." + field;
}

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& c) {
  Writer w;
  w.bytes(kMagic, 4);
  w.u32(kVersion);
  w.str(format_structure(c.spec));
  w.u64(c.seed);
  w.u32(static_cast<std::uint32_t>(c.mode));
  w.u32(static_cast<std::uint32_t>(c.params.mode));

  std::uint32_t blocks = static_cast<std::uint32_t>(2 * c.params.sums.size());
  if (c.params.gaussian) blocks += 2;
  if (c.params.variance_raw.size()) blocks += 1;
  w.u32(blocks);
  for (std::size_t s = 0; s < c.params.sums.size(); ++s) {
    w.block(slot_name(s, "accumulators"), c.params.sums[s].accumulators);
    w.block(slot_name(s, "log_weights"), c.params.sums[s].log_weights);
  }
  if (c.params.gaussian) {
    w.block("leaf.means", c.params.gaussian->means);
    w.block("leaf.variances", c.params.gaussian->variances);
  }
  if (c.params.variance_raw.size()) w.block("leaf.variance_raw", c.params.variance_raw);
  return w.take();
}

Checkpoint parse_checkpoint(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) throw DataError("not a checkpoint: bad magic at offset 0");
  const auto version = r.u32();
  if (version != kVersion)
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  Checkpoint c;
  c.spec = parse_structure(r.str());
  c.seed = r.u64();
  const auto mode = r.u32();
  if (mode > static_cast<std::uint32_t>(TrainMode::kAdam))
    throw DataError("checkpoint has unknown training mode " + std::to_string(mode));
  c.mode = static_cast<TrainMode>(mode);
  const auto acc = r.u32();
  if (acc > static_cast<std::uint32_t>(AccumulatorMode::kLog))
    throw DataError("checkpoint has unknown accumulator mode " + std::to_string(acc));
  c.params.mode = static_cast<AccumulatorMode>(acc);

  std::map<std::string, RowMatrixd> blocks;
  const auto count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    auto name = r.str();
    auto m = r.matrix();
    if (!blocks.emplace(std::move(name), std::move(m)).second)
      throw DataError("checkpoint repeats a block name");
  }
  if (!r.done()) throw DataError("trailing bytes in checkpoint at offset " + std::to_string(r.pos()));

  // The structure decides which blocks must exist and their shapes.
  const ExecutionPlan plan = compile(c.spec);
  auto take = [&](const std::string& name, Eigen::Index rows, Eigen::Index cols) {
    auto it = blocks.find(name);
    if (it == blocks.end()) throw DataError("checkpoint is missing block " + name);
    if (it->second.rows() != rows || it->second.cols() != cols)
      throw DataError("checkpoint block " + name + " has the wrong shape");
    RowMatrixd m = std::move(it->second);
    blocks.erase(it);
    return m;
  };
  c.params.sums.resize(plan.num_sum_slots);
  for (const auto& op : plan.ops) {
    if (!op.is_sum()) continue;
    auto& s = c.params.sums[op.param_slot];
    s.accumulators = take(slot_name(op.param_slot, "accumulators"), op.fan_in, op.output.channels);
    s.log_weights = take(slot_name(op.param_slot, "log_weights"), op.fan_in, op.output.channels);
  }
  if (plan.leaf().kind == OpKind::kGaussianLeaf) {
    const int cells = plan.num_variables();
    const int k = plan.leaf().output.channels;
    GaussianLeafParams g;
    g.means = take("leaf.means", cells, k);
    g.variances = take("leaf.variances", cells, k);
    c.params.gaussian = std::move(g);
    if (blocks.count("leaf.variance_raw")) c.params.variance_raw = take("leaf.variance_raw", cells, k);
  }
  if (!blocks.empty()) throw DataError("checkpoint has unexpected block " + blocks.begin()->first);
  return c;
}

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint) {
  write_file(path, serialize_checkpoint(checkpoint));
}

Checkpoint load_checkpoint(const std::string& path) { return parse_checkpoint(read_file(path)); }

}  // namespace dgcspn
