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

#include "dgcspn/data.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "dgcspn/errors.hpp"

namespace dgcspn {

namespace {

constexpr std::uint32_t kIdxImages = 0x00000803;
constexpr std::uint32_t kIdxLabels = 0x00000801;
constexpr char kSpntMagic[4] = {'S', 'P', 'N', 'T'};
constexpr std::uint32_t kSpntVersion = 1;

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::vector<std::uint8_t> gunzip(const std::string& path) {
  gzFile f = gzopen(path.c_str(), "rb");
  if (!f) throw DataError("cannot open " + path);
  std::vector<std::uint8_t> out;
  std::uint8_t buf[1 << 16];
  for (;;) {
    const int n = gzread(f, buf, sizeof buf);
    if (n < 0) {
      gzclose(f);
      throw DataError("corrupt gzip stream in " + path);
    }
    if (n == 0) break;
    out.insert(out.end(), buf, buf + n);
  }
  gzclose(f);
  return out;
}

std::uint32_t read_be32(const std::vector<std::uint8_t>& b, std::size_t off, const std::string& what) {
  if (off + 4 > b.size())
    throw DataError(what + ": truncated header at offset " + std::to_string(off));
  return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) |
         (std::uint32_t{b[off + 2]} << 8) | std::uint32_t{b[off + 3]};
}

std::uint32_t read_le32(const std::vector<std::uint8_t>& b, std::size_t off, const std::string& what) {
  if (off + 4 > b.size())
    throw DataError(what + ": truncated header at offset " + std::to_string(off));
  return std::uint32_t{b[off]} | (std::uint32_t{b[off + 1]} << 8) |
         (std::uint32_t{b[off + 2]} << 16) | (std::uint32_t{b[off + 3]} << 24);
}

void put_be32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) b.push_back(static_cast<std::uint8_t>(v >> s));
}

void put_le32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int s = 0; s < 32; s += 8) b.push_back(static_cast<std::uint8_t>(v >> s));
}

void expect_magic(const std::vector<std::uint8_t>& b, std::uint32_t magic, const std::string& path) {
  const std::uint32_t got = read_be32(b, 0, path);
  if (got != magic) {
    char msg[96];
    std::snprintf(msg, sizeof msg, ": bad magic 0x%08x at offset 0 (expected 0x%08x)", got, magic);
    throw DataError(path + msg);
  }
}

void expect_payload(const std::vector<std::uint8_t>& b, std::size_t off, std::size_t n,
                    const std::string& path) {
  if (b.size() < off + n)
    throw DataError(path + ": truncated data at offset " + std::to_string(b.size()) + " (expected " +
                    std::to_string(off + n) + " bytes)");
  if (b.size() > off + n)
    throw DataError(path + ": trailing bytes at offset " + std::to_string(off + n));
}

}  // namespace

ImageD ImageDataset::image(int i) const {
  if (i < 0 || i >= count) throw DomainError("image index out of range");
  ImageD out(height, width);
  const std::uint8_t* p = pixels.data() + static_cast<std::size_t>(i) * pixels_per_image();
  for (int k = 0; k < pixels_per_image(); ++k) out.data()[k] = p[k];
  return out;
}

ImageDataset ImageDataset::head(int n) const {
  ImageDataset out = *this;
  out.count = std::clamp(n, 0, count);
  out.pixels.resize(static_cast<std::size_t>(out.count) * pixels_per_image());
  if (out.labels) out.labels->resize(out.count);
  return out;
}

void ImageDataset::check() const {
  if (pixels.size() != static_cast<std::size_t>(count) * pixels_per_image())
    throw DataError("pixel buffer does not match N*H*W");
  if (labels && static_cast<int>(labels->size()) != count)
    throw DataError("image count " + std::to_string(count) + " differs from label count " +
                    std::to_string(labels->size()));
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  if (ends_with(path, ".gz")) return gunzip(path);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed for " + path);
}

ImageDataset load_idx(const std::string& images_path, const std::string& labels_path) {
  const auto b = read_file(images_path);
  expect_magic(b, kIdxImages, images_path);
  ImageDataset data;
  const auto n = read_be32(b, 4, images_path);
  const auto h = read_be32(b, 8, images_path);
  const auto w = read_be32(b, 12, images_path);
  if (n > (1u << 30) || h > (1u << 15) || w > (1u << 15) || h == 0 || w == 0)
    throw DataError(images_path + ": implausible dimensions at offset 4");
  expect_payload(b, 16, std::size_t{n} * h * w, images_path);
  data.count = static_cast<int>(n);
  data.height = static_cast<int>(h);
  data.width = static_cast<int>(w);
  data.pixels.assign(b.begin() + 16, b.end());

  if (!labels_path.empty()) {
    const auto l = read_file(labels_path);
    expect_magic(l, kIdxLabels, labels_path);
    const auto ln = read_be32(l, 4, labels_path);
    if (ln != n)
      throw DataError("image count " + std::to_string(n) + " differs from label count " +
                      std::to_string(ln) + " (" + labels_path + " offset 4)");
    expect_payload(l, 8, ln, labels_path);
    data.labels.emplace(l.begin() + 8, l.end());
  }
  return data;
}

std::vector<std::uint8_t> serialize_idx_images(const ImageDataset& data) {
  data.check();
  std::vector<std::uint8_t> b;
  b.reserve(16 + data.pixels.size());
  put_be32(b, kIdxImages);
  put_be32(b, static_cast<std::uint32_t>(data.count));
  put_be32(b, static_cast<std::uint32_t>(data.height));
  put_be32(b, static_cast<std::uint32_t>(data.width));
  b.insert(b.end(), data.pixels.begin(), data.pixels.end());
  return b;
}

std::vector<std::uint8_t> serialize_idx_labels(const ImageDataset& data) {
  data.check();
  if (!data.labels) throw DataError("dataset has no labels");
  std::vector<std::uint8_t> b;
  put_be32(b, kIdxLabels);
  put_be32(b, static_cast<std::uint32_t>(data.count));
  for (int v : *data.labels) {
    if (v < 0 || v > 255) throw DataError("label does not fit in a byte");
    b.push_back(static_cast<std::uint8_t>(v));
  }
  return b;
}

ImageDataset load_spnt(const std::string& path) {
  const auto b = read_file(path);
  if (b.size() < 4 || std::memcmp(b.data(), kSpntMagic, 4) != 0)
    throw DataError(path + ": bad magic at offset 0 (expected SPNT)");
  const auto version = read_le32(b, 4, path);
  if (version != kSpntVersion)
    throw DataError(path + ": unsupported version " + std::to_string(version) + " at offset 4");
  const auto n = read_le32(b, 8, path);
  const auto h = read_le32(b, 12, path);
  const auto w = read_le32(b, 16, path);
  if (n > (1u << 30) || h > (1u << 15) || w > (1u << 15) || h == 0 || w == 0)
    throw DataError(path + ": implausible dimensions at offset 8");
  expect_payload(b, 20, std::size_t{n} * h * w, path);
  ImageDataset data;
  data.count = static_cast<int>(n);
  data.height = static_cast<int>(h);
  data.width = static_cast<int>(w);
  data.pixels.assign(b.begin() + 20, b.end());
  return data;
}

std::vector<std::uint8_t> serialize_spnt(const ImageDataset& data) {
  data.check();
  std::vector<std::uint8_t> b(kSpntMagic, kSpntMagic + 4);
  put_le32(b, kSpntVersion);
  put_le32(b, static_cast<std::uint32_t>(data.count));
  put_le32(b, static_cast<std::uint32_t>(data.height));
  put_le32(b, static_cast<std::uint32_t>(data.width));
  b.insert(b.end(), data.pixels.begin(), data.pixels.end());
  return b;
}

ImageDataset load_images(const std::string& images_path, const std::string& labels_path) {
  const auto head = read_file(images_path);
  if (head.size() < 4 || std::memcmp(head.data(), kSpntMagic, 4) != 0)
    return load_idx(images_path, labels_path);
  ImageDataset data = load_spnt(images_path);
  if (!labels_path.empty()) {
    const auto l = read_file(labels_path);
    expect_magic(l, kIdxLabels, labels_path);
    const auto ln = read_be32(l, 4, labels_path);
    if (ln != static_cast<std::uint32_t>(data.count))
      throw DataError("image count " + std::to_string(data.count) + " differs from label count " +
                      std::to_string(ln) + " (" + labels_path + " offset 4)");
    expect_payload(l, 8, ln, labels_path);
    data.labels.emplace(l.begin() + 8, l.end());
  }
  return data;
}

namespace {

NormStats stats_of(const ImageD& image) {
  NormStats s;
  s.mean = image.mean();
  const double var = (image.array() - s.mean).square().mean();
  s.std = var > 0.0 ? std::sqrt(var) : 1.0;
  return s;
}

}  // namespace

ImageD normalize(const ImageD& image, NormStats* stats) {
  const NormStats s = stats_of(image);
  if (stats) *stats = s;
  return ((image.array() - s.mean) / s.std).matrix();
}

ImageD denormalize(const ImageD& image, const NormStats& stats) {
  return (image.array() * stats.std + stats.mean).matrix();
}

NormStats observed_stats(const ImageD& image, const EvidenceMask& mask) {
  const int n = static_cast<int>(mask.count());
  if (n == 0) return stats_of(image);
  double sum = 0.0;
  for (Eigen::Index k = 0; k < image.size(); ++k)
    if (mask.data()[k]) sum += image.data()[k];
  NormStats s;
  s.mean = sum / n;
  double sq = 0.0;
  for (Eigen::Index k = 0; k < image.size(); ++k)
    if (mask.data()[k]) sq += (image.data()[k] - s.mean) * (image.data()[k] - s.mean);
  const double var = sq / n;
  s.std = var > 0.0 ? std::sqrt(var) : 1.0;
  return s;
}

NormalizedSet normalize_samplewise(const ImageDataset& data) {
  NormalizedSet out;
  out.images.reserve(data.count);
  out.stats.reserve(data.count);
  for (int i = 0; i < data.count; ++i) {
    NormStats s;
    out.images.push_back(normalize(data.image(i), &s));
    out.stats.push_back(s);
  }
  return out;
}

const char* to_string(Occlusion kind) {
  switch (kind) {
    case Occlusion::kNone:
      return "none";
    case Occlusion::kLeft:
      return "left";
    case Occlusion::kBottom:
      return "bottom";
  }
  return "?";
}

Occlusion parse_occlusion(const std::string& name) {
  if (name == "none") return Occlusion::kNone;
  if (name == "left") return Occlusion::kLeft;
  if (name == "bottom") return Occlusion::kBottom;
  throw DomainError("unknown occlusion '" + name + "'");
}

EvidenceMask apply_occlusion(int height, int width, Occlusion kind) {
  EvidenceMask mask = all_observed(height, width);
  if (kind == Occlusion::kLeft)
    mask.leftCols(width / 2).setConstant(false);
  else if (kind == Occlusion::kBottom)
    mask.bottomRows(height / 2).setConstant(false);
  return mask;
}

double mse_occluded(const ImageD& predicted, const ImageD& original, const EvidenceMask& mask) {
  if (predicted.rows() != original.rows() || predicted.cols() != original.cols() ||
      mask.rows() != original.rows() || mask.cols() != original.cols())
    throw DomainError("mse_occluded: shape mismatch");
  double sum = 0.0;
  int n = 0;
  for (Eigen::Index k = 0; k < original.size(); ++k) {
    if (mask.data()[k]) continue;
    const double d = predicted.data()[k] - original.data()[k];
    sum += d * d;
    ++n;
  }
  if (n == 0) throw DomainError("mse_occluded: no hidden pixels");
  return sum / n;
}

void write_pgm(const std::string& path, const ImageD& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << "P5\n" << image.cols() << " " << image.rows() << "\n255\n";
  for (Eigen::Index k = 0; k < image.size(); ++k) {
    const double v = std::clamp(std::round(image.data()[k]), 0.0, 255.0);
    out.put(static_cast<char>(static_cast<std::uint8_t>(v)));
  }
  if (!out) throw DataError("write failed for " + path);
}

}  // namespace dgcspn
