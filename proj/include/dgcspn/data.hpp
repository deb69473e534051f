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

#ifndef DGCSPN_DATA_HPP_
#define DGCSPN_DATA_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dgcspn/leaves.hpp"

namespace dgcspn {

/// Byte images with optional labels, as read from disk.
struct ImageDataset {
  int count = 0;
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;  // count * height * width, row-major
  std::optional<std::vector<int>> labels;

  int pixels_per_image() const { return height * width; }
  /// Image i as doubles in [0, 255].
  ImageD image(int i) const;
  /// First n images (and labels); n is clamped to count.
  ImageDataset head(int n) const;
  /// Throws DataError if labels are present and their count differs.
  void check() const;
};

/// Reads big-endian IDX image (magic 0x00000803) and, optionally, label
/// (0x00000801) files. Paths ending in ".gz" are decompressed on the fly.
/// Errors name the byte offset of the problem.
ImageDataset load_idx(const std::string& images_path, const std::string& labels_path = "");

/// IDX encodings of a dataset (uncompressed).
std::vector<std::uint8_t> serialize_idx_images(const ImageDataset& data);
std::vector<std::uint8_t> serialize_idx_labels(const ImageDataset& data);

/// Little-endian "SPNT" container: magic, u32 version (1), u32 N, H, W, then
/// N*H*W bytes.
ImageDataset load_spnt(const std::string& path);
std::vector<std::uint8_t> serialize_spnt(const ImageDataset& data);

/// SPNT if the file starts with the SPNT magic, IDX otherwise.
ImageDataset load_images(const std::string& images_path, const std::string& labels_path = "");

/// Whole file, gunzipped when the path ends in ".gz".
std::vector<std::uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes);

struct NormStats {
  double mean = 0.0;
  double std = 1.0;
};

/// (x - mean) / std with the population standard deviation; a constant
/// image gets std = 1.
ImageD normalize(const ImageD& image, NormStats* stats = nullptr);
ImageD denormalize(const ImageD& image, const NormStats& stats);

/// Statistics over the observed pixels only (falls back to all pixels when
/// nothing is observed).
NormStats observed_stats(const ImageD& image, const EvidenceMask& mask);

struct NormalizedSet {
  std::vector<ImageD> images;
  std::vector<NormStats> stats;
};

NormalizedSet normalize_samplewise(const ImageDataset& data);

enum class Occlusion { kNone, kLeft, kBottom };

const char* to_string(Occlusion kind);
Occlusion parse_occlusion(const std::string& name);

/// Left hides columns [0, W/2); bottom hides rows [ceil(H/2), H).
EvidenceMask apply_occlusion(int height, int width, Occlusion kind);

/// Mean squared difference over hidden pixels. Throws DomainError when no
/// pixel is hidden.
double mse_occluded(const ImageD& predicted, const ImageD& original, const EvidenceMask& mask);

/// Binary PGM (P5). Values are rounded and clipped to [0, 255].
void write_pgm(const std::string& path, const ImageD& image);

}  // namespace dgcspn

#endif  // DGCSPN_DATA_HPP_
