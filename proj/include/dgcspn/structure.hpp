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

#ifndef DGCSPN_STRUCTURE_HPP_
#define DGCSPN_STRUCTURE_HPP_

#include <string>
#include <string_view>
#include <vector>

namespace dgcspn {

enum class LayerKind { kGaussianLeaf, kIndicatorLeaf, kSpatialSum, kProduct, kClassSums, kRootSum };
enum class Padding { kNone, kFull };
enum class ChannelSelection { kDepthwise, kOneHot };

/// A (rows, columns) pair: kernel sizes, strides, dilations, sum windows.
struct Extent {
  int h = 1;
  int w = 1;
  friend bool operator==(const Extent&, const Extent&) = default;
};

struct SpatialShape {
  int height = 1;
  int width = 1;
  int channels = 1;
  int cells() const { return height * width; }
  friend bool operator==(const SpatialShape&, const SpatialShape&) = default;
};

/// One layer of the declarative stack. Only the fields relevant to `kind`
/// are meaningful; use the named constructors.
struct LayerSpec {
  LayerKind kind = LayerKind::kRootSum;

  int components = 0;  // gaussian leaf: components per variable
  int arity = 0;       // indicator leaf: states per variable
  int channels = 0;    // spatial sum: output channels; one-hot product: n_out
  int classes = 0;     // class sums

  // Spatial sums normally read one cell. A wider window wires a sum across
  // several cells, which breaks completeness; it exists so that the
  // validator can be pointed at such structures.
  Extent window;

  Extent kernel;
  Extent stride;
  Extent dilation;
  Padding padding = Padding::kNone;
  ChannelSelection selection = ChannelSelection::kDepthwise;

  static LayerSpec gaussian_leaf(int components);
  static LayerSpec indicator_leaf(int arity);
  static LayerSpec spatial_sum(int channels, Extent window = {});
  static LayerSpec product(Extent kernel, Extent stride, Extent dilation, Padding padding,
                           ChannelSelection selection, int channels = 0);
  static LayerSpec class_sums(int classes);
  static LayerSpec root();

  bool is_leaf() const {
    return kind == LayerKind::kGaussianLeaf || kind == LayerKind::kIndicatorLeaf;
  }
  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// Input grid plus the ordered layer stack (leaf first, root last).
struct NetworkSpec {
  int height = 0;
  int width = 0;
  std::vector<LayerSpec> layers;

  int num_variables() const { return height * width; }
  bool has_class_sums() const;
  const LayerSpec& leaf() const { return layers.front(); }
  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

/// Checks layer ordering and per-layer parameter ranges. Does not do shape
/// arithmetic (see propagate_scopes). Throws StructureError.
void check_well_formed(const NetworkSpec& spec);

/// Parses the line-oriented structure format:
///
///   input shape=28x28
///   gaussian_leaf k=4
///   gclp kernel=2x2 stride=1x1 dilation=1x1 pad=full channels=onehot:256
///   spatial_sum channels=16
///   gclp kernel=2x2 dilation=2x2 pad=full channels=depthwise
///   class_sums k=10
///   root
///
/// `#` starts a comment. Throws ParseError with the offending line number.
NetworkSpec parse_structure(std::string_view text);
NetworkSpec load_structure(const std::string& path);

/// Canonical text form; parse_structure(format_structure(s)) == s.
std::string format_structure(const NetworkSpec& spec);

}  // namespace dgcspn

#endif  // DGCSPN_STRUCTURE_HPP_
