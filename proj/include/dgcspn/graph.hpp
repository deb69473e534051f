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

#ifndef DGCSPN_GRAPH_HPP_
#define DGCSPN_GRAPH_HPP_

#include <Eigen/Core>

#include <string>
#include <vector>

#include "dgcspn/errors.hpp"
#include "dgcspn/scope.hpp"
#include "dgcspn/structure.hpp"
#include "dgcspn/tensor.hpp"

namespace dgcspn {

/// Scopes of one layer's output grid. All channels of a cell share the
/// cell's scope; padding cells carry the empty scope.
struct LayerScopes {
  int height = 0;
  int width = 0;
  std::vector<Scope> cells;
  std::vector<char> padding;

  const Scope& at(int i, int j) const { return cells[i * width + j]; }
};

struct ScopeMap {
  std::vector<LayerScopes> layers;  // parallel to NetworkSpec::layers
};

/// Output shape of every layer, checking the shape arithmetic between
/// consecutive layers. Throws StructureError naming the layer.
std::vector<SpatialShape> layer_shapes(const NetworkSpec& spec);

/// Symbolic scope propagation. Product cells take the union of the cells
/// under their (dilated, strided, padded) patch; sums keep their input grid;
/// class sums and the root read the top-layer cells whose scope is the full
/// variable set.
ScopeMap propagate_scopes(const NetworkSpec& spec);

/// Top-layer cells feeding class sums or the root: those covering every
/// variable.
std::vector<int> full_scope_cells(const LayerScopes& top);

enum class ViolationKind { kCompleteness, kDecomposability, kCoverage };

struct Violation {
  int layer = 0;
  int row = 0;
  int col = 0;
  ViolationKind kind = ViolationKind::kCompleteness;
  std::vector<Scope> scopes;  // child scopes involved
};

struct ValidityReport {
  bool valid = true;
  std::vector<Violation> violations;
};

ValidityReport check_validity(const NetworkSpec& spec);

const char* to_string(ViolationKind kind);

/// "valid\n", or one `layer=<n> cell=<i>,<j> kind=<kind>` line per violation.
std::string format_report(const ValidityReport& report);

class InvalidNetworkError : public StructureError {
 public:
  explicit InvalidNetworkError(ValidityReport report);
  const ValidityReport& report() const { return report_; }

 private:
  ValidityReport report_;
};

enum class OpKind { kGaussianLeaf, kIndicatorLeaf, kSum, kProduct, kClassSums, kRoot };

struct PlanOp {
  OpKind kind = OpKind::kRoot;
  int layer = 0;  // index into NetworkSpec::layers
  SpatialShape input;
  SpatialShape output;

  // kProduct
  GclpGeometry geometry;
  Eigen::MatrixXi kernel_table;  // n_out x patch positions

  // kClassSums / kRoot: input cells (row-major) whose channels are the
  // children, concatenated cell-major.
  std::vector<int> child_cells;

  std::vector<char> padding;  // output cells with empty scope
  int param_slot = -1;        // sums: index into ModelParams::sums
  int fan_in = 0;             // children per sum node

  bool is_sum() const {
    return kind == OpKind::kSum || kind == OpKind::kClassSums || kind == OpKind::kRoot;
  }
};

/// Flat evaluation program, leaf op first, root last. Immutable once built.
struct ExecutionPlan {
  NetworkSpec spec;
  std::vector<PlanOp> ops;
  int num_sum_slots = 0;

  const PlanOp& leaf() const { return ops.front(); }
  const PlanOp& root() const { return ops.back(); }
  bool discriminative() const { return class_op() >= 0; }
  int class_op() const;
  int num_variables() const { return spec.num_variables(); }
};

/// First n_out channel tuples, lexicographic over patch positions (position
/// 0 most significant). Throws DomainError if n_out exceeds channels^patch.
Eigen::MatrixXi onehot_kernel_table(int channels, int patch, int n_out);

/// Compiles a valid network. Throws InvalidNetworkError carrying the report
/// for invalid ones, StructureError for malformed ones.
ExecutionPlan compile(const NetworkSpec& spec);

}  // namespace dgcspn

#endif  // DGCSPN_GRAPH_HPP_
