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

#include "dgcspn/graph.hpp"

#include <sstream>

namespace dgcspn {

namespace {

// channels^patch, saturated so the comparison against n_out cannot overflow.
long long combination_count(int channels, int patch) {
  constexpr long long kCap = 1LL << 40;
  long long n = 1;
  for (int t = 0; t < patch; ++t) {
    n *= channels;
    if (n > kCap) return kCap;
  }
  return n;
}

GclpGeometry product_geometry(const LayerSpec& l, int in_h, int in_w, int layer) {
  try {
    return GclpGeometry::make(in_h, in_w, l.kernel, l.stride, l.dilation, l.padding);
  } catch (const DomainError& e) {
    throw StructureError(layer, std::string(e.what()) + " (input " + std::to_string(in_h) + "x" +
                                    std::to_string(in_w) + ")");
  }
}

}  // namespace

std::vector<SpatialShape> layer_shapes(const NetworkSpec& spec) {
  check_well_formed(spec);
  std::vector<SpatialShape> shapes;
  shapes.reserve(spec.layers.size());
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const int idx = static_cast<int>(i);
    const auto& l = spec.layers[i];
    const SpatialShape in = i ? shapes.back() : SpatialShape{};
    switch (l.kind) {
      case LayerKind::kGaussianLeaf:
        shapes.push_back({spec.height, spec.width, l.components});
        break;
      case LayerKind::kIndicatorLeaf:
        shapes.push_back({spec.height, spec.width, l.arity});
        break;
      case LayerKind::kSpatialSum: {
        const int h = in.height - l.window.h + 1;
        const int w = in.width - l.window.w + 1;
        if (h < 1 || w < 1) throw StructureError(idx, "spatial_sum window larger than its input");
        shapes.push_back({h, w, l.channels});
        break;
      }
      case LayerKind::kProduct: {
        auto g = product_geometry(l, in.height, in.width, idx);
        int channels = in.channels;
        if (l.selection == ChannelSelection::kOneHot) {
          if (l.channels > combination_count(in.channels, g.patch_size()))
            throw StructureError(idx, "one-hot gclp asks for " + std::to_string(l.channels) +
                                          " channels but only " + std::to_string(in.channels) +
                                          "^" + std::to_string(g.patch_size()) +
                                          " combinations exist");
          channels = l.channels;
        }
        shapes.push_back({g.out_h, g.out_w, channels});
        break;
      }
      case LayerKind::kClassSums:
        shapes.push_back({1, 1, l.classes});
        break;
      case LayerKind::kRootSum:
        shapes.push_back({1, 1, 1});
        break;
    }
  }
  return shapes;
}

std::vector<int> full_scope_cells(const LayerScopes& top) {
  std::vector<int> cells;
  for (std::size_t c = 0; c < top.cells.size(); ++c) {
    const auto& s = top.cells[c];
    if (s.capacity() > 0 && s.count() == s.capacity()) cells.push_back(static_cast<int>(c));
  }
  return cells;
}

ScopeMap propagate_scopes(const NetworkSpec& spec) {
  const auto shapes = layer_shapes(spec);
  const int n = spec.num_variables();
  ScopeMap map;
  map.layers.reserve(spec.layers.size());

  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& l = spec.layers[i];
    LayerScopes out;
    out.height = shapes[i].height;
    out.width = shapes[i].width;
    out.cells.assign(out.height * out.width, Scope(n));

    if (l.is_leaf()) {
      for (int v = 0; v < n; ++v) out.cells[v] = Scope::singleton(n, v);
    } else {
      const LayerScopes& in = map.layers.back();
      switch (l.kind) {
        case LayerKind::kSpatialSum:
          for (int oi = 0; oi < out.height; ++oi)
            for (int oj = 0; oj < out.width; ++oj)
              for (int a = 0; a < l.window.h; ++a)
                for (int b = 0; b < l.window.w; ++b)
                  out.cells[oi * out.width + oj] |= in.at(oi + a, oj + b);
          break;
        case LayerKind::kProduct: {
          auto g = product_geometry(l, in.height, in.width, static_cast<int>(i));
          for (int oi = 0; oi < g.out_h; ++oi)
            for (int oj = 0; oj < g.out_w; ++oj)
              for (int t = 0; t < g.patch_size(); ++t)
                if (int c = g.input_cell(oi, oj, t); c >= 0)
                  out.cells[oi * g.out_w + oj] |= in.cells[c];
          break;
        }
        case LayerKind::kClassSums:
        case LayerKind::kRootSum:
          for (int c : full_scope_cells(in)) out.cells[0] |= in.cells[c];
          break;
        default:
          break;
      }
    }
    out.padding.resize(out.cells.size());
    for (std::size_t c = 0; c < out.cells.size(); ++c) out.padding[c] = out.cells[c].empty();
    map.layers.push_back(std::move(out));
  }
  return map;
}

ValidityReport check_validity(const NetworkSpec& spec) {
  const ScopeMap map = propagate_scopes(spec);
  ValidityReport report;

  for (std::size_t i = 1; i < spec.layers.size(); ++i) {
    const int idx = static_cast<int>(i);
    const auto& l = spec.layers[i];
    const LayerScopes& in = map.layers[i - 1];
    const LayerScopes& out = map.layers[i];

    switch (l.kind) {
      case LayerKind::kSpatialSum:
        // Single-cell sums are complete by construction; checked anyway.
        for (int oi = 0; oi < out.height; ++oi) {
          for (int oj = 0; oj < out.width; ++oj) {
            std::vector<Scope> children;
            bool complete = true;
            for (int a = 0; a < l.window.h; ++a) {
              for (int b = 0; b < l.window.w; ++b) {
                const int c = (oi + a) * in.width + (oj + b);
                if (in.padding[c]) continue;
                if (!children.empty() && !(children.front() == in.cells[c])) complete = false;
                children.push_back(in.cells[c]);
              }
            }
            if (!complete)
              report.violations.push_back(
                  {idx, oi, oj, ViolationKind::kCompleteness, std::move(children)});
          }
        }
        break;
      case LayerKind::kProduct: {
        auto g = product_geometry(l, in.height, in.width, idx);
        for (int oi = 0; oi < g.out_h; ++oi) {
          for (int oj = 0; oj < g.out_w; ++oj) {
            std::vector<Scope> children;
            Scope seen(spec.num_variables());
            bool disjoint = true;
            for (int t = 0; t < g.patch_size(); ++t) {
              const int c = g.input_cell(oi, oj, t);
              if (c < 0 || in.padding[c]) continue;
              if (seen.intersects(in.cells[c])) disjoint = false;
              seen |= in.cells[c];
              children.push_back(in.cells[c]);
            }
            if (!disjoint)
              report.violations.push_back(
                  {idx, oi, oj, ViolationKind::kDecomposability, std::move(children)});
          }
        }
        break;
      }
      case LayerKind::kClassSums:
      case LayerKind::kRootSum: {
        const bool after_class = spec.layers[i - 1].kind == LayerKind::kClassSums;
        if (!after_class && full_scope_cells(in).empty())
          report.violations.push_back({idx, 0, 0, ViolationKind::kCoverage, {}});
        break;
      }
      default:
        break;
    }
  }
  report.valid = report.violations.empty();
  return report;
}

const char* to_string(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::kCompleteness:
      return "completeness";
    case ViolationKind::kDecomposability:
      return "decomposability";
    case ViolationKind::kCoverage:
      return "coverage";
  }
  return "?";
}

std::string format_report(const ValidityReport& report) {
  if (report.valid) return "valid\n";
  std::ostringstream out;
  for (const auto& v : report.violations)
    out << "layer=" << v.layer << " cell=" << v.row << "," << v.col
        << " kind=" << to_string(v.kind) << "\n";
  return out.str();
}

InvalidNetworkError::InvalidNetworkError(ValidityReport report)
    : StructureError(-1, "network is not valid (" + std::to_string(report.violations.size()) +
                             " violations)"),
      report_(std::move(report)) {}

int ExecutionPlan::class_op() const {
  for (std::size_t i = 0; i < ops.size(); ++i)
    if (ops[i].kind == OpKind::kClassSums) return static_cast<int>(i);
  return -1;
}

Eigen::MatrixXi onehot_kernel_table(int channels, int patch, int n_out) {
  if (n_out < 1 || n_out > combination_count(channels, patch))
    throw DomainError("onehot_kernel_table: n_out out of range");
  Eigen::MatrixXi table(n_out, patch);
  for (int r = 0; r < n_out; ++r) {
    int rest = r;
    for (int t = patch - 1; t >= 0; --t) {
      table(r, t) = rest % channels;
      rest /= channels;
    }
  }
  return table;
}

ExecutionPlan compile(const NetworkSpec& spec) {
  const auto shapes = layer_shapes(spec);
  ValidityReport report = check_validity(spec);
  if (!report.valid) throw InvalidNetworkError(std::move(report));
  const ScopeMap map = propagate_scopes(spec);

  ExecutionPlan plan;
  plan.spec = spec;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& l = spec.layers[i];
    PlanOp op;
    op.layer = static_cast<int>(i);
    op.output = shapes[i];
    op.input = i ? shapes[i - 1] : SpatialShape{spec.height, spec.width, 1};
    op.padding = map.layers[i].padding;
    switch (l.kind) {
      case LayerKind::kGaussianLeaf:
        op.kind = OpKind::kGaussianLeaf;
        break;
      case LayerKind::kIndicatorLeaf:
        op.kind = OpKind::kIndicatorLeaf;
        break;
      case LayerKind::kSpatialSum:
        if (!(l.window == Extent{}))
          throw UnsupportedError("multi-cell spatial sums are validated but not compiled");
        op.kind = OpKind::kSum;
        op.fan_in = op.input.channels;
        op.param_slot = plan.num_sum_slots++;
        break;
      case LayerKind::kProduct:
        op.kind = OpKind::kProduct;
        op.geometry = GclpGeometry::make(op.input.height, op.input.width, l.kernel, l.stride,
                                         l.dilation, l.padding);
        if (l.selection == ChannelSelection::kOneHot) {
          op.kernel_table =
              onehot_kernel_table(op.input.channels, op.geometry.patch_size(), l.channels);
        } else {
          op.kernel_table.resize(op.input.channels, op.geometry.patch_size());
          for (int c = 0; c < op.input.channels; ++c) op.kernel_table.row(c).setConstant(c);
        }
        break;
      case LayerKind::kClassSums:
      case LayerKind::kRootSum:
        op.kind = l.kind == LayerKind::kClassSums ? OpKind::kClassSums : OpKind::kRoot;
        op.child_cells = full_scope_cells(map.layers[i - 1]);
        op.fan_in = static_cast<int>(op.child_cells.size()) * op.input.channels;
        op.param_slot = plan.num_sum_slots++;
        break;
    }
    plan.ops.push_back(std::move(op));
  }
  return plan;
}

}  // namespace dgcspn
