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

#include <set>

#include "doctest.h"
#include "dgcspn/graph.hpp"
#include "networks.hpp"
#include "oracle.hpp"

using namespace dgcspn;

namespace {

NetworkSpec line_stack(int n, const std::vector<int>& kernels, const std::vector<int>& dilations) {
  NetworkSpec spec;
  spec.height = 1;
  spec.width = n;
  spec.layers.push_back(LayerSpec::indicator_leaf(2));
  for (std::size_t i = 0; i < kernels.size(); ++i)
    spec.layers.push_back(LayerSpec::product({1, kernels[i]}, {}, {1, dilations[i]}, Padding::kFull,
                                             ChannelSelection::kDepthwise));
  spec.layers.push_back(LayerSpec::root());
  return spec;
}

std::set<int> members(const Scope& s) {
  auto m = s.members();
  return {m.begin(), m.end()};
}

}  // namespace

TEST_SUITE("graph") {

TEST_CASE("scope set algebra") {
  Scope a = Scope::singleton(130, 3);
  Scope b = Scope::singleton(130, 129);
  CHECK(a.count() == 1);
  CHECK(a.contains(3));
  CHECK_FALSE(a.contains(129));
  Scope u = a | b;
  CHECK(u.count() == 2);
  CHECK(u.members() == std::vector<int>{3, 129});
  CHECK((u & a) == a);
  CHECK((a & b).empty());
  CHECK_FALSE(a.intersects(b));
  CHECK(u.intersects(b));
  CHECK(Scope::full(130).count() == 130);
  CHECK(u.to_string() == "{3,129}");
  CHECK(Scope(5).empty());
}

TEST_CASE("structure text parses and round-trips") {
  const char* text =
      "# a comment line\n"
      "input shape=28x28\n"
      "gaussian_leaf k=4   # trailing comment\n"
      "gclp kernel=2x2 stride=1x1 dilation=2x2 pad=full channels=onehot:16\n"
      "spatial_sum channels=16\n"
      "gclp kernel=2x2 dilation=4x4 pad=full\n"
      "class_sums k=10\n"
      "root\n";
  NetworkSpec spec = parse_structure(text);
  REQUIRE(spec.layers.size() == 6);
  CHECK(spec.height == 28);
  CHECK(spec.layers[0].components == 4);
  CHECK(spec.layers[1].selection == ChannelSelection::kOneHot);
  CHECK(spec.layers[1].channels == 16);
  CHECK(spec.layers[1].dilation == Extent{2, 2});
  CHECK(spec.layers[1].padding == Padding::kFull);
  CHECK(spec.layers[3].selection == ChannelSelection::kDepthwise);
  CHECK(spec.layers[3].stride == Extent{1, 1});
  CHECK(spec.layers[4].classes == 10);
  CHECK(parse_structure(format_structure(spec)) == spec);
}

TEST_CASE("random structures round-trip through text") {
  Rng rng = substream(11, "graph-roundtrip");
  testnet::Options o;
  o.gaussian = true;
  for (int i = 0; i < 50; ++i) {
    NetworkSpec spec = testnet::random_network(rng, o);
    CHECK(parse_structure(format_structure(spec)) == spec);
  }
}

TEST_CASE("parse errors carry the line number") {
  auto line_of = [](const char* text) {
    try {
      parse_structure(text);
    } catch (const ParseError& e) {
      return e.line();
    }
    return 0;
  };
  CHECK(line_of("input shape=2x2\nfancy_layer k=1\n") == 2);
  CHECK(line_of("input shape=2x2\ngaussian_leaf k=four\n") == 2);
  CHECK(line_of("input shape=2x2\ngaussian_leaf k=1 k=2\n") == 2);
  CHECK(line_of("input shape=2x2\n\ngclp kernel=2x2 colour=red\n") == 3);
  CHECK(line_of("input shape=2x2\ngclp kernel=2\n") == 2);
  CHECK(line_of("input shape=2x2\ngclp kernel=2x2 pad=half\n") == 2);
  CHECK(line_of("gaussian_leaf k=2\n") == 1);
  CHECK_THROWS_WITH_AS(parse_structure("input shape=2x2\nroot extra\n"), doctest::Contains("line 2"),
                       ParseError);
}

TEST_CASE("malformed stacks name the offending layer") {
  auto layer_of = [](const NetworkSpec& spec) {
    try {
      layer_shapes(spec);
    } catch (const StructureError& e) {
      return e.layer();
    }
    return -2;
  };
  NetworkSpec spec = parse_structure("input shape=4x4\ngaussian_leaf k=2\nroot\n");
  CHECK(layer_of(spec) == -2);

  spec = parse_structure("input shape=2x2\ngaussian_leaf k=2\ngclp kernel=3x3\nroot\n");
  CHECK(layer_of(spec) == 1);

  spec = parse_structure("input shape=2x2\ngaussian_leaf k=2\ngclp kernel=2x2 channels=onehot:17\nroot\n");
  CHECK(layer_of(spec) == 1);  // 2^4 = 16 combinations only

  spec = parse_structure("input shape=2x2\ngaussian_leaf k=2\nclass_sums k=2\nspatial_sum channels=2\nroot\n");
  CHECK(layer_of(spec) == 1);

  spec = parse_structure("input shape=2x2\nspatial_sum channels=2\nroot\n");
  CHECK(layer_of(spec) == 0);

  spec = parse_structure("input shape=2x2\ngaussian_leaf k=2\ngaussian_leaf k=2\nroot\n");
  CHECK(layer_of(spec) == 1);

  spec = parse_structure("input shape=2x2\ngaussian_leaf k=2\nspatial_sum channels=2\n");
  CHECK(layer_of(spec) == 1);
}

TEST_CASE("leaf scopes are singletons") {
  NetworkSpec spec = parse_structure("input shape=3x4\nindicator_leaf arity=2\nroot\n");
  ScopeMap map = propagate_scopes(spec);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 4; ++j) CHECK(map.layers[0].at(i, j) == Scope::singleton(12, i * 4 + j));
}

TEST_CASE("1-D doubling dilations: layer 3 scopes are contiguous runs of up to 8") {
  NetworkSpec spec = line_stack(8, {2, 2, 2}, {1, 2, 4});
  ScopeMap map = propagate_scopes(spec);
  const LayerScopes& l3 = map.layers[3];
  REQUIRE(l3.width == 15);
  int full = 0;
  for (int o = 0; o < l3.width; ++o) {
    std::set<int> want;
    for (int v = std::max(0, o - 7); v <= std::min(7, o); ++v) want.insert(v);
    CHECK(members(l3.at(0, o)) == want);
    full += want.size() == 8;
  }
  CHECK(full == 1);
  CHECK(check_validity(spec).valid);
}

TEST_CASE("stride-2 2x2 product on 4x4 covers a 2x2 block") {
  NetworkSpec spec =
      parse_structure("input shape=4x4\nindicator_leaf arity=2\ngclp kernel=2x2 stride=2x2\nroot\n");
  ScopeMap map = propagate_scopes(spec);
  CHECK(members(map.layers[1].at(0, 0)) == std::set<int>{0, 1, 4, 5});
  CHECK(members(map.layers[1].at(1, 1)) == std::set<int>{10, 11, 14, 15});
}

TEST_CASE("validity examples") {
  SUBCASE("doubling dilations are valid") {
    NetworkSpec spec = parse_structure(
        "input shape=8x8\ngaussian_leaf k=2\n"
        "gclp kernel=2x2 pad=full channels=onehot:4\nspatial_sum channels=2\n"
        "gclp kernel=2x2 dilation=2x2 pad=full\nspatial_sum channels=2\n"
        "gclp kernel=2x2 dilation=4x4 pad=full\nroot\n");
    ValidityReport r = check_validity(spec);
    CHECK(r.valid);
    CHECK(format_report(r) == "valid\n");
  }
  SUBCASE("two dilation-1 layers break decomposability everywhere they overlap") {
    NetworkSpec spec = line_stack(3, {2, 2}, {1, 1});
    ValidityReport r = check_validity(spec);
    CHECK_FALSE(r.valid);
    // Layer 1 scopes: {0} {0,1} {1,2} {2}. Every layer-2 cell that reads
    // two of them (cells 1..3) sees an overlap.
    std::vector<int> cols;
    for (const auto& v : r.violations) {
      CHECK(v.kind == ViolationKind::kDecomposability);
      CHECK(v.layer == 2);
      cols.push_back(v.col);
    }
    CHECK(cols == std::vector<int>{1, 2, 3});
    CHECK(format_report(r) ==
          "layer=2 cell=0,1 kind=decomposability\n"
          "layer=2 cell=0,2 kind=decomposability\n"
          "layer=2 cell=0,3 kind=decomposability\n");
  }
  SUBCASE("a sum wired across two leaf cells is incomplete") {
    NetworkSpec spec =
        parse_structure("input shape=1x2\nindicator_leaf arity=2\nspatial_sum channels=1 window=1x2\nroot\n");
    ValidityReport r = check_validity(spec);
    REQUIRE(r.violations.size() == 1);
    CHECK(r.violations[0].kind == ViolationKind::kCompleteness);
    CHECK(r.violations[0].layer == 1);
    CHECK(r.violations[0].scopes.size() == 2);
  }
  SUBCASE("a root without a full-scope input cell is reported") {
    NetworkSpec spec = parse_structure("input shape=1x3\nindicator_leaf arity=2\ngclp kernel=1x2\nroot\n");
    ValidityReport r = check_validity(spec);
    REQUIRE(r.violations.size() == 1);
    CHECK(r.violations[0].kind == ViolationKind::kCoverage);
    CHECK(format_report(r) == "layer=2 cell=0,0 kind=coverage\n");
  }
}

TEST_CASE("validator agrees with the reference scope checker") {
  Rng rng = substream(3, "graph-agree");
  testnet::Options o;
  int valid = 0;
  for (int i = 0; i < 500; ++i) {
    NetworkSpec spec = testnet::random_network(rng, o);
    const bool engine = check_validity(spec).valid;
    CHECK(engine == oracle::check(spec).valid);
    valid += engine;
  }
  CHECK(valid > 50);
  CHECK(valid < 450);
}

TEST_CASE("sum layers keep their input scope grid and valid roots cover everything") {
  Rng rng = substream(4, "graph-sum-scopes");
  testnet::Options o;
  for (int i = 0; i < 100; ++i) {
    NetworkSpec spec = testnet::random_valid_network(rng, o);
    ScopeMap map = propagate_scopes(spec);
    for (std::size_t l = 1; l < spec.layers.size(); ++l) {
      if (spec.layers[l].kind != LayerKind::kSpatialSum) continue;
      CHECK(map.layers[l].cells == map.layers[l - 1].cells);
    }
    CHECK(map.layers.back().cells[0] == Scope::full(spec.num_variables()));
    for (const auto& layer : map.layers)
      for (std::size_t c = 0; c < layer.cells.size(); ++c)
        CHECK(static_cast<bool>(layer.padding[c]) == layer.cells[c].empty());
  }
}

TEST_CASE("validity does not depend on sum channel counts") {
  Rng rng = substream(5, "graph-channels");
  testnet::Options o;
  for (int i = 0; i < 200; ++i) {
    NetworkSpec spec = testnet::random_network(rng, o);
    const bool before = check_validity(spec).valid;
    NetworkSpec changed = spec;
    for (auto& l : changed.layers)
      if (l.kind == LayerKind::kSpatialSum) l.channels = testnet::uniform_int(rng, 1, 7);
    bool shapes_ok = true;
    try {
      layer_shapes(changed);
    } catch (const StructureError&) {
      shapes_ok = false;  // a later one-hot layer may now ask for too many tuples
    }
    if (shapes_ok) CHECK(check_validity(changed).valid == before);
  }
}

TEST_CASE("the product-of-kernels dilation schedule is always valid on 1-D grids") {
  for (int n = 2; n <= 16; ++n) {
    for (int depth = 1; depth <= 4; ++depth) {
      for (int mask = 0; mask < (1 << depth); ++mask) {
        std::vector<int> kernels, dilations;
        int p = 1;
        for (int l = 0; l < depth; ++l) {
          kernels.push_back((mask >> l) & 1 ? 3 : 2);
          dilations.push_back(p);
          p *= kernels.back();
        }
        NetworkSpec spec = line_stack(n, kernels, dilations);
        if (p < n) continue;  // top cells cannot cover the grid yet
        CHECK_MESSAGE(check_validity(spec).valid, "n=" << n);
        CHECK(oracle::check(spec).valid);
      }
    }
  }
}

TEST_CASE("one-hot kernel tables are lexicographic") {
  NetworkSpec spec = parse_structure(
      "input shape=2x2\ngaussian_leaf k=2\ngclp kernel=2x2 channels=onehot:16\nroot\n");
  ExecutionPlan plan = compile(spec);
  const Eigen::MatrixXi& t = plan.ops[1].kernel_table;
  REQUIRE(t.rows() == 16);
  REQUIRE(t.cols() == 4);
  std::set<std::vector<int>> seen;
  for (int r = 0; r < 16; ++r) {
    int code = 0;
    std::vector<int> tuple;
    for (int c = 0; c < 4; ++c) {
      tuple.push_back(t(r, c));
      code = code * 2 + t(r, c);
    }
    CHECK(code == r);
    seen.insert(tuple);
  }
  CHECK(seen.size() == 16);
  CHECK(onehot_kernel_table(3, 2, 4) == (Eigen::MatrixXi(4, 2) << 0, 0, 0, 1, 0, 2, 1, 0).finished());
}

TEST_CASE("depthwise products select the identity") {
  NetworkSpec spec = parse_structure("input shape=1x2\ngaussian_leaf k=3\ngclp kernel=1x2 stride=1x2\nroot\n");
  ExecutionPlan plan = compile(spec);
  const PlanOp& op = plan.ops[1];
  CHECK(op.output.channels == 3);
  for (int r = 0; r < 3; ++r)
    for (int t = 0; t < 2; ++t) CHECK(op.kernel_table(r, t) == r);
}

TEST_CASE("full padding for kernel 2 and dilation 4 is 4 cells per side") {
  NetworkSpec spec = parse_structure(
      "input shape=1x8\nindicator_leaf arity=2\ngclp kernel=1x2 pad=full\n"
      "gclp kernel=1x2 dilation=1x2 pad=full\ngclp kernel=1x2 dilation=1x4 pad=full\nroot\n");
  ExecutionPlan plan = compile(spec);
  const GclpGeometry& g = plan.ops[3].geometry;
  CHECK(g.pad_w == 4);
  CHECK(g.pad_h == 0);
  CHECK(g.in_w == 11);
  CHECK(g.out_w == 15);
  // Output 0 reads input positions -4 (padding) and 0; output 14 reads 10
  // and 14 (padding).
  CHECK(g.input_cell(0, 0, 0) == -1);
  CHECK(g.input_cell(0, 0, 1) == 0);
  CHECK(g.input_cell(0, 14, 0) == 10);
  CHECK(g.input_cell(0, 14, 1) == -1);
  int padded = 0;
  for (int o = 0; o < g.out_w; ++o)
    for (int t = 0; t < 2; ++t) padded += g.input_cell(0, o, t) < 0;
  CHECK(padded == 8);
}

TEST_CASE("compile refuses invalid networks with the report") {
  NetworkSpec spec = line_stack(3, {2, 2}, {1, 1});
  try {
    compile(spec);
    FAIL("expected a refusal");
  } catch (const InvalidNetworkError& e) {
    CHECK(e.report().violations.size() == 3);
  }
}

TEST_CASE("plans chain shapes and end in a scalar") {
  Rng rng = substream(6, "graph-plan");
  testnet::Options o;
  o.gaussian = true;
  for (int i = 0; i < 50; ++i) {
    ExecutionPlan plan = compile(testnet::random_valid_network(rng, o));
    for (std::size_t k = 1; k < plan.ops.size(); ++k) CHECK(plan.ops[k].input == plan.ops[k - 1].output);
    CHECK(plan.root().output == SpatialShape{1, 1, 1});
    int slots = 0;
    for (const auto& op : plan.ops)
      if (op.is_sum()) CHECK(op.param_slot == slots++);
    CHECK(slots == plan.num_sum_slots);
    CHECK(compile(plan.spec).ops.size() == plan.ops.size());
  }
}

}  // TEST_SUITE
