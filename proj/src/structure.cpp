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

#include "dgcspn/structure.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "dgcspn/errors.hpp"

namespace dgcspn {

LayerSpec LayerSpec::gaussian_leaf(int components) {
  LayerSpec l;
  l.kind = LayerKind::kGaussianLeaf;
  l.components = components;
  return l;
}

LayerSpec LayerSpec::indicator_leaf(int arity) {
  LayerSpec l;
  l.kind = LayerKind::kIndicatorLeaf;
  l.arity = arity;
  return l;
}

LayerSpec LayerSpec::spatial_sum(int channels, Extent window) {
  LayerSpec l;
  l.kind = LayerKind::kSpatialSum;
  l.channels = channels;
  l.window = window;
  return l;
}

LayerSpec LayerSpec::product(Extent kernel, Extent stride, Extent dilation, Padding padding,
                             ChannelSelection selection, int channels) {
  LayerSpec l;
  l.kind = LayerKind::kProduct;
  l.kernel = kernel;
  l.stride = stride;
  l.dilation = dilation;
  l.padding = padding;
  l.selection = selection;
  l.channels = selection == ChannelSelection::kOneHot ? channels : 0;
  return l;
}

LayerSpec LayerSpec::class_sums(int classes) {
  LayerSpec l;
  l.kind = LayerKind::kClassSums;
  l.classes = classes;
  return l;
}

LayerSpec LayerSpec::root() { return LayerSpec{}; }

bool NetworkSpec::has_class_sums() const {
  for (const auto& l : layers)
    if (l.kind == LayerKind::kClassSums) return true;
  return false;
}

void check_well_formed(const NetworkSpec& spec) {
  if (spec.height < 1 || spec.width < 1)
    throw StructureError(-1, "input shape must be at least 1x1");
  const auto& layers = spec.layers;
  if (layers.size() < 2) throw StructureError(-1, "need at least a leaf layer and a root");
  if (!layers.front().is_leaf()) throw StructureError(0, "first layer must be a leaf layer");
  if (layers.back().kind != LayerKind::kRootSum)
    throw StructureError(static_cast<int>(layers.size()) - 1, "last layer must be root");

  for (std::size_t i = 0; i < layers.size(); ++i) {
    const int idx = static_cast<int>(i);
    const auto& l = layers[i];
    if (i > 0 && l.is_leaf()) throw StructureError(idx, "only one leaf layer is allowed");
    if (i + 1 < layers.size() && l.kind == LayerKind::kRootSum)
      throw StructureError(idx, "only one root is allowed");
    if (l.kind == LayerKind::kClassSums && i + 2 != layers.size())
      throw StructureError(idx, "class_sums must immediately precede root");
    switch (l.kind) {
      case LayerKind::kGaussianLeaf:
        if (l.components < 1) throw StructureError(idx, "gaussian_leaf needs k >= 1");
        break;
      case LayerKind::kIndicatorLeaf:
        if (l.arity < 1) throw StructureError(idx, "indicator_leaf needs arity >= 1");
        break;
      case LayerKind::kSpatialSum:
        if (l.channels < 1) throw StructureError(idx, "spatial_sum needs channels >= 1");
        if (l.window.h < 1 || l.window.w < 1)
          throw StructureError(idx, "spatial_sum window must be at least 1x1");
        break;
      case LayerKind::kProduct:
        if (l.kernel.h < 1 || l.kernel.w < 1)
          throw StructureError(idx, "gclp kernel sizes must be >= 1");
        if (l.stride.h < 1 || l.stride.w < 1) throw StructureError(idx, "gclp strides must be >= 1");
        if (l.dilation.h < 1 || l.dilation.w < 1)
          throw StructureError(idx, "gclp dilations must be >= 1");
        if (l.selection == ChannelSelection::kOneHot && l.channels < 1)
          throw StructureError(idx, "one-hot gclp needs channels >= 1");
        break;
      case LayerKind::kClassSums:
        if (l.classes < 1) throw StructureError(idx, "class_sums needs k >= 1");
        break;
      case LayerKind::kRootSum:
        break;
    }
  }
}

namespace {

int parse_int(int line, std::string_view key, std::string_view text) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw ParseError(line, "bad integer '" + std::string(text) + "' for " + std::string(key));
  return value;
}

Extent parse_extent(int line, std::string_view key, std::string_view text) {
  auto x = text.find('x');
  if (x == std::string_view::npos)
    throw ParseError(line, "expected <h>x<w> for " + std::string(key));
  return {parse_int(line, key, text.substr(0, x)), parse_int(line, key, text.substr(x + 1))};
}

class Fields {
 public:
  Fields(int line, std::istringstream& in) : line_(line) {
    std::string tok;
    while (in >> tok) {
      auto eq = tok.find('=');
      if (eq == std::string::npos || eq == 0 || eq + 1 == tok.size())
        throw ParseError(line, "expected key=value, got '" + tok + "'");
      auto key = tok.substr(0, eq);
      if (values_.count(key)) throw ParseError(line, "duplicate key '" + key + "'");
      values_[key] = tok.substr(eq + 1);
    }
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  const std::string& take(const std::string& key) {
    auto it = values_.find(key);
    if (it == values_.end()) throw ParseError(line_, "missing key '" + key + "'");
    used_.push_back(key);
    return it->second;
  }

  void finish() const {
    for (const auto& [k, v] : values_) {
      bool used = false;
      for (const auto& u : used_) used = used || u == k;
      if (!used) throw ParseError(line_, "unknown key '" + k + "'");
    }
  }

 private:
  int line_;
  std::map<std::string, std::string> values_;
  std::vector<std::string> used_;
};

std::string extent_str(Extent e) { return std::to_string(e.h) + "x" + std::to_string(e.w); }

}  // namespace

NetworkSpec parse_structure(std::string_view text) {
  NetworkSpec spec;
  bool have_input = false;
  std::istringstream all{std::string(text)};
  std::string raw;
  int line = 0;
  while (std::getline(all, raw)) {
    ++line;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.resize(hash);
    std::istringstream in(raw);
    std::string keyword;
    if (!(in >> keyword)) continue;
    Fields f(line, in);

    if (keyword == "input") {
      if (have_input) throw ParseError(line, "duplicate input line");
      if (!spec.layers.empty()) throw ParseError(line, "input must come before the layers");
      auto shape = parse_extent(line, "shape", f.take("shape"));
      spec.height = shape.h;
      spec.width = shape.w;
      have_input = true;
    } else if (keyword == "gaussian_leaf") {
      spec.layers.push_back(LayerSpec::gaussian_leaf(parse_int(line, "k", f.take("k"))));
    } else if (keyword == "indicator_leaf") {
      spec.layers.push_back(LayerSpec::indicator_leaf(parse_int(line, "arity", f.take("arity"))));
    } else if (keyword == "spatial_sum") {
      Extent window;
      if (f.has("window")) window = parse_extent(line, "window", f.take("window"));
      spec.layers.push_back(
          LayerSpec::spatial_sum(parse_int(line, "channels", f.take("channels")), window));
    } else if (keyword == "gclp") {
      Extent kernel = parse_extent(line, "kernel", f.take("kernel"));
      Extent stride, dilation;
      if (f.has("stride")) stride = parse_extent(line, "stride", f.take("stride"));
      if (f.has("dilation")) dilation = parse_extent(line, "dilation", f.take("dilation"));
      Padding pad = Padding::kNone;
      if (f.has("pad")) {
        const auto& p = f.take("pad");
        if (p == "full")
          pad = Padding::kFull;
        else if (p != "none")
          throw ParseError(line, "pad must be full or none");
      }
      ChannelSelection sel = ChannelSelection::kDepthwise;
      int n_out = 0;
      if (f.has("channels")) {
        const auto& c = f.take("channels");
        if (c.rfind("onehot:", 0) == 0) {
          sel = ChannelSelection::kOneHot;
          n_out = parse_int(line, "channels", std::string_view(c).substr(7));
        } else if (c != "depthwise") {
          throw ParseError(line, "channels must be depthwise or onehot:<n>");
        }
      }
      spec.layers.push_back(LayerSpec::product(kernel, stride, dilation, pad, sel, n_out));
    } else if (keyword == "class_sums") {
      spec.layers.push_back(LayerSpec::class_sums(parse_int(line, "k", f.take("k"))));
    } else if (keyword == "root") {
      spec.layers.push_back(LayerSpec::root());
    } else {
      throw ParseError(line, "unknown layer '" + keyword + "'");
    }
    f.finish();
  }
  if (!have_input) throw ParseError(line, "missing 'input shape=<h>x<w>' line");
  return spec;
}

NetworkSpec load_structure(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open structure file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_structure(ss.str());
}

std::string format_structure(const NetworkSpec& spec) {
  std::ostringstream out;
  out << "input shape=" << spec.height << "x" << spec.width << "\n";
  for (const auto& l : spec.layers) {
    switch (l.kind) {
      case LayerKind::kGaussianLeaf:
        out << "gaussian_leaf k=" << l.components;
        break;
      case LayerKind::kIndicatorLeaf:
        out << "indicator_leaf arity=" << l.arity;
        break;
      case LayerKind::kSpatialSum:
        out << "spatial_sum channels=" << l.channels;
        if (!(l.window == Extent{})) out << " window=" << extent_str(l.window);
        break;
      case LayerKind::kProduct:
        out << "gclp kernel=" << extent_str(l.kernel) << " stride=" << extent_str(l.stride)
            << " dilation=" << extent_str(l.dilation)
            << " pad=" << (l.padding == Padding::kFull ? "full" : "none") << " channels=";
        if (l.selection == ChannelSelection::kOneHot)
          out << "onehot:" << l.channels;
        else
          out << "depthwise";
        break;
      case LayerKind::kClassSums:
        out << "class_sums k=" << l.classes;
        break;
      case LayerKind::kRootSum:
        out << "root";
        break;
    }
    out << "\n";
  }
  return out.str();
}

}  // namespace dgcspn
