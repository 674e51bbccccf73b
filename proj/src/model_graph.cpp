// SPDX-License-Identifier: Apache-2.0
#include "slicekit/model_graph.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "slicekit/bytes.hpp"
#include "slicekit/error.hpp"
#include "slicekit/random.hpp"
#include "slicekit/wire.hpp"

namespace slicekit {
namespace {

constexpr char kWeightMagic[4] = {'S', 'L', 'K', 'W'};
constexpr std::uint16_t kWeightVersion = 1;

std::vector<std::string> tokenize(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line.substr(0, line.find('#')));
  for (std::string tok; in >> tok;) out.push_back(tok);
  return out;
}

std::uint32_t parse_u32(const std::string& tok, int line, const char* what) {
  std::uint32_t v = 0;
  const auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || p != tok.data() + tok.size()) {
    throw ParseError("line " + std::to_string(line) + ": bad " + what + " '" + tok + "'");
  }
  return v;
}

void expect_args(const std::vector<std::string>& toks, std::size_t n, int line) {
  if (toks.size() != n) {
    throw ParseError("line " + std::to_string(line) + ": '" + toks[0] + (toks.size() > 2 ? " " + toks[2] : "") +
                     "' expects " + std::to_string(n - 1) + " fields, got " +
                     std::to_string(toks.size() - 1));
  }
}

Layer parse_layer(const std::vector<std::string>& t, int line) {
  // t = {"layer", id, kind, params...}
  if (t.size() < 3) throw ParseError("line " + std::to_string(line) + ": layer needs <id> <kind>");
  const std::string& kind = t[2];
  auto arg = [&](std::size_t i, const char* what) { return parse_u32(t[i], line, what); };
  auto want = [&](std::size_t params) {
    if (t.size() != 3 + params) {
      throw ParseError("line " + std::to_string(line) + ": " + kind + " takes " +
                       std::to_string(params) + " parameters, got " + std::to_string(t.size() - 3));
    }
  };
  if (kind == "conv2d") {
    want(4);
    return Layer{Conv2D{arg(3, "out_channels"), arg(4, "kernel"), arg(5, "stride"),
                        arg(6, "padding")},
                 {}};
  }
  if (kind == "dense") {
    want(1);
    return Layer{Dense{arg(3, "out_units")}, {}};
  }
  if (kind == "maxpool") {
    want(2);
    return Layer{MaxPool{arg(3, "kernel"), arg(4, "stride")}, {}};
  }
  want(0);
  if (kind == "relu") return Layer{ReLU{}, {}};
  if (kind == "gap") return Layer{GlobalAvgPool{}, {}};
  if (kind == "flatten") return Layer{Flatten{}, {}};
  if (kind == "device_tl") return Layer{DeviceTL{}, {}};
  if (kind == "edge_tl") return Layer{EdgeTL{}, {}};
  throw ParseError("line " + std::to_string(line) + ": unknown layer kind '" + kind + "'");
}

std::string layer_params(const LayerKind& kind) {
  std::ostringstream os;
  if (const auto* c = std::get_if<Conv2D>(&kind)) {
    os << ' ' << c->out_channels << ' ' << c->kernel << ' ' << c->stride << ' ' << c->padding;
  } else if (const auto* d = std::get_if<Dense>(&kind)) {
    os << ' ' << d->out_units;
  } else if (const auto* p = std::get_if<MaxPool>(&kind)) {
    os << ' ' << p->kernel << ' ' << p->stride;
  }
  return os.str();
}

template <class Fn>
void for_each_parameterised(const LayerGraph& g, Fn&& fn) {
  Shape s = g.input_shape;
  for (std::size_t u = 0; u < g.layers.size(); ++u) {
    const Layer& l = g.layers[u];
    if (const auto* b = std::get_if<Block>(&l.kind)) {
      Shape inner = s;
      for (std::size_t m = 0; m < b->layers.size(); ++m) {
        if (has_weights(b->layers[m].kind)) {
          fn(weight_key(static_cast<int>(u), static_cast<int>(m) + 1), b->layers[m], inner);
        }
        inner = output_shape(b->layers[m], inner);
      }
    } else if (has_weights(l.kind)) {
      fn(weight_key(static_cast<int>(u), 0), l, s);
    }
    s = output_shape(l, s);
  }
}

Layer* find_by_key(LayerGraph& g, std::uint32_t key) {
  const std::size_t unit = key >> 8;
  const std::size_t member = key & 0xFF;
  if (unit >= g.layers.size()) return nullptr;
  Layer& l = g.layers[unit];
  if (member == 0) return has_weights(l.kind) ? &l : nullptr;
  auto* b = std::get_if<Block>(&l.kind);
  if (b == nullptr || member > b->layers.size()) return nullptr;
  Layer& inner = b->layers[member - 1];
  return has_weights(inner.kind) ? &inner : nullptr;
}

std::string key_str(std::uint32_t key) {
  const std::uint32_t member = key & 0xFF;
  return std::to_string(key >> 8) + (member ? "." + std::to_string(member - 1) : "");
}

}  // namespace

const char* split_kind_name(SplitKind k) {
  switch (k) {
    case SplitKind::kFullOffload: return "full-offload";
    case SplitKind::kInterior: return "split";
    case SplitKind::kLocalOnly: return "local-only";
  }
  return "?";
}

std::uint32_t weight_key(int unit, int member) {
  return (static_cast<std::uint32_t>(unit) << 8) | static_cast<std::uint32_t>(member);
}

std::vector<UnitShape> propagate_shapes(const LayerGraph& graph) {
  if (graph.input_shape.elements() == 0) throw ShapeError("model has no input shape");
  if (graph.layers.empty()) throw ShapeError("model has no layers");
  std::vector<UnitShape> out;
  Shape s = graph.input_shape;
  for (std::size_t i = 0; i < graph.layers.size(); ++i) {
    try {
      s = output_shape(graph.layers[i], s);
    } catch (const Error& e) {
      throw ShapeError("layer " + std::to_string(i) + ": " + e.what());
    }
    out.push_back({static_cast<int>(i), s, wire::tensor_frame_size(graph.name.size(), s)});
  }
  return out;
}

void validate(const LayerGraph& graph) {
  propagate_shapes(graph);
  for_each_parameterised(graph, [](std::uint32_t key, const Layer& l, Shape in) {
    const std::size_t want = weight_count(l.kind, in);
    if (l.weights.empty()) throw MissingWeights("layer " + key_str(key));
    if (l.weights.size() != want) {
      throw ShapeError("layer " + key_str(key) + ": expected " + std::to_string(want) +
                       " weights, got " + std::to_string(l.weights.size()));
    }
  });
}

SplitPoint split_point_at(const LayerGraph& graph, int index) {
  const int n = static_cast<int>(graph.size());
  if (index < -1 || index > n - 1) {
    throw InvalidSplit("split " + std::to_string(index) + " outside [-1, " +
                       std::to_string(n - 1) + "]");
  }
  const auto shapes = propagate_shapes(graph);
  SplitPoint sp;
  sp.index = index;
  if (index == -1) {
    sp.kind = SplitKind::kFullOffload;
    sp.output_shape = graph.input_shape;
    sp.output_bytes = wire::tensor_frame_size(graph.name.size(), graph.input_shape);
    sp.tl_eligible = graph.input_shape.spatial_even();
  } else if (index == n - 1) {
    sp.kind = SplitKind::kLocalOnly;
    sp.output_shape = shapes.back().output_shape;
  } else {
    sp.kind = SplitKind::kInterior;
    sp.output_shape = shapes[index].output_shape;
    sp.output_bytes = shapes[index].output_bytes;
    sp.tl_eligible = sp.output_shape.spatial_even();
  }
  return sp;
}

std::vector<SplitPoint> enumerate_split_points(const LayerGraph& graph) {
  std::vector<SplitPoint> out;
  for (int i = -1; i < static_cast<int>(graph.size()); ++i) out.push_back(split_point_at(graph, i));
  return out;
}

LayerGraph slice(const LayerGraph& graph, int begin, int end, std::string name) {
  const int n = static_cast<int>(graph.size());
  if (begin < 0 || end > n || begin > end) {
    throw InvalidSplit("slice [" + std::to_string(begin) + ", " + std::to_string(end) +
                       ") outside model of " + std::to_string(n) + " units");
  }
  Shape in = graph.input_shape;
  for (int i = 0; i < begin; ++i) in = output_shape(graph.layers[i], in);
  LayerGraph out{std::move(name), in, {}};
  out.layers.assign(graph.layers.begin() + begin, graph.layers.begin() + end);
  return out;
}

LayerGraph head_of(const LayerGraph& graph, int split_index) {
  return slice(graph, 0, split_index + 1, graph.name + ".head");
}

LayerGraph tail_of(const LayerGraph& graph, int split_index) {
  return slice(graph, split_index + 1, static_cast<int>(graph.size()), graph.name + ".tail");
}

Tensor run_units(const LayerGraph& graph, int begin, int end, const Tensor& input) {
  Tensor x = input;
  for (int i = begin; i < end; ++i) x = forward(graph.layers[i], x);
  return x;
}

Tensor run(const LayerGraph& graph, const Tensor& input) {
  if (!(input.shape() == graph.input_shape)) {
    throw ShapeMismatch(graph.name + " expects input " + graph.input_shape.str() + ", got " +
                        input.shape().str());
  }
  return run_units(graph, 0, static_cast<int>(graph.size()), input);
}

LayerGraph parse_model(const std::string& text, const std::filesystem::path& base_dir) {
  LayerGraph g;
  std::string weights_file;
  bool have_input = false;
  Block* open_block = nullptr;
  int open_block_line = 0;
  std::istringstream in(text);
  int line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    const auto t = tokenize(line);
    if (t.empty()) continue;
    const std::string& d = t[0];
    if (d == "model") {
      expect_args(t, 2, line_no);
      g.name = t[1];
    } else if (d == "input") {
      expect_args(t, 4, line_no);
      g.input_shape = {parse_u32(t[1], line_no, "channels"), parse_u32(t[2], line_no, "height"),
                       parse_u32(t[3], line_no, "width")};
      have_input = true;
    } else if (d == "weights") {
      expect_args(t, 2, line_no);
      weights_file = t[1];
    } else if (d == "layer") {
      Layer l = parse_layer(t, line_no);
      const std::uint32_t id = parse_u32(t[1], line_no, "layer id");
      std::vector<Layer>& target = open_block ? open_block->layers : g.layers;
      if (id != target.size()) {
        throw ParseError("line " + std::to_string(line_no) + ": layer id " + std::to_string(id) +
                         " out of order, expected " + std::to_string(target.size()));
      }
      target.push_back(std::move(l));
    } else if (d == "block") {
      if (t.size() == 2 && t[1] == "end") {
        if (!open_block) throw ParseError("line " + std::to_string(line_no) + ": 'block end' without begin");
        if (open_block->layers.size() < 2) {
          throw ParseError("line " + std::to_string(line_no) + ": block needs at least two layers");
        }
        open_block = nullptr;
        continue;
      }
      expect_args(t, 3, line_no);
      if (t[2] != "begin") throw ParseError("line " + std::to_string(line_no) + ": expected 'begin'");
      if (open_block) throw ParseError("line " + std::to_string(line_no) + ": nested blocks are not supported");
      const std::uint32_t id = parse_u32(t[1], line_no, "block id");
      if (id != g.layers.size()) {
        throw ParseError("line " + std::to_string(line_no) + ": block id " + std::to_string(id) +
                         " out of order, expected " + std::to_string(g.layers.size()));
      }
      g.layers.push_back(Layer{Block{}, {}});
      open_block = &std::get<Block>(g.layers.back().kind);
      open_block_line = line_no;
    } else {
      throw ParseError("line " + std::to_string(line_no) + ": unknown directive '" + d + "'");
    }
  }
  if (open_block) {
    throw ParseError("line " + std::to_string(open_block_line) + ": block never closed");
  }
  if (g.name.empty()) throw ParseError("line " + std::to_string(line_no) + ": missing 'model'");
  if (!have_input) throw ParseError("line " + std::to_string(line_no) + ": missing 'input'");

  propagate_shapes(g);
  if (!weights_file.empty()) {
    std::ifstream wf(base_dir / weights_file, std::ios::binary);
    if (!wf) throw IoError("cannot open weights " + (base_dir / weights_file).string());
    std::vector<std::uint8_t> blob((std::istreambuf_iterator<char>(wf)),
                                   std::istreambuf_iterator<char>());
    decode_weights(blob, g);
  }
  validate(g);
  return g;
}

LayerGraph load_model(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open model " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_model(ss.str(), path.parent_path());
}

std::string format_model(const LayerGraph& graph, const std::string& weights_file) {
  std::ostringstream os;
  os << "# slicekit model\n";
  os << "model " << graph.name << '\n';
  os << "input " << graph.input_shape.channels << ' ' << graph.input_shape.height << ' '
     << graph.input_shape.width << '\n';
  if (!weights_file.empty()) os << "weights " << weights_file << '\n';
  for (std::size_t i = 0; i < graph.layers.size(); ++i) {
    const Layer& l = graph.layers[i];
    if (const auto* b = std::get_if<Block>(&l.kind)) {
      os << "block " << i << " begin\n";
      for (std::size_t m = 0; m < b->layers.size(); ++m) {
        os << "  layer " << m << ' ' << kind_name(b->layers[m].kind)
           << layer_params(b->layers[m].kind) << '\n';
      }
      os << "block end\n";
    } else {
      os << "layer " << i << ' ' << kind_name(l.kind) << layer_params(l.kind) << '\n';
    }
  }
  return os.str();
}

std::vector<std::uint8_t> encode_weights(const LayerGraph& graph) {
  std::vector<std::uint8_t> out;
  bytes::Writer w(out);
  w.put_bytes(std::string_view(kWeightMagic, 4));
  w.put(kWeightVersion);
  for_each_parameterised(graph, [&](std::uint32_t key, const Layer& l, Shape) {
    w.put(key);
    w.put(static_cast<std::uint64_t>(l.weights.size()));
    w.put_floats(l.weights);
  });
  return out;
}

void decode_weights(std::span<const std::uint8_t> blob, LayerGraph& graph) {
  bytes::Reader r(blob);
  const auto magic = r.get_bytes(4);
  if (r.fail() || std::memcmp(magic.data(), kWeightMagic, 4) != 0) {
    throw ParseError("weights: bad magic, expected SLKW");
  }
  const auto version = r.get<std::uint16_t>();
  if (r.fail() || version != kWeightVersion) {
    throw VersionMismatch("weights: version " + std::to_string(version));
  }
  while (r.remaining() > 0) {
    const auto key = r.get<std::uint32_t>();
    const auto count = r.get<std::uint64_t>();
    if (r.fail()) throw ParseError("weights: truncated record header");
    Layer* l = find_by_key(graph, key);
    if (l == nullptr) throw ParseError("weights: no parameterised layer " + key_str(key));
    if (count > r.remaining() / 4) {
      throw ParseError("weights: layer " + key_str(key) + " truncated");
    }
    l->weights.resize(count);
    r.get_floats(l->weights);
  }
}

std::filesystem::path save_model(const LayerGraph& graph, const std::filesystem::path& dir,
                                 const std::string& stem) {
  std::filesystem::create_directories(dir);
  const std::string bin = stem + ".bin";
  bool any_weights = false;
  for_each_parameterised(graph, [&](std::uint32_t, const Layer&, Shape) { any_weights = true; });
  if (any_weights) {
    const auto blob = encode_weights(graph);
    std::ofstream wf(dir / bin, std::ios::binary);
    wf.write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size()));
    if (!wf) throw IoError("cannot write " + (dir / bin).string());
  }
  const auto path = dir / (stem + ".model");
  std::ofstream mf(path);
  mf << format_model(graph, any_weights ? bin : "");
  if (!mf) throw IoError("cannot write " + path.string());
  return path;
}

void init_weights(LayerGraph& graph, std::uint64_t seed) {
  Rng rng(seed);
  Shape s = graph.input_shape;
  auto init = [&](Layer& l, Shape in) {
    const std::size_t n = weight_count(l.kind, in);
    l.weights.assign(n, 0.0f);
    std::size_t fan_in = 0;
    std::size_t n_bias = 0;
    if (const auto* c = std::get_if<Conv2D>(&l.kind)) {
      fan_in = std::size_t{in.channels} * c->kernel * c->kernel;
      n_bias = c->out_channels;
    } else if (const auto* d = std::get_if<Dense>(&l.kind)) {
      fan_in = in.elements();
      n_bias = d->out_units;
    }
    const double std_dev = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (std::size_t i = 0; i + n_bias < n; ++i) {
      l.weights[i] = static_cast<float>(rng.normal() * std_dev);
    }
  };
  for (Layer& l : graph.layers) {
    if (auto* b = std::get_if<Block>(&l.kind)) {
      Shape inner = s;
      for (Layer& m : b->layers) {
        if (has_weights(m.kind)) init(m, inner);
        inner = output_shape(m, inner);
      }
    } else if (has_weights(l.kind)) {
      init(l, s);
    }
    s = output_shape(l, s);
  }
}

const std::vector<std::string>& synthetic_model_names() {
  static const std::vector<std::string> names = {"tiny-cnn-8", "branchy-12", "deep-20"};
  return names;
}

LayerGraph make_synthetic_model(const std::string& name, std::uint64_t seed) {
  auto conv = [](std::uint32_t out, std::uint32_t k, std::uint32_t stride, std::uint32_t pad) {
    return Layer{Conv2D{out, k, stride, pad}, {}};
  };
  const Layer relu{ReLU{}, {}};
  const Layer pool{MaxPool{2, 2}, {}};
  auto block = [](std::vector<Layer> layers) { return Layer{Block{std::move(layers)}, {}}; };

  LayerGraph g;
  g.name = name;
  if (name == "tiny-cnn-8") {
    g.input_shape = {3, 16, 16};
    g.layers = {conv(8, 3, 1, 1), relu, pool, conv(16, 3, 1, 1), relu, pool,
                Layer{Flatten{}, {}}, Layer{Dense{4}, {}}};
  } else if (name == "branchy-12") {
    g.input_shape = {3, 32, 32};
    g.layers = {conv(16, 3, 1, 1),
                relu,
                pool,
                block({conv(16, 3, 1, 1), relu, conv(16, 1, 1, 0)}),
                relu,
                conv(32, 3, 1, 1),
                relu,
                pool,
                conv(32, 3, 1, 1),
                relu,
                Layer{GlobalAvgPool{}, {}},
                Layer{Dense{10}, {}}};
  } else if (name == "deep-20") {
    g.input_shape = {3, 64, 64};
    g.layers = {conv(16, 3, 2, 1),  // 16x32x32
                relu,
                conv(32, 3, 1, 1),
                relu,
                pool,  // 32x16x16
                block({conv(32, 3, 1, 1), relu, conv(32, 3, 1, 1)}),
                relu,
                conv(64, 3, 1, 0),  // 64x14x14
                relu,
                pool,  // 64x7x7, odd
                conv(64, 3, 1, 1),
                relu,
                conv(64, 3, 1, 1),
                relu,
                block({conv(64, 1, 1, 0), relu}),
                conv(64, 3, 1, 1),
                relu,
                Layer{GlobalAvgPool{}, {}},
                Layer{Flatten{}, {}},
                Layer{Dense{10}, {}}};
  } else {
    throw UnknownSpec("unknown builtin model '" + name + "' (tiny-cnn-8, branchy-12, deep-20)");
  }
  init_weights(g, seed);
  validate(g);
  return g;
}

}  // namespace slicekit
