#include "hamnet/spatial_graph.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

#include "hamnet/errors.hpp"

namespace hamnet {

namespace {

constexpr std::array<const char*, kNumRelations> kRelationNames = {
    "inside", "cover", "overlap", "class1", "class2", "class3", "class4", "class5", "class6", "class7", "class8"};

bool contains(const Box& outer, const Box& inner) {
  return outer.x0() <= inner.x0() && outer.x1() >= inner.x1() && outer.y0() <= inner.y0() &&
         outer.y1() >= inner.y1();
}

}  // namespace

std::string relation_name(SpatialRelation r) { return kRelationNames[static_cast<std::size_t>(r)]; }

SpatialRelation parse_relation(std::string_view name) {
  for (std::size_t i = 0; i < kNumRelations; ++i)
    if (name == kRelationNames[i]) return static_cast<SpatialRelation>(i);
  throw DataError("unknown spatial relation '" + std::string(name) + "'");
}

std::optional<std::size_t> angle_class(SpatialRelation r) {
  const auto i = static_cast<std::size_t>(r);
  if (i < static_cast<std::size_t>(SpatialRelation::Class1)) return std::nullopt;
  return i - static_cast<std::size_t>(SpatialRelation::Class1);
}

double iou(const Box& a, const Box& b) {
  if (!(a.area() > 0.0) || !(b.area() > 0.0)) throw Error("iou: zero-area box");
  const double iw = std::max(0.0, std::min(a.x1(), b.x1()) - std::max(a.x0(), b.x0()));
  const double ih = std::max(0.0, std::min(a.y1(), b.y1()) - std::max(a.y0(), b.y0()));
  const double inter = iw * ih;
  return inter / (a.area() + b.area() - inter);
}

std::size_t direction_sector(double dx, double dy) {
  if (dx > 0.0 && dy >= 0.0) return dy < dx ? 0 : 1;
  if (dx <= 0.0 && dy > 0.0) return -dx < dy ? 2 : 3;
  if (dx < 0.0 && dy <= 0.0) return -dy < -dx ? 4 : 5;
  if (dx >= 0.0 && dy < 0.0) return dx < -dy ? 6 : 7;
  return 0;  // coincident centers
}

std::optional<SpatialRelation> relate(const Box& a, const Box& b, double image_diag) {
  if (contains(a, b)) return SpatialRelation::Inside;
  if (contains(b, a)) return SpatialRelation::Cover;
  if (iou(a, b) > 0.5) return SpatialRelation::Overlap;
  const double dx = b.xc - a.xc, dy = b.yc - a.yc;
  const double rho = std::hypot(dx, dy) / image_diag;
  if (!(rho < 0.5)) return std::nullopt;
  return static_cast<SpatialRelation>(static_cast<std::size_t>(SpatialRelation::Class1) + direction_sector(dx, dy));
}

std::vector<SpatialEdge> build_edges(const std::vector<Box>& object_boxes) {
  std::vector<SpatialEdge> edges;
  const std::size_t n = object_boxes.size();
  for (std::size_t i = 0; i < n; ++i) edges.push_back({0, i + 1, SpatialRelation::Inside});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      if (auto r = relate(object_boxes[i], object_boxes[j])) edges.push_back({i + 1, j + 1, *r});
    }
  std::sort(edges.begin(), edges.end());
  return edges;
}

SpatialGraph build_graph(const Tensor& image_vec, const Tensor& object_vecs,
                         const std::vector<ObjectDetection>& objects) {
  if (image_vec.rank() != 1 || object_vecs.rank() != 2 || object_vecs.rows() != objects.size() ||
      object_vecs.cols() != image_vec.numel()) {
    throw ShapeError("build_graph: image " + shape_str(image_vec.shape()) + ", objects " +
                     shape_str(object_vecs.shape()) + ", detections " + std::to_string(objects.size()));
  }
  SpatialGraph g;
  g.boxes.push_back(kImageBox);
  std::vector<Box> object_boxes;
  for (const auto& o : objects) object_boxes.push_back(o.bbox);
  g.boxes.insert(g.boxes.end(), object_boxes.begin(), object_boxes.end());
  g.edges = build_edges(object_boxes);

  std::vector<double> geom;
  for (const auto& b : g.boxes) geom.insert(geom.end(), {b.xc, b.yc, b.h, b.w});
  Tensor geometry = Tensor::from({g.boxes.size(), 4}, std::move(geom));
  g.node_feats = concat_cols(geometry, concat_rows({as_row(image_vec), object_vecs}));
  return g;
}

std::string graph_to_json(const SpatialGraph& graph) {
  nlohmann::json j;
  j["nodes"] = nlohmann::json::array();
  for (std::size_t i = 0; i < graph.boxes.size(); ++i) {
    const auto& b = graph.boxes[i];
    j["nodes"].push_back({{"id", i}, {"kind", i == 0 ? "image" : "object"}, {"bbox", {b.xc, b.yc, b.h, b.w}}});
  }
  j["edges"] = nlohmann::json::array();
  for (const auto& e : graph.edges) j["edges"].push_back({e.src, e.dst, relation_name(e.label)});
  return j.dump(2);
}

std::string graph_to_dot(const SpatialGraph& graph) {
  std::ostringstream os;
  os << "digraph spatial {\n";
  for (std::size_t i = 0; i < graph.boxes.size(); ++i) {
    const auto& b = graph.boxes[i];
    os << "  n" << i << " [label=\"" << (i == 0 ? std::string("IMG") : "o" + std::to_string(i)) << "\\n("
       << b.xc << "," << b.yc << "," << b.h << "," << b.w << ")\"" << (i == 0 ? ", shape=box" : "") << "];\n";
  }
  for (const auto& e : graph.edges)
    os << "  n" << e.src << " -> n" << e.dst << " [label=\"" << relation_name(e.label) << "\"];\n";
  os << "}\n";
  return os.str();
}

// ---- R-GCN -------------------------------------------------------------------

RgcnLayer RgcnLayer::make(std::size_t width, Initializer& init) {
  RgcnLayer layer;
  for (auto& w : layer.relation_weights) {
    w = init.matrix(width, width);
    // Sum over many neighbours; keep the initial messages small.
    for (auto& x : w.mutable_values()) x *= 0.5;
  }
  layer.bias = init.zeros({width});
  layer.gate = init.matrix(width, 2 * width);
  return layer;
}

void RgcnLayer::collect(const std::string& prefix, ParamList& out) const {
  for (std::size_t k = 0; k < kNumRelationWeights; ++k) {
    out.push_back({prefix + "." + relation_name(static_cast<SpatialRelation>(k / 2)) + (k % 2 ? ".out" : ".in"),
                   relation_weights[k]});
  }
  out.push_back({prefix + ".bias", bias});
  out.push_back({prefix + ".gate", gate});
}

SpatialParams SpatialParams::make(std::size_t d, std::size_t layers, Initializer& init) {
  SpatialParams p;
  for (std::size_t i = 0; i < layers; ++i) p.layers.push_back(RgcnLayer::make(d + 4, init));
  p.output = Linear::make(d + 4, d, init);
  return p;
}

void SpatialParams::collect(const std::string& prefix, ParamList& out) const {
  for (std::size_t i = 0; i < layers.size(); ++i) layers[i].collect(prefix + ".rgcn" + std::to_string(i), out);
  output.collect(prefix + ".output", out);
}

Tensor rgcn_propagate(const SpatialGraph& graph, const SpatialParams& params, const ForwardContext& ctx) {
  Tensor x = graph.node_feats;
  const std::size_t n = graph.num_nodes();
  const std::size_t width = x.cols();
  if (x.rows() != n) throw ShapeError("rgcn: node feature rows do not match node count");

  // Adjacency per (label, direction); row = receiving node.
  std::array<std::vector<double>, kNumRelationWeights> adjacency;
  for (const auto& e : graph.edges) {
    if (e.src >= n || e.dst >= n || e.src == e.dst) throw ShapeError("rgcn: invalid edge");
    const std::size_t base = 2 * static_cast<std::size_t>(e.label);
    for (std::size_t dir = 0; dir < 2; ++dir) {
      auto& a = adjacency[base + dir];
      if (a.empty()) a.assign(n * n, 0.0);
      const std::size_t to = dir == 0 ? e.dst : e.src, from = dir == 0 ? e.src : e.dst;
      a[to * n + from] += 1.0;
    }
  }

  for (std::size_t li = 0; li < params.layers.size(); ++li) {
    const RgcnLayer& layer = params.layers[li];
    if (!layer.bias.defined() || layer.bias.numel() != width || !layer.gate.defined() ||
        layer.gate.shape() != Shape{width, 2 * width}) {
      throw ConfigError("rgcn layer " + std::to_string(li) + ": missing or misshapen bias/gate");
    }
    Tensor messages = Tensor::zeros({n, width});
    for (std::size_t k = 0; k < kNumRelationWeights; ++k) {
      const Tensor& w = layer.relation_weights[k];
      if (!w.defined() || w.shape() != Shape{width, width}) {
        throw ConfigError("rgcn layer " + std::to_string(li) + ": missing relation weight " +
                          relation_name(static_cast<SpatialRelation>(k / 2)) + (k % 2 ? ".out" : ".in"));
      }
      if (adjacency[k].empty()) continue;
      messages = add(messages, matmul(Tensor::from({n, n}, adjacency[k]), matmul_nt(x, w)));
    }
    Tensor update = activate(add_row_bias(messages, layer.bias), params.activation);
    Tensor lambda = sigmoid(matmul_nt(concat_cols(update, x), layer.gate));
    if (ctx.trace) ctx.trace->rgcn_gates.push_back(lambda.detach());
    x = add(x, mul(lambda, ctx.maybe_dropout(update)));
  }
  return x;
}

VisionSequence rgcn_forward(const SpatialGraph& graph, const SpatialParams& params, const ForwardContext& ctx) {
  Tensor h = params.output(rgcn_propagate(graph, params, ctx));
  return VisionSequence{row(h, 0), slice_rows(h, 1, h.rows())};
}

}  // namespace hamnet
