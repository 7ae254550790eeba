#pragma once

// Spatial structure graph over detected objects and the gated relational
// graph convolution that propagates over it.
//
// Node 0 is the image super node with box (0.5, 0.5, 1, 1); node k+1 is
// object k. Pairwise labels follow a strict priority: containment (Inside /
// Cover), then IoU > 0.5 (Overlap), then one of eight 45° direction sectors
// when the center distance is under half the image diagonal.

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "hamnet/data.hpp"
#include "hamnet/nn.hpp"
#include "hamnet/semantic_vision.hpp"

namespace hamnet {

enum class SpatialRelation : std::uint8_t {
  Inside = 0,
  Cover,
  Overlap,
  Class1,
  Class2,
  Class3,
  Class4,
  Class5,
  Class6,
  Class7,
  Class8,
};
inline constexpr std::size_t kNumRelations = 11;
// One transformation per (label, direction): incoming and outgoing edges.
inline constexpr std::size_t kNumRelationWeights = 2 * kNumRelations;

std::string relation_name(SpatialRelation r);
SpatialRelation parse_relation(std::string_view name);
// 0..7 for Class1..Class8, nullopt for Inside/Cover/Overlap.
std::optional<std::size_t> angle_class(SpatialRelation r);

inline constexpr Box kImageBox{0.5, 0.5, 1.0, 1.0};
inline constexpr double kUnitImageDiagonal = 1.4142135623730951;

/// Exact axis-aligned intersection over union. Throws on zero-area boxes.
double iou(const Box& a, const Box& b);

/// Direction sector of the vector (dx, dy), counterclockwise from +x:
/// sector k covers [45k°, 45(k+1)°). Computed from exact comparisons so that
/// sector(-dx,-dy) == (sector(dx,dy)+4) mod 8. (0,0) maps to sector 0.
std::size_t direction_sector(double dx, double dy);

/// Label for the directed edge a -> b, or nullopt when the pair is too far
/// apart (rho >= 0.5).
std::optional<SpatialRelation> relate(const Box& a, const Box& b, double image_diag = kUnitImageDiagonal);

struct SpatialEdge {
  std::size_t src = 0;
  std::size_t dst = 0;
  SpatialRelation label = SpatialRelation::Inside;

  auto operator<=>(const SpatialEdge&) const = default;
};

struct SpatialGraph {
  std::vector<Box> boxes;  // per node; boxes[0] is the image
  Tensor node_feats;       // [(N+1)×(d+4)] rows [x_c, y_c, h, w, v]
  std::vector<SpatialEdge> edges;  // sorted by (src, dst, label)

  std::size_t num_nodes() const { return boxes.size(); }
};

/// Edges only: super node Inside-edges to every object plus relate() for
/// every ordered object pair, sorted.
std::vector<SpatialEdge> build_edges(const std::vector<Box>& object_boxes);

/// Full graph with initial features from the projected image vector and the
/// embedded object rows.
SpatialGraph build_graph(const Tensor& image_vec, const Tensor& object_vecs, const std::vector<ObjectDetection>& objects);

std::string graph_to_json(const SpatialGraph& graph);
std::string graph_to_dot(const SpatialGraph& graph);

struct RgcnLayer {
  // Index 2·label + 0 for incoming edges (message from src to dst),
  // 2·label + 1 for outgoing edges (message from dst back to src).
  std::array<Tensor, kNumRelationWeights> relation_weights;  // [(d+4)×(d+4)]
  Tensor bias;                                               // [d+4]
  Tensor gate;                                               // [(d+4)×2(d+4)]

  static RgcnLayer make(std::size_t width, Initializer& init);
  void collect(const std::string& prefix, ParamList& out) const;
};

struct SpatialParams {
  std::vector<RgcnLayer> layers;
  Linear output;  // (d+4) -> d
  Activation activation = Activation::ReLU;

  static SpatialParams make(std::size_t d, std::size_t layers, Initializer& init);
  void collect(const std::string& prefix, ParamList& out) const;
};

/// Gated message passing at width d+4:
///   v' = phi(sum_j W_{r,dir} v_j + b);  lambda = sigmoid(W_gcn [v'; v]);  v <- v + lambda * v'
/// Messages are summed in (src, dst, label) edge order.
Tensor rgcn_propagate(const SpatialGraph& graph, const SpatialParams& params, const ForwardContext& ctx = {});

/// rgcn_propagate followed by the (d+4) -> d projection, split into the super
/// node row and object rows.
VisionSequence rgcn_forward(const SpatialGraph& graph, const SpatialParams& params, const ForwardContext& ctx = {});

}  // namespace hamnet
