#pragma once

// End-to-end wiring of the encoders, relevance measuring, cross-modal
// interaction and the CRF head.

#include <string>
#include <vector>

#include "hamnet/config.hpp"
#include "hamnet/crf.hpp"
#include "hamnet/cross_modal.hpp"
#include "hamnet/data.hpp"
#include "hamnet/relevance.hpp"
#include "hamnet/semantic_vision.hpp"
#include "hamnet/spatial_graph.hpp"
#include "hamnet/text_encoder.hpp"

namespace hamnet {

struct ModelParams {
  TextEncoderParams text;
  SemanticVisionParams vision;
  SpatialParams spatial;
  RelevanceParams relevance_semantic;
  RelevanceParams relevance_spatial;
  CrossModalParams cross;
  CrfParams crf;

  /// Every trainable tensor keyed "stage.path"; stages are text, vision,
  /// spatial, relevance, cross and crf. Order is fixed.
  ParamList named() const;
};

/// Intermediate results of one forward pass, in pipeline order.
struct StageOutputs {
  TextEncoding text;
  Tensor image_vec;    // projected global image feature [d]
  Tensor object_vecs;  // embedded objects [N×d]
  VisionSequence semantic;
  SpatialGraph graph;
  VisionSequence spatial;
  RelevanceOutput relevance_semantic;
  RelevanceOutput relevance_spatial;
  Tensor bridged;  // [M×d]
  Tensor fused;    // final H [M×d]
  EmissionTable emissions;

  /// Name of the first stage with a non-finite output, or empty.
  std::string first_non_finite_stage() const;
};

class Model {
 public:
  Model(PipelineConfig config, DatasetMeta meta);

  const PipelineConfig& config() const { return config_; }
  const DatasetMeta& meta() const { return meta_; }
  ModelParams& params() { return params_; }
  const ModelParams& params() const { return params_; }
  ParamList named_params() const { return params_.named(); }

  StageOutputs forward(const MultimodalExample& example, const ForwardContext& ctx = {}) const;
  /// CRF negative log-likelihood of the gold labels.
  Tensor loss(const MultimodalExample& example, const ForwardContext& ctx = {}) const;
  std::vector<std::size_t> decode(const MultimodalExample& example) const;

  /// Value snapshot of every parameter, in named() order.
  std::vector<std::vector<double>> snapshot() const;
  void restore(const std::vector<std::vector<double>>& values);

 private:
  PipelineConfig config_;
  DatasetMeta meta_;
  ModelParams params_;
};

}  // namespace hamnet
