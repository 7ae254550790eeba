#pragma once

#include <vector>

#include "hamnet/data.hpp"
#include "hamnet/nn.hpp"

namespace hamnet {

/// Global image token plus one row per detected object.
struct VisionSequence {
  Tensor img;      // [d]
  Tensor objects;  // [N×d]
};

struct SemanticVisionParams {
  Linear image_proj;         // d_v -> d
  Linear object_proj;        // d_v -> d
  Tensor concept_embedding;  // [concept_vocab×d]
  TransformerEncoder vit;    // no positional table: objects form a set

  static SemanticVisionParams make(std::size_t d_v, std::size_t d, std::size_t concept_vocab, std::size_t heads,
                                   std::size_t layers, Initializer& init);
  void collect(const std::string& prefix, ParamList& out) const;
};

Tensor project_image(const Tensor& image_feat, const SemanticVisionParams& params);

/// Row i = object_proj(feat_i) + concept_embedding[concept_id_i]; [0×d] when empty.
Tensor embed_objects(const std::vector<ObjectDetection>& objects, const SemanticVisionParams& params);

/// Encodes [img; objects] jointly and splits the result back.
VisionSequence vit_encode(const VisionSequence& seq, const SemanticVisionParams& params,
                          const ForwardContext& ctx = {});

}  // namespace hamnet
