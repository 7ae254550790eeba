#include "hamnet/semantic_vision.hpp"

#include "hamnet/errors.hpp"

namespace hamnet {

SemanticVisionParams SemanticVisionParams::make(std::size_t d_v, std::size_t d, std::size_t concept_vocab,
                                                std::size_t heads, std::size_t layers, Initializer& init) {
  SemanticVisionParams p;
  p.image_proj = Linear::make(d_v, d, init);
  p.object_proj = Linear::make(d_v, d, init);
  p.concept_embedding = init.normal({concept_vocab, d}, 0.1);
  p.vit = TransformerEncoder::make(d, heads, layers, 0, init);
  return p;
}

void SemanticVisionParams::collect(const std::string& prefix, ParamList& out) const {
  image_proj.collect(prefix + ".image_proj", out);
  object_proj.collect(prefix + ".object_proj", out);
  out.push_back({prefix + ".concept_embedding", concept_embedding});
  vit.collect(prefix + ".vit", out);
}

Tensor project_image(const Tensor& image_feat, const SemanticVisionParams& params) {
  if (image_feat.rank() != 1 || image_feat.numel() != params.image_proj.in_features()) {
    throw ShapeError("project_image: feature " + shape_str(image_feat.shape()) + " vs expected width " +
                     std::to_string(params.image_proj.in_features()));
  }
  return params.image_proj(image_feat);
}

Tensor embed_objects(const std::vector<ObjectDetection>& objects, const SemanticVisionParams& params) {
  const std::size_t d = params.object_proj.out_features();
  if (objects.empty()) return Tensor::zeros({0, d});
  const std::size_t vocab = params.concept_embedding.rows();
  std::vector<double> feats;
  std::vector<std::size_t> ids;
  for (std::size_t i = 0; i < objects.size(); ++i) {
    const auto& o = objects[i];
    if (o.concept_id >= vocab) {
      throw DataError("object " + std::to_string(i) + ": concept_id " + std::to_string(o.concept_id) +
                      " outside vocabulary of " + std::to_string(vocab));
    }
    if (o.feat.numel() != params.object_proj.in_features()) {
      throw ShapeError("object " + std::to_string(i) + ": feature width " + std::to_string(o.feat.numel()));
    }
    feats.insert(feats.end(), o.feat.values().begin(), o.feat.values().end());
    ids.push_back(o.concept_id);
  }
  Tensor f = Tensor::from({objects.size(), params.object_proj.in_features()}, std::move(feats));
  return add(params.object_proj(f), gather_rows(params.concept_embedding, ids));
}

VisionSequence vit_encode(const VisionSequence& seq, const SemanticVisionParams& params, const ForwardContext& ctx) {
  if (seq.img.rank() != 1 || seq.objects.rank() != 2 || seq.objects.cols() != seq.img.numel()) {
    throw ShapeError("vit_encode: image " + shape_str(seq.img.shape()) + " vs objects " +
                     shape_str(seq.objects.shape()));
  }
  Tensor all = concat_rows({as_row(seq.img), seq.objects});
  Tensor h = params.vit(all, ctx);
  return VisionSequence{row(h, 0), slice_rows(h, 1, h.rows())};
}

}  // namespace hamnet
