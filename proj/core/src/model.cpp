#include "hamnet/model.hpp"

#include <algorithm>
#include <cmath>

#include "hamnet/errors.hpp"

namespace hamnet {

ParamList ModelParams::named() const {
  ParamList out;
  text.collect("text", out);
  vision.collect("vision", out);
  spatial.collect("spatial", out);
  relevance_semantic.collect("relevance.semantic", out);
  relevance_spatial.collect("relevance.spatial", out);
  cross.collect("cross", out);
  crf.collect("crf", out);
  return out;
}

std::string StageOutputs::first_non_finite_stage() const {
  if (!text.cls.all_finite() || !text.words.all_finite()) return "text_encoder";
  if (!image_vec.all_finite() || !object_vecs.all_finite() || !semantic.img.all_finite() ||
      !semantic.objects.all_finite()) {
    return "semantic_vision";
  }
  if (!spatial.img.all_finite() || !spatial.objects.all_finite()) return "spatial_graph";
  if (!relevance_semantic.relevance.all_finite() || !relevance_semantic.fused.all_finite() ||
      !relevance_spatial.relevance.all_finite() || !relevance_spatial.fused.all_finite()) {
    return "relevance";
  }
  if (!bridged.all_finite() || !fused.all_finite()) return "cross_modal";
  if (!emissions.scores.all_finite()) return "crf";
  return {};
}

Model::Model(PipelineConfig config, DatasetMeta meta) : config_(std::move(config)), meta_(std::move(meta)) {
  config_.validate();
  if (config_.d != meta_.d) {
    throw ConfigError("config d=" + std::to_string(config_.d) + " does not match dataset d=" + std::to_string(meta_.d));
  }
  const std::size_t d = config_.d, heads = config_.heads;
  Initializer init(config_.seed);
  params_.text = TextEncoderParams::make(d, heads, config_.text_layers, config_.text_positions ? config_.max_len + 1 : 0,
                                         init);
  params_.vision = SemanticVisionParams::make(meta_.d_v, d, meta_.concept_vocab, heads, config_.vit_layers, init);
  params_.spatial = SpatialParams::make(d, config_.rgcn_layers, init);
  params_.spatial.activation = parse_activation(config_.rgcn_activation);
  const auto rv = config_.relevance_variant == "scalar" ? RelevanceVariant::Scalar : RelevanceVariant::Vector;
  params_.relevance_semantic = RelevanceParams::make(d, rv, init);
  params_.relevance_spatial = RelevanceParams::make(d, rv, init);
  params_.cross = CrossModalParams::make(d, heads, config_.interaction_rounds, init);
  for (auto& r : params_.cross.rounds) {
    r.gate.inner = parse_activation(config_.gate_activation);
    r.gate.variant = config_.gate_variant == "literal" ? GateVariant::Literal : GateVariant::Sigmoid;
  }
  params_.crf = CrfParams::make(d, kNumLabels, init);
  params_.crf.bio_constraints = config_.bio_constraints;
}

StageOutputs Model::forward(const MultimodalExample& ex, const ForwardContext& ctx) const {
  StageOutputs s;
  s.text = encode_text(ex.sentence, params_.text, ctx);

  s.image_vec = project_image(ex.image_feat, params_.vision);
  s.object_vecs = embed_objects(ex.objects, params_.vision);
  s.semantic = vit_encode(VisionSequence{s.image_vec, s.object_vecs}, params_.vision, ctx);

  s.graph = build_graph(s.image_vec, s.object_vecs, ex.objects);
  s.spatial = rgcn_forward(s.graph, params_.spatial, ctx);

  s.relevance_semantic =
      measure_relevance(s.text.cls, s.semantic.img, s.semantic.objects, params_.relevance_semantic, ctx);
  s.relevance_spatial = measure_relevance(s.text.cls, s.spatial.img, s.spatial.objects, params_.relevance_spatial, ctx);

  s.bridged = bridge_text(s.text.words, params_.cross.bridge);
  InteractionState init{s.bridged, s.relevance_semantic.fused, s.relevance_spatial.fused, 0};
  s.fused = interact(init, params_.cross, config_.interaction_rounds, ctx).text;

  s.emissions = EmissionTable{params_.crf.emission(s.fused)};
  return s;
}

Tensor Model::loss(const MultimodalExample& ex, const ForwardContext& ctx) const {
  const StageOutputs s = forward(ex, ctx);
  Tensor l = crf_nll(s.emissions, params_.crf.table, ex.sentence.labels);
  if (!std::isfinite(l.item())) {
    std::string stage = s.first_non_finite_stage();
    if (stage.empty()) stage = "crf";
    throw NumericalError("non-finite loss; first non-finite value produced by stage '" + stage + "'");
  }
  return l;
}

std::vector<std::size_t> Model::decode(const MultimodalExample& ex) const {
  const StageOutputs s = forward(ex);
  return viterbi(s.emissions, params_.crf.table, params_.crf.bio_constraints).labels;
}

std::vector<std::vector<double>> Model::snapshot() const {
  std::vector<std::vector<double>> out;
  for (const auto& p : params_.named()) out.emplace_back(p.tensor.values().begin(), p.tensor.values().end());
  return out;
}

void Model::restore(const std::vector<std::vector<double>>& values) {
  auto named = params_.named();
  if (named.size() != values.size()) throw Error("restore: parameter count mismatch");
  for (std::size_t i = 0; i < named.size(); ++i) {
    auto dst = named[i].tensor.mutable_values();
    if (dst.size() != values[i].size()) throw Error("restore: size mismatch for " + named[i].name);
    std::copy(values[i].begin(), values[i].end(), dst.begin());
  }
}

}  // namespace hamnet
