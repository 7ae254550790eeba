#include "hamnet/text_encoder.hpp"

#include "hamnet/errors.hpp"

namespace hamnet {

TextEncoderParams TextEncoderParams::make(std::size_t d, std::size_t heads, std::size_t layers,
                                          std::size_t max_positions, Initializer& init) {
  return TextEncoderParams{TransformerEncoder::make(d, heads, layers, max_positions, init)};
}

std::size_t TextEncoderParams::width() const {
  if (!encoder.layers.empty()) return encoder.layers.front().attn.query.in_features();
  if (encoder.positions.defined()) return encoder.positions.cols();
  return 0;
}

TextEncoding encode_text(const TaggedSentence& sentence, const TextEncoderParams& params,
                         const ForwardContext& ctx) {
  const Tensor& words = sentence.word_feats;
  const std::size_t d = params.width();
  if (words.rank() != 2 || words.rows() != sentence.length() || (d != 0 && words.cols() != d)) {
    throw ShapeError("encode_text: word features " + shape_str(words.shape()) + " do not match " +
                     std::to_string(sentence.length()) + " tokens of width " + std::to_string(d));
  }
  if (sentence.cls_feat.rank() != 1 || sentence.cls_feat.numel() != words.cols()) {
    throw ShapeError("encode_text: cls feature " + shape_str(sentence.cls_feat.shape()) + " vs width " +
                     std::to_string(words.cols()));
  }
  Tensor seq = concat_rows({as_row(sentence.cls_feat), words});
  Tensor h = params.encoder(seq, ctx);
  return TextEncoding{row(h, 0), slice_rows(h, 1, h.rows())};
}

}  // namespace hamnet
