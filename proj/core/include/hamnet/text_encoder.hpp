#pragma once

#include "hamnet/data.hpp"
#include "hamnet/nn.hpp"

namespace hamnet {

/// Contextual text features: position 0 of the encoded [CLS; words] sequence
/// and the M word rows.
struct TextEncoding {
  Tensor cls;    // [d]
  Tensor words;  // [M×d]
};

struct TextEncoderParams {
  TransformerEncoder encoder;

  // max_positions == 0 disables learned positions.
  static TextEncoderParams make(std::size_t d, std::size_t heads, std::size_t layers, std::size_t max_positions,
                                Initializer& init);
  std::size_t width() const;
  void collect(const std::string& prefix, ParamList& out) const { encoder.collect(prefix, out); }
};

TextEncoding encode_text(const TaggedSentence& sentence, const TextEncoderParams& params,
                         const ForwardContext& ctx = {});

}  // namespace hamnet
