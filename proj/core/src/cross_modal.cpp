#include "hamnet/cross_modal.hpp"

#include <algorithm>

#include "hamnet/errors.hpp"

namespace hamnet {

BridgeParams BridgeParams::make(std::size_t d, Initializer& init) {
  return BridgeParams{Linear::make(d, d, init), Linear::make(d, d, init), Activation::ReLU};
}

void BridgeParams::collect(const std::string& prefix, ParamList& out) const {
  first.collect(prefix + ".first", out);
  second.collect(prefix + ".second", out);
}

ViewGateParams ViewGateParams::make(std::size_t d, Initializer& init) {
  ViewGateParams g;
  g.outer = Linear::make(d, d, init, false);
  g.view1 = Linear::make(d, d, init, false);
  g.view2 = Linear::make(d, d, init, false);
  return g;
}

void ViewGateParams::collect(const std::string& prefix, ParamList& out) const {
  outer.collect(prefix + ".outer", out);
  view1.collect(prefix + ".view1", out);
  view2.collect(prefix + ".view2", out);
}

InteractionRound InteractionRound::make(std::size_t d, std::size_t heads, Initializer& init) {
  InteractionRound r;
  r.gate = ViewGateParams::make(d, init);
  r.text = TransformerBlock::make(d, heads, true, init);
  r.view1 = TransformerBlock::make(d, heads, true, init);
  r.view2 = TransformerBlock::make(d, heads, true, init);
  return r;
}

void InteractionRound::collect(const std::string& prefix, ParamList& out) const {
  gate.collect(prefix + ".gate", out);
  text.collect(prefix + ".text", out);
  view1.collect(prefix + ".view1", out);
  view2.collect(prefix + ".view2", out);
}

CrossModalParams CrossModalParams::make(std::size_t d, std::size_t heads, std::size_t rounds, Initializer& init) {
  CrossModalParams p;
  p.bridge = BridgeParams::make(d, init);
  for (std::size_t i = 0; i < rounds; ++i) p.rounds.push_back(InteractionRound::make(d, heads, init));
  return p;
}

void CrossModalParams::collect(const std::string& prefix, ParamList& out) const {
  bridge.collect(prefix + ".bridge", out);
  for (std::size_t i = 0; i < rounds.size(); ++i) rounds[i].collect(prefix + ".round" + std::to_string(i), out);
}

Tensor bridge_text(const Tensor& words, const BridgeParams& params) {
  if (words.rank() != 2 || words.cols() != params.first.in_features()) {
    throw ShapeError("bridge_text: words " + shape_str(words.shape()) + " vs width " +
                     std::to_string(params.first.in_features()));
  }
  return params.second(activate(params.first(words), params.activation));
}

Tensor fuse_views(const Tensor& view1, const Tensor& view2, const ViewGateParams& params, const ForwardContext& ctx) {
  if (view1.shape() != view2.shape() || view1.rank() != 2) {
    throw ShapeError("fuse_views: " + shape_str(view1.shape()) + " vs " + shape_str(view2.shape()));
  }
  if (view1.rows() == 0) return view1;
  Tensor alpha = params.outer(activate(add(params.view1(view1), params.view2(view2)), params.inner));
  if (params.variant == GateVariant::Sigmoid) alpha = sigmoid(alpha);
  if (ctx.trace) ctx.trace->view_gates.push_back(alpha.detach());
  return add(mul(alpha, view1), mul(one_minus(alpha), view2));
}

InteractionState interact(const InteractionState& initial, const CrossModalParams& params, std::size_t rounds,
                          const ForwardContext& ctx, std::array<int, 3> part_order) {
  if (rounds > params.rounds.size()) {
    throw ConfigError("interact: " + std::to_string(rounds) + " rounds requested, " +
                      std::to_string(params.rounds.size()) + " parameterized");
  }
  {
    auto sorted = part_order;
    std::sort(sorted.begin(), sorted.end());
    if (sorted != std::array<int, 3>{0, 1, 2}) throw ConfigError("interact: part_order must permute {0,1,2}");
  }
  if (initial.view1.shape() != initial.view2.shape()) throw ShapeError("interact: vision views differ in shape");

  InteractionState state = initial;
  for (std::size_t it = 0; it < rounds; ++it) {
    const InteractionRound& round = params.rounds[it];
    InteractionState next;
    for (int part : part_order) {
      switch (part) {
        case 0:
          next.text = round.text.cross_attend(state.text, fuse_views(state.view1, state.view2, round.gate, ctx), ctx);
          break;
        case 1:
          next.view1 = round.view1.cross_attend(state.view1, state.text, ctx);
          break;
        case 2:
          next.view2 = round.view2.cross_attend(state.view2, state.text, ctx);
          break;
      }
    }
    next.iteration = state.iteration + 1;
    state = std::move(next);
  }
  return state;
}

}  // namespace hamnet
