#pragma once

// Text bridging, two-view gating and the synchronous three-part cross-modal
// interaction loop.

#include <array>
#include <vector>

#include "hamnet/nn.hpp"

namespace hamnet {

/// Two-layer feed-forward map applied to word rows: W2·act(W1·x + b1) + b2.
struct BridgeParams {
  Linear first, second;
  Activation activation = Activation::ReLU;

  static BridgeParams make(std::size_t d, Initializer& init);
  void collect(const std::string& prefix, ParamList& out) const;
};

enum class GateVariant {
  Sigmoid,  // alpha = sigmoid(W_V · act(W_V1·V1 + W_V2·V2)), a convex blend
  Literal,  // alpha = W_V · act(W_V1·V1 + W_V2·V2), unbounded
};

struct ViewGateParams {
  Linear outer, view1, view2;  // all bias-free
  Activation inner = Activation::Tanh;
  GateVariant variant = GateVariant::Sigmoid;

  static ViewGateParams make(std::size_t d, Initializer& init);
  void collect(const std::string& prefix, ParamList& out) const;
};

struct InteractionRound {
  ViewGateParams gate;
  TransformerBlock text;   // Q = H, K = V = fused vision
  TransformerBlock view1;  // Q = V1, K = V = H
  TransformerBlock view2;  // Q = V2, K = V = H

  static InteractionRound make(std::size_t d, std::size_t heads, Initializer& init);
  void collect(const std::string& prefix, ParamList& out) const;
};

struct CrossModalParams {
  BridgeParams bridge;
  std::vector<InteractionRound> rounds;

  static CrossModalParams make(std::size_t d, std::size_t heads, std::size_t rounds, Initializer& init);
  void collect(const std::string& prefix, ParamList& out) const;
};

struct InteractionState {
  Tensor text;   // H  [M×d]
  Tensor view1;  // V1 [N×d]
  Tensor view2;  // V2 [N×d]
  std::size_t iteration = 0;
};

Tensor bridge_text(const Tensor& words, const BridgeParams& params);

/// V = alpha ⊙ V1 + (1 - alpha) ⊙ V2 rowwise; [0×d] for empty inputs.
Tensor fuse_views(const Tensor& view1, const Tensor& view2, const ViewGateParams& params,
                  const ForwardContext& ctx = {});

/// Runs `rounds` synchronous iterations. Every part reads the state committed
/// by the previous iteration; `part_order` only permutes evaluation order
/// (0 = text, 1 = view1, 2 = view2) and cannot change the result.
InteractionState interact(const InteractionState& initial, const CrossModalParams& params, std::size_t rounds,
                          const ForwardContext& ctx = {}, std::array<int, 3> part_order = {0, 1, 2});

}  // namespace hamnet
