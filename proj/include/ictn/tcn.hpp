#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "ictn/tensor.hpp"

namespace ictn {

// Small layer bundles; forward logic lives in the free functions below.
struct PointwiseLayer {
  std::int64_t axis = 1;
  Tensor weight;  // (in x out)
  Tensor bias;    // (out)
  Tensor operator()(const Tensor& x) const { return pointwise_conv(x, axis, weight, bias); }
};

struct PreluLayer {
  Tensor slope;  // one learned scalar per layer instance
  Tensor operator()(const Tensor& x) const { return prelu(x, slope); }
};

struct NormLayer {
  std::int64_t axis = 1;
  Tensor gain;
  Tensor bias;
  Tensor operator()(const Tensor& x) const {
    return global_layer_norm(x, axis, gain, bias);
  }
};

struct BlockOutput {
  Tensor residual;  // block input + residual branch, same shape as the input
  Tensor skip;
};

// Strictly doubling dilations 2^0 .. 2^(D-1).
std::vector<std::int64_t> dilation_schedule(std::int64_t blocks_per_stack);

// 1-D Conv block over (L x N): 1x1 expand N->H, PReLU, norm, dilated
// depthwise conv over time, PReLU, norm, then 1x1 skip and residual
// projections H->N. use_norm=false skips the normalization layers (used by
// the receptive-field instrumentation, which needs strictly local coupling).
struct Conv1dBlockParams {
  PointwiseLayer expand;
  PreluLayer prelu_in;
  NormLayer norm_in;
  Tensor kernel;       // (H x 3)
  Tensor kernel_bias;  // (H)
  PreluLayer prelu_mid;
  NormLayer norm_mid;
  PointwiseLayer skip;
  PointwiseLayer residual;
};
BlockOutput conv1d_block(const Tensor& x, const Conv1dBlockParams& params,
                         std::int64_t dilation, bool use_norm = true);

// Inter-channel 2-D Conv block over (L x N x C): 1x1 expand along the
// channel axis C->H, PReLU, norm, dilated depthwise 2-D conv over
// (time, feature), PReLU, norm, then channel-axis skip/residual H->C.
struct ConvIcBlockParams {
  PointwiseLayer expand;
  PreluLayer prelu_in;
  NormLayer norm_in;
  Tensor kernel;       // (H x 3 x 3)
  Tensor kernel_bias;  // (H)
  PreluLayer prelu_mid;
  NormLayer norm_mid;
  PointwiseLayer skip;
  PointwiseLayer residual;
};
BlockOutput conv2d_block_ic(const Tensor& x, const ConvIcBlockParams& params,
                            std::int64_t dilation, bool use_norm = true);

// One stack: D blocks chained on the residual path with doubling dilations.
// Returns (residual out, sum of the D skips).
std::pair<Tensor, Tensor> stack_forward(const Tensor& x,
                                        const std::vector<Conv1dBlockParams>& blocks,
                                        bool use_norm = true);
std::pair<Tensor, Tensor> stack_forward(const Tensor& x,
                                        const std::vector<ConvIcBlockParams>& blocks,
                                        bool use_norm = true);

// S stacks chained on the residual path; returns the sum of all skips.
Tensor tcn_forward(const Tensor& x, const std::vector<std::vector<Conv1dBlockParams>>& stacks,
                   bool use_norm = true);
Tensor tcn_forward(const Tensor& x, const std::vector<std::vector<ConvIcBlockParams>>& stacks,
                   bool use_norm = true);

// Parallel per-channel TCN: slice c of (L x N x C) runs through its own
// stack set of 1-D blocks (no parameter sharing, no cross-channel mixing),
// and the skip totals are restacked along the channel axis.
Tensor tcn3d_forward(const Tensor& x,
                     const std::vector<std::vector<std::vector<Conv1dBlockParams>>>& per_channel);

// Progressive-reduction TCN: stack s runs IC blocks at (N_s, C_s) with
// H_s = 4 C_s; the residual path passes through feature then channel 1x1
// transitions between stacks, and each stack's summed skip is brought back
// to the target dims by feature/channel 1x1 layers before cross-stack
// summation. Upsizers exist only where the stack dims differ from the
// target dims.
struct StageDims {
  std::int64_t features = 0;
  std::int64_t channels = 0;
  bool operator==(const StageDims&) const = default;
};

std::vector<StageDims> downsized_schedule(std::int64_t features, std::int64_t channels);
std::vector<StageDims> upsized_schedule(std::int64_t features, std::int64_t channels);
StageDims schedule_target(const std::vector<StageDims>& schedule);

struct StackTransition {
  PointwiseLayer feature;  // N_s -> N_{s+1}, feature axis
  PointwiseLayer channel;  // C_s -> C_{s+1}, channel axis
};

struct SkipUpsizer {
  std::optional<PointwiseLayer> feature;  // N_s -> N_target, when they differ
  std::optional<PointwiseLayer> channel;  // C_s -> C_target, when they differ
};

struct DownsizedTcnParams {
  std::vector<StageDims> schedule;
  std::vector<std::vector<ConvIcBlockParams>> stacks;
  std::vector<StackTransition> transitions;   // size S-1
  std::vector<SkipUpsizer> skip_upsizers;     // size S
};

Tensor downsized_tcn_forward(const Tensor& x, const DownsizedTcnParams& params,
                             bool use_norm = true);

}  // namespace ictn
