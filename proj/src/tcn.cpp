#include "ictn/tcn.hpp"

#include <cmath>
#include <stdexcept>

#include "tensor_impl.hpp"

namespace ictn {

using detail::check;

std::vector<std::int64_t> dilation_schedule(std::int64_t blocks_per_stack) {
  check(blocks_per_stack >= 1, "dilation schedule needs at least one block");
  std::vector<std::int64_t> out(static_cast<std::size_t>(blocks_per_stack));
  std::int64_t d = 1;
  for (auto& v : out) {
    v = d;
    d *= 2;
  }
  return out;
}

BlockOutput conv1d_block(const Tensor& x, const Conv1dBlockParams& params,
                         std::int64_t dilation, bool use_norm) {
  Tensor h = params.expand(x);
  h = params.prelu_in(h);
  if (use_norm) h = params.norm_in(h);
  h = dilated_depthwise_conv1d(h, params.kernel, params.kernel_bias, dilation);
  h = params.prelu_mid(h);
  if (use_norm) h = params.norm_mid(h);
  return {add(x, params.residual(h)), params.skip(h)};
}

BlockOutput conv2d_block_ic(const Tensor& x, const ConvIcBlockParams& params,
                            std::int64_t dilation, bool use_norm) {
  Tensor h = params.expand(x);
  h = params.prelu_in(h);
  if (use_norm) h = params.norm_in(h);
  h = dilated_depthwise_conv2d(h, params.kernel, params.kernel_bias, dilation);
  h = params.prelu_mid(h);
  if (use_norm) h = params.norm_mid(h);
  return {add(x, params.residual(h)), params.skip(h)};
}

namespace {

template <typename BlockParams, typename BlockFn>
std::pair<Tensor, Tensor> run_stack(const Tensor& x, const std::vector<BlockParams>& blocks,
                                    bool use_norm, BlockFn block_fn) {
  check(!blocks.empty(), "stack_forward: stack has no blocks");
  const auto dilations = dilation_schedule(static_cast<std::int64_t>(blocks.size()));
  Tensor current = x;
  Tensor skip_sum;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    BlockOutput out = block_fn(current, blocks[i], dilations[i], use_norm);
    current = out.residual;
    skip_sum = skip_sum.defined() ? add(skip_sum, out.skip) : out.skip;
  }
  return {current, skip_sum};
}

}  // namespace

std::pair<Tensor, Tensor> stack_forward(const Tensor& x,
                                        const std::vector<Conv1dBlockParams>& blocks,
                                        bool use_norm) {
  return run_stack(x, blocks, use_norm, conv1d_block);
}

std::pair<Tensor, Tensor> stack_forward(const Tensor& x,
                                        const std::vector<ConvIcBlockParams>& blocks,
                                        bool use_norm) {
  return run_stack(x, blocks, use_norm, conv2d_block_ic);
}

namespace {

template <typename BlockParams>
Tensor run_tcn(const Tensor& x, const std::vector<std::vector<BlockParams>>& stacks,
               bool use_norm) {
  check(!stacks.empty(), "tcn_forward: no stacks");
  Tensor current = x;
  Tensor skip_total;
  for (const auto& stack : stacks) {
    auto [residual, skip_sum] = stack_forward(current, stack, use_norm);
    current = residual;
    skip_total = skip_total.defined() ? add(skip_total, skip_sum) : skip_sum;
  }
  return skip_total;
}

}  // namespace

Tensor tcn_forward(const Tensor& x, const std::vector<std::vector<Conv1dBlockParams>>& stacks,
                   bool use_norm) {
  return run_tcn(x, stacks, use_norm);
}

Tensor tcn_forward(const Tensor& x, const std::vector<std::vector<ConvIcBlockParams>>& stacks,
                   bool use_norm) {
  return run_tcn(x, stacks, use_norm);
}

Tensor tcn3d_forward(const Tensor& x,
                     const std::vector<std::vector<std::vector<Conv1dBlockParams>>>& per_channel) {
  check(x.rank() == 3, "tcn3d_forward: input must be (L x N x C), got " + shape_str(x.shape()));
  const std::int64_t chans = x.shape()[2];
  check(static_cast<std::int64_t>(per_channel.size()) == chans,
        "tcn3d_forward: " + std::to_string(per_channel.size()) + " channel stacks for " +
            std::to_string(chans) + " channels");
  std::vector<Tensor> skips;
  skips.reserve(per_channel.size());
  for (std::int64_t c = 0; c < chans; ++c)
    skips.push_back(tcn_forward(slice_last(x, c), per_channel[static_cast<std::size_t>(c)]));
  return stack_last(skips);
}

std::vector<StageDims> downsized_schedule(std::int64_t features, std::int64_t channels) {
  check(features >= 2, "downsized schedule: features must be >= 2");
  check(channels >= 4 && channels % 4 == 0,
        "downsized schedule: channels must be a positive multiple of 4, got " +
            std::to_string(channels));
  const auto mid_features = static_cast<std::int64_t>(
      std::floor(static_cast<double>(features) / std::sqrt(2.0)));
  return {{features, channels},
          {mid_features, channels / 2},
          {features / 2, channels / 4}};
}

std::vector<StageDims> upsized_schedule(std::int64_t features, std::int64_t channels) {
  auto schedule = downsized_schedule(features, channels);
  return {schedule[2], schedule[1], schedule[0]};
}

StageDims schedule_target(const std::vector<StageDims>& schedule) {
  check(!schedule.empty(), "empty stage schedule");
  StageDims target{0, 0};
  for (const auto& stage : schedule) {
    check(stage.features > 0 && stage.channels > 0, "stage dims must be positive");
    target.features = std::max(target.features, stage.features);
    target.channels = std::max(target.channels, stage.channels);
  }
  return target;
}

Tensor downsized_tcn_forward(const Tensor& x, const DownsizedTcnParams& params,
                             bool use_norm) {
  const std::size_t stages = params.schedule.size();
  check(stages >= 1 && params.stacks.size() == stages,
        "downsized_tcn_forward: schedule and stacks disagree");
  check(params.transitions.size() + 1 == stages,
        "downsized_tcn_forward: need one transition between consecutive stacks");
  check(params.skip_upsizers.size() == stages,
        "downsized_tcn_forward: need one skip upsizer per stack");
  check(x.rank() == 3 && x.shape()[1] == params.schedule[0].features &&
            x.shape()[2] == params.schedule[0].channels,
        "downsized_tcn_forward: input " + shape_str(x.shape()) +
            " does not match the first stage dims");

  Tensor current = x;
  Tensor skip_total;
  for (std::size_t s = 0; s < stages; ++s) {
    auto [residual, skip_sum] = stack_forward(current, params.stacks[s], use_norm);
    Tensor skip = skip_sum;
    const auto& up = params.skip_upsizers[s];
    if (up.feature) skip = (*up.feature)(skip);
    if (up.channel) skip = (*up.channel)(skip);
    skip_total = skip_total.defined() ? add(skip_total, skip) : skip;
    if (s + 1 < stages) {
      const auto& transition = params.transitions[s];
      current = transition.channel(transition.feature(residual));
    }
  }
  return skip_total;
}

}  // namespace ictn
