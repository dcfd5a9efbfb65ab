#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "ictn/analysis.hpp"
#include "ictn/gradcheck.hpp"
#include "ictn/model.hpp"
#include "ictn/rng.hpp"
#include "ictn/tcn.hpp"

using namespace ictn;

namespace {

Tensor random_tensor(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
  std::int64_t n = 1;
  for (auto e : shape) n *= e;
  std::vector<double> values(static_cast<std::size_t>(n));
  for (auto& v : values) v = rng.uniform(lo, hi);
  return Tensor::from_data(std::move(shape), std::move(values));
}

Conv1dBlockParams random_block_1d(Rng& rng, std::int64_t feats, std::int64_t hidden) {
  Conv1dBlockParams b;
  b.expand = {1, random_tensor(rng, {feats, hidden}), random_tensor(rng, {hidden})};
  b.prelu_in = {Tensor::scalar(0.25)};
  b.norm_in = {1, random_tensor(rng, {hidden}, 0.5, 1.5), random_tensor(rng, {hidden})};
  b.kernel = random_tensor(rng, {hidden, 3});
  b.kernel_bias = random_tensor(rng, {hidden});
  b.prelu_mid = {Tensor::scalar(0.3)};
  b.norm_mid = {1, random_tensor(rng, {hidden}, 0.5, 1.5), random_tensor(rng, {hidden})};
  b.skip = {1, random_tensor(rng, {hidden, feats}), random_tensor(rng, {feats})};
  b.residual = {1, random_tensor(rng, {hidden, feats}), random_tensor(rng, {feats})};
  return b;
}

void zero_residual_branch(Conv1dBlockParams& block) {
  std::fill(block.residual.weight.data(),
            block.residual.weight.data() + block.residual.weight.size(), 0.0);
  std::fill(block.residual.bias.data(), block.residual.bias.data() + block.residual.bias.size(),
            0.0);
}

}  // namespace

TEST_CASE("dilation schedule doubles from 1") {
  CHECK(dilation_schedule(4) == std::vector<std::int64_t>{1, 2, 4, 8});
  CHECK(dilation_schedule(1) == std::vector<std::int64_t>{1});
  CHECK_THROWS_AS(dilation_schedule(0), std::invalid_argument);
}

TEST_CASE("conv1d_block: shapes, zeroed residual branch, gradients") {
  Rng rng(30);
  auto block = random_block_1d(rng, 5, 7);
  Tensor x = random_tensor(rng, {9, 5});

  BlockOutput out = conv1d_block(x, block, 2);
  CHECK(out.residual.shape() == Shape{9, 5});
  CHECK(out.skip.shape() == Shape{9, 5});

  zero_residual_branch(block);
  BlockOutput passthrough = conv1d_block(x, block, 2);
  CHECK(passthrough.residual.values() == x.values());

  const double err = grad_check(
      [&](const Tensor& t) {
        BlockOutput o = conv1d_block(t, block, 1);
        return sum(mul(o.residual, o.skip));
      },
      x, 1e-5);
  CHECK(err < 1e-5);
}

TEST_CASE("conv2d_block_ic keeps time and feature extents at every step") {
  Rng rng(31);
  ConvIcBlockParams block;
  const std::int64_t chans = 3, hidden = 12;
  block.expand = {2, random_tensor(rng, {chans, hidden}), random_tensor(rng, {hidden})};
  block.prelu_in = {Tensor::scalar(0.25)};
  block.norm_in = {2, random_tensor(rng, {hidden}, 0.5, 1.5), random_tensor(rng, {hidden})};
  block.kernel = random_tensor(rng, {hidden, 3, 3});
  block.kernel_bias = random_tensor(rng, {hidden});
  block.prelu_mid = {Tensor::scalar(0.3)};
  block.norm_mid = {2, random_tensor(rng, {hidden}, 0.5, 1.5), random_tensor(rng, {hidden})};
  block.skip = {2, random_tensor(rng, {hidden, chans}), random_tensor(rng, {chans})};
  block.residual = {2, random_tensor(rng, {hidden, chans}), random_tensor(rng, {chans})};

  Tensor x = random_tensor(rng, {8, 6, 3});
  // the expanded map keeps (L, N), only the channel extent grows
  Tensor expanded = block.expand(x);
  CHECK(expanded.shape() == Shape{8, 6, 12});
  BlockOutput out = conv2d_block_ic(x, block, 4);
  CHECK(out.residual.shape() == x.shape());
  CHECK(out.skip.shape() == x.shape());

  std::fill(block.residual.weight.data(),
            block.residual.weight.data() + block.residual.weight.size(), 0.0);
  std::fill(block.residual.bias.data(), block.residual.bias.data() + block.residual.bias.size(),
            0.0);
  CHECK(conv2d_block_ic(x, block, 4).residual.values() == x.values());
}

TEST_CASE("stack_forward: single block, dilations, identity composition") {
  Rng rng(32);
  std::vector<Conv1dBlockParams> stack;
  for (int i = 0; i < 3; ++i) stack.push_back(random_block_1d(rng, 4, 6));
  Tensor x = random_tensor(rng, {10, 4});

  auto [residual, skip] = stack_forward(x, stack);
  CHECK(residual.shape() == x.shape());
  CHECK(skip.shape() == x.shape());

  // block i runs at dilation 2^i: manual chaining reproduces the stack
  {
    Tensor current = x;
    Tensor skip_sum;
    std::int64_t dilation = 1;
    for (const auto& block : stack) {
      BlockOutput out = conv1d_block(current, block, dilation);
      current = out.residual;
      skip_sum = skip_sum.defined() ? add(skip_sum, out.skip) : out.skip;
      dilation *= 2;
    }
    CHECK(current.values() == residual.values());
    CHECK(skip_sum.values() == skip.values());
  }

  // D = 1 reduces to the single block
  std::vector<Conv1dBlockParams> one{stack[0]};
  auto [r1, s1] = stack_forward(x, one);
  BlockOutput direct = conv1d_block(x, stack[0], 1);
  CHECK(r1.values() == direct.residual.values());
  CHECK(s1.values() == direct.skip.values());

  for (auto& block : stack) zero_residual_branch(block);
  auto [r_id, s_id] = stack_forward(x, stack);
  CHECK(r_id.values() == x.values());
}

TEST_CASE("tcn_forward: S=1 equals stack skip; shapes preserved; grad_check") {
  Rng rng(33);
  std::vector<std::vector<Conv1dBlockParams>> stacks(2);
  for (auto& stack : stacks)
    for (int i = 0; i < 2; ++i) stack.push_back(random_block_1d(rng, 4, 5));
  Tensor x = random_tensor(rng, {12, 4});

  std::vector<std::vector<Conv1dBlockParams>> first{stacks[0]};
  Tensor skip_single = tcn_forward(x, first);
  auto [r, s] = stack_forward(x, stacks[0]);
  CHECK(skip_single.values() == s.values());

  Tensor total = tcn_forward(x, stacks);
  CHECK(total.shape() == x.shape());

  const double err = grad_check(
      [&](const Tensor& t) {
        Tensor y = tcn_forward(t, stacks);
        return sum(mul(y, y));
      },
      x, 1e-5);
  CHECK(err < 1e-5);
}

TEST_CASE("receptive field: formula and impulse-response support") {
  CHECK(receptive_field(1, 1, 3) == 3);
  CHECK(receptive_field(2, 1, 3) == 7);
  CHECK(receptive_field(8, 3, 3) == 1531);

  // Impulse support of a (D=3, S=2) chain, normalization disabled: the
  // change must cover exactly 1 + 2*2*(2^3-1) = 29 frames.
  Rng rng(34);
  const std::int64_t frames = 64, feats = 3;
  std::vector<std::vector<Conv1dBlockParams>> stacks(2);
  for (auto& stack : stacks)
    for (int i = 0; i < 3; ++i) stack.push_back(random_block_1d(rng, feats, 4));

  Tensor x = random_tensor(rng, {frames, feats});
  Tensor base = tcn_forward(x, stacks, /*use_norm=*/false);

  Tensor bumped = Tensor::from_data(x.shape(), x.values());
  const std::int64_t hit = 31;
  bumped.set({hit, 1}, bumped.at({hit, 1}) + 0.5);
  Tensor moved = tcn_forward(bumped, stacks, /*use_norm=*/false);

  std::int64_t first = -1, last = -1;
  for (std::int64_t l = 0; l < frames; ++l) {
    bool changed = false;
    for (std::int64_t n = 0; n < feats; ++n)
      if (base.at({l, n}) != moved.at({l, n})) changed = true;
    if (changed) {
      if (first < 0) first = l;
      last = l;
    }
  }
  CHECK(first == hit - 14);
  CHECK(last == hit + 14);
  CHECK(last - first + 1 == receptive_field(3, 2, 3));
}

TEST_CASE("tcn3d: channel isolation and C=1 degeneracy") {
  Rng rng(35);
  const std::int64_t chans = 3;
  std::vector<std::vector<std::vector<Conv1dBlockParams>>> per_channel(chans);
  for (auto& stacks : per_channel) {
    stacks.resize(2);
    for (auto& stack : stacks)
      for (int i = 0; i < 2; ++i) stack.push_back(random_block_1d(rng, 4, 5));
  }
  Tensor x = random_tensor(rng, {9, 4, chans});
  Tensor skip = tcn3d_forward(x, per_channel);
  CHECK(skip.shape() == x.shape());

  // zeroing channel 1's parameters changes only channel 1 of the output
  // (tensor handles share storage, so `skip` above is computed first)
  auto zeroed = per_channel;
  for (auto& stack : zeroed[1])
    for (auto& block : stack) {
      for (Tensor* t : {&block.expand.weight, &block.expand.bias, &block.kernel,
                        &block.kernel_bias, &block.skip.weight, &block.skip.bias,
                        &block.residual.weight, &block.residual.bias})
        std::fill(t->data(), t->data() + t->size(), 0.0);
    }
  Tensor skip_zeroed = tcn3d_forward(x, zeroed);
  CHECK(slice_last(skip, 0).values() == slice_last(skip_zeroed, 0).values());
  CHECK(slice_last(skip, 2).values() == slice_last(skip_zeroed, 2).values());
  CHECK(slice_last(skip, 1).values() != slice_last(skip_zeroed, 1).values());

  // C = 1 reduces exactly to tcn_forward on the squeezed slice
  std::vector<std::vector<std::vector<Conv1dBlockParams>>> solo{per_channel[0]};
  Tensor x1 = random_tensor(rng, {9, 4, 1});
  Tensor via_3d = tcn3d_forward(x1, solo);
  Tensor via_1d = tcn_forward(squeeze_last(x1), per_channel[0]);
  CHECK(squeeze_last(via_3d).values() == via_1d.values());
}

TEST_CASE("stage schedules") {
  auto down = downsized_schedule(128, 64);
  REQUIRE(down.size() == 3);
  CHECK(down[0] == StageDims{128, 64});
  CHECK(down[1] == StageDims{90, 32});  // floor(128/sqrt(2)) = 90
  CHECK(down[2] == StageDims{64, 16});
  auto up = upsized_schedule(128, 64);
  CHECK(up[0] == StageDims{64, 16});
  CHECK(up[2] == StageDims{128, 64});
  CHECK(schedule_target(down) == StageDims{128, 64});
  CHECK(schedule_target(up) == StageDims{128, 64});
  CHECK_THROWS_AS(downsized_schedule(128, 6), std::invalid_argument);
}

TEST_CASE("downsized tcn with constant schedule equals plain IC tcn") {
  // A constant schedule has no skip upsizers; with the inter-stack
  // transitions set to identity, the staged forward must match the plain
  // IC TCN bit for bit.
  Rng rng(36);
  ModelConfig config;
  config.variant = Variant::IC;
  config.blocks_per_stack = 2;
  config.stacks = 2;
  config.encoder_dim = 16;
  config.bottleneck_dim = 6;
  config.channel_dim = 4;
  config.hidden_dim = 16;
  config.window = 8;
  config.mics = 2;
  config.reference_channel = 1;
  config.seed = 99;
  Model ic = build_model(config);

  DownsizedTcnParams staged;
  staged.schedule = {{6, 4}, {6, 4}};
  staged.stacks = ic.tcn_ic;
  StackTransition identity_transition;
  {
    std::vector<double> eye_feature(36, 0.0);
    for (int i = 0; i < 6; ++i) eye_feature[i * 6 + i] = 1.0;
    std::vector<double> eye_channel(16, 0.0);
    for (int i = 0; i < 4; ++i) eye_channel[i * 4 + i] = 1.0;
    identity_transition.feature = {1, Tensor::from_data({6, 6}, eye_feature), Tensor::zeros({6})};
    identity_transition.channel = {2, Tensor::from_data({4, 4}, eye_channel), Tensor::zeros({4})};
  }
  staged.transitions = {identity_transition};
  staged.skip_upsizers.resize(2);  // constant schedule: no upsizers

  Tensor x = random_tensor(rng, {7, 6, 4});
  Tensor via_staged = downsized_tcn_forward(x, staged);
  Tensor via_plain = tcn_forward(x, ic.tcn_ic);
  REQUIRE(via_staged.shape() == via_plain.shape());
  for (std::int64_t i = 0; i < via_plain.size(); ++i)
    CHECK(via_staged.data()[i] == doctest::Approx(via_plain.data()[i]).epsilon(1e-12));
}

TEST_CASE("downsized forward: shapes follow the schedule") {
  ModelConfig config;
  config.variant = Variant::ICDownsized;
  config.blocks_per_stack = 2;
  config.stacks = 3;
  config.encoder_dim = 32;
  config.bottleneck_dim = 8;
  config.channel_dim = 8;
  config.hidden_dim = 32;
  config.window = 16;
  config.mics = 2;
  config.reference_channel = 1;
  Model model = build_model(config);
  CHECK(model.tcn_staged.schedule[0] == StageDims{8, 8});
  CHECK(model.tcn_staged.schedule[1] == StageDims{5, 4});  // floor(8/sqrt(2)) = 5
  CHECK(model.tcn_staged.schedule[2] == StageDims{4, 2});

  Rng rng(37);
  Tensor x = random_tensor(rng, {6, 8, 8});
  Tensor skip = downsized_tcn_forward(x, model.tcn_staged);
  CHECK(skip.shape() == Shape{6, 8, 8});
}

TEST_CASE("residual shape preservation on randomized shapes") {
  Rng rng(38);
  for (int trial = 0; trial < 6; ++trial) {
    const std::int64_t frames = rng.uniform_int(4, 20);
    const std::int64_t feats = rng.uniform_int(2, 7);
    const std::int64_t hidden = rng.uniform_int(2, 9);
    auto block = random_block_1d(rng, feats, hidden);
    Tensor x = random_tensor(rng, {frames, feats});
    BlockOutput out = conv1d_block(x, block, rng.uniform_int(1, 4));
    CHECK(out.residual.shape() == x.shape());
  }
}
