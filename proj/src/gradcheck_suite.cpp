#include "ictn/gradcheck.hpp"
#include "ictn/model.hpp"
#include "ictn/rng.hpp"
#include "ictn/train.hpp"

namespace ictn {

namespace {

constexpr double kPrimitive = 1e-6;
constexpr double kComposite = 1e-5;

Tensor random_tensor(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
  std::vector<double> values(static_cast<std::size_t>([&] {
    std::int64_t n = 1;
    for (auto e : shape) n *= e;
    return n;
  }()));
  for (auto& v : values) v = rng.uniform(lo, hi);
  return Tensor::from_data(std::move(shape), std::move(values));
}

// Values bounded away from zero, for the kinked activations.
Tensor random_offzero(Rng& rng, Shape shape) {
  Tensor t = random_tensor(rng, std::move(shape), 0.2, 1.5);
  std::vector<double> values = t.values();
  for (std::size_t i = 0; i < values.size(); ++i)
    if (rng.uniform() < 0.5) values[i] = -values[i];
  return Tensor::from_data(t.shape(), std::move(values));
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

ConvIcBlockParams random_block_ic(Rng& rng, std::int64_t chans, std::int64_t hidden) {
  ConvIcBlockParams b;
  b.expand = {2, random_tensor(rng, {chans, hidden}), random_tensor(rng, {hidden})};
  b.prelu_in = {Tensor::scalar(0.25)};
  b.norm_in = {2, random_tensor(rng, {hidden}, 0.5, 1.5), random_tensor(rng, {hidden})};
  b.kernel = random_tensor(rng, {hidden, 3, 3});
  b.kernel_bias = random_tensor(rng, {hidden});
  b.prelu_mid = {Tensor::scalar(0.3)};
  b.norm_mid = {2, random_tensor(rng, {hidden}, 0.5, 1.5), random_tensor(rng, {hidden})};
  b.skip = {2, random_tensor(rng, {hidden, chans}), random_tensor(rng, {chans})};
  b.residual = {2, random_tensor(rng, {hidden, chans}), random_tensor(rng, {chans})};
  return b;
}

}  // namespace

std::vector<GradCheckCase> gradcheck_suite() {
  std::vector<GradCheckCase> cases;

  cases.push_back({"matmul", kPrimitive, [] {
    Rng rng(11);
    Tensor a = random_tensor(rng, {5, 7});
    Tensor b = random_tensor(rng, {7, 3});
    double worst = grad_check([&](const Tensor& t) { return sum(matmul(t, b)); }, a);
    worst = std::max(worst, grad_check(
        [&](const Tensor& t) { return sum(mul(matmul(a, t), matmul(a, t))); }, b));
    return worst;
  }});

  cases.push_back({"pointwise_conv", kPrimitive, [] {
    Rng rng(12);
    double worst = 0.0;
    // feature axis of a 2-D map, feature and channel axes of a 3-D map
    {
      Tensor x = random_tensor(rng, {6, 4});
      Tensor w = random_tensor(rng, {4, 5});
      Tensor b = random_tensor(rng, {5});
      worst = std::max(worst, grad_check(
          [&](const Tensor& t) { return sum(mul(pointwise_conv(t, 1, w, b), pointwise_conv(t, 1, w, b))); }, x));
      worst = std::max(worst, grad_check(
          [&](const Tensor& t) { return sum(pointwise_conv(x, 1, t, b)); }, w));
      worst = std::max(worst, grad_check(
          [&](const Tensor& t) { return sum(mul(pointwise_conv(x, 1, w, t), pointwise_conv(x, 1, w, t))); }, b));
    }
    {
      Tensor x = random_tensor(rng, {5, 4, 3});
      Tensor w = random_tensor(rng, {4, 6});
      Tensor b = random_tensor(rng, {6});
      worst = std::max(worst, grad_check(
          [&](const Tensor& t) { return sum(mul(pointwise_conv(t, 1, w, b), pointwise_conv(t, 1, w, b))); }, x));
      Tensor wc = random_tensor(rng, {3, 2});
      Tensor bc = random_tensor(rng, {2});
      worst = std::max(worst, grad_check(
          [&](const Tensor& t) { return sum(mul(pointwise_conv(x, 2, t, bc), pointwise_conv(x, 2, t, bc))); }, wc));
    }
    return worst;
  }});

  cases.push_back({"depthwise_conv1d", kPrimitive, [] {
    Rng rng(13);
    Tensor x = random_tensor(rng, {9, 4});
    Tensor k = random_tensor(rng, {4, 3});
    Tensor b = random_tensor(rng, {4});
    auto square_sum = [](const Tensor& y) { return sum(mul(y, y)); };
    double worst = grad_check([&](const Tensor& t) {
      return square_sum(dilated_depthwise_conv1d(t, k, b, 2));
    }, x);
    worst = std::max(worst, grad_check([&](const Tensor& t) {
      return square_sum(dilated_depthwise_conv1d(x, t, b, 1));
    }, k));
    worst = std::max(worst, grad_check([&](const Tensor& t) {
      return square_sum(dilated_depthwise_conv1d(x, k, t, 3));
    }, b));
    return worst;
  }});

  cases.push_back({"depthwise_conv2d", kPrimitive, [] {
    Rng rng(14);
    Tensor x = random_tensor(rng, {6, 6, 2});
    Tensor k = random_tensor(rng, {2, 3, 3});
    Tensor b = random_tensor(rng, {2});
    auto square_sum = [](const Tensor& y) { return sum(mul(y, y)); };
    double worst = grad_check([&](const Tensor& t) {
      return square_sum(dilated_depthwise_conv2d(t, k, b, 2));
    }, x);
    worst = std::max(worst, grad_check([&](const Tensor& t) {
      return square_sum(dilated_depthwise_conv2d(x, t, b, 1));
    }, k));
    return worst;
  }});

  cases.push_back({"relu", kPrimitive, [] {
    Rng rng(15);
    Tensor x = random_offzero(rng, {4, 5});
    return grad_check([](const Tensor& t) { return sum(mul(relu(t), relu(t))); }, x, 1e-6);
  }});

  cases.push_back({"prelu", kPrimitive, [] {
    Rng rng(16);
    Tensor x = random_offzero(rng, {4, 5});
    double worst = grad_check(
        [](const Tensor& t) { return sum(mul(prelu(t, Tensor::scalar(0.25)), prelu(t, Tensor::scalar(0.25)))); },
        x, 1e-6);
    Tensor slope = Tensor::scalar(0.4);
    worst = std::max(worst, grad_check(
        [&](const Tensor& t) { return sum(mul(prelu(x, t), prelu(x, t))); }, slope));
    return worst;
  }});

  cases.push_back({"sigmoid", kPrimitive, [] {
    Rng rng(17);
    Tensor x = random_tensor(rng, {3, 7}, -3.0, 3.0);
    return grad_check([](const Tensor& t) { return sum(sigmoid(t)); }, x);
  }});

  cases.push_back({"global_layer_norm", kPrimitive, [] {
    Rng rng(18);
    double worst = 0.0;
    Tensor g = random_tensor(rng, {5}, 0.5, 1.5);
    Tensor b = random_tensor(rng, {5});
    {
      Tensor x = random_tensor(rng, {6, 5});
      worst = std::max(worst, grad_check([&](const Tensor& t) {
        return sum(mul(global_layer_norm(t, 1, g, b), global_layer_norm(t, 1, g, b)));
      }, x));
      worst = std::max(worst, grad_check([&](const Tensor& t) {
        return sum(mul(global_layer_norm(x, 1, t, b), global_layer_norm(x, 1, t, b)));
      }, g));
    }
    {
      Tensor x = random_tensor(rng, {4, 3, 5});
      worst = std::max(worst, grad_check([&](const Tensor& t) {
        return sum(mul(global_layer_norm(t, 2, g, b), global_layer_norm(t, 2, g, b)));
      }, x));
    }
    return worst;
  }});

  cases.push_back({"overlap_add", kPrimitive, [] {
    Rng rng(19);
    Tensor segs = random_tensor(rng, {4, 6});
    return grad_check([](const Tensor& t) {
      Tensor w = overlap_add(t, 3);
      return sum(mul(w, w));
    }, segs);
  }});

  cases.push_back({"sdr_loss", kPrimitive, [] {
    Rng rng(20);
    std::vector<double> reference(32);
    for (auto& v : reference) v = rng.uniform(-1.0, 1.0);
    Tensor estimate = random_tensor(rng, {32});
    return grad_check([&](const Tensor& t) { return sdr_loss(reference, t); }, estimate, 1e-6);
  }});

  cases.push_back({"conv1d_block", kComposite, [] {
    Rng rng(21);
    auto block = random_block_1d(rng, 4, 6);
    Tensor x = random_tensor(rng, {8, 4});
    auto through = [&](const Tensor& t) {
      BlockOutput out = conv1d_block(t, block, 2);
      return sum(mul(out.residual, out.skip));
    };
    double worst = grad_check(through, x, 1e-6);
    worst = std::max(worst, grad_check([&](const Tensor& t) {
      Conv1dBlockParams b = block;
      b.kernel = t;
      BlockOutput out = conv1d_block(x, b, 1);
      return sum(mul(out.residual, out.skip));
    }, block.kernel, 1e-6));
    return worst;
  }});

  cases.push_back({"conv2d_block_ic", kComposite, [] {
    Rng rng(22);
    auto block = random_block_ic(rng, 4, 8);
    Tensor x = random_tensor(rng, {8, 6, 4});
    return grad_check([&](const Tensor& t) {
      BlockOutput out = conv2d_block_ic(t, block, 2);
      return sum(mul(out.residual, out.skip));
    }, x, 1e-5);
  }});

  cases.push_back({"downsized_stack", kComposite, [] {
    Rng rng(101);
    DownsizedTcnParams params;
    params.schedule = {{8, 4}, {5, 2}, {4, 1}};
    const StageDims target = schedule_target(params.schedule);
    params.stacks.resize(3);
    for (std::size_t s = 0; s < 3; ++s)
      for (int d = 0; d < 2; ++d)
        params.stacks[s].push_back(
            random_block_ic(rng, params.schedule[s].channels, 4 * params.schedule[s].channels));
    for (std::size_t s = 0; s + 1 < 3; ++s) {
      StackTransition tr;
      tr.feature = {1,
                    random_tensor(rng, {params.schedule[s].features, params.schedule[s + 1].features}),
                    random_tensor(rng, {params.schedule[s + 1].features})};
      tr.channel = {2,
                    random_tensor(rng, {params.schedule[s].channels, params.schedule[s + 1].channels}),
                    random_tensor(rng, {params.schedule[s + 1].channels})};
      params.transitions.push_back(tr);
    }
    for (std::size_t s = 0; s < 3; ++s) {
      SkipUpsizer up;
      if (params.schedule[s].features != target.features)
        up.feature = PointwiseLayer{1,
                                    random_tensor(rng, {params.schedule[s].features, target.features}),
                                    random_tensor(rng, {target.features})};
      if (params.schedule[s].channels != target.channels)
        up.channel = PointwiseLayer{2,
                                    random_tensor(rng, {params.schedule[s].channels, target.channels}),
                                    random_tensor(rng, {target.channels})};
      params.skip_upsizers.push_back(std::move(up));
    }
    Tensor x = random_tensor(rng, {7, 8, 4});
    // Deep composite: wider step keeps the central difference above the
    // cancellation floor.
    return grad_check([&](const Tensor& t) {
      Tensor y = downsized_tcn_forward(t, params);
      return sum(mul(y, y));
    }, x, 3e-5);
  }});

  cases.push_back({"mask_head_a", kComposite, [] {
    Rng rng(24);
    MaskHeadA head;
    head.prelu = {Tensor::scalar(0.25)};
    head.out = {1, random_tensor(rng, {5, 7}), random_tensor(rng, {7})};
    Tensor x = random_offzero(rng, {6, 5});
    return grad_check([&](const Tensor& t) { return sum(mask_head_a(t, head)); }, x, 1e-6);
  }});

  cases.push_back({"mask_head_b", kComposite, [] {
    Rng rng(25);
    MaskHeadB head;
    head.prelu = {Tensor::scalar(0.25)};
    head.channel = {2, random_tensor(rng, {3, 1}), random_tensor(rng, {1})};
    head.feature = {1, random_tensor(rng, {5, 7}), random_tensor(rng, {7})};
    Tensor x = random_offzero(rng, {6, 5, 3});
    return grad_check([&](const Tensor& t) { return sum(mask_head_b(t, head)); }, x, 1e-5);
  }});

  return cases;
}

}  // namespace ictn
