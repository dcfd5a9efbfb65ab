#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "ictn/gradcheck.hpp"
#include "ictn/rng.hpp"
#include "ictn/tensor.hpp"

using namespace ictn;

namespace {

Tensor random_tensor(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
  std::int64_t n = 1;
  for (auto e : shape) n *= e;
  std::vector<double> values(static_cast<std::size_t>(n));
  for (auto& v : values) v = rng.uniform(lo, hi);
  return Tensor::from_data(std::move(shape), std::move(values));
}

Tensor identity_weight(std::int64_t n) {
  std::vector<double> values(static_cast<std::size_t>(n * n), 0.0);
  for (std::int64_t i = 0; i < n; ++i) values[i * n + i] = 1.0;
  return Tensor::from_data({n, n}, std::move(values));
}

}  // namespace

TEST_CASE("activations: definitions") {
  Tensor x = Tensor::from_data({3}, {-1.0, 0.0, 2.0});
  CHECK(relu(x).values() == std::vector<double>{0.0, 0.0, 2.0});

  Tensor p = prelu(Tensor::from_data({2}, {-2.0, 3.0}), Tensor::scalar(0.25));
  CHECK(p.values() == std::vector<double>{-0.5, 3.0});

  CHECK(sigmoid(Tensor::scalar(0.0)).value() == 0.5);
}

TEST_CASE("sigmoid stays strictly inside (0, 1) even when saturated") {
  Tensor x = Tensor::from_data({4}, {-1000.0, -40.0, 40.0, 1000.0});
  for (double v : sigmoid(x).values()) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
}

TEST_CASE("relu/prelu positive homogeneity (exact for power-of-two scales)") {
  Rng rng(4);
  Tensor x = random_tensor(rng, {5, 3});
  for (double a : {2.0, 0.5, 1024.0}) {
    CHECK(relu(scale(x, a)).values() == scale(relu(x), a).values());
    Tensor slope = Tensor::scalar(0.25);
    CHECK(prelu(scale(x, a), slope).values() == scale(prelu(x, slope), a).values());
  }
}

TEST_CASE("pointwise_conv identity and shape rule") {
  Rng rng(5);
  Tensor x = random_tensor(rng, {4, 3});
  Tensor out = pointwise_conv(x, 1, identity_weight(3), Tensor::zeros({3}));
  CHECK(out.values() == x.values());

  Tensor x3 = random_tensor(rng, {4, 2, 3});
  Tensor w = random_tensor(rng, {3, 5});
  Tensor b = random_tensor(rng, {5});
  CHECK(pointwise_conv(x3, 2, w, b).shape() == Shape{4, 2, 5});

  // feature-axis reduction of a concatenated (L, F*M) map
  Tensor wide = random_tensor(rng, {6, 8});
  Tensor reduce = random_tensor(rng, {8, 2});
  CHECK(pointwise_conv(wide, 1, reduce, Tensor::zeros({2})).shape() == Shape{6, 2});

  CHECK_THROWS_AS(pointwise_conv(x3, 3, w, b), std::invalid_argument);
  CHECK_THROWS_AS(pointwise_conv(x3, 1, w, b), std::invalid_argument);
}

TEST_CASE("pointwise_conv middle-axis agrees with slicewise matmul") {
  Rng rng(6);
  Tensor x = random_tensor(rng, {3, 4, 2});
  Tensor w = random_tensor(rng, {4, 5});
  Tensor b = Tensor::zeros({5});
  Tensor out = pointwise_conv(x, 1, w, b);
  for (std::int64_t c = 0; c < 2; ++c) {
    Tensor expect = matmul(slice_last(x, c), w);
    Tensor got = slice_last(out, c);
    for (std::int64_t i = 0; i < expect.size(); ++i)
      CHECK(got.data()[i] == doctest::Approx(expect.data()[i]).epsilon(1e-12));
  }
}

TEST_CASE("depthwise conv1d: identity kernel and hand convolutions") {
  Rng rng(7);
  Tensor x = random_tensor(rng, {6, 3});
  Tensor center = Tensor::from_data({3, 3}, {0, 1, 0, 0, 1, 0, 0, 1, 0});
  Tensor out = dilated_depthwise_conv1d(x, center, Tensor::zeros({3}), 1);
  CHECK(out.values() == x.values());

  Tensor ramp = Tensor::from_data({4, 1}, {1, 2, 3, 4});
  Tensor ones = Tensor::from_data({1, 3}, {1, 1, 1});
  CHECK(dilated_depthwise_conv1d(ramp, ones, Tensor::zeros({1}), 1).values() ==
        std::vector<double>{3, 6, 9, 7});
  CHECK(dilated_depthwise_conv1d(ramp, ones, Tensor::zeros({1}), 2).values() ==
        std::vector<double>{4, 6, 4, 6});

  CHECK_THROWS_AS(dilated_depthwise_conv1d(x, ones, Tensor::zeros({1}), 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(dilated_depthwise_conv1d(x, center, Tensor::zeros({3}), 0),
                  std::invalid_argument);
}

TEST_CASE("depthwise conv2d: identity kernel, padded sums, gradients") {
  Rng rng(8);
  Tensor x = random_tensor(rng, {5, 4, 2});
  std::vector<double> center(2 * 9, 0.0);
  center[4] = 1.0;
  center[9 + 4] = 1.0;
  Tensor out = dilated_depthwise_conv2d(x, Tensor::from_data({2, 3, 3}, center),
                                        Tensor::zeros({2}), 1);
  CHECK(out.values() == x.values());

  // all-ones 4x4 input, all-ones kernel: centers see 9 taps, corners 4
  Tensor flat = Tensor::full({4, 4, 1}, 1.0);
  Tensor ones = Tensor::full({1, 3, 3}, 1.0);
  Tensor summed = dilated_depthwise_conv2d(flat, ones, Tensor::zeros({1}), 1);
  CHECK(summed.at({1, 1, 0}) == 9.0);
  CHECK(summed.at({2, 2, 0}) == 9.0);
  CHECK(summed.at({0, 0, 0}) == 4.0);
  CHECK(summed.at({3, 3, 0}) == 4.0);
  CHECK(summed.at({0, 1, 0}) == 6.0);

  Tensor x66 = random_tensor(rng, {6, 6, 2});
  Tensor kernel = random_tensor(rng, {2, 3, 3});
  const double err = grad_check(
      [&](const Tensor& t) {
        Tensor y = dilated_depthwise_conv2d(x66, t, Tensor::zeros({2}), 1);
        return sum(mul(y, y));
      },
      kernel);
  CHECK(err < 1e-6);

  CHECK_THROWS_AS(dilated_depthwise_conv2d(x, ones, Tensor::zeros({1}), 1),
                  std::invalid_argument);
}

TEST_CASE("global_layer_norm: constant input, moments, affine broadcast") {
  Tensor constant = Tensor::full({4, 3}, 2.5);
  Tensor normed = global_layer_norm(constant, 1, Tensor::full({3}, 1.0), Tensor::zeros({3}));
  for (double v : normed.values()) CHECK(v == 0.0);

  Rng rng(9);
  Tensor x = random_tensor(rng, {8, 5});
  Tensor y = global_layer_norm(x, 1, Tensor::full({5}, 1.0), Tensor::zeros({5}));
  double mean = 0.0, var = 0.0;
  for (double v : y.values()) mean += v;
  mean /= static_cast<double>(y.size());
  for (double v : y.values()) var += (v - mean) * (v - mean);
  var /= static_cast<double>(y.size());
  CHECK(std::fabs(mean) < 1e-6);
  CHECK(std::fabs(var - 1.0) < 1e-6);

  // bias lands on the affine axis only
  Tensor biased = global_layer_norm(x, 1, Tensor::zeros({5}), Tensor::from_data({5}, {1, 2, 3, 4, 5}));
  for (std::int64_t l = 0; l < 8; ++l)
    for (std::int64_t k = 0; k < 5; ++k)
      CHECK(biased.at({l, k}) == static_cast<double>(k + 1));

  CHECK_THROWS_AS(global_layer_norm(x, 1, Tensor::zeros({4}), Tensor::zeros({5})),
                  std::invalid_argument);
}

TEST_CASE("global_layer_norm gradient vs finite differences") {
  Rng rng(10);
  Tensor x = random_tensor(rng, {5, 4});
  Tensor g = random_tensor(rng, {4}, 0.5, 1.5);
  Tensor b = random_tensor(rng, {4});
  const double err = grad_check(
      [&](const Tensor& t) {
        Tensor y = global_layer_norm(t, 1, g, b);
        return sum(mul(y, y));
      },
      x);
  CHECK(err < 1e-6);
}

TEST_CASE("grad_check passes on three distinct shapes per primitive") {
  Rng rng(11);
  for (Shape shape : {Shape{6}, Shape{3, 5}, Shape{2, 3, 4}}) {
    Tensor x = random_tensor(rng, shape, 0.2, 1.3);
    CHECK(grad_check([](const Tensor& t) { return sum(sigmoid(t)); }, x) < 1e-6);
    CHECK(grad_check([](const Tensor& t) { return sum(mul(relu(t), relu(t))); }, x) < 1e-6);
    CHECK(grad_check([](const Tensor& t) { return sum(mul(t, t)); }, x) < 1e-6);
  }

  auto square_sum = [](const Tensor& y) { return sum(mul(y, y)); };
  for (Shape shape : {Shape{5, 2}, Shape{9, 3}, Shape{4, 6}}) {
    Tensor x = random_tensor(rng, shape);
    Tensor k = random_tensor(rng, {shape[1], 3});
    Tensor b = random_tensor(rng, {shape[1]});
    CHECK(grad_check([&](const Tensor& t) {
            return square_sum(dilated_depthwise_conv1d(t, k, b, 2));
          }, x) < 1e-6);
    Tensor w = random_tensor(rng, {shape[1], 4});
    Tensor wb = random_tensor(rng, {4});
    CHECK(grad_check([&](const Tensor& t) {
            return square_sum(pointwise_conv(t, 1, w, wb));
          }, x) < 1e-6);
    Tensor g = random_tensor(rng, {shape[1]}, 0.5, 1.5);
    CHECK(grad_check([&](const Tensor& t) {
            return square_sum(global_layer_norm(t, 1, g, b));
          }, x) < 1e-6);
  }
  for (Shape shape : {Shape{4, 5, 2}, Shape{6, 3, 3}, Shape{3, 4, 4}}) {
    Tensor x = random_tensor(rng, shape);
    Tensor k = random_tensor(rng, {shape[2], 3, 3});
    Tensor b = random_tensor(rng, {shape[2]});
    CHECK(grad_check([&](const Tensor& t) {
            return square_sum(dilated_depthwise_conv2d(t, k, b, 1));
          }, x) < 1e-6);
  }
}
