#include <Eigen/Dense>
#include <cmath>
#include <limits>

#include "ictn/tensor.hpp"
#include "tensor_impl.hpp"

namespace ictn {

using detail::check;
using detail::impl_of;
using detail::TensorImpl;

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<RowMat>;
using CMapRM = Eigen::Map<const RowMat>;
using MapVec = Eigen::Map<Eigen::VectorXd>;
using CMapVec = Eigen::Map<const Eigen::VectorXd>;

// Largest double below 1; keeps sigmoid outputs inside the open interval
// even where exp() saturates.
constexpr double kOneBelow = 1.0 - 0x1.0p-53;

double stable_sigmoid(double x) {
  double y;
  if (x >= 0.0) {
    y = 1.0 / (1.0 + std::exp(-x));
  } else {
    const double e = std::exp(x);
    y = e / (1.0 + e);
  }
  if (y >= 1.0) y = kOneBelow;
  if (y <= 0.0) y = std::numeric_limits<double>::min();
  return y;
}

}  // namespace

// ---------------------------------------------------------------------------
// Activations

Tensor relu(const Tensor& x) {
  auto px = impl_of(x);
  std::vector<double> out(px->values.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = px->values[i] > 0.0 ? px->values[i] : 0.0;
  return detail::make_node(x.shape(), std::move(out), {px}, [px](TensorImpl& self) {
    if (!px->requires_grad) return;
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      if (px->values[i] > 0.0) px->grad[i] += self.grad[i];
  });
}

Tensor prelu(const Tensor& x, const Tensor& slope) {
  check(slope.size() == 1, "prelu: slope must be a single scalar parameter, got " +
                               shape_str(slope.shape()));
  auto px = impl_of(x), ps = impl_of(slope);
  const double a = ps->values[0];
  std::vector<double> out(px->values.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = px->values[i];
    out[i] = v > 0.0 ? v : a * v;
  }
  return detail::make_node(x.shape(), std::move(out), {px, ps}, [px, ps, a](TensorImpl& self) {
    if (px->requires_grad)
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        px->grad[i] += self.grad[i] * (px->values[i] > 0.0 ? 1.0 : a);
    if (ps->requires_grad) {
      double acc = 0.0;
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        if (px->values[i] <= 0.0) acc += self.grad[i] * px->values[i];
      ps->grad[0] += acc;
    }
  });
}

Tensor sigmoid(const Tensor& x) {
  auto px = impl_of(x);
  std::vector<double> out(px->values.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = stable_sigmoid(px->values[i]);
  return detail::make_node(x.shape(), std::move(out), {px}, [px](TensorImpl& self) {
    if (!px->requires_grad) return;
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const double y = self.values[i];
      px->grad[i] += self.grad[i] * y * (1.0 - y);
    }
  });
}

// ---------------------------------------------------------------------------
// Pointwise (1x1) convolution along a designated axis

Tensor pointwise_conv(const Tensor& x, std::int64_t axis, const Tensor& weight,
                      const Tensor& bias) {
  check(axis >= 0 && axis < x.rank(),
        "pointwise_conv: axis " + std::to_string(axis) + " out of range for shape " +
            shape_str(x.shape()));
  check(weight.rank() == 2, "pointwise_conv: weight must be rank 2, got " +
                                shape_str(weight.shape()));
  const std::int64_t in = weight.shape()[0];
  const std::int64_t out_dim = weight.shape()[1];
  check(x.shape()[axis] == in,
        "pointwise_conv: input extent along axis " + std::to_string(axis) + " is " +
            std::to_string(x.shape()[axis]) + ", weight expects " + std::to_string(in));
  check(bias.rank() == 1 && bias.shape()[0] == out_dim,
        "pointwise_conv: bias shape " + shape_str(bias.shape()) + " does not match output extent " +
            std::to_string(out_dim));

  auto px = impl_of(x), pw = impl_of(weight), pb = impl_of(bias);
  Shape out_shape = x.shape();
  out_shape[static_cast<std::size_t>(axis)] = out_dim;

  std::int64_t outer = 1, inner = 1;
  for (std::int64_t i = 0; i < axis; ++i) outer *= x.shape()[i];
  for (std::int64_t i = axis + 1; i < x.rank(); ++i) inner *= x.shape()[i];

  std::vector<double> out(static_cast<std::size_t>(outer * out_dim * inner));
  {
    CMapRM w(pw->values.data(), in, out_dim);
    CMapVec b(pb->values.data(), out_dim);
    if (inner == 1) {
      CMapRM xm(px->values.data(), outer, in);
      MapRM ym(out.data(), outer, out_dim);
      ym.noalias() = xm * w;
      ym.rowwise() += b.transpose();
    } else {
      for (std::int64_t o = 0; o < outer; ++o) {
        CMapRM xo(px->values.data() + o * in * inner, in, inner);
        MapRM yo(out.data() + o * out_dim * inner, out_dim, inner);
        yo.noalias() = w.transpose() * xo;
        yo.colwise() += b;
      }
    }
  }

  return detail::make_node(
      std::move(out_shape), std::move(out), {px, pw, pb},
      [px, pw, pb, outer, inner, in, out_dim](TensorImpl& self) {
        CMapRM w(pw->values.data(), in, out_dim);
        if (inner == 1) {
          CMapRM gy(self.grad.data(), outer, out_dim);
          if (px->requires_grad) {
            MapRM gx(px->grad.data(), outer, in);
            gx.noalias() += gy * w.transpose();
          }
          if (pw->requires_grad) {
            CMapRM xm(px->values.data(), outer, in);
            MapRM gw(pw->grad.data(), in, out_dim);
            gw.noalias() += xm.transpose() * gy;
          }
          if (pb->requires_grad) {
            MapVec gb(pb->grad.data(), out_dim);
            gb.noalias() += gy.colwise().sum().transpose();
          }
        } else {
          for (std::int64_t o = 0; o < outer; ++o) {
            CMapRM gyo(self.grad.data() + o * out_dim * inner, out_dim, inner);
            if (px->requires_grad) {
              MapRM gxo(px->grad.data() + o * in * inner, in, inner);
              gxo.noalias() += w * gyo;
            }
            if (pw->requires_grad) {
              CMapRM xo(px->values.data() + o * in * inner, in, inner);
              MapRM gw(pw->grad.data(), in, out_dim);
              gw.noalias() += xo * gyo.transpose();
            }
            if (pb->requires_grad) {
              MapVec gb(pb->grad.data(), out_dim);
              gb.noalias() += gyo.rowwise().sum();
            }
          }
        }
      });
}

// ---------------------------------------------------------------------------
// Dilated depthwise convolutions (3-tap, zero padded to keep the shape)

Tensor dilated_depthwise_conv1d(const Tensor& x, const Tensor& kernel,
                                const Tensor& bias, std::int64_t dilation) {
  check(x.rank() == 2, "depthwise_conv1d: input must be rank 2, got " + shape_str(x.shape()));
  check(dilation >= 1, "depthwise_conv1d: dilation must be >= 1");
  const std::int64_t frames = x.shape()[0];
  const std::int64_t feats = x.shape()[1];
  check(kernel.rank() == 2 && kernel.shape()[1] == 3,
        "depthwise_conv1d: kernel must be (features x 3), got " + shape_str(kernel.shape()));
  check(kernel.shape()[0] == feats,
        "depthwise_conv1d: kernel has " + std::to_string(kernel.shape()[0]) +
            " channels, input has " + std::to_string(feats));
  check(bias.rank() == 1 && bias.shape()[0] == feats,
        "depthwise_conv1d: bias shape " + shape_str(bias.shape()) + " does not match features");

  auto px = impl_of(x), pk = impl_of(kernel), pb = impl_of(bias);
  const std::int64_t d = dilation;

  // Kernel transposed to (tap, feature) so the feature loop is contiguous.
  std::vector<double> ktr(static_cast<std::size_t>(3 * feats));
  for (std::int64_t n = 0; n < feats; ++n)
    for (std::int64_t p = 0; p < 3; ++p) ktr[p * feats + n] = pk->values[n * 3 + p];

  std::vector<double> out(px->values.size());
  for (std::int64_t l = 0; l < frames; ++l) {
    double* y = out.data() + l * feats;
    const double* b = pb->values.data();
    for (std::int64_t n = 0; n < feats; ++n) y[n] = b[n];
    for (std::int64_t p = 0; p < 3; ++p) {
      const std::int64_t ll = l + (p - 1) * d;
      if (ll < 0 || ll >= frames) continue;
      const double* xs = px->values.data() + ll * feats;
      const double* kt = ktr.data() + p * feats;
      for (std::int64_t n = 0; n < feats; ++n) y[n] += kt[n] * xs[n];
    }
  }

  return detail::make_node(
      x.shape(), std::move(out), {px, pk, pb},
      [px, pk, pb, frames, feats, d, ktr = std::move(ktr)](TensorImpl& self) {
        std::vector<double> gktr;
        if (pk->requires_grad) gktr.assign(static_cast<std::size_t>(3 * feats), 0.0);
        for (std::int64_t l = 0; l < frames; ++l) {
          const double* gy = self.grad.data() + l * feats;
          if (pb->requires_grad) {
            double* gb = pb->grad.data();
            for (std::int64_t n = 0; n < feats; ++n) gb[n] += gy[n];
          }
          for (std::int64_t p = 0; p < 3; ++p) {
            const std::int64_t ll = l + (p - 1) * d;
            if (ll < 0 || ll >= frames) continue;
            if (px->requires_grad) {
              double* gx = px->grad.data() + ll * feats;
              const double* kt = ktr.data() + p * feats;
              for (std::int64_t n = 0; n < feats; ++n) gx[n] += kt[n] * gy[n];
            }
            if (pk->requires_grad) {
              const double* xs = px->values.data() + ll * feats;
              double* gk = gktr.data() + p * feats;
              for (std::int64_t n = 0; n < feats; ++n) gk[n] += xs[n] * gy[n];
            }
          }
        }
        if (pk->requires_grad)
          for (std::int64_t n = 0; n < feats; ++n)
            for (std::int64_t p = 0; p < 3; ++p)
              pk->grad[n * 3 + p] += gktr[p * feats + n];
      });
}

Tensor dilated_depthwise_conv2d(const Tensor& x, const Tensor& kernel,
                                const Tensor& bias, std::int64_t dilation) {
  check(x.rank() == 3, "depthwise_conv2d: input must be rank 3, got " + shape_str(x.shape()));
  check(dilation >= 1, "depthwise_conv2d: dilation must be >= 1");
  const std::int64_t frames = x.shape()[0];
  const std::int64_t feats = x.shape()[1];
  const std::int64_t chans = x.shape()[2];
  check(kernel.rank() == 3 && kernel.shape()[1] == 3 && kernel.shape()[2] == 3,
        "depthwise_conv2d: kernel must be (channels x 3 x 3), got " + shape_str(kernel.shape()));
  check(kernel.shape()[0] == chans,
        "depthwise_conv2d: kernel has " + std::to_string(kernel.shape()[0]) +
            " channels, input has " + std::to_string(chans));
  check(bias.rank() == 1 && bias.shape()[0] == chans,
        "depthwise_conv2d: bias shape " + shape_str(bias.shape()) + " does not match channels");

  auto px = impl_of(x), pk = impl_of(kernel), pb = impl_of(bias);
  const std::int64_t d = dilation;

  // Kernel transposed to (tap, channel) so the channel loop is contiguous.
  std::vector<double> ktr(static_cast<std::size_t>(9 * chans));
  for (std::int64_t c = 0; c < chans; ++c)
    for (std::int64_t t = 0; t < 9; ++t) ktr[t * chans + c] = pk->values[c * 9 + t];

  std::vector<double> out(px->values.size());
  for (std::int64_t l = 0; l < frames; ++l) {
    for (std::int64_t n = 0; n < feats; ++n) {
      double* y = out.data() + (l * feats + n) * chans;
      const double* b = pb->values.data();
      for (std::int64_t c = 0; c < chans; ++c) y[c] = b[c];
      for (std::int64_t p = 0; p < 3; ++p) {
        const std::int64_t ll = l + (p - 1) * d;
        if (ll < 0 || ll >= frames) continue;
        for (std::int64_t q = 0; q < 3; ++q) {
          const std::int64_t nn = n + (q - 1) * d;
          if (nn < 0 || nn >= feats) continue;
          const double* xs = px->values.data() + (ll * feats + nn) * chans;
          const double* kt = ktr.data() + (p * 3 + q) * chans;
          for (std::int64_t c = 0; c < chans; ++c) y[c] += kt[c] * xs[c];
        }
      }
    }
  }

  return detail::make_node(
      x.shape(), std::move(out), {px, pk, pb},
      [px, pk, pb, frames, feats, chans, d, ktr = std::move(ktr)](TensorImpl& self) {
        std::vector<double> gktr;
        if (pk->requires_grad) gktr.assign(static_cast<std::size_t>(9 * chans), 0.0);
        for (std::int64_t l = 0; l < frames; ++l) {
          for (std::int64_t n = 0; n < feats; ++n) {
            const double* gy = self.grad.data() + (l * feats + n) * chans;
            if (pb->requires_grad) {
              double* gb = pb->grad.data();
              for (std::int64_t c = 0; c < chans; ++c) gb[c] += gy[c];
            }
            for (std::int64_t p = 0; p < 3; ++p) {
              const std::int64_t ll = l + (p - 1) * d;
              if (ll < 0 || ll >= frames) continue;
              for (std::int64_t q = 0; q < 3; ++q) {
                const std::int64_t nn = n + (q - 1) * d;
                if (nn < 0 || nn >= feats) continue;
                const std::int64_t off = (ll * feats + nn) * chans;
                if (px->requires_grad) {
                  double* gx = px->grad.data() + off;
                  const double* kt = ktr.data() + (p * 3 + q) * chans;
                  for (std::int64_t c = 0; c < chans; ++c) gx[c] += kt[c] * gy[c];
                }
                if (pk->requires_grad) {
                  const double* xs = px->values.data() + off;
                  double* gk = gktr.data() + (p * 3 + q) * chans;
                  for (std::int64_t c = 0; c < chans; ++c) gk[c] += xs[c] * gy[c];
                }
              }
            }
          }
        }
        if (pk->requires_grad)
          for (std::int64_t c = 0; c < chans; ++c)
            for (std::int64_t t = 0; t < 9; ++t)
              pk->grad[c * 9 + t] += gktr[t * chans + c];
      });
}

// ---------------------------------------------------------------------------
// Global layer normalization

Tensor global_layer_norm(const Tensor& x, std::int64_t affine_axis,
                         const Tensor& gain, const Tensor& bias) {
  check(affine_axis >= 0 && affine_axis < x.rank(),
        "global_layer_norm: axis " + std::to_string(affine_axis) + " out of range for shape " +
            shape_str(x.shape()));
  const std::int64_t dim = x.shape()[affine_axis];
  check(gain.rank() == 1 && gain.shape()[0] == dim,
        "global_layer_norm: gain shape " + shape_str(gain.shape()) +
            " does not match affine extent " + std::to_string(dim));
  check(bias.rank() == 1 && bias.shape()[0] == dim,
        "global_layer_norm: bias shape " + shape_str(bias.shape()) +
            " does not match affine extent " + std::to_string(dim));

  auto px = impl_of(x), pg = impl_of(gain), pb = impl_of(bias);
  const std::int64_t n = x.size();
  std::int64_t inner = 1;
  for (std::int64_t i = affine_axis + 1; i < x.rank(); ++i) inner *= x.shape()[i];

  constexpr double kEps = 1e-8;
  double mean = 0.0;
  for (double v : px->values) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : px->values) {
    const double c = v - mean;
    var += c * c;
  }
  var /= static_cast<double>(n);
  const double inv_std = 1.0 / std::sqrt(var + kEps);

  std::vector<double> out(px->values.size());
  for (std::int64_t i = 0; i < n; ++i) {
    const std::int64_t k = (i / inner) % dim;
    out[i] = pg->values[k] * (px->values[i] - mean) * inv_std + pb->values[k];
  }

  return detail::make_node(
      x.shape(), std::move(out), {px, pg, pb},
      [px, pg, pb, n, inner, dim, mean, inv_std](TensorImpl& self) {
        if (px->requires_grad) {
          // d/dx of g*(x-mu)/s + b with mu, s functions of the whole map.
          double m1 = 0.0, m2 = 0.0;
          for (std::int64_t i = 0; i < n; ++i) {
            const std::int64_t k = (i / inner) % dim;
            const double gy = self.grad[i] * pg->values[k];
            const double xhat = (px->values[i] - mean) * inv_std;
            m1 += gy;
            m2 += gy * xhat;
          }
          m1 /= static_cast<double>(n);
          m2 /= static_cast<double>(n);
          for (std::int64_t i = 0; i < n; ++i) {
            const std::int64_t k = (i / inner) % dim;
            const double gy = self.grad[i] * pg->values[k];
            const double xhat = (px->values[i] - mean) * inv_std;
            px->grad[i] += (gy - m1 - xhat * m2) * inv_std;
          }
        }
        if (pg->requires_grad) {
          for (std::int64_t i = 0; i < n; ++i) {
            const std::int64_t k = (i / inner) % dim;
            pg->grad[k] += self.grad[i] * (px->values[i] - mean) * inv_std;
          }
        }
        if (pb->requires_grad) {
          for (std::int64_t i = 0; i < n; ++i) {
            const std::int64_t k = (i / inner) % dim;
            pb->grad[k] += self.grad[i];
          }
        }
      });
}

}  // namespace ictn
