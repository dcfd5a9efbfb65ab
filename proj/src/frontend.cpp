#include "ictn/frontend.hpp"

#include <stdexcept>

#include "tensor_impl.hpp"

namespace ictn {

using detail::check;
using detail::impl_of;
using detail::TensorImpl;

void FrameSpec::validate() const {
  check(window > 0, "frame spec: window must be positive");
  check(hop > 0 && hop <= window,
        "frame spec: hop must satisfy 0 < hop <= window, got hop " + std::to_string(hop) +
            ", window " + std::to_string(window));
}

AudioBuffer AudioBuffer::zeros(std::int64_t frames, std::int64_t channels,
                               std::int64_t sample_rate) {
  AudioBuffer out;
  out.sample_rate = sample_rate;
  out.channels = channels;
  out.samples.assign(static_cast<std::size_t>(frames * channels), 0.0);
  return out;
}

std::vector<double> AudioBuffer::channel_vector(std::int64_t channel) const {
  const std::int64_t t = frames();
  std::vector<double> out(static_cast<std::size_t>(t));
  for (std::int64_t i = 0; i < t; ++i) out[i] = at(i, channel);
  return out;
}

std::int64_t segment_count(std::int64_t total_samples, const FrameSpec& spec) {
  spec.validate();
  check(total_samples >= spec.window,
        "input too short: " + std::to_string(total_samples) + " samples, window " +
            std::to_string(spec.window));
  return (total_samples - spec.window) / spec.hop + 1;
}

Tensor segment(const AudioBuffer& audio, const FrameSpec& spec) {
  check(audio.channels >= 1, "segment: audio has no channels");
  const std::int64_t total = audio.frames();
  const std::int64_t count = segment_count(total, spec);
  const std::int64_t window = spec.window;
  const std::int64_t mics = audio.channels;
  std::vector<double> out(static_cast<std::size_t>(count * window * mics));
  for (std::int64_t l = 0; l < count; ++l)
    for (std::int64_t k = 0; k < window; ++k)
      for (std::int64_t m = 0; m < mics; ++m)
        out[(l * window + k) * mics + m] = audio.at(l * spec.hop + k, m);
  return Tensor::from_data({count, window, mics}, std::move(out));
}

Tensor encode(const Tensor& segments, const Tensor& encoder) {
  check(segments.rank() == 3,
        "encode: segments must be (L x K x M), got " + shape_str(segments.shape()));
  check(encoder.rank() == 2 && encoder.shape()[0] == segments.shape()[1],
        "encode: encoder shape " + shape_str(encoder.shape()) + " does not match window " +
            std::to_string(segments.shape()[1]));
  const std::int64_t mics = segments.shape()[2];
  std::vector<Tensor> encoded;
  encoded.reserve(static_cast<std::size_t>(mics));
  for (std::int64_t m = 0; m < mics; ++m)
    encoded.push_back(matmul(slice_last(segments, m), encoder));
  return relu(stack_last(encoded));
}

Tensor apply_mask(const Tensor& reference, const Tensor& mask) {
  check(reference.shape() == mask.shape(),
        "apply_mask: shapes differ, " + shape_str(reference.shape()) + " vs " +
            shape_str(mask.shape()));
  return mul(reference, mask);
}

Tensor decode(const Tensor& masked, const Tensor& decoder) {
  return matmul(masked, decoder);
}

Tensor overlap_add(const Tensor& segments, std::int64_t hop) {
  check(segments.rank() == 2,
        "overlap_add: segments must be (L x K), got " + shape_str(segments.shape()));
  const std::int64_t count = segments.shape()[0];
  const std::int64_t window = segments.shape()[1];
  check(hop > 0 && hop <= window, "overlap_add: hop must satisfy 0 < hop <= window");
  const std::int64_t total = (count - 1) * hop + window;

  // Per-sample contributor counts; dividing by them makes segment ->
  // overlap_add an exact round trip.
  std::vector<double> weight(static_cast<std::size_t>(total), 0.0);
  for (std::int64_t l = 0; l < count; ++l)
    for (std::int64_t k = 0; k < window; ++k) weight[l * hop + k] += 1.0;
  for (auto& w : weight) w = 1.0 / w;

  auto px = impl_of(segments);
  std::vector<double> out(static_cast<std::size_t>(total), 0.0);
  for (std::int64_t l = 0; l < count; ++l)
    for (std::int64_t k = 0; k < window; ++k)
      out[l * hop + k] += px->values[l * window + k];
  for (std::int64_t t = 0; t < total; ++t) out[t] *= weight[t];

  return detail::make_node(
      {total}, std::move(out), {px},
      [px, count, window, hop, weight = std::move(weight)](TensorImpl& self) {
        if (!px->requires_grad) return;
        for (std::int64_t l = 0; l < count; ++l)
          for (std::int64_t k = 0; k < window; ++k)
            px->grad[l * window + k] += self.grad[l * hop + k] * weight[l * hop + k];
      });
}

AudioBuffer pad_to_whole_windows(const AudioBuffer& audio, const FrameSpec& spec) {
  spec.validate();
  const std::int64_t total = audio.frames();
  check(total >= spec.window, "input too short: " + std::to_string(total) +
                                  " samples, window " + std::to_string(spec.window));
  const std::int64_t tail = (total - spec.window) % spec.hop;
  if (tail == 0) return audio;
  const std::int64_t padded = total + (spec.hop - tail);
  AudioBuffer out = AudioBuffer::zeros(padded, audio.channels, audio.sample_rate);
  std::copy(audio.samples.begin(), audio.samples.end(), out.samples.begin());
  return out;
}

}  // namespace ictn
