#pragma once

#include <cstdint>
#include <vector>

#include "ictn/tensor.hpp"

namespace ictn {

// Segmentation window: K samples per segment, stepped by hop.
struct FrameSpec {
  std::int64_t window = 256;
  std::int64_t hop = 128;

  void validate() const;
};

// Multichannel waveform, samples stored row-major (frame-major, channels
// interleaved), matching WAV file order.
struct AudioBuffer {
  std::int64_t sample_rate = 16000;
  std::int64_t channels = 0;
  std::vector<double> samples;

  static AudioBuffer zeros(std::int64_t frames, std::int64_t channels,
                           std::int64_t sample_rate = 16000);

  std::int64_t frames() const {
    return channels > 0 ? static_cast<std::int64_t>(samples.size()) / channels : 0;
  }
  double at(std::int64_t frame, std::int64_t channel) const {
    return samples[static_cast<std::size_t>(frame * channels + channel)];
  }
  double& at(std::int64_t frame, std::int64_t channel) {
    return samples[static_cast<std::size_t>(frame * channels + channel)];
  }
  std::vector<double> channel_vector(std::int64_t channel) const;
};

// L = floor((T - K) / hop) + 1 for T >= K.
std::int64_t segment_count(std::int64_t total_samples, const FrameSpec& spec);

// Chops a waveform into overlapping segments: (L x K x M) leaf tensor,
// segment l covering samples [l*hop, l*hop + K).
Tensor segment(const AudioBuffer& audio, const FrameSpec& spec);

// w = ReLU(x U) applied per microphone channel with a single shared
// encoding matrix: (L x K x M) -> (L x F x M).
Tensor encode(const Tensor& segments, const Tensor& encoder);

// d = w_ref (.) m
Tensor apply_mask(const Tensor& reference, const Tensor& mask);

// Segment reconstruction: (L x F) * (F x K) -> (L x K).
Tensor decode(const Tensor& masked, const Tensor& decoder);

// Overlap-and-add with per-sample contributor-count normalization, so
// overlap_add(segment(x)) reproduces x exactly. Output length (L-1)*hop + K.
Tensor overlap_add(const Tensor& segments, std::int64_t hop);

// Zero-pads the tail so the final window is complete (output length
// (L-1)*hop + K >= frames). Requires frames >= window.
AudioBuffer pad_to_whole_windows(const AudioBuffer& audio, const FrameSpec& spec);

}  // namespace ictn
