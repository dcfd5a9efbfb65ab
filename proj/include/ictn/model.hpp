#pragma once

#include <string>
#include <vector>

#include "ictn/frontend.hpp"
#include "ictn/tcn.hpp"

namespace ictn {

enum class Variant { SC, MC, TwoD, ThreeD, IC, ICDownsized, ICUpsized };

std::string variant_name(Variant variant);
Variant variant_from_name(const std::string& name);

// Declarative model description. Field letters follow the configuration
// surface: D blocks per stack, S stacks, F encoder features, N bottleneck
// features, C channels, H hidden size, K window, M microphones.
struct ModelConfig {
  Variant variant = Variant::IC;
  std::int64_t blocks_per_stack = 8;   // D
  std::int64_t stacks = 3;             // S
  std::int64_t encoder_dim = 512;      // F
  std::int64_t bottleneck_dim = 128;   // N
  std::int64_t channel_dim = 64;       // C
  std::int64_t hidden_dim = 256;       // H
  std::int64_t window = 256;           // K
  std::int64_t mics = 6;               // M
  std::int64_t reference_channel = 5;  // 1-based
  std::uint64_t seed = 1;

  FrameSpec frame_spec() const { return {window, window / 2}; }
  std::int64_t default_hidden() const;
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

// Mask heads. A consumes a 2-D skip total (L x N); B compresses the channel
// axis first and is the only cross-channel mixing in the 3-D variant.
struct MaskHeadA {
  PreluLayer prelu;
  PointwiseLayer out;  // N -> F, feature axis
};
struct MaskHeadB {
  PreluLayer prelu;
  PointwiseLayer channel;  // C -> 1, channel axis
  PointwiseLayer feature;  // N -> F, feature axis
};

Tensor mask_head_a(const Tensor& skip_total, const MaskHeadA& head);
Tensor mask_head_b(const Tensor& skip_total, const MaskHeadB& head);

struct Model {
  ModelConfig config;
  Tensor encoder;  // (K x F), shared across channels
  Tensor decoder;  // (F x K)
  PointwiseLayer bottleneck_feature;
  PointwiseLayer bottleneck_channel;  // 3-D/IC family only

  std::vector<std::vector<Conv1dBlockParams>> tcn_1d;                  // SC/MC/2-D
  std::vector<std::vector<std::vector<Conv1dBlockParams>>> tcn_3d;     // per channel
  std::vector<std::vector<ConvIcBlockParams>> tcn_ic;                  // IC
  DownsizedTcnParams tcn_staged;                                       // downsized/upsized

  MaskHeadA head_a;
  MaskHeadB head_b;

  std::vector<Parameter> parameters;  // construction order; names unique

  const Parameter* find_parameter(const std::string& name) const;
};

Model build_model(const ModelConfig& config);

// End-to-end enhancement graph: segment, encode, bottleneck, TCN, mask,
// decode, overlap-add. Returns a waveform tensor with the input's length,
// differentiable w.r.t. the model parameters.
Tensor forward(const Model& model, const AudioBuffer& audio);

// The estimated mask (L x F) for the same input, for inspection.
Tensor forward_mask(const Model& model, const AudioBuffer& audio);

// Inference convenience: no graph, mono output buffer.
AudioBuffer enhance(const Model& model, const AudioBuffer& audio);

}  // namespace ictn
