#include "ictn/model.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_set>

#include "ictn/rng.hpp"
#include "tensor_impl.hpp"

namespace ictn {

using detail::check;

std::string variant_name(Variant variant) {
  switch (variant) {
    case Variant::SC: return "sc";
    case Variant::MC: return "mc";
    case Variant::TwoD: return "2d";
    case Variant::ThreeD: return "3d";
    case Variant::IC: return "ic";
    case Variant::ICDownsized: return "ic_downsized";
    case Variant::ICUpsized: return "ic_upsized";
  }
  throw std::invalid_argument("unknown variant");
}

Variant variant_from_name(const std::string& name) {
  if (name == "sc") return Variant::SC;
  if (name == "mc") return Variant::MC;
  if (name == "2d") return Variant::TwoD;
  if (name == "3d") return Variant::ThreeD;
  if (name == "ic") return Variant::IC;
  if (name == "ic_downsized") return Variant::ICDownsized;
  if (name == "ic_upsized") return Variant::ICUpsized;
  throw std::invalid_argument(
      "unknown variant \"" + name +
      "\" (expected sc, mc, 2d, 3d, ic, ic_downsized or ic_upsized)");
}

std::int64_t ModelConfig::default_hidden() const {
  switch (variant) {
    case Variant::ThreeD:
    case Variant::IC:
    case Variant::ICDownsized:
    case Variant::ICUpsized:
      return 4 * channel_dim;
    default:
      return 4 * bottleneck_dim;
  }
}

void ModelConfig::validate() const {
  check(blocks_per_stack >= 1 && blocks_per_stack <= 30,
        "config: D must be in [1, 30], got " + std::to_string(blocks_per_stack));
  check(stacks >= 1, "config: S must be positive");
  check(encoder_dim >= 1, "config: F must be positive");
  check(bottleneck_dim >= 1, "config: N must be positive");
  check(channel_dim >= 1, "config: C must be positive");
  check(hidden_dim >= 1, "config: H must be positive");
  check(window >= 2 && window % 2 == 0,
        "config: K must be even (50% overlap), got " + std::to_string(window));
  check(mics >= 1, "config: M must be positive");
  check(reference_channel >= 1 && reference_channel <= mics,
        "config: reference_channel must be in [1, M], got " +
            std::to_string(reference_channel) + " with M = " + std::to_string(mics));
  if (variant == Variant::SC)
    check(mics == 1, "config: the sc variant is single-channel (M = 1)");
  if (variant == Variant::ICDownsized || variant == Variant::ICUpsized) {
    check(stacks == 3, "config: the staged variants use S = 3");
    check(channel_dim % 4 == 0 && channel_dim >= 4,
          "config: staged variants need C divisible by 4, got " + std::to_string(channel_dim));
    check(bottleneck_dim >= 2, "config: staged variants need N >= 2");
  }
}

// ---------------------------------------------------------------------------
// Parameter construction

namespace {

class ParamBuilder {
 public:
  explicit ParamBuilder(std::uint64_t seed) : rng_(seed) {}

  Tensor uniform(const std::string& name, Shape shape, std::int64_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::vector<double> values(static_cast<std::size_t>(detail::shape_numel(shape)));
    for (auto& v : values) v = rng_.uniform(-bound, bound);
    return record(name, Tensor::from_data(std::move(shape), std::move(values), true));
  }

  Tensor constant(const std::string& name, Shape shape, double value) {
    return record(name, Tensor::full(std::move(shape), value, true));
  }

  std::vector<Parameter> take() { return std::move(params_); }

 private:
  Tensor record(const std::string& name, Tensor tensor) {
    check(seen_.insert(name).second, "duplicate parameter name " + name);
    params_.push_back({name, tensor});
    return tensor;
  }

  Rng rng_;
  std::vector<Parameter> params_;
  std::unordered_set<std::string> seen_;
};

PointwiseLayer make_pointwise(ParamBuilder& b, const std::string& prefix, std::int64_t axis,
                              std::int64_t in, std::int64_t out) {
  PointwiseLayer layer;
  layer.axis = axis;
  layer.weight = b.uniform(prefix + ".weight", {in, out}, in);
  layer.bias = b.uniform(prefix + ".bias", {out}, in);
  return layer;
}

PreluLayer make_prelu(ParamBuilder& b, const std::string& prefix) {
  return {b.constant(prefix + ".slope", {1}, 0.25)};
}

NormLayer make_norm(ParamBuilder& b, const std::string& prefix, std::int64_t axis,
                    std::int64_t dim) {
  NormLayer layer;
  layer.axis = axis;
  layer.gain = b.constant(prefix + ".gain", {dim}, 1.0);
  layer.bias = b.constant(prefix + ".bias", {dim}, 0.0);
  return layer;
}

Conv1dBlockParams make_block_1d(ParamBuilder& b, const std::string& prefix, std::int64_t feats,
                                std::int64_t hidden) {
  Conv1dBlockParams block;
  block.expand = make_pointwise(b, prefix + ".expand", 1, feats, hidden);
  block.prelu_in = make_prelu(b, prefix + ".prelu_in");
  block.norm_in = make_norm(b, prefix + ".norm_in", 1, hidden);
  block.kernel = b.uniform(prefix + ".dconv.kernel", {hidden, 3}, 3);
  block.kernel_bias = b.uniform(prefix + ".dconv.bias", {hidden}, 3);
  block.prelu_mid = make_prelu(b, prefix + ".prelu_mid");
  block.norm_mid = make_norm(b, prefix + ".norm_mid", 1, hidden);
  block.skip = make_pointwise(b, prefix + ".skip", 1, hidden, feats);
  block.residual = make_pointwise(b, prefix + ".residual", 1, hidden, feats);
  return block;
}

ConvIcBlockParams make_block_ic(ParamBuilder& b, const std::string& prefix, std::int64_t chans,
                                std::int64_t hidden) {
  ConvIcBlockParams block;
  block.expand = make_pointwise(b, prefix + ".expand", 2, chans, hidden);
  block.prelu_in = make_prelu(b, prefix + ".prelu_in");
  block.norm_in = make_norm(b, prefix + ".norm_in", 2, hidden);
  block.kernel = b.uniform(prefix + ".dconv.kernel", {hidden, 3, 3}, 9);
  block.kernel_bias = b.uniform(prefix + ".dconv.bias", {hidden}, 9);
  block.prelu_mid = make_prelu(b, prefix + ".prelu_mid");
  block.norm_mid = make_norm(b, prefix + ".norm_mid", 2, hidden);
  block.skip = make_pointwise(b, prefix + ".skip", 2, hidden, chans);
  block.residual = make_pointwise(b, prefix + ".residual", 2, hidden, chans);
  return block;
}

std::string index2(std::int64_t i) {
  std::string s = std::to_string(i);
  return s.size() < 2 ? "0" + s : s;
}

MaskHeadA make_head_a(ParamBuilder& b, std::int64_t feats, std::int64_t encoder_dim) {
  MaskHeadA head;
  head.prelu = make_prelu(b, "mask.prelu");
  head.out = make_pointwise(b, "mask.out", 1, feats, encoder_dim);
  return head;
}

MaskHeadB make_head_b(ParamBuilder& b, std::int64_t feats, std::int64_t chans,
                      std::int64_t encoder_dim) {
  MaskHeadB head;
  head.prelu = make_prelu(b, "mask.prelu");
  head.channel = make_pointwise(b, "mask.channel", 2, chans, 1);
  head.feature = make_pointwise(b, "mask.feature", 1, feats, encoder_dim);
  return head;
}

}  // namespace

Model build_model(const ModelConfig& config) {
  config.validate();
  Model model;
  model.config = config;

  ParamBuilder builder(config.seed);
  const std::int64_t window = config.window;
  const std::int64_t enc = config.encoder_dim;

  // Encoder/decoder are pure matrix maps; no bias.
  model.encoder = builder.uniform("encoder.weight", {window, enc}, window);
  model.decoder = builder.uniform("decoder.weight", {enc, window}, enc);

  const std::int64_t feats = config.bottleneck_dim;
  const std::int64_t chans = config.channel_dim;
  const std::int64_t hidden = config.hidden_dim;

  switch (config.variant) {
    case Variant::SC:
    case Variant::MC:
    case Variant::TwoD: {
      const std::int64_t bottleneck_in = config.variant == Variant::TwoD ? enc * config.mics : enc;
      model.bottleneck_feature = make_pointwise(builder, "bottleneck.feature", 1, bottleneck_in, feats);
      model.tcn_1d.resize(static_cast<std::size_t>(config.stacks));
      for (std::int64_t s = 0; s < config.stacks; ++s)
        for (std::int64_t d = 0; d < config.blocks_per_stack; ++d)
          model.tcn_1d[static_cast<std::size_t>(s)].push_back(make_block_1d(
              builder, "tcn.stack" + index2(s) + ".block" + index2(d), feats, hidden));
      model.head_a = make_head_a(builder, feats, enc);
      break;
    }
    case Variant::ThreeD: {
      model.bottleneck_feature = make_pointwise(builder, "bottleneck.feature", 1, enc, feats);
      model.bottleneck_channel = make_pointwise(builder, "bottleneck.channel", 2, config.mics, chans);
      model.tcn_3d.resize(static_cast<std::size_t>(chans));
      for (std::int64_t c = 0; c < chans; ++c) {
        auto& stacks = model.tcn_3d[static_cast<std::size_t>(c)];
        stacks.resize(static_cast<std::size_t>(config.stacks));
        for (std::int64_t s = 0; s < config.stacks; ++s)
          for (std::int64_t d = 0; d < config.blocks_per_stack; ++d)
            stacks[static_cast<std::size_t>(s)].push_back(make_block_1d(
                builder,
                "tcn.ch" + index2(c) + ".stack" + index2(s) + ".block" + index2(d),
                feats, hidden));
      }
      model.head_b = make_head_b(builder, feats, chans, enc);
      break;
    }
    case Variant::IC: {
      model.bottleneck_feature = make_pointwise(builder, "bottleneck.feature", 1, enc, feats);
      model.bottleneck_channel = make_pointwise(builder, "bottleneck.channel", 2, config.mics, chans);
      model.tcn_ic.resize(static_cast<std::size_t>(config.stacks));
      for (std::int64_t s = 0; s < config.stacks; ++s)
        for (std::int64_t d = 0; d < config.blocks_per_stack; ++d)
          model.tcn_ic[static_cast<std::size_t>(s)].push_back(make_block_ic(
              builder, "tcn.stack" + index2(s) + ".block" + index2(d), chans, hidden));
      model.head_b = make_head_b(builder, feats, chans, enc);
      break;
    }
    case Variant::ICDownsized:
    case Variant::ICUpsized: {
      auto schedule = config.variant == Variant::ICDownsized
                          ? downsized_schedule(feats, chans)
                          : upsized_schedule(feats, chans);
      const StageDims target = schedule_target(schedule);
      model.bottleneck_feature =
          make_pointwise(builder, "bottleneck.feature", 1, enc, schedule[0].features);
      model.bottleneck_channel =
          make_pointwise(builder, "bottleneck.channel", 2, config.mics, schedule[0].channels);

      auto& staged = model.tcn_staged;
      staged.schedule = schedule;
      staged.stacks.resize(schedule.size());
      for (std::size_t s = 0; s < schedule.size(); ++s) {
        const std::int64_t stage_hidden = 4 * schedule[s].channels;
        for (std::int64_t d = 0; d < config.blocks_per_stack; ++d)
          staged.stacks[s].push_back(make_block_ic(
              builder,
              "tcn.stack" + index2(static_cast<std::int64_t>(s)) + ".block" + index2(d),
              schedule[s].channels, stage_hidden));
      }
      for (std::size_t s = 0; s + 1 < schedule.size(); ++s) {
        StackTransition transition;
        const std::string prefix = "tcn.transition" + index2(static_cast<std::int64_t>(s));
        transition.feature = make_pointwise(builder, prefix + ".feature", 1,
                                            schedule[s].features, schedule[s + 1].features);
        transition.channel = make_pointwise(builder, prefix + ".channel", 2,
                                            schedule[s].channels, schedule[s + 1].channels);
        staged.transitions.push_back(transition);
      }
      for (std::size_t s = 0; s < schedule.size(); ++s) {
        SkipUpsizer up;
        const std::string prefix = "tcn.stack" + index2(static_cast<std::int64_t>(s)) + ".skip_up";
        if (schedule[s].features != target.features)
          up.feature = make_pointwise(builder, prefix + ".feature", 1, schedule[s].features,
                                      target.features);
        if (schedule[s].channels != target.channels)
          up.channel = make_pointwise(builder, prefix + ".channel", 2, schedule[s].channels,
                                      target.channels);
        staged.skip_upsizers.push_back(std::move(up));
      }
      model.head_b = make_head_b(builder, target.features, target.channels, enc);
      break;
    }
  }

  model.parameters = builder.take();
  return model;
}

const Parameter* Model::find_parameter(const std::string& name) const {
  for (const auto& p : parameters)
    if (p.name == name) return &p;
  return nullptr;
}

// ---------------------------------------------------------------------------
// Mask heads

Tensor mask_head_a(const Tensor& skip_total, const MaskHeadA& head) {
  return sigmoid(head.out(head.prelu(skip_total)));
}

Tensor mask_head_b(const Tensor& skip_total, const MaskHeadB& head) {
  Tensor h = head.prelu(skip_total);
  h = squeeze_last(head.channel(h));
  return sigmoid(head.feature(h));
}

// ---------------------------------------------------------------------------
// Forward wiring

namespace {

// Mask estimation plus the encoder map the mask multiplies.
std::pair<Tensor, Tensor> mask_and_masked(const Model& model, const Tensor& w) {
  const auto& config = model.config;
  const std::int64_t reference = config.reference_channel - 1;
  switch (config.variant) {
    case Variant::SC:
    case Variant::MC: {
      // Encoder outputs superposed over microphones; the mask multiplies
      // the summed (single-channel) representation.
      Tensor mixed = sum_last(w);
      Tensor skip = tcn_forward(model.bottleneck_feature(mixed), model.tcn_1d);
      Tensor mask = mask_head_a(skip, model.head_a);
      return {mask, apply_mask(mixed, mask)};
    }
    case Variant::TwoD: {
      std::vector<Tensor> parts;
      parts.reserve(static_cast<std::size_t>(config.mics));
      for (std::int64_t m = 0; m < config.mics; ++m) parts.push_back(slice_last(w, m));
      Tensor stacked = concat(parts, 1);
      Tensor skip = tcn_forward(model.bottleneck_feature(stacked), model.tcn_1d);
      Tensor mask = mask_head_a(skip, model.head_a);
      return {mask, apply_mask(slice_last(w, reference), mask)};
    }
    case Variant::ThreeD: {
      Tensor y = model.bottleneck_channel(model.bottleneck_feature(w));
      Tensor skip = tcn3d_forward(y, model.tcn_3d);
      Tensor mask = mask_head_b(skip, model.head_b);
      return {mask, apply_mask(slice_last(w, reference), mask)};
    }
    case Variant::IC: {
      Tensor y = model.bottleneck_channel(model.bottleneck_feature(w));
      Tensor skip = tcn_forward(y, model.tcn_ic);
      Tensor mask = mask_head_b(skip, model.head_b);
      return {mask, apply_mask(slice_last(w, reference), mask)};
    }
    case Variant::ICDownsized:
    case Variant::ICUpsized: {
      Tensor y = model.bottleneck_channel(model.bottleneck_feature(w));
      Tensor skip = downsized_tcn_forward(y, model.tcn_staged);
      Tensor mask = mask_head_b(skip, model.head_b);
      return {mask, apply_mask(slice_last(w, reference), mask)};
    }
  }
  throw std::logic_error("unreachable");
}

Tensor encoded_input(const Model& model, const AudioBuffer& audio) {
  check(audio.channels == model.config.mics,
        "model expects " + std::to_string(model.config.mics) + " channels, audio has " +
            std::to_string(audio.channels));
  const FrameSpec spec = model.config.frame_spec();
  check(audio.frames() >= spec.window,
        "input too short: " + std::to_string(audio.frames()) + " samples, window " +
            std::to_string(spec.window));
  return encode(segment(pad_to_whole_windows(audio, spec), spec), model.encoder);
}

}  // namespace

Tensor forward(const Model& model, const AudioBuffer& audio) {
  const std::int64_t total = audio.frames();
  Tensor w = encoded_input(model, audio);
  auto [mask, masked] = mask_and_masked(model, w);
  Tensor out = overlap_add(decode(masked, model.decoder), model.config.frame_spec().hop);
  if (out.size() != total) out = take_front(out, total);
  return out;
}

Tensor forward_mask(const Model& model, const AudioBuffer& audio) {
  Tensor w = encoded_input(model, audio);
  return mask_and_masked(model, w).first;
}

AudioBuffer enhance(const Model& model, const AudioBuffer& audio) {
  NoGradGuard no_grad;
  Tensor out = forward(model, audio);
  AudioBuffer result;
  result.sample_rate = audio.sample_rate;
  result.channels = 1;
  result.samples = out.values();
  return result;
}

}  // namespace ictn
