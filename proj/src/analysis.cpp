#include "ictn/analysis.hpp"

#include <cmath>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "tensor_impl.hpp"

namespace ictn {

using detail::check;

std::int64_t count_parameters(const Model& model) {
  std::int64_t total = 0;
  for (const auto& p : model.parameters) total += p.tensor.size();
  return total;
}

std::int64_t receptive_field(std::int64_t blocks_per_stack, std::int64_t stacks,
                             std::int64_t kernel) {
  check(blocks_per_stack >= 1 && blocks_per_stack <= 62, "receptive_field: D out of range");
  check(stacks >= 1, "receptive_field: S must be positive");
  check(kernel >= 1, "receptive_field: kernel must be positive");
  const std::int64_t per_stack = (std::int64_t{1} << blocks_per_stack) - 1;
  return 1 + stacks * (kernel - 1) * per_stack;
}

namespace {

// Per-block scalar counts; the summary output documents the derivation.
std::int64_t block_1d_count(std::int64_t feats, std::int64_t hidden) {
  // expand (NH+H) + 2 prelu + 2 norms (2H each) + dconv (3H+H) + skip/res (HN+N each)
  return 3 * feats * hidden + 2 * feats + 9 * hidden + 2;
}

std::int64_t block_ic_count(std::int64_t chans, std::int64_t hidden) {
  // expand (CH+H) + 2 prelu + 2 norms (2H each) + dconv (9H+H) + skip/res (HC+C each)
  return 3 * chans * hidden + 2 * chans + 15 * hidden + 2;
}

std::int64_t pointwise_count(std::int64_t in, std::int64_t out) { return in * out + out; }

std::int64_t head_a_count(std::int64_t feats, std::int64_t enc) {
  return 1 + pointwise_count(feats, enc);
}

std::int64_t head_b_count(std::int64_t feats, std::int64_t chans, std::int64_t enc) {
  return 1 + pointwise_count(chans, 1) + pointwise_count(feats, enc);
}

const char* staged_formula =
    "2KF + (F N1 + N1) + (M C1 + C1) + sum_s D*(3 Cs Hs + 2 Cs + 15 Hs + 2) with Hs = 4 Cs"
    " + sum_{s<S} [(Ns N' + N') + (Cs C' + C')]"
    " + sum_s ([Ns Nt + Nt if Ns != Nt] + [Cs Ct + Ct if Cs != Ct])"
    " + 1 + (Ct + 1) + (Nt F + F)";

std::string closed_form_text(const ModelConfig& config) {
  switch (config.variant) {
    case Variant::SC:
    case Variant::MC:
      return "2KF + (FN + N) + SD*(3NH + 2N + 9H + 2) + 1 + (NF + F)";
    case Variant::TwoD:
      return "2KF + (FMN + N) + SD*(3NH + 2N + 9H + 2) + 1 + (NF + F)";
    case Variant::ThreeD:
      return "2KF + (FN + N) + (MC + C) + C*SD*(3NH + 2N + 9H + 2) + 1 + (C + 1) + (NF + F)";
    case Variant::IC:
      return "2KF + (FN + N) + (MC + C) + SD*(3CH + 2C + 15H + 2) + 1 + (C + 1) + (NF + F)";
    case Variant::ICDownsized:
    case Variant::ICUpsized:
      return staged_formula;
  }
  return "";
}

std::string index2(std::int64_t i) {
  std::string s = std::to_string(i);
  return s.size() < 2 ? "0" + s : s;
}

std::string dims2(std::int64_t a) { return "(L, " + std::to_string(a) + ")"; }
std::string dims3(std::int64_t a, std::int64_t b) {
  return "(L, " + std::to_string(a) + ", " + std::to_string(b) + ")";
}

}  // namespace

std::int64_t closed_form_count(const ModelConfig& config) {
  config.validate();
  const std::int64_t enc = config.encoder_dim;
  const std::int64_t feats = config.bottleneck_dim;
  const std::int64_t chans = config.channel_dim;
  const std::int64_t hidden = config.hidden_dim;
  const std::int64_t blocks = config.stacks * config.blocks_per_stack;
  const std::int64_t codec = 2 * config.window * enc;

  switch (config.variant) {
    case Variant::SC:
    case Variant::MC:
      return codec + pointwise_count(enc, feats) + blocks * block_1d_count(feats, hidden) +
             head_a_count(feats, enc);
    case Variant::TwoD:
      return codec + pointwise_count(enc * config.mics, feats) +
             blocks * block_1d_count(feats, hidden) + head_a_count(feats, enc);
    case Variant::ThreeD:
      return codec + pointwise_count(enc, feats) + pointwise_count(config.mics, chans) +
             chans * blocks * block_1d_count(feats, hidden) + head_b_count(feats, chans, enc);
    case Variant::IC:
      return codec + pointwise_count(enc, feats) + pointwise_count(config.mics, chans) +
             blocks * block_ic_count(chans, hidden) + head_b_count(feats, chans, enc);
    case Variant::ICDownsized:
    case Variant::ICUpsized: {
      const auto schedule = config.variant == Variant::ICDownsized
                                ? downsized_schedule(feats, chans)
                                : upsized_schedule(feats, chans);
      const StageDims target = schedule_target(schedule);
      std::int64_t total = codec + pointwise_count(enc, schedule[0].features) +
                           pointwise_count(config.mics, schedule[0].channels);
      for (const auto& stage : schedule)
        total += config.blocks_per_stack * block_ic_count(stage.channels, 4 * stage.channels);
      for (std::size_t s = 0; s + 1 < schedule.size(); ++s)
        total += pointwise_count(schedule[s].features, schedule[s + 1].features) +
                 pointwise_count(schedule[s].channels, schedule[s + 1].channels);
      for (const auto& stage : schedule) {
        if (stage.features != target.features)
          total += pointwise_count(stage.features, target.features);
        if (stage.channels != target.channels)
          total += pointwise_count(stage.channels, target.channels);
      }
      return total + head_b_count(target.features, target.channels, enc);
    }
  }
  throw std::logic_error("unreachable");
}

ModelSummary summarize(const ModelConfig& config) {
  config.validate();
  ModelSummary summary;
  summary.variant = variant_name(config.variant);
  summary.sample_rate = 16000;

  const std::int64_t enc = config.encoder_dim;
  const std::int64_t feats = config.bottleneck_dim;
  const std::int64_t chans = config.channel_dim;
  const std::int64_t hidden = config.hidden_dim;
  const std::string mics = std::to_string(config.mics);
  const std::string window = std::to_string(config.window);

  auto layer = [&](const std::string& name, const std::string& in, const std::string& out,
                   std::int64_t count) {
    summary.layers.push_back({name, in, out, count});
  };

  layer("encoder", "(L, " + window + ", " + mics + ")",
        "(L, " + std::to_string(enc) + ", " + mics + ")", config.window * enc);

  auto block_rows = [&](const std::string& prefix, const std::string& shape,
                        std::int64_t per_block) {
    for (std::int64_t s = 0; s < config.stacks; ++s)
      for (std::int64_t d = 0; d < config.blocks_per_stack; ++d) {
        layer(prefix + "stack" + index2(s) + ".block" + index2(d), shape, shape, per_block);
        ++summary.block_count;
      }
  };

  switch (config.variant) {
    case Variant::SC:
    case Variant::MC:
      layer("bottleneck.feature", dims2(enc), dims2(feats), pointwise_count(enc, feats));
      block_rows("tcn.", dims2(feats), block_1d_count(feats, hidden));
      layer("mask", dims2(feats), dims2(enc), head_a_count(feats, enc));
      break;
    case Variant::TwoD:
      layer("bottleneck.feature", dims2(enc * config.mics), dims2(feats),
            pointwise_count(enc * config.mics, feats));
      block_rows("tcn.", dims2(feats), block_1d_count(feats, hidden));
      layer("mask", dims2(feats), dims2(enc), head_a_count(feats, enc));
      break;
    case Variant::ThreeD:
      layer("bottleneck.feature", "(L, " + std::to_string(enc) + ", " + mics + ")",
            "(L, " + std::to_string(feats) + ", " + mics + ")", pointwise_count(enc, feats));
      layer("bottleneck.channel", "(L, " + std::to_string(feats) + ", " + mics + ")",
            dims3(feats, chans), pointwise_count(config.mics, chans));
      for (std::int64_t c = 0; c < chans; ++c)
        block_rows("tcn.ch" + index2(c) + ".", dims2(feats), block_1d_count(feats, hidden));
      layer("mask", dims3(feats, chans), dims2(enc), head_b_count(feats, chans, enc));
      break;
    case Variant::IC:
      layer("bottleneck.feature", "(L, " + std::to_string(enc) + ", " + mics + ")",
            "(L, " + std::to_string(feats) + ", " + mics + ")", pointwise_count(enc, feats));
      layer("bottleneck.channel", "(L, " + std::to_string(feats) + ", " + mics + ")",
            dims3(feats, chans), pointwise_count(config.mics, chans));
      block_rows("tcn.", dims3(feats, chans), block_ic_count(chans, hidden));
      layer("mask", dims3(feats, chans), dims2(enc), head_b_count(feats, chans, enc));
      break;
    case Variant::ICDownsized:
    case Variant::ICUpsized: {
      const auto schedule = config.variant == Variant::ICDownsized
                                ? downsized_schedule(feats, chans)
                                : upsized_schedule(feats, chans);
      const StageDims target = schedule_target(schedule);
      layer("bottleneck.feature", "(L, " + std::to_string(enc) + ", " + mics + ")",
            "(L, " + std::to_string(schedule[0].features) + ", " + mics + ")",
            pointwise_count(enc, schedule[0].features));
      layer("bottleneck.channel",
            "(L, " + std::to_string(schedule[0].features) + ", " + mics + ")",
            dims3(schedule[0].features, schedule[0].channels),
            pointwise_count(config.mics, schedule[0].channels));
      for (std::size_t s = 0; s < schedule.size(); ++s) {
        const std::string shape = dims3(schedule[s].features, schedule[s].channels);
        const std::int64_t per_block =
            block_ic_count(schedule[s].channels, 4 * schedule[s].channels);
        for (std::int64_t d = 0; d < config.blocks_per_stack; ++d) {
          layer("tcn.stack" + index2(static_cast<std::int64_t>(s)) + ".block" + index2(d),
                shape, shape, per_block);
          ++summary.block_count;
        }
        std::int64_t up = 0;
        if (schedule[s].features != target.features)
          up += pointwise_count(schedule[s].features, target.features);
        if (schedule[s].channels != target.channels)
          up += pointwise_count(schedule[s].channels, target.channels);
        if (up > 0)
          layer("tcn.stack" + index2(static_cast<std::int64_t>(s)) + ".skip_up", shape,
                dims3(target.features, target.channels), up);
      }
      for (std::size_t s = 0; s + 1 < schedule.size(); ++s)
        layer("tcn.transition" + index2(static_cast<std::int64_t>(s)),
              dims3(schedule[s].features, schedule[s].channels),
              dims3(schedule[s + 1].features, schedule[s + 1].channels),
              pointwise_count(schedule[s].features, schedule[s + 1].features) +
                  pointwise_count(schedule[s].channels, schedule[s + 1].channels));
      layer("mask", dims3(target.features, target.channels), dims2(enc),
            head_b_count(target.features, target.channels, enc));
      break;
    }
  }

  layer("decoder", dims2(enc), dims2(config.window), enc * config.window);

  std::int64_t total = 0;
  for (const auto& l : summary.layers) total += l.param_count;
  summary.total_params = total;
  summary.closed_form = closed_form_text(config);
  summary.closed_form_total = closed_form_count(config);
  summary.receptive_field_frames = receptive_field(config.blocks_per_stack, config.stacks, 3);
  summary.receptive_field_seconds =
      static_cast<double>(summary.receptive_field_frames * config.frame_spec().hop) /
      static_cast<double>(summary.sample_rate);
  return summary;
}

ModelSummary summarize(const Model& model) {
  ModelSummary summary = summarize(model.config);
  // Totals from the instantiated parameter set; equal to the closed form.
  summary.total_params = count_parameters(model);
  return summary;
}

std::string format_millions(std::int64_t count) {
  const double millions = static_cast<double>(count) / 1e6;
  // Three significant digits, matching the published tables.
  int decimals = 2;
  if (millions < 1.0) decimals = 3;
  if (millions >= 10.0) decimals = 1;
  if (millions >= 100.0) decimals = 0;
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(decimals);
  out << millions << " M";
  return out.str();
}

std::string summary_text(const ModelSummary& summary) {
  std::ostringstream out;
  out << "variant: " << summary.variant << "\n";
  std::size_t name_w = 4;
  for (const auto& l : summary.layers) name_w = std::max(name_w, l.name.size());
  for (const auto& l : summary.layers) {
    out << "  " << l.name;
    out << std::string(name_w - l.name.size() + 2, ' ');
    out << l.input_shape << " -> " << l.output_shape << "  " << l.param_count << "\n";
  }
  out << "blocks: " << summary.block_count << "\n";
  out << "total parameters: " << summary.total_params << " ("
      << format_millions(summary.total_params) << ")\n";
  out << "closed form: " << summary.closed_form << "\n";
  out << "closed form total: " << summary.closed_form_total << "\n";
  out << "receptive field: " << summary.receptive_field_frames << " frames ("
      << summary.receptive_field_seconds << " s at " << summary.sample_rate << " Hz)\n";
  return out.str();
}

std::string summary_json(const ModelSummary& summary) {
  nlohmann::json j;
  j["variant"] = summary.variant;
  j["total_params"] = summary.total_params;
  j["total_params_millions"] = format_millions(summary.total_params);
  j["closed_form"] = summary.closed_form;
  j["closed_form_total"] = summary.closed_form_total;
  j["blocks"] = summary.block_count;
  j["receptive_field_frames"] = summary.receptive_field_frames;
  j["receptive_field_seconds"] = summary.receptive_field_seconds;
  j["sample_rate"] = summary.sample_rate;
  j["layers"] = nlohmann::json::array();
  for (const auto& l : summary.layers)
    j["layers"].push_back({{"name", l.name},
                           {"in", l.input_shape},
                           {"out", l.output_shape},
                           {"params", l.param_count}});
  return j.dump(2) + "\n";
}

}  // namespace ictn
