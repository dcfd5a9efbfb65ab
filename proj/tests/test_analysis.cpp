#include <doctest.h>

#include "ictn/analysis.hpp"
#include "ictn/config.hpp"
#include "ictn/rng.hpp"

using namespace ictn;

namespace {

// Small-but-varied configs for the closed-form vs enumeration property.
ModelConfig random_config(Rng& rng, Variant variant) {
  ModelConfig config;
  config.variant = variant;
  config.blocks_per_stack = rng.uniform_int(1, 4);
  config.stacks = rng.uniform_int(1, 3);
  config.encoder_dim = rng.uniform_int(4, 32);
  config.bottleneck_dim = rng.uniform_int(2, 12);
  config.channel_dim = rng.uniform_int(1, 6);
  config.hidden_dim = rng.uniform_int(2, 16);
  config.window = 2 * rng.uniform_int(2, 16);
  config.mics = rng.uniform_int(1, 6);
  config.reference_channel = rng.uniform_int(1, config.mics);
  config.seed = rng.next_u64();
  if (variant == Variant::SC) {
    config.mics = 1;
    config.reference_channel = 1;
  }
  if (variant == Variant::ICDownsized || variant == Variant::ICUpsized) {
    config.stacks = 3;
    config.channel_dim = 4 * rng.uniform_int(1, 4);
    config.bottleneck_dim = rng.uniform_int(2, 12);
  }
  return config;
}

}  // namespace

TEST_CASE("receptive field values") {
  CHECK(receptive_field(1, 1, 3) == 3);
  CHECK(receptive_field(2, 1, 3) == 7);
  CHECK(receptive_field(8, 3, 3) == 1531);
  CHECK(receptive_field(3, 2, 3) == 29);
  CHECK(receptive_field(2, 2, 5) == 25);
}

TEST_CASE("closed form equals enumeration for 20 randomized configs per variant") {
  Rng rng(50);
  for (Variant variant : {Variant::SC, Variant::MC, Variant::TwoD, Variant::ThreeD, Variant::IC,
                          Variant::ICDownsized, Variant::ICUpsized}) {
    for (int trial = 0; trial < 20; ++trial) {
      ModelConfig config = random_config(rng, variant);
      CAPTURE(variant_name(variant));
      CAPTURE(trial);
      Model model = build_model(config);
      CHECK(closed_form_count(config) == count_parameters(model));
      ModelSummary summary = summarize(model);
      CHECK(summary.total_params == count_parameters(model));
      CHECK(summary.closed_form_total == summary.total_params);
      std::int64_t from_layers = 0;
      for (const auto& layer : summary.layers) from_layers += layer.param_count;
      CHECK(from_layers == summary.total_params);
    }
  }
}

TEST_CASE("counts are monotone nondecreasing in every hyperparameter") {
  ModelConfig base;
  base.variant = Variant::IC;
  base.blocks_per_stack = 3;
  base.stacks = 2;
  base.encoder_dim = 32;
  base.bottleneck_dim = 8;
  base.channel_dim = 4;
  base.hidden_dim = 16;
  base.window = 16;
  base.mics = 4;
  base.reference_channel = 1;
  const std::int64_t reference = closed_form_count(base);

  auto bumped = base;
  bumped.encoder_dim += 8;
  CHECK(closed_form_count(bumped) >= reference);
  bumped = base;
  bumped.bottleneck_dim += 4;
  CHECK(closed_form_count(bumped) >= reference);
  bumped = base;
  bumped.channel_dim += 2;
  CHECK(closed_form_count(bumped) >= reference);
  bumped = base;
  bumped.hidden_dim += 8;
  CHECK(closed_form_count(bumped) >= reference);
  bumped = base;
  bumped.blocks_per_stack += 1;
  CHECK(closed_form_count(bumped) >= reference);
  bumped = base;
  bumped.stacks += 1;
  CHECK(closed_form_count(bumped) >= reference);
}

TEST_CASE("published presets land within 5% of the paper totals") {
  for (const auto& name : preset_names()) {
    const std::int64_t count = closed_form_count(preset(name));
    const double published = published_param_size(name);
    const double deviation = std::abs(static_cast<double>(count) - published) / published;
    CAPTURE(name);
    CHECK(deviation <= 0.05);
  }
}

TEST_CASE("3-D TCN parameters factor as C independent stack sets") {
  ModelConfig config;
  config.variant = Variant::ThreeD;
  config.blocks_per_stack = 2;
  config.stacks = 2;
  config.encoder_dim = 16;
  config.bottleneck_dim = 6;
  config.channel_dim = 3;
  config.hidden_dim = 8;
  config.window = 16;
  config.mics = 2;
  config.reference_channel = 1;
  Model model = build_model(config);

  auto prefix_count = [&](const std::string& prefix) {
    std::int64_t total = 0;
    for (const auto& p : model.parameters)
      if (p.name.rfind(prefix, 0) == 0) total += p.tensor.size();
    return total;
  };
  const std::int64_t per_channel = prefix_count("tcn.ch00.");
  CHECK(per_channel == prefix_count("tcn.ch01."));
  CHECK(prefix_count("tcn.") == config.channel_dim * per_channel);
}

TEST_CASE("paper-style rounding") {
  CHECK(format_millions(1343282) == "1.34 M");
  CHECK(format_millions(79112753) == "79.1 M");
  CHECK(format_millions(358706) == "0.359 M");
  CHECK(format_millions(1009276) == "1.01 M");
}

TEST_CASE("summary text and json both carry the totals") {
  ModelConfig config = preset("modelS");
  ModelSummary summary = summarize(config);
  const std::string text = summary_text(summary);
  CHECK(text.find("total parameters: 425970") != std::string::npos);
  CHECK(text.find("receptive field: 1531 frames") != std::string::npos);
  const std::string json = summary_json(summary);
  CHECK(json.find("\"total_params\": 425970") != std::string::npos);
}

TEST_CASE("receptive field seconds arithmetic") {
  ModelSummary summary = summarize(preset("model10"));
  CHECK(summary.receptive_field_frames == 1531);
  CHECK(summary.receptive_field_seconds == doctest::Approx(1531.0 * 128.0 / 16000.0));
}
