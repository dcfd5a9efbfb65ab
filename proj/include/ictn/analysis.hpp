#pragma once

#include <string>
#include <vector>

#include "ictn/model.hpp"

namespace ictn {

struct LayerRecord {
  std::string name;
  std::string input_shape;
  std::string output_shape;
  std::int64_t param_count = 0;
};

struct ModelSummary {
  std::string variant;
  std::vector<LayerRecord> layers;
  std::int64_t total_params = 0;
  std::int64_t block_count = 0;
  std::int64_t receptive_field_frames = 0;
  double receptive_field_seconds = 0.0;  // frames * hop / sample_rate
  std::int64_t sample_rate = 16000;
  std::string closed_form;        // documented per-variant formula
  std::int64_t closed_form_total = 0;
};

// Exact count of trainable scalars (weights, biases, PReLU slopes, norm
// affine parameters) by enumeration of the instantiated parameter set.
std::int64_t count_parameters(const Model& model);

// 1 + S * (kernel - 1) * (2^D - 1) frames.
std::int64_t receptive_field(std::int64_t blocks_per_stack, std::int64_t stacks,
                             std::int64_t kernel);

// Closed-form parameter count; equals count_parameters(build_model(config)).
std::int64_t closed_form_count(const ModelConfig& config);

// Analytic summary (no instantiation; counting the largest published rows
// stays well under a second). The Model overload swaps in the enumerated
// total from the instantiated parameter set.
ModelSummary summarize(const ModelConfig& config);
ModelSummary summarize(const Model& model);

// Paper-style rounding, e.g. "1.35 M" (three significant digits).
std::string format_millions(std::int64_t count);

std::string summary_text(const ModelSummary& summary);
std::string summary_json(const ModelSummary& summary);

}  // namespace ictn
