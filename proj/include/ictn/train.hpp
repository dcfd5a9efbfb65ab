#pragma once

#include <cstdint>
#include <vector>

#include "ictn/model.hpp"

namespace ictn {

// SDR saturates here once the residual drops below 1e-12 of the signal.
constexpr double kSdrCapDb = 240.0;

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::int64_t steps = 100;
  std::int64_t batch = 1;
  std::uint64_t seed = 1;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

class AdamState {
 public:
  explicit AdamState(const std::vector<Parameter>& params);
  std::int64_t step() const { return step_; }

 private:
  std::vector<std::vector<double>> first_;
  std::vector<std::vector<double>> second_;
  std::int64_t step_ = 0;
  friend void adam_step(std::vector<Parameter>&, AdamState&, const TrainConfig&);
};

// Standard bias-corrected Adam update from the parameters' current
// gradients; parameters without a gradient buffer count as zero gradient.
void adam_step(std::vector<Parameter>& params, AdamState& state, const TrainConfig& config);

void zero_gradients(std::vector<Parameter>& params);

// 20 log10(|s| / |s - s_hat|) in dB; capped at kSdrCapDb.
double sdr(const std::vector<double>& reference, const std::vector<double>& estimate);

// Differentiable -SDR of a rank-1 estimate against a fixed reference. At
// the cap the loss is a constant (zero gradient).
Tensor sdr_loss(const std::vector<double>& reference, const Tensor& estimate);

struct TrainPair {
  AudioBuffer noisy;  // M channels
  AudioBuffer clean;  // mono reference (the zero-delay source)
  double snr_db = 0.0;
  std::int64_t base_delay = 0;
};

// Synthetic multichannel mixtures: 2-4 amplitude-modulated sinusoids as the
// clean source; channel j carries the source delayed by j*base_delay
// samples plus white noise scaled to the pair's SNR (channel 1 is the
// zero-delay reference copy). Deterministic per seed.
std::vector<TrainPair> synth_dataset(std::uint64_t seed, std::int64_t count, double duration_s,
                                     std::int64_t mics, std::int64_t sample_rate);

struct TrainRecord {
  std::int64_t step;
  double loss;
  double sdr_db;
};

// Per step: forward, SDR loss against the clean reference (batch mean),
// backward, Adam update, gradient reset. Deterministic under fixed seed
// and data order.
std::vector<TrainRecord> train(Model& model, const std::vector<TrainPair>& data,
                               const TrainConfig& config);

std::string history_csv(const std::vector<TrainRecord>& history);

}  // namespace ictn
