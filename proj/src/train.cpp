#include "ictn/train.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "ictn/rng.hpp"
#include "tensor_impl.hpp"

namespace ictn {

using detail::check;

void TrainConfig::validate() const {
  check(learning_rate > 0.0, "train config: learning_rate must be positive");
  check(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0,
        "train config: betas must lie in [0, 1)");
  check(epsilon > 0.0, "train config: epsilon must be positive");
  check(steps >= 1, "train config: steps must be positive");
  check(batch >= 1, "train config: batch must be positive");
}

AdamState::AdamState(const std::vector<Parameter>& params) {
  first_.reserve(params.size());
  second_.reserve(params.size());
  for (const auto& p : params) {
    first_.emplace_back(static_cast<std::size_t>(p.tensor.size()), 0.0);
    second_.emplace_back(static_cast<std::size_t>(p.tensor.size()), 0.0);
  }
}

void adam_step(std::vector<Parameter>& params, AdamState& state, const TrainConfig& config) {
  config.validate();
  check(state.first_.size() == params.size(),
        "adam_step: optimizer state holds " + std::to_string(state.first_.size()) +
            " parameters, model has " + std::to_string(params.size()));
  ++state.step_;
  const double step = static_cast<double>(state.step_);
  const double correct1 = 1.0 - std::pow(config.beta1, step);
  const double correct2 = 1.0 - std::pow(config.beta2, step);

  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& tensor = params[i].tensor;
    auto& m = state.first_[i];
    auto& v = state.second_[i];
    check(m.size() == static_cast<std::size_t>(tensor.size()),
          "adam_step: state shape mismatch for parameter " + params[i].name);
    const double* grad = tensor.has_grad() ? tensor.grad_data() : nullptr;
    double* value = tensor.data();
    for (std::size_t k = 0; k < m.size(); ++k) {
      const double g = grad ? grad[k] : 0.0;
      m[k] = config.beta1 * m[k] + (1.0 - config.beta1) * g;
      v[k] = config.beta2 * v[k] + (1.0 - config.beta2) * g * g;
      const double mhat = m[k] / correct1;
      const double vhat = v[k] / correct2;
      value[k] -= config.learning_rate * mhat / (std::sqrt(vhat) + config.epsilon);
    }
  }
}

void zero_gradients(std::vector<Parameter>& params) {
  for (auto& p : params) p.tensor.zero_grad();
}

// ---------------------------------------------------------------------------
// SDR

namespace {

double l2_norm_squared(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return acc;
}

}  // namespace

double sdr(const std::vector<double>& reference, const std::vector<double>& estimate) {
  check(reference.size() == estimate.size(),
        "sdr: lengths differ, " + std::to_string(reference.size()) + " vs " +
            std::to_string(estimate.size()));
  const double signal = std::sqrt(l2_norm_squared(reference));
  check(signal > 0.0, "sdr: ground truth is all zero");
  double err = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const double d = reference[i] - estimate[i];
    err += d * d;
  }
  const double residual = std::sqrt(err);
  if (residual < 1e-12 * signal) return kSdrCapDb;
  return 20.0 * std::log10(signal / residual);
}

Tensor sdr_loss(const std::vector<double>& reference, const Tensor& estimate) {
  check(estimate.rank() == 1, "sdr_loss: estimate must be rank 1, got " +
                                  shape_str(estimate.shape()));
  check(static_cast<std::int64_t>(reference.size()) == estimate.size(),
        "sdr_loss: lengths differ, " + std::to_string(reference.size()) + " vs " +
            std::to_string(estimate.size()));
  const double signal_power = l2_norm_squared(reference);
  check(signal_power > 0.0, "sdr_loss: ground truth is all zero");

  Tensor ref = Tensor::from_data({static_cast<std::int64_t>(reference.size())}, reference);
  Tensor error = sub(ref, estimate);
  Tensor error_power = sum(mul(error, error));
  if (error_power.value() < 1e-24 * signal_power) {
    // Past the cap the loss is flat; keep it out of the graph.
    return Tensor::scalar(-kSdrCapDb);
  }
  // -SDR = 10 log10(|e|^2) - 10 log10(|s|^2)
  const double factor = 10.0 / std::log(10.0);
  return add_scalar(scale(log(error_power), factor), -factor * std::log(signal_power));
}

// ---------------------------------------------------------------------------
// Synthetic multichannel mixtures

std::vector<TrainPair> synth_dataset(std::uint64_t seed, std::int64_t count, double duration_s,
                                     std::int64_t mics, std::int64_t sample_rate) {
  check(count >= 0, "synth_dataset: count must be nonnegative");
  check(duration_s > 0.0, "synth_dataset: duration must be positive");
  check(mics >= 1, "synth_dataset: need at least one channel");
  check(sample_rate >= 1000, "synth_dataset: sample rate too low");
  const auto total = static_cast<std::int64_t>(std::llround(duration_s * sample_rate));
  check(total >= 8, "synth_dataset: duration too short");

  Rng rng(seed);
  std::vector<TrainPair> pairs;
  pairs.reserve(static_cast<std::size_t>(count));

  for (std::int64_t p = 0; p < count; ++p) {
    const std::int64_t components = rng.uniform_int(2, 4);
    std::vector<double> clean(static_cast<std::size_t>(total), 0.0);
    for (std::int64_t k = 0; k < components; ++k) {
      const double freq = rng.uniform(100.0, std::min(3000.0, 0.4 * sample_rate));
      const double amp = rng.uniform(0.5, 1.0);
      const double phase = rng.uniform(0.0, 2.0 * M_PI);
      const double am_rate = rng.uniform(0.5, 8.0);
      const double am_depth = rng.uniform(0.2, 0.9);
      const double am_phase = rng.uniform(0.0, 2.0 * M_PI);
      for (std::int64_t t = 0; t < total; ++t) {
        const double time = static_cast<double>(t) / static_cast<double>(sample_rate);
        const double envelope =
            1.0 - am_depth * (0.5 + 0.5 * std::sin(2.0 * M_PI * am_rate * time + am_phase));
        clean[t] += amp * envelope * std::sin(2.0 * M_PI * freq * time + phase);
      }
    }
    double peak = 0.0;
    for (double v : clean) peak = std::max(peak, std::fabs(v));
    const double gain = 0.25 / std::max(peak, 1e-9);
    for (auto& v : clean) v *= gain;

    const std::int64_t base_delay = rng.uniform_int(0, 4);
    const double snr_db = rng.uniform(0.0, 10.0);
    const double snr_gain = std::pow(10.0, -snr_db / 20.0);

    TrainPair pair;
    pair.snr_db = snr_db;
    pair.base_delay = base_delay;
    pair.noisy = AudioBuffer::zeros(total, mics, sample_rate);
    pair.clean = AudioBuffer::zeros(total, 1, sample_rate);
    for (std::int64_t t = 0; t < total; ++t) pair.clean.at(t, 0) = clean[t];

    for (std::int64_t ch = 0; ch < mics; ++ch) {
      const std::int64_t delay = ch * base_delay;
      std::vector<double> delayed(static_cast<std::size_t>(total), 0.0);
      for (std::int64_t t = delay; t < total; ++t) delayed[t] = clean[t - delay];
      std::vector<double> noise(static_cast<std::size_t>(total));
      for (auto& v : noise) v = rng.normal();
      // Scale the drawn noise so the realized SNR equals the requested one.
      const double sigma = std::sqrt(l2_norm_squared(delayed) / l2_norm_squared(noise)) * snr_gain;
      for (std::int64_t t = 0; t < total; ++t)
        pair.noisy.at(t, ch) = delayed[t] + sigma * noise[t];
    }
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

// ---------------------------------------------------------------------------
// Training loop

std::vector<TrainRecord> train(Model& model, const std::vector<TrainPair>& data,
                               const TrainConfig& config) {
  config.validate();
  check(!data.empty(), "train: dataset is empty");
  for (const auto& pair : data) {
    check(pair.noisy.channels == model.config.mics,
          "train: dataset has " + std::to_string(pair.noisy.channels) +
              " channels, model expects " + std::to_string(model.config.mics));
    check(pair.clean.channels == 1, "train: clean reference must be mono");
    check(pair.clean.frames() == pair.noisy.frames(), "train: pair lengths differ");
  }

  AdamState state(model.parameters);
  zero_gradients(model.parameters);
  std::vector<TrainRecord> history;
  history.reserve(static_cast<std::size_t>(config.steps));

  const std::int64_t n = static_cast<std::int64_t>(data.size());
  std::int64_t cursor = 0;
  for (std::int64_t step = 1; step <= config.steps; ++step) {
    Tensor batch_loss;
    for (std::int64_t b = 0; b < config.batch; ++b) {
      const TrainPair& pair = data[static_cast<std::size_t>(cursor)];
      cursor = (cursor + 1) % n;
      Tensor estimate = forward(model, pair.noisy);
      Tensor loss = sdr_loss(pair.clean.channel_vector(0), estimate);
      batch_loss = batch_loss.defined() ? add(batch_loss, loss) : loss;
    }
    if (config.batch > 1) batch_loss = scale(batch_loss, 1.0 / static_cast<double>(config.batch));

    batch_loss.backward();
    adam_step(model.parameters, state, config);
    zero_gradients(model.parameters);
    history.push_back({step, batch_loss.value(), -batch_loss.value()});
  }
  return history;
}

std::string history_csv(const std::vector<TrainRecord>& history) {
  std::ostringstream out;
  out << "step,loss,sdr_db\n";
  char line[96];
  for (const auto& r : history) {
    std::snprintf(line, sizeof(line), "%lld,%.17g,%.17g\n", static_cast<long long>(r.step),
                  r.loss, r.sdr_db);
    out << line;
  }
  return out.str();
}

}  // namespace ictn
