// Command-line surface: summary | enhance | train | gradcheck | synth.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "ictn/analysis.hpp"
#include "ictn/checkpoint.hpp"
#include "ictn/config.hpp"
#include "ictn/gradcheck.hpp"
#include "ictn/train.hpp"
#include "ictn/wav.hpp"

namespace {

using namespace ictn;

struct ConfigArgs {
  std::string config_path;
  std::string preset_name;
};

void add_config_options(CLI::App* cmd, ConfigArgs& args) {
  auto* config = cmd->add_option("--config", args.config_path, "JSON config file");
  auto* preset_opt = cmd->add_option("--preset", args.preset_name, "named hyperparameter row");
  config->excludes(preset_opt);
}

ConfigFile resolve_config(const ConfigArgs& args) {
  if (!args.preset_name.empty()) {
    ConfigFile out;
    out.model = preset(args.preset_name);
    return out;
  }
  if (!args.config_path.empty()) return load_config(args.config_path);
  return ConfigFile{};  // documented defaults
}

void warn_sample_rate(const AudioBuffer& audio) {
  if (audio.sample_rate != 16000)
    std::cerr << "warning: sample rate " << audio.sample_rate << " Hz (models assume 16000)\n";
}

int run_summary(const ConfigArgs& args, bool as_json, bool diff_paper) {
  if (diff_paper) {
    std::printf("%-10s %12s %10s %10s %8s\n", "preset", "params", "ours", "paper", "dev");
    for (const auto& name : preset_names()) {
      const std::int64_t count = closed_form_count(preset(name));
      const double published = published_param_size(name);
      const double dev = 100.0 * (static_cast<double>(count) - published) / published;
      std::printf("%-10s %12lld %10s %10s %+7.2f%%\n", name.c_str(),
                  static_cast<long long>(count), format_millions(count).c_str(),
                  format_millions(static_cast<std::int64_t>(published)).c_str(), dev);
    }
    return 0;
  }
  const ConfigFile config = resolve_config(args);
  const ModelSummary summary = summarize(config.model);
  std::cout << (as_json ? summary_json(summary) : summary_text(summary));
  return 0;
}

int run_enhance(const ConfigArgs& args, const std::string& checkpoint,
                const std::string& in_path, const std::string& out_path) {
  const ConfigFile config = resolve_config(args);
  const AudioBuffer audio = read_wav(in_path);
  warn_sample_rate(audio);
  Model model = build_model(config.model);
  if (!checkpoint.empty()) restore_parameters(model.parameters, checkpoint);
  const AudioBuffer enhanced = enhance(model, audio);
  write_wav(out_path, enhanced, WavEncoding::Float32);
  std::cout << "wrote " << out_path << " (" << enhanced.frames() << " samples)\n";
  return 0;
}

std::vector<TrainPair> load_pairs(const std::filesystem::path& dir, std::int64_t mics) {
  std::vector<std::filesystem::path> noisy_files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.size() > 10 && name.ends_with("_noisy.wav")) noisy_files.push_back(entry.path());
  }
  std::sort(noisy_files.begin(), noisy_files.end());
  if (noisy_files.empty())
    throw std::runtime_error("no *_noisy.wav files in " + dir.string());

  std::vector<TrainPair> pairs;
  for (const auto& noisy_path : noisy_files) {
    std::string clean_name = noisy_path.filename().string();
    clean_name.replace(clean_name.size() - 10, 10, "_clean.wav");
    const std::filesystem::path clean_path = noisy_path.parent_path() / clean_name;
    TrainPair pair;
    pair.noisy = read_wav(noisy_path);
    pair.clean = read_wav(clean_path);
    if (pair.noisy.channels != mics)
      throw std::runtime_error(noisy_path.string() + " has " +
                               std::to_string(pair.noisy.channels) +
                               " channels, model expects " + std::to_string(mics));
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

int run_train(const ConfigArgs& args, const std::string& data_dir, bool use_synth,
              const std::string& out_path, const std::string& loss_csv_path,
              std::int64_t seed_override, std::int64_t steps_override,
              std::int64_t synth_pairs, double synth_duration) {
  ConfigFile config = resolve_config(args);
  if (seed_override >= 0) {
    config.model.seed = static_cast<std::uint64_t>(seed_override);
    config.train.seed = static_cast<std::uint64_t>(seed_override);
  }
  if (steps_override > 0) config.train.steps = steps_override;

  std::vector<TrainPair> data;
  if (use_synth) {
    data = synth_dataset(config.train.seed, synth_pairs, synth_duration, config.model.mics, 16000);
  } else {
    if (data_dir.empty()) throw std::runtime_error("train needs --data DIR or --synth");
    data = load_pairs(data_dir, config.model.mics);
    for (const auto& pair : data) warn_sample_rate(pair.noisy);
  }

  Model model = build_model(config.model);
  const auto history = train(model, data, config.train);
  save_checkpoint(out_path, model.parameters);
  const std::string csv_path = loss_csv_path.empty() ? out_path + ".loss.csv" : loss_csv_path;
  write_file_atomic(csv_path, history_csv(history));

  std::printf("trained %lld steps; final sdr %.3f dB\n",
              static_cast<long long>(history.size()), history.back().sdr_db);
  std::cout << "wrote " << out_path << " and " << csv_path << "\n";
  return 0;
}

int run_gradcheck(const std::string& only_op) {
  bool found = false;
  bool all_pass = true;
  for (const auto& check : gradcheck_suite()) {
    if (!only_op.empty() && check.name != only_op) continue;
    found = true;
    const double err = check.run();
    const bool pass = err < check.threshold;
    all_pass = all_pass && pass;
    std::printf("%-20s max_rel_err %.3e  threshold %.0e  %s\n", check.name.c_str(), err,
                check.threshold, pass ? "PASS" : "FAIL");
  }
  if (!found) {
    std::cerr << "error: no registered op named \"" << only_op << "\"\n";
    return 1;
  }
  return all_pass ? 0 : 1;
}

int run_synth(const std::string& out_dir, std::int64_t seed, std::int64_t count,
              double duration, std::int64_t channels, std::int64_t rate) {
  std::filesystem::create_directories(out_dir);
  const auto pairs = synth_dataset(static_cast<std::uint64_t>(seed), count, duration, channels, rate);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    char stem[32];
    std::snprintf(stem, sizeof(stem), "pair%03zu", i);
    write_wav(std::filesystem::path(out_dir) / (std::string(stem) + "_noisy.wav"),
              pairs[i].noisy, WavEncoding::Float32);
    write_wav(std::filesystem::path(out_dir) / (std::string(stem) + "_clean.wav"),
              pairs[i].clean, WavEncoding::Float32);
  }
  std::cout << "wrote " << pairs.size() << " pairs to " << out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"inter-channel Conv-TasNet: analysis, training and enhancement"};
  app.require_subcommand(1);

  ConfigArgs summary_args;
  bool summary_json_flag = false, diff_paper = false;
  auto* summary_cmd = app.add_subcommand("summary", "model structure and parameter counts");
  add_config_options(summary_cmd, summary_args);
  summary_cmd->add_flag("--json", summary_json_flag, "machine-readable output");
  summary_cmd->add_flag("--diff-paper", diff_paper, "deviation from the published sizes per preset");

  ConfigArgs enhance_args;
  std::string checkpoint_path, in_path, out_path;
  auto* enhance_cmd = app.add_subcommand("enhance", "enhance a multichannel WAV file");
  add_config_options(enhance_cmd, enhance_args);
  enhance_cmd->add_option("--checkpoint", checkpoint_path,
                          "trained parameters (omit for seeded random weights)");
  enhance_cmd->add_option("--in", in_path, "input WAV")->required();
  enhance_cmd->add_option("--out", out_path, "output WAV")->required();

  ConfigArgs train_args;
  std::string data_dir, train_out = "checkpoint.ictn", loss_csv;
  bool use_synth = false;
  std::int64_t seed_override = -1, steps_override = 0;
  std::int64_t synth_pairs = 4;
  double synth_duration = 0.125;
  auto* train_cmd = app.add_subcommand("train", "train a model, write checkpoint + loss CSV");
  add_config_options(train_cmd, train_args);
  train_cmd->add_option("--data", data_dir, "directory of *_noisy.wav / *_clean.wav pairs");
  train_cmd->add_flag("--synth", use_synth, "train on generated synthetic pairs");
  train_cmd->add_option("--out", train_out, "output checkpoint path");
  train_cmd->add_option("--loss-csv", loss_csv, "loss history path (default <out>.loss.csv)");
  train_cmd->add_option("--seed", seed_override, "override model and data seeds");
  train_cmd->add_option("--steps", steps_override, "override training steps");
  train_cmd->add_option("--pairs", synth_pairs, "synthetic pairs to generate");
  train_cmd->add_option("--duration", synth_duration, "synthetic pair length in seconds");

  std::string only_op;
  auto* gradcheck_cmd = app.add_subcommand("gradcheck", "finite-difference gradient checks");
  bool gradcheck_all = false;
  gradcheck_cmd->add_flag("--all", gradcheck_all, "run every registered op (default)");
  gradcheck_cmd->add_option("--op", only_op, "run one registered op");

  std::string synth_dir;
  std::int64_t synth_seed = 1, synth_count = 10, synth_channels = 6, synth_rate = 16000;
  double synth_len = 0.5;
  auto* synth_cmd = app.add_subcommand("synth", "write paired noisy/clean WAVs");
  synth_cmd->add_option("--out-dir", synth_dir, "output directory")->required();
  synth_cmd->add_option("--seed", synth_seed, "generator seed");
  synth_cmd->add_option("--count", synth_count, "number of pairs");
  synth_cmd->add_option("--duration", synth_len, "pair length in seconds");
  synth_cmd->add_option("--channels", synth_channels, "microphone channels");
  synth_cmd->add_option("--rate", synth_rate, "sample rate in Hz");

  CLI11_PARSE(app, argc, argv);

  try {
    if (summary_cmd->parsed()) return run_summary(summary_args, summary_json_flag, diff_paper);
    if (enhance_cmd->parsed())
      return run_enhance(enhance_args, checkpoint_path, in_path, out_path);
    if (train_cmd->parsed())
      return run_train(train_args, data_dir, use_synth, train_out, loss_csv, seed_override,
                       steps_override, synth_pairs, synth_duration);
    if (gradcheck_cmd->parsed()) return run_gradcheck(only_op);
    if (synth_cmd->parsed())
      return run_synth(synth_dir, synth_seed, synth_count, synth_len, synth_channels, synth_rate);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
