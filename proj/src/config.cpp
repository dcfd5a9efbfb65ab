#include "ictn/config.hpp"

#include <fstream>
#include <map>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "ictn/wav.hpp"

namespace ictn {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& message) {
  throw std::invalid_argument("config: " + message);
}

void reject_unknown(const json& section, const char* name,
                    std::initializer_list<const char*> known) {
  for (auto it = section.begin(); it != section.end(); ++it) {
    bool ok = false;
    for (const char* k : known)
      if (it.key() == k) {
        ok = true;
        break;
      }
    if (!ok) fail(std::string("unknown key \"") + it.key() + "\" in section " + name);
  }
}

std::int64_t get_int(const json& section, const char* key, std::int64_t fallback) {
  if (!section.contains(key)) return fallback;
  const auto& v = section.at(key);
  if (!v.is_number_integer()) fail(std::string("key \"") + key + "\" must be an integer");
  return v.get<std::int64_t>();
}

double get_double(const json& section, const char* key, double fallback) {
  if (!section.contains(key)) return fallback;
  const auto& v = section.at(key);
  if (!v.is_number()) fail(std::string("key \"") + key + "\" must be a number");
  return v.get<double>();
}

}  // namespace

ConfigFile parse_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  if (!doc.is_object()) fail("document must be a JSON object");
  reject_unknown(doc, "<top>", {"model", "train"});

  ConfigFile out;  // defaults

  if (doc.contains("model")) {
    const json& m = doc.at("model");
    if (!m.is_object()) fail("\"model\" must be an object");
    reject_unknown(m, "model",
                   {"variant", "D", "S", "F", "N", "C", "H", "K", "M", "reference_channel",
                    "seed"});
    if (m.contains("variant")) {
      if (!m.at("variant").is_string()) fail("\"variant\" must be a string");
      out.model.variant = variant_from_name(m.at("variant").get<std::string>());
    }
    out.model.blocks_per_stack = get_int(m, "D", out.model.blocks_per_stack);
    out.model.stacks = get_int(m, "S", out.model.stacks);
    out.model.encoder_dim = get_int(m, "F", out.model.encoder_dim);
    out.model.bottleneck_dim = get_int(m, "N", out.model.bottleneck_dim);
    out.model.channel_dim = get_int(m, "C", out.model.channel_dim);
    out.model.window = get_int(m, "K", out.model.window);
    out.model.mics = get_int(m, "M", out.model.mics);
    out.model.reference_channel = get_int(m, "reference_channel", out.model.reference_channel);
    out.model.seed = static_cast<std::uint64_t>(get_int(m, "seed", static_cast<std::int64_t>(out.model.seed)));
    if (m.contains("H"))
      out.model.hidden_dim = get_int(m, "H", 0);
    else
      out.model.hidden_dim = out.model.default_hidden();
  }

  if (doc.contains("train")) {
    const json& t = doc.at("train");
    if (!t.is_object()) fail("\"train\" must be an object");
    reject_unknown(t, "train", {"learning_rate", "steps", "batch", "seed"});
    out.train.learning_rate = get_double(t, "learning_rate", out.train.learning_rate);
    out.train.steps = get_int(t, "steps", out.train.steps);
    out.train.batch = get_int(t, "batch", out.train.batch);
    out.train.seed = static_cast<std::uint64_t>(get_int(t, "seed", static_cast<std::int64_t>(out.train.seed)));
  }

  out.model.validate();
  out.train.validate();
  return out;
}

std::string serialize_config(const ConfigFile& config) {
  json doc;
  doc["model"] = {{"variant", variant_name(config.model.variant)},
                  {"D", config.model.blocks_per_stack},
                  {"S", config.model.stacks},
                  {"F", config.model.encoder_dim},
                  {"N", config.model.bottleneck_dim},
                  {"C", config.model.channel_dim},
                  {"H", config.model.hidden_dim},
                  {"K", config.model.window},
                  {"M", config.model.mics},
                  {"reference_channel", config.model.reference_channel},
                  {"seed", config.model.seed}};
  doc["train"] = {{"learning_rate", config.train.learning_rate},
                  {"steps", config.train.steps},
                  {"batch", config.train.batch},
                  {"seed", config.train.seed}};
  return doc.dump(2) + "\n";
}

ConfigFile load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_config(text);
}

void save_config(const std::filesystem::path& path, const ConfigFile& config) {
  write_file_atomic(path, serialize_config(config));
}

namespace {

struct PresetRow {
  Variant variant;
  std::int64_t d, s, f, n, c, h;
  double published;  // published total, in parameters
};

const std::map<std::string, PresetRow>& preset_table() {
  static const std::map<std::string, PresetRow> table = {
      {"mc", {Variant::MC, 8, 3, 2048, 512, 1, 2048, 79.1e6}},
      {"2d", {Variant::TwoD, 8, 3, 2048, 512, 1, 2048, 84.4e6}},
      {"3d", {Variant::ThreeD, 8, 3, 2048, 64, 8, 32, 2.56e6}},
      {"ic", {Variant::IC, 8, 3, 2048, 64, 8, 32, 1.35e6}},
      {"ic-best", {Variant::IC, 8, 3, 512, 128, 64, 256, 1.67e6}},
      {"model1", {Variant::IC, 8, 2, 2048, 64, 8, 32, 1.34e6}},
      {"model2", {Variant::IC, 8, 3, 2048, 64, 8, 32, 1.35e6}},
      {"model3", {Variant::IC, 8, 4, 2048, 64, 8, 32, 1.36e6}},
      {"model4", {Variant::IC, 6, 3, 2048, 64, 8, 32, 1.34e6}},
      {"model5", {Variant::IC, 10, 3, 2048, 64, 8, 32, 1.35e6}},
      {"model6", {Variant::IC, 8, 3, 512, 64, 8, 32, 0.360e6}},
      {"model7", {Variant::IC, 8, 3, 512, 128, 8, 32, 0.425e6}},
      {"model8", {Variant::IC, 8, 3, 1024, 128, 8, 32, 0.820e6}},
      {"model9", {Variant::IC, 8, 3, 512, 128, 32, 128, 0.738e6}},
      {"model10", {Variant::IC, 8, 3, 512, 128, 64, 256, 1.67e6}},
      {"modelD", {Variant::ICDownsized, 8, 3, 512, 128, 64, 256, 1.01e6}},
      {"modelU", {Variant::ICUpsized, 8, 3, 512, 128, 64, 256, 0.954e6}},
      {"modelS", {Variant::IC, 8, 3, 512, 64, 16, 64, 0.427e6}},
  };
  return table;
}

}  // namespace

ModelConfig preset(const std::string& name) {
  auto it = preset_table().find(name);
  if (it == preset_table().end())
    throw std::invalid_argument("unknown preset \"" + name + "\"");
  const PresetRow& row = it->second;
  ModelConfig config;
  config.variant = row.variant;
  config.blocks_per_stack = row.d;
  config.stacks = row.s;
  config.encoder_dim = row.f;
  config.bottleneck_dim = row.n;
  config.channel_dim = row.c;
  config.hidden_dim = row.h;
  config.window = 256;
  config.mics = 6;
  config.reference_channel = 5;
  config.seed = 1;
  return config;
}

std::vector<std::string> preset_names() {
  std::vector<std::string> names;
  for (const auto& [name, row] : preset_table()) names.push_back(name);
  return names;
}

double published_param_size(const std::string& preset_name) {
  auto it = preset_table().find(preset_name);
  if (it == preset_table().end())
    throw std::invalid_argument("unknown preset \"" + preset_name + "\"");
  return it->second.published;
}

}  // namespace ictn
