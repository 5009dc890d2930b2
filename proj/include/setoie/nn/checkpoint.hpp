#pragma once

// JSON checkpoint of a ReferenceTagger: model configuration, vocabulary and
// every parameter array with its shape. Loading rejects other format versions.

#include <cstddef>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "setoie/errors.hpp"
#include "setoie/nn/model.hpp"

namespace setoie::nn {

inline constexpr const char* kCheckpointFormat = "setoie-checkpoint";
inline constexpr int kCheckpointVersion = 1;

using json = nlohmann::json;

inline json to_json(const TaggerConfig& cfg) {
  return json{{"hidden", cfg.encoder.hidden},       {"layers", cfg.encoder.layers},
              {"feedforward", cfg.encoder.feedforward}, {"max_length", cfg.encoder.max_length},
              {"slots", cfg.slots},                  {"freeze_encoder", cfg.freeze_encoder},
              {"seed", cfg.seed}};
}

inline TaggerConfig tagger_config_from_json(const json& j) {
  TaggerConfig cfg;
  cfg.encoder.hidden = j.at("hidden").get<std::size_t>();
  cfg.encoder.layers = j.at("layers").get<std::size_t>();
  cfg.encoder.feedforward = j.at("feedforward").get<std::size_t>();
  cfg.encoder.max_length = j.at("max_length").get<std::size_t>();
  cfg.slots = j.at("slots").get<std::size_t>();
  cfg.freeze_encoder = j.at("freeze_encoder").get<bool>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  return cfg;
}

inline json checkpoint_json(const ReferenceTagger& model, const TaggerConfig& cfg, const json& metadata = json::object()) {
  json params = json::array();
  for (const auto& [name, var] : model.named_parameters())
    params.push_back({{"name", name}, {"shape", var->value.shape}, {"data", var->value.data}});
  return json{{"format", kCheckpointFormat},
              {"version", kCheckpointVersion},
              {"model", to_json(cfg)},
              {"vocabulary", model.encoder().vocabulary().tokens()},
              {"parameters", params},
              {"metadata", metadata}};
}

struct LoadedCheckpoint {
  ReferenceTagger model;
  TaggerConfig config;
  json metadata;
};

inline LoadedCheckpoint load_checkpoint_json(const json& j) {
  if (j.value("format", std::string{}) != kCheckpointFormat) throw FormatError("not a checkpoint file");
  const int version = j.value("version", -1);
  if (version != kCheckpointVersion)
    throw FormatError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                      std::to_string(kCheckpointVersion) + ")");
  const auto cfg = tagger_config_from_json(j.at("model"));
  auto model = make_reference_tagger(Vocabulary(j.at("vocabulary").get<std::vector<std::string>>()), cfg);
  const auto named = model.named_parameters();
  const auto& params = j.at("parameters");
  if (params.size() != named.size()) throw FormatError("checkpoint parameter count mismatch");
  for (std::size_t i = 0; i < named.size(); ++i) {
    const auto& p = params[i];
    if (p.at("name").get<std::string>() != named[i].first)
      throw FormatError("checkpoint parameter '" + p.at("name").get<std::string>() + "' out of order");
    if (p.at("shape").get<std::vector<std::size_t>>() != named[i].second->value.shape)
      throw FormatError("checkpoint parameter '" + named[i].first + "' has the wrong shape");
    auto data = p.at("data").get<std::vector<double>>();
    if (data.size() != named[i].second->value.size())
      throw FormatError("checkpoint parameter '" + named[i].first + "' has the wrong size");
    named[i].second->value.data = std::move(data);
  }
  return {std::move(model), cfg, j.value("metadata", json::object())};
}

inline void save_checkpoint(const std::string& path, const ReferenceTagger& model, const TaggerConfig& cfg,
                            const json& metadata = json::object()) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint '" + path + "'");
  out << checkpoint_json(model, cfg, metadata).dump() << '\n';
}

inline LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open checkpoint '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  return load_checkpoint_json(j);
}

}  // namespace setoie::nn
