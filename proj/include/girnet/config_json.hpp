#pragma once

// JSON model-config loading. Every key is optional and falls back to the
// ModelConfig default; unknown keys are rejected rather than ignored so a
// typo cannot silently train the wrong architecture.

#include <fstream>
#include <set>
#include <string>

#include <json.hpp>

#include "girnet/errors.hpp"
#include "girnet/model.hpp"

namespace girnet {

inline ModelConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw DataError("config: top level must be a JSON object");
  static const std::set<std::string> known = {
      "channels",        "n_res_extract",       "n_res_recon",
      "attention",       "scale",               "use_deformable",
      "use_global_residual", "gstir_use_global_info", "gstir_use_residual"};
  for (const auto& [key, value] : j.items())
    if (!known.count(key)) throw DataError("config: unknown key '" + key + "'");

  ModelConfig cfg;
  try {
    cfg.channels = j.value("channels", cfg.channels);
    cfg.n_res_extract = j.value("n_res_extract", cfg.n_res_extract);
    cfg.n_res_recon = j.value("n_res_recon", cfg.n_res_recon);
    cfg.scale = j.value("scale", cfg.scale);
    cfg.use_deformable = j.value("use_deformable", cfg.use_deformable);
    cfg.use_global_residual = j.value("use_global_residual", cfg.use_global_residual);
    cfg.gstir_use_global_info = j.value("gstir_use_global_info", cfg.gstir_use_global_info);
    cfg.gstir_use_residual = j.value("gstir_use_residual", cfg.gstir_use_residual);
    if (j.contains("attention"))
      cfg.attention_kind = parse_attention_kind(j.at("attention").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("config: ") + e.what());
  }
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("config: ") + e.what());
  }
  return cfg;
}

inline ModelConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("config: cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("config: '" + path + "' is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

inline nlohmann::json config_to_json(const ModelConfig& cfg) {
  return nlohmann::json{{"channels", cfg.channels},
                        {"n_res_extract", cfg.n_res_extract},
                        {"n_res_recon", cfg.n_res_recon},
                        {"attention", attention_kind_name(cfg.attention_kind)},
                        {"scale", cfg.scale},
                        {"use_deformable", cfg.use_deformable},
                        {"use_global_residual", cfg.use_global_residual},
                        {"gstir_use_global_info", cfg.gstir_use_global_info},
                        {"gstir_use_residual", cfg.gstir_use_residual}};
}

}  // namespace girnet
