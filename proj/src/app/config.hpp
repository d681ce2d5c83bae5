// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "features/features.hpp"
#include "fusion/hyperparams.hpp"
#include "tuning/hyperband.hpp"

namespace depscreen {

inline constexpr const char* kLlmApiKeyEnv = "DEPSCREEN_LLM_API_KEY";
inline constexpr const char* kWebhookSecretEnv = "DEPSCREEN_WEBHOOK_SECRET";

struct LlmSettings {
  std::string backend = "stub";  // "stub" or "remote"
  std::string base_url = "https://api.openai.com/v1";
  std::string model = "gpt-4";
  int requests_per_minute = 60;
  double timeout_seconds = 120.0;
  int max_retries = 3;
  double backoff_initial_seconds = 1.0;
  std::string cache_dir;  // empty: no cache
};

struct ServiceSettings {
  std::string host = "127.0.0.1";
  int port = 8080;
  int workers = 2;
  std::size_t queue_capacity = 100;
  std::string report_dir = "reports";
  std::string model_path = "model.ckpt";
};

// Whole-toolkit configuration, read from a JSON file. Every key is optional;
// absent keys keep the defaults below. Secrets come from the environment.
struct AppConfig {
  std::uint64_t seed = 1;
  FeatureConfig features;
  FusionHyperparams hyperparams;
  int max_epochs = 50;
  int patience = 3;
  int eval_workers = 1;
  HyperbandConfig hyperband;
  SearchSpace search_space;
  LlmSettings llm;
  ServiceSettings service;
  std::string acronyms_path;  // default: shipped table
  std::string manifest_path;  // default: <corpus>/error_manifest.json, then the shipped one
  std::string exemplar_dir;   // default: <corpus>/exemplars

  nlohmann::json to_json() const;
  static AppConfig from_json(const nlohmann::json& j);
  static AppConfig load(const std::filesystem::path& path);
};

// Hyperparameters sized for a single CPU core: the architecture is unchanged,
// the widths are scaled down.
FusionHyperparams desk_hyperparams();

}  // namespace depscreen
