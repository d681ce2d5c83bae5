// SPDX-License-Identifier: Apache-2.0
#include "app/config.hpp"

#include "common/error.hpp"
#include "common/fs.hpp"

namespace depscreen {

FusionHyperparams desk_hyperparams() {
  FusionHyperparams h;
  h.bilstm1_units = 8;
  h.bilstm2_units = 8;
  h.bilstm3_units = 8;
  h.fusion_bilstm_units = 8;
  h.dense_top = 32;
  h.n_dense = 4;
  return h;
}

nlohmann::json AppConfig::to_json() const {
  const auto& m = features.mfcc;
  return {
      {"seed", seed},
      {"features",
       {{"augmentation", features.augmentation},
        {"semitones", features.augment.semitones},
        {"noise_amplitude", features.augment.noise_amplitude},
        {"mfcc",
         {{"n_mfcc", m.n_mfcc},
          {"window_ms", m.window_ms},
          {"overlap_ms", m.overlap_ms},
          {"n_mels", m.n_mels},
          {"fmin_hz", m.fmin_hz},
          {"fmax_hz", m.fmax_hz},
          {"framing", m.framing == FramingPolicy::kPaddedCentered ? "padded_centered" : "truncated_uncentered"}}}}},
      {"hyperparams", hyperparams.to_json()},
      {"max_epochs", max_epochs},
      {"patience", patience},
      {"eval_workers", eval_workers},
      {"hyperband",
       {{"max_resource", hyperband.max_resource},
        {"eta", hyperband.eta},
        {"iterations", hyperband.iterations},
        {"patience", hyperband.patience},
        {"workers", hyperband.workers}}},
      {"search_space", search_space.to_json()},
      {"llm",
       {{"backend", llm.backend},
        {"base_url", llm.base_url},
        {"model", llm.model},
        {"requests_per_minute", llm.requests_per_minute},
        {"timeout_seconds", llm.timeout_seconds},
        {"max_retries", llm.max_retries},
        {"backoff_initial_seconds", llm.backoff_initial_seconds},
        {"cache_dir", llm.cache_dir}}},
      {"service",
       {{"host", service.host},
        {"port", service.port},
        {"workers", service.workers},
        {"queue_capacity", service.queue_capacity},
        {"report_dir", service.report_dir},
        {"model_path", service.model_path}}},
      {"acronyms_path", acronyms_path},
      {"manifest_path", manifest_path},
      {"exemplar_dir", exemplar_dir},
  };
}

AppConfig AppConfig::from_json(const nlohmann::json& j) {
  AppConfig c;
  if (!j.is_object()) fail(ErrorCode::kValidation, "configuration must be a JSON object");
  try {
    c.seed = j.value("seed", c.seed);
    if (j.contains("features")) {
      const auto& f = j.at("features");
      c.features.augmentation = f.value("augmentation", c.features.augmentation);
      c.features.augment.semitones = f.value("semitones", c.features.augment.semitones);
      c.features.augment.noise_amplitude = f.value("noise_amplitude", c.features.augment.noise_amplitude);
      if (f.contains("mfcc")) {
        const auto& m = f.at("mfcc");
        auto& mc = c.features.mfcc;
        mc.n_mfcc = m.value("n_mfcc", mc.n_mfcc);
        mc.window_ms = m.value("window_ms", mc.window_ms);
        mc.overlap_ms = m.value("overlap_ms", mc.overlap_ms);
        mc.n_mels = m.value("n_mels", mc.n_mels);
        mc.fmin_hz = m.value("fmin_hz", mc.fmin_hz);
        mc.fmax_hz = m.value("fmax_hz", mc.fmax_hz);
        const std::string framing = m.value("framing", std::string("truncated_uncentered"));
        if (framing == "padded_centered") {
          mc.framing = FramingPolicy::kPaddedCentered;
        } else if (framing == "truncated_uncentered") {
          mc.framing = FramingPolicy::kTruncatedUncentered;
        } else {
          fail(ErrorCode::kValidation, "unknown MFCC framing '" + framing + "'");
        }
        mc.validate();
      }
    }
    if (j.contains("hyperparams")) {
      const auto& h = j.at("hyperparams");
      if (h.is_string()) {
        const std::string name = h.get<std::string>();
        if (name == "desk") {
          c.hyperparams = desk_hyperparams();
        } else if (name == "default") {
          c.hyperparams = FusionHyperparams{};
        } else {
          fail(ErrorCode::kValidation, "unknown hyperparameter preset '" + name + "'");
        }
      } else {
        c.hyperparams = FusionHyperparams::from_json(h);
      }
    }
    c.max_epochs = j.value("max_epochs", c.max_epochs);
    c.patience = j.value("patience", c.patience);
    c.eval_workers = j.value("eval_workers", c.eval_workers);
    if (j.contains("hyperband")) {
      const auto& h = j.at("hyperband");
      c.hyperband.max_resource = h.value("max_resource", c.hyperband.max_resource);
      c.hyperband.eta = h.value("eta", c.hyperband.eta);
      c.hyperband.iterations = h.value("iterations", c.hyperband.iterations);
      c.hyperband.patience = h.value("patience", c.hyperband.patience);
      c.hyperband.workers = h.value("workers", c.hyperband.workers);
      c.hyperband.validate();
    }
    if (j.contains("search_space")) c.search_space = SearchSpace::from_json(j.at("search_space"));
    if (j.contains("llm")) {
      const auto& l = j.at("llm");
      c.llm.backend = l.value("backend", c.llm.backend);
      c.llm.base_url = l.value("base_url", c.llm.base_url);
      c.llm.model = l.value("model", c.llm.model);
      c.llm.requests_per_minute = l.value("requests_per_minute", c.llm.requests_per_minute);
      c.llm.timeout_seconds = l.value("timeout_seconds", c.llm.timeout_seconds);
      c.llm.max_retries = l.value("max_retries", c.llm.max_retries);
      c.llm.backoff_initial_seconds = l.value("backoff_initial_seconds", c.llm.backoff_initial_seconds);
      c.llm.cache_dir = l.value("cache_dir", c.llm.cache_dir);
      if (c.llm.backend != "stub" && c.llm.backend != "remote") {
        fail(ErrorCode::kValidation, "llm.backend must be 'stub' or 'remote'");
      }
    }
    if (j.contains("service")) {
      const auto& s = j.at("service");
      c.service.host = s.value("host", c.service.host);
      c.service.port = s.value("port", c.service.port);
      c.service.workers = s.value("workers", c.service.workers);
      c.service.queue_capacity = s.value("queue_capacity", c.service.queue_capacity);
      c.service.report_dir = s.value("report_dir", c.service.report_dir);
      c.service.model_path = s.value("model_path", c.service.model_path);
      if (c.service.workers < 1 || c.service.queue_capacity < 1) {
        fail(ErrorCode::kValidation, "service workers and queue_capacity must be positive");
      }
    }
    c.acronyms_path = j.value("acronyms_path", c.acronyms_path);
    c.manifest_path = j.value("manifest_path", c.manifest_path);
    c.exemplar_dir = j.value("exemplar_dir", c.exemplar_dir);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kValidation, std::string("bad configuration value: ") + e.what());
  }
  if (c.max_epochs < 1 || c.patience < 1 || c.eval_workers < 1) {
    fail(ErrorCode::kValidation, "max_epochs, patience and eval_workers must be positive");
  }
  return c;
}

AppConfig AppConfig::load(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kValidation, path.string() + ": " + e.what());
  }
  return from_json(j);
}

}  // namespace depscreen
