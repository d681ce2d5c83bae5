// SPDX-License-Identifier: Apache-2.0
// Command-line front end. Talks to the toolkit only through the C API.
#include <CLI11.hpp>
#include <depscreen/depscreen.h>
#include <json.hpp>

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <thread>

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string preset;
  int epochs = 0;
  int workers = 0;
};

class CliError : public std::runtime_error {
 public:
  CliError(ds_status s, const std::string& what) : std::runtime_error(what), status(s) {}
  ds_status status;
};

void check(ds_status s, const char* what) {
  if (s != DS_OK) {
    throw CliError(s, std::string(what) + " failed: " + ds_last_error());
  }
}

struct OwnedString {
  char* p = nullptr;
  ~OwnedString() { ds_string_free(p); }
  std::string str() const { return p != nullptr ? std::string(p) : std::string(); }
};

using ConfigPtr = std::unique_ptr<ds_config, decltype(&ds_config_free)>;
using ModelPtr = std::unique_ptr<ds_model, decltype(&ds_model_free)>;
using ServicePtr = std::unique_ptr<ds_service, decltype(&ds_service_free)>;

void add_common(CLI::App* cmd, Common& c, const std::string& out_help, bool out_required = true) {
  cmd->add_option("--config", c.config, "JSON configuration file")->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "Seed (overrides the configuration)");
  auto* out = cmd->add_option("--out", c.out, out_help);
  if (out_required) out->required();
}

ConfigPtr load_config(const Common& c, nlohmann::json overrides = nlohmann::json::object()) {
  if (c.seed) overrides["seed"] = *c.seed;
  if (!c.preset.empty()) overrides["hyperparams"] = c.preset;
  if (c.epochs > 0) overrides["max_epochs"] = c.epochs;
  if (c.workers > 0) overrides["eval_workers"] = c.workers;
  ds_config* raw = nullptr;
  const std::string o = overrides.dump();
  check(ds_config_load(c.config.empty() ? nullptr : c.config.c_str(), o.c_str(), &raw), "loading configuration");
  return ConfigPtr(raw, &ds_config_free);
}

ModelPtr load_model(const std::string& path) {
  ds_model* raw = nullptr;
  check(ds_model_load(path.c_str(), &raw), "loading model");
  return ModelPtr(raw, &ds_model_free);
}

void emit(const std::string& text, const std::string& path = {}) {
  if (!path.empty()) {
    std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream f(p);
    f << text << '\n';
    if (!f) throw CliError(DS_ERR_IO, "cannot write " + path);
  }
  std::cout << text << '\n';
}

std::string summarize_eval(const std::string& json) {
  const auto j = nlohmann::json::parse(json);
  nlohmann::json out{{"protocol", j.value("protocol", "")}, {"matrix", j["matrix"]}, {"metrics", j["metrics"]}};
  if (j.contains("flipped_matrix")) out["flipped_matrix"] = j["flipped_matrix"];
  if (j.contains("flipped_metrics")) out["flipped_metrics"] = j["flipped_metrics"];
  if (j.contains("warnings")) out["warnings"] = j["warnings"];
  return out.dump(2);
}

std::atomic<bool> g_stop{false};
extern "C" void on_signal(int) { g_stop = true; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tri-modal depression screening toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Suppress progress lines");
  app.set_version_flag("--version", std::string(ds_version()));

  Common c;

  int synth_n = 20;
  double synth_fraction = 0.3;
  auto* synth = app.add_subcommand("synth", "Write a synthetic corpus with labeled exemplars");
  add_common(synth, c, "Corpus directory to create");
  synth->add_option("-n,--interviews", synth_n, "Number of interviews")->check(CLI::PositiveNumber);
  synth->add_option("--depressed-fraction", synth_fraction, "Fraction of depressed interviews")
      ->check(CLI::Range(0.0, 1.0));

  std::string corpus_dir;
  auto* prep = app.add_subcommand("prep", "Repair transcripts and normalize dialogue");
  add_common(prep, c, "Prepared corpus directory");
  prep->add_option("--corpus", corpus_dir, "Raw corpus directory")->required()->check(CLI::ExistingDirectory);

  std::string prepared_dir;
  auto* features = app.add_subcommand("features", "Extract audio and facial features");
  add_common(features, c, "Feature store directory");
  features->add_option("--prepared", prepared_dir, "Prepared corpus directory")
      ->required()
      ->check(CLI::ExistingDirectory);

  auto* classify = app.add_subcommand("llm-classify", "Few-shot text classification of every interview");
  add_common(classify, c, "Verdict CSV to write");
  classify->add_option("--prepared", prepared_dir, "Prepared corpus directory")
      ->required()
      ->check(CLI::ExistingDirectory);

  std::string features_dir, verdicts_csv, split_dir;
  auto add_data = [&](CLI::App* cmd) {
    cmd->add_option("--features", features_dir, "Feature store directory")->required()->check(CLI::ExistingDirectory);
    cmd->add_option("--verdicts", verdicts_csv, "Verdict CSV")->required()->check(CLI::ExistingFile);
    cmd->add_option("--preset", c.preset, "Hyperparameter preset (desk or default)")
        ->check(CLI::IsMember({"desk", "default"}));
  };

  auto* train = app.add_subcommand("train", "Train one fusion model on the whole corpus");
  add_common(train, c, "Checkpoint file");
  add_data(train);
  train->add_option("--epochs", c.epochs, "Epochs (default: configured max_epochs)")->check(CLI::PositiveNumber);

  auto* tune = app.add_subcommand("tune", "Hyperband search on a train/validation split");
  add_common(tune, c, "Output directory");
  add_data(tune);
  tune->add_option("--split", split_dir, "Directory with the split CSVs")->required()->check(CLI::ExistingDirectory);

  auto* losocv = app.add_subcommand("losocv", "Leave-one-subject-out evaluation");
  add_common(losocv, c, "Output directory");
  add_data(losocv);
  losocv->add_option("--epochs", c.epochs, "Epochs per fold")->check(CLI::PositiveNumber);
  losocv->add_option("--workers", c.workers, "Folds trained concurrently")->check(CLI::PositiveNumber);

  auto* eval = app.add_subcommand("eval", "Train/validation/test split evaluation");
  add_common(eval, c, "Output directory");
  add_data(eval);
  eval->add_option("--split", split_dir, "Directory with the split CSVs")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--epochs", c.epochs, "Maximum epochs")->check(CLI::PositiveNumber);

  long tp = 0, fp = 0, fn = 0, tn = 0;
  std::string compare;
  auto* metrics = app.add_subcommand("metrics", "Metrics of a confusion matrix");
  add_common(metrics, c, "JSON file to write", false);
  metrics->add_option("--tp", tp)->required()->check(CLI::NonNegativeNumber);
  metrics->add_option("--fp", fp)->required()->check(CLI::NonNegativeNumber);
  metrics->add_option("--fn", fn)->required()->check(CLI::NonNegativeNumber);
  metrics->add_option("--tn", tn)->required()->check(CLI::NonNegativeNumber);
  metrics->add_option("--compare", compare, "Published row to check against (losocv or avec)")
      ->check(CLI::IsMember({"losocv", "avec"}));

  std::string model_path, source;
  int interview_id = 0;
  int repeat = 1;
  auto* bench = app.add_subcommand("bench", "Time the single-recording pipeline");
  add_common(bench, c, "JSON file to write", false);
  bench->add_option("--model", model_path, "Checkpoint")->required()->check(CLI::ExistingFile);
  bench->add_option("--source", source, "Corpus root or interview directory")->required();
  bench->add_option("--interview", interview_id, "Interview id")->required();
  bench->add_option("--repeat", repeat, "Runs to time")->check(CLI::PositiveNumber);

  std::string host, exemplars;
  int port = -1;
  auto* serve = app.add_subcommand("serve", "Run the webhook inference service");
  add_common(serve, c, "Report directory", false);
  serve->add_option("--model", model_path, "Checkpoint")->required()->check(CLI::ExistingFile);
  serve->add_option("--host", host, "Listen address");
  serve->add_option("--port", port, "Listen port (0 picks one)");
  serve->add_option("--exemplars", exemplars, "Few-shot exemplar directory")->check(CLI::ExistingDirectory);

  std::string url = "http://127.0.0.1:8080", recording;
  bool tamper = false;
  double wait_seconds = 0.0;
  auto* simulate = app.add_subcommand("simulate-webhook", "Post a signed recording-completed event");
  add_common(simulate, c, "JSON file to write", false);
  simulate->add_option("--url", url, "Service base URL");
  simulate->add_option("--interview", interview_id, "Interview id")->required();
  simulate->add_option("--recording", recording, "Recording location (local path)")->required();
  simulate->add_flag("--tamper", tamper, "Alter the body after signing");
  simulate->add_option("--wait", wait_seconds, "Seconds to wait for the job to finish (0: do not wait)");

  CLI11_PARSE(app, argc, argv);

  if (!quiet) {
    ds_set_log([](const char* line, void*) { std::fprintf(stderr, "%s\n", line); }, nullptr);
  }

  try {
    if (*synth) {
      const auto cfg = load_config(c);
      check(ds_synth(c.out.c_str(), synth_n, synth_fraction, ds_config_seed(cfg.get())), "synth");
    } else if (*prep) {
      check(ds_prep(load_config(c).get(), corpus_dir.c_str(), c.out.c_str()), "prep");
    } else if (*features) {
      check(ds_features(load_config(c).get(), prepared_dir.c_str(), c.out.c_str()), "features");
    } else if (*classify) {
      check(ds_llm_classify(load_config(c).get(), prepared_dir.c_str(), c.out.c_str()), "llm-classify");
    } else if (*train) {
      OwnedString s;
      check(ds_train(load_config(c).get(), features_dir.c_str(), verdicts_csv.c_str(), c.epochs, c.out.c_str(), &s.p),
            "train");
      emit(s.str());
    } else if (*tune) {
      OwnedString s;
      check(ds_tune(load_config(c).get(), features_dir.c_str(), verdicts_csv.c_str(), split_dir.c_str(),
                    c.out.c_str(), &s.p),
            "tune");
      emit(s.str());
    } else if (*losocv) {
      OwnedString s;
      check(ds_losocv(load_config(c).get(), features_dir.c_str(), verdicts_csv.c_str(), c.out.c_str(), &s.p),
            "losocv");
      emit(summarize_eval(s.str()));
    } else if (*eval) {
      OwnedString s;
      check(ds_eval_split(load_config(c).get(), features_dir.c_str(), verdicts_csv.c_str(), split_dir.c_str(),
                          c.out.c_str(), &s.p),
            "eval");
      emit(summarize_eval(s.str()));
    } else if (*metrics) {
      OwnedString s;
      const std::string reported = compare.empty() ? std::string() : nlohmann::json(compare).dump();
      check(ds_metrics(tp, fp, fn, tn, reported.empty() ? nullptr : reported.c_str(), &s.p), "metrics");
      emit(s.str(), c.out);
    } else if (*bench) {
      const auto cfg = load_config(c);
      const auto model = load_model(model_path);
      nlohmann::json runs = nlohmann::json::array();
      double best = 0.0;
      for (int i = 0; i < repeat; ++i) {
        OwnedString s;
        check(ds_process_recording(cfg.get(), model.get(), source.c_str(), interview_id, &s.p), "bench");
        const auto r = nlohmann::json::parse(s.str());
        runs.push_back(r["timings"]);
        const double total = r["timings"]["total"].get<double>();
        best = i == 0 ? total : std::min(best, total);
      }
      const nlohmann::json out{{"interview_id", interview_id},
                               {"runs", runs},
                               {"wall_seconds", best},
                               {"reference_seconds", 2.67},
                               {"note", "reference: published single-interview processing time on a CUDA GPU"}};
      emit(out.dump(2), c.out);
    } else if (*serve) {
      nlohmann::json overrides = nlohmann::json::object();
      if (!exemplars.empty()) overrides["exemplar_dir"] = exemplars;
      const auto cfg = load_config(c, overrides);
      const auto model = load_model(model_path);
      ds_service* raw = nullptr;
      check(ds_service_start(cfg.get(), model.get(), host.empty() ? nullptr : host.c_str(), port,
                             c.out.empty() ? nullptr : c.out.c_str(), &raw),
            "serve");
      ServicePtr svc(raw, &ds_service_free);
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cout << "port " << ds_service_port(svc.get()) << std::endl;
      while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(200));
      std::fprintf(stderr, "shutting down\n");
    } else if (*simulate) {
      const char* secret = std::getenv("DEPSCREEN_WEBHOOK_SECRET");
      if (secret == nullptr || *secret == '\0') throw CliError(DS_ERR_AUTH_FAILURE, "DEPSCREEN_WEBHOOK_SECRET is not set");
      int status = 0;
      OwnedString body;
      check(ds_simulate_webhook(url.c_str(), secret, interview_id, recording.c_str(), tamper ? 1 : 0, &status,
                                &body.p),
            "simulate-webhook");
      nlohmann::json out{{"status", status}, {"response", nlohmann::json::parse(body.str(), nullptr, false)}};
      if (status == 202 && wait_seconds > 0) {
        const std::string job_id = out["response"].value("job_id", "");
        const auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(wait_seconds);
        nlohmann::json job;
        while (std::chrono::steady_clock::now() < deadline) {
          int s = 0;
          OwnedString b;
          check(ds_http_get(url.c_str(), ("/jobs/" + job_id).c_str(), &s, &b.p), "polling job");
          job = nlohmann::json::parse(b.str(), nullptr, false);
          if (job.is_object() && (job.value("state", "") == "done" || job.value("state", "") == "failed")) break;
          std::this_thread::sleep_for(std::chrono::milliseconds(100));
        }
        out["job"] = job;
        if (job.is_object() && job.contains("report_id") && job["report_id"].is_string()) {
          int s = 0;
          OwnedString b;
          check(ds_http_get(url.c_str(), ("/reports/" + job["report_id"].get<std::string>()).c_str(), &s, &b.p),
                "fetching report");
          out["report"] = nlohmann::json::parse(b.str(), nullptr, false);
        }
      }
      emit(out.dump(2), c.out);
      if (status != 202) return 3;
    }
  } catch (const CliError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
