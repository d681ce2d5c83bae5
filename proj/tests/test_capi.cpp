// SPDX-License-Identifier: Apache-2.0
// Exercises the shared library through its public header only.
#include <doctest.h>
#include <depscreen/depscreen.h>
#include <json.hpp>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <unistd.h>

namespace {

struct Owned {
  char* p = nullptr;
  ~Owned() { ds_string_free(p); }
  nlohmann::json json() const { return nlohmann::json::parse(p); }
};

std::filesystem::path scratch(const std::string& stem) {
  static std::atomic<int> n{0};
  auto p = std::filesystem::temp_directory_path() / (stem + "_" + std::to_string(::getpid()) + "_" + std::to_string(n++));
  std::filesystem::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("status codes and messages") {
  CHECK(std::string(ds_status_name(DS_OK)) == "Ok");
  CHECK(std::string(ds_status_name(DS_ERR_LEAKAGE_DETECTED)) == "LeakageDetected");
  CHECK(std::string(ds_status_name(DS_ERR_QUEUE_FULL)) == "QueueFull");
  CHECK(std::string(ds_status_name(DS_ERR_INVALID_ARGUMENT)) == "InvalidArgument");
  CHECK(DS_ERR_MISSING_FILE == 1);
  CHECK(ds_config_load(nullptr, nullptr, nullptr) == DS_ERR_INVALID_ARGUMENT);
  CHECK(std::string(ds_last_error()).find("out") != std::string::npos);
  ds_model* m = nullptr;
  CHECK(ds_model_load("/nonexistent.ckpt", &m) == DS_ERR_MISSING_FILE);
  CHECK(m == nullptr);
  ds_config_free(nullptr);
  ds_model_free(nullptr);
  ds_service_free(nullptr);
  ds_string_free(nullptr);
}

TEST_CASE("configuration with overrides") {
  ds_config* c = nullptr;
  REQUIRE(ds_config_load(nullptr, R"({"seed": 42, "hyperparams": "desk"})", &c) == DS_OK);
  CHECK(ds_config_seed(c) == 42);
  Owned j;
  REQUIRE(ds_config_to_json(c, &j.p) == DS_OK);
  CHECK(j.json()["hyperparams"]["bilstm1_units"] == 8);
  ds_config_free(c);
  CHECK(ds_config_load(nullptr, "{not json", &c) == DS_ERR_VALIDATION);
  CHECK(ds_config_load(nullptr, R"({"llm": {"backend": "oracle"}})", &c) == DS_ERR_VALIDATION);
}

TEST_CASE("metrics and published-row comparison") {
  Owned j;
  REQUIRE(ds_metrics(52, 13, 4, 120, "\"losocv\"", &j.p) == DS_OK);
  CHECK(j.json()["accuracy"].get<double>() == doctest::Approx(172.0 / 189.0));
  CHECK(j.json()["warnings"].empty());
  Owned k;
  REQUIRE(ds_metrics(16, 1, 3, 27, "\"avec\"", &k.p) == DS_OK);
  CHECK_FALSE(k.json()["warnings"].empty());
  Owned u;
  REQUIRE(ds_metrics(0, 0, 2, 2, nullptr, &u.p) == DS_OK);
  CHECK(u.json()["precision_d"].is_null());
  Owned bad;
  CHECK(ds_metrics(-1, 0, 0, 0, nullptr, &bad.p) == DS_ERR_INVALID_ARGUMENT);
}

TEST_CASE("corpus preparation and text classification through the library") {
  const auto root = scratch("capi");
  ds_config* c = nullptr;
  REQUIRE(ds_config_load(nullptr, nullptr, &c) == DS_OK);
  REQUIRE(ds_synth((root / "raw").c_str(), 3, 0.4, 2) == DS_OK);
  CHECK(ds_synth((root / "bad").c_str(), 3, 1.5, 2) == DS_ERR_INVALID_FRACTION);
  REQUIRE(ds_prep(c, (root / "raw").c_str(), (root / "prep").c_str()) == DS_OK);
  CHECK(std::filesystem::exists(root / "prep" / "1000_P" / "1000_DIALOGUE.txt"));
  REQUIRE(ds_llm_classify(c, (root / "prep").c_str(), (root / "v.csv").c_str()) == DS_OK);
  std::ifstream f(root / "v.csv");
  std::string header;
  std::getline(f, header);
  CHECK(header == "interview_id,diagnosis,backend,cached,malformed_retries");
  CHECK(ds_prep(c, (root / "missing").c_str(), (root / "x").c_str()) != DS_OK);
  CHECK(ds_losocv(c, (root / "nofeatures").c_str(), (root / "v.csv").c_str(), (root / "o").c_str(), nullptr) !=
        DS_OK);
  ds_config_free(c);
  std::filesystem::remove_all(root);
}
