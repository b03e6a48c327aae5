#include <doctest.h>

#include <json.hpp>

#include "cbasr/config.hpp"
#include "cbasr/storage.hpp"
#include "test_util.hpp"

using namespace cbasr;
using cbasr::testing::TempDir;
using nlohmann::json;

TEST_CASE("minimal config fills the reference defaults") {
  ConfigValidation v = validate_config_json(json{{"backend", "mock"}});
  REQUIRE(v.ok());
  const RunConfig& cfg = *v.config;
  CHECK(cfg.layer_range == default_layer_range());
  CHECK(cfg.beam == 5);
  CHECK(cfg.threshold == doctest::Approx(10.0));
  CHECK(cfg.classifier.architecture == KwsArchitecture::kResnet50);
  CHECK(cfg.classifier.epochs == 6);
  CHECK(cfg.classifier.batch_size == 64);
  CHECK(cfg.classifier.learning_rate == doctest::Approx(5e-5));
  CHECK(cfg.classifier.entity_axis_target == 32);
  CHECK(cfg.vocab_size == 20000);
  CHECK(cfg.sampling.neighbor_window == 5);
  CHECK(cfg.prompt_style == PromptStyle::kSpokenForm);
}

TEST_CASE("layer range outside the backend capability names the bound") {
  ConfigValidation v = validate_config_json(
      json{{"backend", "mock"}, {"layers", "30:40"}});
  REQUIRE(!v.ok());
  REQUIRE(v.errors.size() == 1);
  CHECK(v.errors[0].find("[1, 24]") != std::string::npos);

  // The 24-layer medium model accepts the default range but not more.
  CHECK(validate_config_json(json{{"backend", "whisper-medium"},
                                  {"backend.endpoint", "http://x"},
                                  {"layers", "10:21"}})
            .ok());
  CHECK(!validate_config_json(json{{"backend", "whisper-medium"},
                                   {"layers", "20:25"}})
             .ok());
}

TEST_CASE("all violations reported at once") {
  ConfigValidation v = validate_config_json(json{{"backend", "mock"},
                                                 {"beam", 0},
                                                 {"classifier.epochs", -3}});
  REQUIRE(!v.ok());
  CHECK(v.errors.size() == 2);
}

TEST_CASE("unknown keys are rejected") {
  ConfigValidation v =
      validate_config_json(json{{"backend", "mock"}, {"beem", 5}});
  REQUIRE(!v.ok());
  CHECK(v.errors[0].find("beem") != std::string::npos);
}

TEST_CASE("overrides win over file values") {
  TempDir dir("config");
  std::string path = (dir.path() / "run.json").string();
  write_text_file(path, json{{"backend", "mock"}, {"beam", 3}}.dump());

  ConfigValidation file_only = validate_config_file(path);
  REQUIRE(file_only.ok());
  CHECK(file_only.config->beam == 3);

  ConfigValidation overridden =
      validate_config_file(path, json{{"beam", 7}, {"threshold", 4.5}});
  REQUIRE(overridden.ok());
  CHECK(overridden.config->beam == 7);
  CHECK(overridden.config->threshold == doctest::Approx(4.5));
}

TEST_CASE("missing config file is a reported violation") {
  ConfigValidation v = validate_config_file("/nonexistent/config.json");
  CHECK(!v.ok());
}

TEST_CASE("stage seeds derive stably from the top-level seed") {
  ConfigValidation v =
      validate_config_json(json{{"backend", "mock"}, {"seed", 17}});
  REQUIRE(v.ok());
  const RunConfig& cfg = *v.config;
  CHECK(cfg.stage_seed("train-kws") == cfg.stage_seed("train-kws"));
  CHECK(cfg.stage_seed("train-kws") != cfg.stage_seed("synth-dataset"));
  CHECK(cfg.classifier.seed == cfg.stage_seed("train-kws"));
  CHECK(cfg.sampling.seed == cfg.stage_seed("synth-dataset"));

  ConfigValidation other =
      validate_config_json(json{{"backend", "mock"}, {"seed", 18}});
  CHECK(other.config->classifier.seed != cfg.classifier.seed);
}

TEST_CASE("config hash is stable and value-sensitive") {
  ConfigValidation a = validate_config_json(json{{"backend", "mock"}});
  ConfigValidation b = validate_config_json(json{{"backend", "mock"}});
  ConfigValidation c =
      validate_config_json(json{{"backend", "mock"}, {"beam", 4}});
  REQUIRE(a.ok());
  CHECK(a.config->config_hash() == b.config->config_hash());
  CHECK(a.config->config_hash() != c.config->config_hash());
}

TEST_CASE("factories honor the selection keys") {
  ConfigValidation v = validate_config_json(json{{"backend", "mock"}});
  REQUIRE(v.ok());
  auto backend = make_backend(*v.config);
  CHECK(backend->info().model_id == "mock");
  auto tts = make_tts(*v.config);
  CHECK(tts->synthesize({"ab", "v", 1.0}).samples.size() == 3200);
}
