#include "doctest.h"
#include "json.hpp"
#include "test_support.hpp"
#include "vle/config.hpp"
#include "vle/errors.hpp"
#include "vle/manifest.hpp"

using namespace vle;

TEST_CASE("config parser: comments, whitespace, repeats, errors") {
  const auto kv = config::parse("# header\nepochs = 5 # trailing\n\n  batch_size=64\nepochs = 6\n", "cfg");
  CHECK(kv.at("epochs") == "6");
  CHECK(kv.at("batch_size") == "64");
  CHECK_THROWS_AS(config::parse("epochs 5\n", "cfg"), ConfigError);
  CHECK_THROWS_AS(config::parse("= 5\n", "cfg"), ConfigError);
}

TEST_CASE("defaults match the training protocol") {
  const config::RunSettings s;
  CHECK(s.train.epochs == 70);
  CHECK(s.train.batch_size == 1024);
  CHECK(s.train.validation_split == 0.1);
  CHECK(s.train.adam.learning_rate == 1e-3);
  CHECK(s.model.dropout_rate == 0.3);
  CHECK(s.pipeline.train_frac == 0.7);
  const auto j = nlohmann::json::parse(config::to_json(s));
  CHECK(j.at("epochs") == 70);
  CHECK(j.at("batch_size") == 1024);
}

TEST_CASE("apply resolves keys and rejects bad input") {
  config::RunSettings s;
  config::apply(s, {{"seed", "9"}, {"epochs", "3"}, {"class_weights", "1,2,3,4"}, {"arch", "mlp_baseline"},
                    {"features", "demo+click"}, {"no_leak", "true"}});
  CHECK(s.pipeline.seed == 9);
  CHECK(s.model.init_seed == mix_seed(9, 1));
  CHECK(s.train.shuffle_seed == mix_seed(9, 2));
  CHECK(s.train.epochs == 3);
  CHECK(s.train.class_weights.weight == std::array{1.0, 2.0, 3.0, 4.0});
  CHECK(s.model.architecture == nn::Architecture::MlpBaseline);
  CHECK(s.pipeline.feature_set == features::FeatureSet::DemoClick);
  CHECK(s.pipeline.no_leak);

  config::RunSettings t;
  config::apply(t, {{"seed", "9"}, {"init_seed", "1"}});
  CHECK(t.model.init_seed == 1);

  for (const config::KeyValues& bad : std::vector<config::KeyValues>{
           {{"epochs", "0"}}, {{"epochs", "x"}}, {{"colour", "red"}}, {{"class_weights", "1,1,0,1"}},
           {{"validation_split", "1"}}, {{"per_student", "maybe"}}}) {
    config::RunSettings u;
    CHECK_THROWS_AS(config::apply(u, bad), ConfigError);
  }
}

TEST_CASE("manifest appends runs") {
  testing::TempDir dir("manifest");
  RunManifest m;
  m.run_id = make_run_id("train", 1);
  m.command = "train";
  m.config_json = "{\"epochs\":70}";
  m.inputs = {"in.csv"};
  m.outputs = {"out.json"};
  append_manifest(m, dir.path());
  m.command = "evaluate";
  append_manifest(m, dir.path());
  const auto runs = read_manifest(dir.path());
  REQUIRE(runs.size() == 2);
  CHECK(runs[0].command == "train");
  CHECK(runs[1].command == "evaluate");
  CHECK(runs[0].tool_version == kToolVersion);
  CHECK(nlohmann::json::parse(runs[0].config_json).at("epochs") == 70);
  CHECK(m.run_id.size() > 16);
  CHECK(make_run_id("train", 1).substr(17) != make_run_id("train", 2).substr(17));
}
