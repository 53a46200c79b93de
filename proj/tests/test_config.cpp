#include "fsgen/config.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

using namespace fsgen;

namespace {

struct ScratchPath {
  std::filesystem::path path;
  explicit ScratchPath(const std::string& name)
      : path(std::filesystem::temp_directory_path() / name) {
    std::filesystem::remove(path);
  }
  ~ScratchPath() { std::filesystem::remove(path); }
};

void spit(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

}  // namespace

TEST_CASE("default config validates and names a tree ensemble") {
  RunConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  CHECK(std::holds_alternative<TreeEnsembleOptions>(cfg.model_kind()));
  cfg.model = "single_tree";
  CHECK(std::holds_alternative<SingleTreeOptions>(cfg.model_kind()));
  cfg.model = "knn";
  CHECK(std::holds_alternative<KNearestOptions>(cfg.model_kind()));
  cfg.model = "boosted_stumps";
  CHECK_THROWS_AS(cfg.model_kind(), ConfigError);
}

TEST_CASE("validate rejects out-of-range run settings") {
  auto broken = [](auto&& mutate) {
    RunConfig cfg;
    mutate(cfg);
    return cfg;
  };
  CHECK_THROWS_AS(broken([](RunConfig& c) { c.ab_ratio = 1.0; }).validate(),
                  ConfigError);
  CHECK_THROWS_AS(broken([](RunConfig& c) { c.collector = "exhaustive"; }).validate(),
                  ConfigError);
  CHECK_THROWS_AS(broken([](RunConfig& c) { c.collect_epochs = 0; }).validate(),
                  ConfigError);
  CHECK_THROWS_AS(broken([](RunConfig& c) { c.out_dir.clear(); }).validate(),
                  ConfigError);
  CHECK_THROWS_AS(broken([](RunConfig& c) {
                    c.dataset_path = "data.csv";
                    c.target_column.clear();
                  }).validate(),
                  ConfigError);
  CHECK_THROWS_AS(broken([](RunConfig& c) { c.knn.k = 0; }).validate(), ConfigError);
  CHECK_THROWS_AS(broken([](RunConfig& c) { c.synthetic.n_real = 0; }).validate(),
                  ConfigError);
  // Nested configs are validated through their own contracts.
  CHECK_THROWS_AS(broken([](RunConfig& c) { c.hyper.n_heads = 3; }).validate(),
                  ConfigError);
  CHECK_THROWS_AS(broken([](RunConfig& c) { c.dqn.discount = 1.0; }).validate(),
                  ConfigError);
  CHECK_THROWS_AS(broken([](RunConfig& c) { c.search.top_k = 0; }).validate(),
                  ConfigError);
}

TEST_CASE("load_config reads nested sections and keeps defaults elsewhere") {
  ScratchPath file("fsgen-config-read.json");
  spit(file.path, R"({
    "dataset": {"synthetic": {"n_real": 3, "n_fake": 9, "n_samples": 200}},
    "split": {"ab_ratio": 0.6},
    "collector": {"kind": "random", "epochs": 50, "eps_decay": 0.95},
    "downstream": {"model": "knn", "knn_k": 7},
    "hyper": {"latent_dim": 32, "n_shuffles": 10},
    "search": {"top_k": 12, "use_mean_latent": false},
    "seed": 99,
    "out_dir": "run-a"
  })");
  RunConfig cfg = load_config(file.path);
  CHECK(cfg.synthetic.n_real == 3);
  CHECK(cfg.synthetic.n_fake == 9);
  CHECK(cfg.synthetic.n_samples == 200);
  CHECK(cfg.synthetic.noise_std == doctest::Approx(0.1));  // default kept
  CHECK(cfg.ab_ratio == doctest::Approx(0.6));
  CHECK(cfg.collector == "random");
  CHECK(cfg.collect_epochs == 50);
  CHECK(cfg.dqn.eps_decay == doctest::Approx(0.95));
  CHECK(cfg.dqn.buffer_capacity == 2000);  // default kept
  CHECK(cfg.model == "knn");
  CHECK(cfg.knn.k == 7);
  CHECK(cfg.hyper.latent_dim == 32);
  CHECK(cfg.hyper.n_shuffles == 10);
  CHECK(cfg.hyper.token_embed_dim == 64);  // default kept
  CHECK(cfg.search.top_k == 12);
  CHECK_FALSE(cfg.search.use_mean_latent);
  CHECK(cfg.seed == 99);
  CHECK(cfg.out_dir == "run-a");
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("load_config rejects unknown keys with their full path") {
  ScratchPath file("fsgen-config-unknown.json");
  SUBCASE("root level") {
    spit(file.path, R"({"sede": 3})");
    CHECK_THROWS_WITH_AS(load_config(file.path), "unknown config key '.sede'",
                         ConfigError);
  }
  SUBCASE("nested section") {
    spit(file.path, R"({"hyper": {"latent_dims": 32}})");
    CHECK_THROWS_WITH_AS(load_config(file.path),
                         "unknown config key 'hyper.latent_dims'", ConfigError);
  }
}

TEST_CASE("load_config rejects malformed files") {
  ScratchPath file("fsgen-config-bad.json");
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_config("/nonexistent/cfg.json"), ConfigError);
  }
  SUBCASE("not JSON") {
    spit(file.path, "epochs = 100\n");
    CHECK_THROWS_AS(load_config(file.path), ConfigError);
  }
  SUBCASE("root is an array") {
    spit(file.path, "[1, 2]\n");
    CHECK_THROWS_AS(load_config(file.path), ConfigError);
  }
  SUBCASE("wrong value type") {
    spit(file.path, R"({"hyper": {"latent_dim": "large"}})");
    CHECK_THROWS_AS(load_config(file.path), ConfigError);
  }
  SUBCASE("unknown task") {
    spit(file.path, R"({"dataset": {"task": "ranking"}})");
    CHECK_THROWS_AS(load_config(file.path), ConfigError);
  }
}

TEST_CASE("config_echo is valid JSON carrying every knob") {
  RunConfig cfg;
  cfg.seed = 123;
  cfg.out_dir = "some/dir";
  nlohmann::json echo = nlohmann::json::parse(config_echo(cfg));
  CHECK(echo["seed"] == 123);
  CHECK(echo["out_dir"] == "some/dir");
  CHECK(echo["hyper"]["latent_dim"] == cfg.hyper.latent_dim);
  CHECK(echo["collector"]["epochs"] == cfg.collect_epochs);
  CHECK(echo["downstream"]["model"] == cfg.model);
  CHECK(echo["search"]["eta"] == doctest::Approx(cfg.search.eta));
  CHECK(echo["dataset"]["synthetic"]["n_fake"] == cfg.synthetic.n_fake);
}

TEST_CASE("config_hash ignores seed and out_dir but sees real knobs") {
  RunConfig base;
  RunConfig reseeded = base;
  reseeded.seed = 777;
  reseeded.out_dir = "elsewhere";
  CHECK(config_hash(base) == config_hash(reseeded));

  RunConfig tweaked = base;
  tweaked.hyper.latent_dim = 16;
  CHECK(config_hash(base) != config_hash(tweaked));

  RunConfig other_collector = base;
  other_collector.collector = "random";
  CHECK(config_hash(base) != config_hash(other_collector));
}

TEST_CASE("stage hashes ignore settings their stage cannot observe") {
  RunConfig base;

  RunConfig new_search = base;
  new_search.search.eta = 0.5;
  CHECK(config_hash(new_search) != config_hash(base));
  CHECK(train_config_hash(new_search) == train_config_hash(base));
  CHECK(collect_config_hash(new_search) == collect_config_hash(base));

  RunConfig new_hyper = base;
  new_hyper.hyper.latent_dim = 16;
  CHECK(train_config_hash(new_hyper) != train_config_hash(base));
  CHECK(collect_config_hash(new_hyper) == collect_config_hash(base));

  RunConfig new_collect = base;
  new_collect.collect_epochs = 500;
  CHECK(collect_config_hash(new_collect) != collect_config_hash(base));

  RunConfig new_model = base;
  new_model.model = "knn";
  CHECK(collect_config_hash(new_model) != collect_config_hash(base));
}

TEST_CASE("echoed config round trips through load_config") {
  RunConfig cfg;
  cfg.model = "knn";
  cfg.hyper.latent_dim = 48;
  cfg.search.n_steps = 4;
  cfg.seed = 5;
  ScratchPath file("fsgen-config-echo.json");
  spit(file.path, config_echo(cfg));
  RunConfig back = load_config(file.path);
  CHECK(config_hash(back) == config_hash(cfg));
  CHECK(back.seed == cfg.seed);
  CHECK(back.model == "knn");
  CHECK(back.hyper.latent_dim == 48);
  CHECK(back.search.n_steps == 4);
}
