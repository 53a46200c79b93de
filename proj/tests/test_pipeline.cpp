#include "fsgen/pipeline.hpp"

#include "fsgen/checkpoint.hpp"

#include <doctest.h>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace fsgen;
using nlohmann::json;

namespace {

struct ScratchDir {
  std::filesystem::path path;
  explicit ScratchDir(const std::string& tag)
      : path(std::filesystem::temp_directory_path() / ("fsgen-pipe-" + tag)) {
    std::filesystem::remove_all(path);
  }
  ~ScratchDir() { std::filesystem::remove_all(path); }
};

/// Small enough that collect+train+select finish in well under a second.
RunConfig micro_config(const std::filesystem::path& out) {
  RunConfig cfg;
  cfg.synthetic = {2, 5, 160, 0.1, 7};
  cfg.collector = "rl";
  cfg.collect_epochs = 40;
  cfg.dqn.buffer_capacity = 64;
  cfg.dqn.minibatch = 8;
  cfg.dqn.target_sync = 5;
  cfg.dqn.q_hidden = 8;
  cfg.model = "single_tree";
  cfg.tree.max_depth = 4;
  cfg.hyper.token_embed_dim = 16;
  cfg.hyper.n_layers_enc = 1;
  cfg.hyper.n_layers_dec = 1;
  cfg.hyper.n_heads = 2;
  cfg.hyper.ffn_dim = 32;
  cfg.hyper.latent_dim = 8;
  cfg.hyper.batch_size = 16;
  cfg.hyper.epochs = 60;
  cfg.hyper.learning_rate = 1e-3;
  cfg.hyper.n_shuffles = 5;
  cfg.hyper.evaluator_width = 8;
  cfg.search.top_k = 4;
  cfg.search.n_steps = 2;
  cfg.seed = 11;
  cfg.out_dir = out.string();
  return cfg;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

json masked(const std::string& report_text) {
  json j = json::parse(report_text);
  j.erase("timings");
  return j;
}

}  // namespace

TEST_CASE("synth writes a loadable CSV plus the planted truth") {
  ScratchDir dir("synth");
  RunConfig cfg = micro_config(dir.path);
  ArtifactPaths paths = cmd_synth(cfg);

  Dataset ds = load_csv(paths.synthetic_csv, "target", TaskKind::Regression);
  CHECK(ds.n_samples() == 160);
  CHECK(ds.n_features() == 7);

  json truth = json::parse(slurp(paths.synthetic_truth));
  CHECK(truth["informative"].size() == 2);
  CHECK(truth["weights"].size() == 2);
  for (const auto& idx : truth["informative"]) {
    CHECK(idx.get<int>() >= 0);
    CHECK(idx.get<int>() < 7);
  }

  cfg.dataset_path = paths.synthetic_csv.string();
  CHECK_THROWS_AS(cmd_synth(cfg), ConfigError);
}

TEST_CASE("collect writes a corpus stamped with config hash and seed") {
  ScratchDir dir("collect");
  RunConfig cfg = micro_config(dir.path);
  std::filesystem::path path = cmd_collect(cfg);

  Corpus corpus = load_corpus(path);
  CHECK(corpus.records.size() == 40);
  CHECK(corpus.vocab.n_features == 7);
  CHECK(corpus.collector == "rl");
  CHECK(corpus.seed == cfg.seed);
  CHECK(corpus.config_hash == collect_config_hash(cfg));
  for (const auto& rec : corpus.records) CHECK(rec.origin == RecordOrigin::RL);

  std::string first = slurp(path);
  cmd_collect(cfg);
  CHECK(slurp(path) == first);
}

TEST_CASE("train rejects artifacts from another configuration or seed") {
  ScratchDir dir("train-reject");
  RunConfig cfg = micro_config(dir.path);

  SUBCASE("missing corpus") { CHECK_THROWS_AS(cmd_train(cfg), ArtifactError); }

  cmd_collect(cfg);
  SUBCASE("different seed") {
    RunConfig other = cfg;
    other.seed = 12;
    CHECK_THROWS_AS(cmd_train(other), ArtifactError);
  }
  SUBCASE("different collection config") {
    RunConfig other = cfg;
    other.collect_epochs = 41;
    CHECK_THROWS_AS(cmd_train(other), ArtifactError);
  }
  SUBCASE("model hyperparameters do not invalidate the corpus") {
    RunConfig other = cfg;
    other.hyper.latent_dim = 16;
    other.hyper.epochs = 2;
    CHECK_NOTHROW(cmd_train(other));
    // But the checkpoint they produced is rejected by a third hyper setup.
    RunConfig third = other;
    third.hyper.ffn_dim = 16;
    CHECK_THROWS_AS(cmd_select(third), ArtifactError);
  }
  SUBCASE("corrupted corpus") {
    std::ofstream out(artifact_paths(cfg).corpus);
    out << "not a corpus\n";
    out.close();
    CHECK_THROWS_AS(cmd_train(cfg), ArtifactError);
  }
}

TEST_CASE("train writes the checkpoint and one loss row per epoch") {
  ScratchDir dir("train");
  RunConfig cfg = micro_config(dir.path);
  cfg.hyper.epochs = 8;
  cmd_collect(cfg);
  std::filesystem::path ckpt = cmd_train(cfg);

  std::uint64_t hash = 0;
  SubsetVae<float> model = load_checkpoint(ckpt.string(), &hash);
  CHECK(hash == train_config_hash(cfg));
  CHECK(model.meta.seed == cfg.seed);
  CHECK(model.meta.epochs_run == 8);

  std::ifstream in(artifact_paths(cfg).loss_history);
  std::string line;
  REQUIRE(std::getline(in, line));
  CHECK(line == "epoch,L,L_rec,L_evt,L_kl");
  int rows = 0;
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 8);
}

TEST_CASE("select produces the audited report") {
  ScratchDir dir("select");
  RunConfig cfg = micro_config(dir.path);

  SUBCASE("missing checkpoint") {
    cmd_collect(cfg);
    CHECK_THROWS_AS(cmd_select(cfg), ArtifactError);
  }

  SUBCASE("full report") {
    cmd_collect(cfg);
    cmd_train(cfg);
    std::string text = cmd_select(cfg);
    CHECK(text == slurp(artifact_paths(cfg).report));

    json report = json::parse(text);
    CHECK(report["seed"] == cfg.seed);
    CHECK(report["config_hash"] == hex64(config_hash(cfg)));
    CHECK(report["config"] == json::parse(config_echo(cfg)));

    const json& audit = report["audit"];
    CHECK(audit["a_row_count"].get<int>() == 120);
    CHECK(audit["b_row_count"].get<int>() == 40);
    CHECK(audit["disjoint"] == true);
    CHECK(audit["covers_all_rows"] == true);
    CHECK(audit["b_used_only_in_stage"] == "report");

    // The recorded partition is exactly the one derived from the run seed, so
    // collection and training provably saw A rows only.
    Dataset ds = load_input(cfg);
    RowPartition part =
        split_ab_rows(ds, cfg.ab_ratio, derive_seed(cfg.seed, "ab-split"));
    std::string joined;
    for (Index r : part.a_rows) joined += std::to_string(r) + ",";
    CHECK(audit["a_rows_fnv"] == hex64(fnv1a64(joined)));

    const json& chosen = report["chosen"];
    REQUIRE(chosen["size"].get<int>() >= 1);
    std::vector<int> indices = chosen["indices"].get<std::vector<int>>();
    CHECK(std::is_sorted(indices.begin(), indices.end()));
    CHECK(indices.back() < 7);
    CHECK(chosen["names"].size() == indices.size());

    const json& scores = report["scores"];
    CHECK(scores["metric"] == "one_minus_rae");
    CHECK(scores["kbest_k"].get<std::size_t>() == indices.size());
    CHECK(scores.contains("chosen_b"));
    CHECK(scores.contains("full_b"));
    CHECK(scores.contains("kbest_b"));

    CHECK(report["losses"]["curve"].size() == 60);
    CHECK(report["candidates"].size() <= 4);
    CHECK(report["augmentation"]["base_records"] == 40);
    CHECK(report["augmentation"]["trained_records"] == 40 * 6);
  }
}

TEST_CASE("pipeline stages resume from existing artifacts") {
  ScratchDir dir("stage-only");
  RunConfig cfg = micro_config(dir.path);

  CHECK_THROWS_AS(cmd_pipeline(cfg, "verify"), ConfigError);

  std::string corpus_path = cmd_pipeline(cfg, "collect");
  CHECK(corpus_path == artifact_paths(cfg).corpus.string());
  std::string ckpt_path = cmd_pipeline(cfg, "train");
  CHECK(ckpt_path == artifact_paths(cfg).checkpoint.string());
  std::string report = cmd_pipeline(cfg, "select");
  CHECK(json::parse(report)["chosen"]["size"].get<int>() >= 1);
}

TEST_CASE("pipeline reruns are byte-identical once timings are masked") {
  ScratchDir dir("determinism");
  RunConfig cfg = micro_config(dir.path);

  std::string first_report = cmd_pipeline(cfg);
  std::string first_corpus = slurp(artifact_paths(cfg).corpus);
  std::string first_ckpt = slurp(artifact_paths(cfg).checkpoint);
  std::string first_losses = slurp(artifact_paths(cfg).loss_history);

  std::string second_report = cmd_pipeline(cfg);
  CHECK(slurp(artifact_paths(cfg).corpus) == first_corpus);
  CHECK(slurp(artifact_paths(cfg).checkpoint) == first_ckpt);
  CHECK(slurp(artifact_paths(cfg).loss_history) == first_losses);
  CHECK(masked(first_report) == masked(second_report));
  CHECK(masked(first_report).dump() == masked(second_report).dump());

  RunConfig reseeded = cfg;
  reseeded.seed = 12;
  std::string other_report = cmd_pipeline(reseeded);
  CHECK(json::parse(other_report)["audit"]["a_rows_fnv"] !=
        json::parse(first_report)["audit"]["a_rows_fnv"]);
}

TEST_CASE("stage failures carry their exit codes") {
  CHECK(StageFailure(exit_code::collect, "x").exit_code == 4);
  CHECK(StageFailure(exit_code::train, "x").exit_code == 5);
  CHECK(StageFailure(exit_code::select, "x").exit_code == 6);
  CHECK(std::string(StageFailure(exit_code::train, "train stage: boom").what()) ==
        "train stage: boom");
}

TEST_CASE("load_input reads CSVs and propagates dataset errors") {
  ScratchDir dir("input");
  RunConfig cfg = micro_config(dir.path);
  cfg.dataset_path = "/nonexistent/data.csv";
  CHECK_THROWS_AS(load_input(cfg), DataError);

  RunConfig synth_cfg = micro_config(dir.path);
  ArtifactPaths paths = cmd_synth(synth_cfg);
  cfg.dataset_path = paths.synthetic_csv.string();
  Dataset ds = load_input(cfg);
  CHECK(ds.n_samples() == 160);
  CHECK(ds.n_features() == 7);
}

TEST_CASE("inspect summarizes corpora and checkpoints") {
  ScratchDir dir("inspect");
  RunConfig cfg = micro_config(dir.path);
  cfg.hyper.epochs = 4;
  cmd_collect(cfg);
  cmd_train(cfg);

  std::string corpus_text = cmd_inspect(artifact_paths(cfg).corpus);
  CHECK(corpus_text.find("records          40") != std::string::npos);
  CHECK(corpus_text.find("collector        rl") != std::string::npos);
  CHECK(corpus_text.find(hex64(collect_config_hash(cfg))) != std::string::npos);

  std::string ckpt_text = cmd_inspect(artifact_paths(cfg).checkpoint);
  CHECK(ckpt_text.find("n_features  7") != std::string::npos);
  CHECK(ckpt_text.find("4 epochs") != std::string::npos);
  CHECK(ckpt_text.find(hex64(train_config_hash(cfg))) != std::string::npos);

  CHECK_THROWS_AS(cmd_inspect(dir.path / "missing.bin"), ArtifactError);
  std::ofstream garbage(dir.path / "garbage.bin");
  garbage << "?????\n";
  garbage.close();
  CHECK_THROWS_AS(cmd_inspect(dir.path / "garbage.bin"), ArtifactError);
}
