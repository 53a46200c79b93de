#pragma once

#include "fsgen/collector.hpp"
#include "fsgen/search.hpp"
#include "fsgen/subset_vae.hpp"

#include <cstdint>
#include <filesystem>
#include <string>

namespace fsgen {

/// Everything one run needs, with defaults that reproduce the reference
/// experiment (300 collector epochs, 25 shuffles, the documented model and
/// search settings). Loaded from a JSON file; CLI flags override afterwards.
struct RunConfig {
  // Input: a CSV path, or the planted synthetic generator when the path is
  // empty. The synthetic seed is independent of the run seed so reruns with
  // different run seeds face the identical dataset.
  std::string dataset_path;
  std::string target_column = "target";
  TaskKind task = TaskKind::Regression;
  SyntheticSpec synthetic;

  double ab_ratio = 0.75;

  std::string collector = "rl";  // "rl" | "random"
  int collect_epochs = 300;
  CollectorConfig dqn;

  // Downstream scorer used by the collector, candidate selection and the
  // final report.
  std::string model = "tree_ensemble";  // "tree_ensemble" | "single_tree" | "knn"
  TreeEnsembleOptions tree;
  KNearestOptions knn;

  Hyperparams hyper;
  SearchConfig search;

  std::uint64_t seed = 0;
  std::string out_dir = "fsgen-out";

  ModelKind model_kind() const;
  void validate() const;
};

/// Parses a JSON config file over the defaults. Unknown keys are rejected so
/// typos fail loudly. Throws ConfigError.
RunConfig load_config(const std::filesystem::path& path);

/// The effective configuration as canonical JSON (sorted keys), seed and
/// output directory included.
std::string config_echo(const RunConfig& cfg);

/// FNV-1a hash of the canonical configuration with seed and out_dir blanked:
/// two runs agree on the hash exactly when their artifacts are compatible.
std::uint64_t config_hash(const RunConfig& cfg);

/// Stage-scoped hashes, so an artifact is invalidated only by settings that
/// could have influenced it. The corpus ignores model and search settings;
/// the checkpoint ignores search settings alone.
std::uint64_t collect_config_hash(const RunConfig& cfg);
std::uint64_t train_config_hash(const RunConfig& cfg);

}  // namespace fsgen
