#pragma once

#include "fsgen/config.hpp"

#include <filesystem>
#include <string>

namespace fsgen {

/// Error already attributed to a pipeline stage, carrying the process exit
/// code for main(). Codes: 0 ok, 2 config, 3 dataset, 4 collect, 5 train,
/// 6 select, 7 artifact/report.
struct StageFailure : Error {
  int exit_code;
  StageFailure(int code, const std::string& what) : Error(what), exit_code(code) {}
};

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int config = 2;
inline constexpr int dataset = 3;
inline constexpr int collect = 4;
inline constexpr int train = 5;
inline constexpr int select = 6;
inline constexpr int artifact = 7;
}  // namespace exit_code

struct ArtifactPaths {
  std::filesystem::path corpus;
  std::filesystem::path checkpoint;
  std::filesystem::path loss_history;
  std::filesystem::path report;
  std::filesystem::path synthetic_csv;
  std::filesystem::path synthetic_truth;
};
ArtifactPaths artifact_paths(const RunConfig& cfg);

/// CSV load or the planted synthetic generator when no path is configured.
Dataset load_input(const RunConfig& cfg);

/// Writes the synthetic dataset as CSV plus a truth file naming the planted
/// columns; rejects configs that point at a real dataset instead.
ArtifactPaths cmd_synth(const RunConfig& cfg);

/// Stage 1: explore on data subset A only and persist the labelled corpus.
std::filesystem::path cmd_collect(const RunConfig& cfg);

/// Stage 2: augment the corpus, train the sequence model, write the
/// checkpoint and the per-epoch loss history CSV.
std::filesystem::path cmd_train(const RunConfig& cfg);

/// Stage 3: latent search on A, single B-side scoring pass, JSON report.
/// Returns the serialized report.
std::string cmd_select(const RunConfig& cfg);

/// collect -> train -> select; `stage_only` of "collect"/"train"/"select"
/// resumes a single stage from the existing artifacts.
std::string cmd_pipeline(const RunConfig& cfg, const std::string& stage_only = "");

/// Human-readable summary of a corpus or checkpoint file.
std::string cmd_inspect(const std::filesystem::path& artifact);

}  // namespace fsgen
