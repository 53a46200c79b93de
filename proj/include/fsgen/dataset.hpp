#pragma once

#include "fsgen/types.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace fsgen {

enum class TaskKind { Classification, Regression };

std::string to_string(TaskKind task);
TaskKind task_from_string(const std::string& name);

/// Immutable tabular dataset. Classification targets are stored as the
/// re-encoded class ids 0..C-1 (held in a double vector alongside the
/// regression case).
struct Dataset {
  Matrix<double> features;  // n_samples x n_features
  Vector<double> target;
  TaskKind task = TaskKind::Regression;
  std::vector<std::string> feature_names;

  Index n_samples() const { return features.rows(); }
  Index n_features() const { return features.cols(); }
  /// Number of classes (classification only; targets are 0..C-1).
  int n_classes() const;
};

/// Throws DataError unless row/target sizes agree, entries are finite and
/// classification labels are contiguous 0..C-1 with C >= 2.
void validate(const Dataset& ds);

/// Loads a UTF-8 comma-separated file with a header row. `target_column` is
/// matched against the header first; if no header matches and it parses as a
/// non-negative integer it is taken as a column index. Empty and non-numeric
/// feature cells are rejected with their row/column location.
Dataset load_csv(const std::filesystem::path& path, const std::string& target_column,
                 TaskKind task);

/// Writes header + rows; doubles are printed with round-trip precision so
/// load_csv(write_csv(ds)) reproduces the matrix exactly.
void write_csv(const Dataset& ds, const std::filesystem::path& path,
               const std::string& target_name = "target");

/// Disjoint row partition with |A| = floor(ratio_a * n). For classification
/// the permutation is resampled (bounded retries) until every class appears
/// in both splits.
std::pair<Dataset, Dataset> split_ab(const Dataset& ds, double ratio_a,
                                     std::uint64_t seed);

/// The row indices split_ab materializes, sorted ascending per side. Exposed
/// so callers can audit which original rows each side received.
struct RowPartition {
  std::vector<Index> a_rows;
  std::vector<Index> b_rows;
};
RowPartition split_ab_rows(const Dataset& ds, double ratio_a, std::uint64_t seed);

/// The fixed 75/25 train/validation split of a data subset used for corpus
/// labeling and candidate scoring. Derived deterministically from `seed`.
std::pair<Dataset, Dataset> internal_split(const Dataset& ds, std::uint64_t seed);

Dataset select_rows(const Dataset& ds, const std::vector<Index>& rows);

struct SyntheticSpec {
  int n_real = 5;
  int n_fake = 45;
  Index n_samples = 1000;
  double noise_std = 0.1;
  std::uint64_t seed = 0;
};

struct SyntheticTruth {
  std::vector<int> informative;  // sorted column indices of the planted features
  Vector<double> weights;        // linear weight per informative column
  double interaction_weight = 0.0;
};

/// Regression dataset whose target depends only on n_real planted columns:
/// y = sum_i w_i * x_i + w' * x_(0) * x_(1) + N(0, noise_std), all other
/// columns independent standard normal noise. Column positions of the
/// planted features are shuffled by the seed.
std::pair<Dataset, SyntheticTruth> make_synthetic_planted(const SyntheticSpec& spec);

}  // namespace fsgen
