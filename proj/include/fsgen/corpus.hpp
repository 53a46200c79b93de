#pragma once

#include "fsgen/tokens.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace fsgen {

enum class RecordOrigin { RL, Random, Augmented };

std::string to_string(RecordOrigin origin);
RecordOrigin origin_from_string(const std::string& name);

/// One training sample: a token sequence labelled with the downstream utility
/// of the subset it denotes. Utility is stored clamped to [0,1].
struct CorpusRecord {
  TokenSequence tokens;
  double utility = 0.0;
  RecordOrigin origin = RecordOrigin::Random;
};

/// A record list plus the lineage needed to reject artifact mixing.
struct Corpus {
  FeatureTokenVocab vocab;
  std::vector<CorpusRecord> records;
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  std::string collector;  // "rl" or "random"
};

/// Throws DataError on an empty interior or a utility outside [0,1].
void validate_record(const FeatureTokenVocab& vocab, const CorpusRecord& rec);

/// JSON Lines: a metadata header line, then one object per record with
/// fields tokens (interior only, SOS/EOS re-attached on load), utility, origin.
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);
Corpus load_corpus(const std::filesystem::path& path);

/// Shuffling augmentation: each record is emitted once as-is, followed by
/// n_shuffles uniformly random interior permutations carrying the identical
/// utility label (origin Augmented). Deterministic given seed.
std::vector<CorpusRecord> augment(const FeatureTokenVocab& vocab,
                                  const std::vector<CorpusRecord>& records,
                                  int n_shuffles, std::uint64_t seed);

/// Number of distinct canonical subsets among the records.
std::size_t distinct_subsets(const std::vector<CorpusRecord>& records);

}  // namespace fsgen
