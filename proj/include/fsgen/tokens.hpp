#pragma once

#include "fsgen/types.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace fsgen {

/// Feature index i maps to token id i; the three specials sit directly above
/// the feature ids so the bijection is the identity.
struct FeatureTokenVocab {
  int n_features = 0;

  int sos() const { return n_features; }
  int eos() const { return n_features + 1; }
  int pad() const { return n_features + 2; }
  int size() const { return n_features + 3; }
  bool is_feature(int token) const { return token >= 0 && token < n_features; }

  /// Stable fingerprint used to reject mixing artifacts from different vocabularies.
  std::uint64_t fingerprint() const;
};

/// A feature subset in wire form: [SOS, t..., EOS]. Interior order is
/// significant for the sequence model; canonical form is strictly increasing.
struct TokenSequence {
  std::vector<int> wire;

  std::span<const int> interior() const {
    return {wire.data() + 1, wire.size() - 2};
  }
  Index interior_size() const { return static_cast<Index>(wire.size()) - 2; }
  bool is_canonical() const;

  bool operator==(const TokenSequence&) const = default;
};

/// Throws DataError unless `seq` is well formed for `vocab`: SOS/EOS framing,
/// interior of 1..n_features feature tokens, no specials inside.
void validate_wire(const FeatureTokenVocab& vocab, const TokenSequence& seq);

/// Canonical sequence for a feature index set (input may be unsorted, dups collapse).
TokenSequence subset_to_sequence(const FeatureTokenVocab& vocab,
                                 std::vector<int> feature_indices);

/// Inverse mapping; duplicate interior tokens collapse to one index.
std::vector<int> sequence_to_subset(const FeatureTokenVocab& vocab,
                                    const TokenSequence& seq);

/// Frames an interior token list (kept in the given order) with SOS/EOS.
/// Used for augmented samples and corpus loading.
TokenSequence wrap_interior(const FeatureTokenVocab& vocab, std::vector<int> interior);

}  // namespace fsgen
