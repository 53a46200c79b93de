#include "fsgen/tokens.hpp"

#include <algorithm>

namespace fsgen {

std::uint64_t FeatureTokenVocab::fingerprint() const {
  std::uint64_t h = fnv1a64("fsgen-vocab");
  h = fnv1a64(&n_features, sizeof(n_features), h);
  return h;
}

bool TokenSequence::is_canonical() const {
  auto in = interior();
  for (std::size_t i = 1; i < in.size(); ++i)
    if (in[i] <= in[i - 1]) return false;
  return true;
}

void validate_wire(const FeatureTokenVocab& vocab, const TokenSequence& seq) {
  if (seq.wire.size() < 3) throw DataError("token sequence has an empty interior");
  if (seq.wire.front() != vocab.sos() || seq.wire.back() != vocab.eos())
    throw DataError("token sequence must be framed by SOS and EOS");
  if (seq.interior_size() > vocab.n_features)
    throw DataError("token sequence interior longer than the feature count");
  for (int t : seq.interior())
    if (!vocab.is_feature(t))
      throw DataError("token sequence interior contains a non-feature token " +
                      std::to_string(t));
}

TokenSequence subset_to_sequence(const FeatureTokenVocab& vocab,
                                 std::vector<int> feature_indices) {
  if (feature_indices.empty()) throw DataError("feature subset must be non-empty");
  std::sort(feature_indices.begin(), feature_indices.end());
  feature_indices.erase(
      std::unique(feature_indices.begin(), feature_indices.end()),
      feature_indices.end());
  for (int idx : feature_indices)
    if (!vocab.is_feature(idx))
      throw DataError("feature index " + std::to_string(idx) + " out of range 0.." +
                      std::to_string(vocab.n_features - 1));
  TokenSequence seq;
  seq.wire.reserve(feature_indices.size() + 2);
  seq.wire.push_back(vocab.sos());
  seq.wire.insert(seq.wire.end(), feature_indices.begin(), feature_indices.end());
  seq.wire.push_back(vocab.eos());
  return seq;
}

std::vector<int> sequence_to_subset(const FeatureTokenVocab& vocab,
                                    const TokenSequence& seq) {
  validate_wire(vocab, seq);
  std::vector<int> out(seq.interior().begin(), seq.interior().end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

TokenSequence wrap_interior(const FeatureTokenVocab& vocab, std::vector<int> interior) {
  TokenSequence seq;
  seq.wire.reserve(interior.size() + 2);
  seq.wire.push_back(vocab.sos());
  seq.wire.insert(seq.wire.end(), interior.begin(), interior.end());
  seq.wire.push_back(vocab.eos());
  validate_wire(vocab, seq);
  return seq;
}

}  // namespace fsgen
