#include <doctest.h>

#include "fsgen/tokens.hpp"

#include <algorithm>
#include <random>
#include <set>

using namespace fsgen;

TEST_CASE("vocab ids sit directly above the feature ids") {
  FeatureTokenVocab v{8};
  CHECK(v.sos() == 8);
  CHECK(v.eos() == 9);
  CHECK(v.pad() == 10);
  CHECK(v.size() == 11);
  CHECK(v.is_feature(0));
  CHECK(v.is_feature(7));
  CHECK_FALSE(v.is_feature(8));
  CHECK_FALSE(v.is_feature(-1));
}

TEST_CASE("vocab fingerprint separates feature counts") {
  CHECK(FeatureTokenVocab{8}.fingerprint() == FeatureTokenVocab{8}.fingerprint());
  CHECK(FeatureTokenVocab{8}.fingerprint() != FeatureTokenVocab{9}.fingerprint());
}

TEST_CASE("subset {1,2,4,7} maps to [SOS,t1,t2,t4,t7,EOS]") {
  FeatureTokenVocab v{8};
  TokenSequence seq = subset_to_sequence(v, {1, 2, 4, 7});
  CHECK(seq.wire == std::vector<int>{v.sos(), 1, 2, 4, 7, v.eos()});
  CHECK(seq.is_canonical());
  CHECK(seq.interior_size() == 4);
}

TEST_CASE("singleton subset") {
  FeatureTokenVocab v{8};
  CHECK(subset_to_sequence(v, {0}).wire == std::vector<int>{v.sos(), 0, v.eos()});
}

TEST_CASE("subset order and duplicates do not matter") {
  FeatureTokenVocab v{8};
  CHECK(subset_to_sequence(v, {7, 4, 2, 1}) == subset_to_sequence(v, {1, 2, 4, 7}));
  CHECK(subset_to_sequence(v, {3, 3, 1}) == subset_to_sequence(v, {1, 3}));
}

TEST_CASE("subset_to_sequence rejects empty and out-of-range input") {
  FeatureTokenVocab v{8};
  CHECK_THROWS_AS(subset_to_sequence(v, {}), DataError);
  CHECK_THROWS_AS(subset_to_sequence(v, {8}), DataError);
  CHECK_THROWS_AS(subset_to_sequence(v, {-1}), DataError);
}

TEST_CASE("[SOS,t2,t5,t6,EOS] maps back to {2,5,6}") {
  FeatureTokenVocab v{8};
  TokenSequence seq{{v.sos(), 2, 5, 6, v.eos()}};
  CHECK(sequence_to_subset(v, seq) == std::vector<int>{2, 5, 6});
}

TEST_CASE("duplicate interior tokens collapse to one index") {
  FeatureTokenVocab v{8};
  TokenSequence seq{{v.sos(), 3, 3, v.eos()}};
  CHECK(sequence_to_subset(v, seq) == std::vector<int>{3});
}

TEST_CASE("round trip is the identity on every non-empty subset of a small vocab") {
  FeatureTokenVocab v{5};
  for (int mask = 1; mask < (1 << 5); ++mask) {
    std::vector<int> subset;
    for (int i = 0; i < 5; ++i)
      if (mask & (1 << i)) subset.push_back(i);
    TokenSequence seq = subset_to_sequence(v, subset);
    CHECK(seq.is_canonical());
    CHECK(sequence_to_subset(v, seq) == subset);
  }
}

TEST_CASE("round trip on random subsets of a larger vocab") {
  FeatureTokenVocab v{50};
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> size_dist(1, 50);
  std::uniform_int_distribution<int> feat(0, 49);
  for (int iter = 0; iter < 200; ++iter) {
    std::set<int> s;
    int k = size_dist(rng);
    while (static_cast<int>(s.size()) < k) s.insert(feat(rng));
    std::vector<int> subset(s.begin(), s.end());
    std::vector<int> shuffled = subset;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    TokenSequence seq = subset_to_sequence(v, shuffled);
    CHECK(seq.is_canonical());
    CHECK(sequence_to_subset(v, seq) == subset);
  }
}

TEST_CASE("validate_wire enforces framing and interior contents") {
  FeatureTokenVocab v{8};
  CHECK_NOTHROW(validate_wire(v, TokenSequence{{v.sos(), 0, 7, v.eos()}}));
  CHECK_THROWS_AS(validate_wire(v, TokenSequence{{v.sos(), v.eos()}}), DataError);
  CHECK_THROWS_AS(validate_wire(v, TokenSequence{{0, 1, v.eos()}}), DataError);
  CHECK_THROWS_AS(validate_wire(v, TokenSequence{{v.sos(), 1, 2}}), DataError);
  CHECK_THROWS_AS(validate_wire(v, TokenSequence{{v.sos(), v.pad(), v.eos()}}), DataError);
  CHECK_THROWS_AS(validate_wire(v, TokenSequence{{v.sos(), v.sos(), v.eos()}}), DataError);
  CHECK_THROWS_AS(validate_wire(v, TokenSequence{{v.sos(), 8, v.eos()}}), DataError);
  // Interior longer than the feature count cannot be a subset.
  std::vector<int> wire{v.sos()};
  for (int i = 0; i < 9; ++i) wire.push_back(i % 8);
  wire.push_back(v.eos());
  CHECK_THROWS_AS(validate_wire(v, TokenSequence{wire}), DataError);
}

TEST_CASE("wrap_interior keeps the given order") {
  FeatureTokenVocab v{8};
  TokenSequence seq = wrap_interior(v, {4, 1, 2});
  CHECK(seq.wire == std::vector<int>{v.sos(), 4, 1, 2, v.eos()});
  CHECK_FALSE(seq.is_canonical());
}
