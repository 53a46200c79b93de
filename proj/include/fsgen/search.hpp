#pragma once

#include "fsgen/corpus.hpp"
#include "fsgen/subset_vae.hpp"
#include "fsgen/trees.hpp"

#include <cmath>
#include <string>
#include <utility>
#include <vector>

namespace fsgen {

struct SearchConfig {
  int top_k = 25;
  double eta = 0.05;
  int n_steps = 10;
  Index max_decode_len = 0;  // 0 resolves to n_features + 2
  bool use_mean_latent = true;
  bool safeguard = true;

  void validate() const;
  Index decode_len(int n_features) const {
    return max_decode_len > 0 ? max_decode_len : static_cast<Index>(n_features) + 2;
  }
};

struct CandidateResult {
  TokenSequence seed;
  Vector<float> latent;
  TokenSequence generated;
  std::vector<int> decoded;
  UtilityScore downstream;
  double predicted_before = 0.0;
  double predicted_after = 0.0;
};

/// Top-k corpus sequences by utility, one per distinct canonical set (the
/// highest-utility duplicate wins). Ties prefer smaller then lexicographically
/// earlier subsets. Returns fewer than k when the corpus has fewer sets.
std::vector<TokenSequence> select_seeds(const FeatureTokenVocab& vocab,
                                        const std::vector<CorpusRecord>& corpus,
                                        int k);

/// Gradient ascent driven by any value-and-gradient oracle
/// double(const Vector<S>&, Vector<S>& grad). With the safeguard on, a step
/// that would lower the value retries with a halved step size (5 halvings),
/// then stops; the final value can never undercut the start.
template <class S, class F>
Vector<S> ascend_with(F&& value_grad, Vector<S> e, const SearchConfig& cfg) {
  cfg.validate();
  if (!e.allFinite()) throw SearchError("ascent start point is not finite");
  Vector<S> g(e.size());
  Vector<S> g_trial(e.size());
  for (int step = 0; step < cfg.n_steps; ++step) {
    const double v0 = value_grad(std::as_const(e), g);
    if (!std::isfinite(v0) || !g.allFinite())
      throw SearchError("non-finite evaluator gradient during ascent");
    if (!cfg.safeguard) {
      e += static_cast<S>(cfg.eta) * g;
      continue;
    }
    double stepsize = cfg.eta;
    bool accepted = false;
    for (int attempt = 0; attempt <= 5 && !accepted; ++attempt) {
      Vector<S> trial = e + static_cast<S>(stepsize) * g;
      const double v1 = value_grad(std::as_const(trial), g_trial);
      if (std::isfinite(v1) && v1 >= v0) {
        e = std::move(trial);
        accepted = true;
      } else {
        stepsize /= 2;
      }
    }
    // A fully rejected step would repeat verbatim; the ascent is done.
    if (!accepted) break;
  }
  return e;
}

/// Ascent on the model's utility evaluator.
Vector<float> ascend(const SubsetVae<float>& model, Vector<float> latent,
                     const SearchConfig& cfg);

/// Raw emission cleanup: cut at the first EOS, drop special tokens, dedupe
/// and sort the surviving feature indices.
std::vector<int> postprocess_generated(const FeatureTokenVocab& vocab,
                                       const std::vector<int>& raw);

/// Greedy argmax decoding from SOS until EOS or the length cap, then
/// canonicalized. Throws SearchError when no feature token survives.
TokenSequence generate(const SubsetVae<float>& model, const Vector<float>& latent,
                       Index max_len);

/// Full search: seeds -> encode -> ascend -> generate -> downstream scoring on
/// the internal split of `a`; returns the argmax candidate (score, then
/// smaller set, then lexicographic). Seeds that fail to decode are skipped
/// with a note in `diagnostics`. Throws SearchError if every seed fails.
CandidateResult select_best(const SubsetVae<float>& model,
                            const std::vector<CorpusRecord>& corpus,
                            const Dataset& a, const ModelKind& downstream,
                            const SearchConfig& cfg, std::uint64_t seed,
                            std::vector<CandidateResult>* all_candidates = nullptr,
                            std::vector<std::string>* diagnostics = nullptr);

}  // namespace fsgen
