#include "fsgen/search.hpp"

#include <algorithm>
#include <map>
#include <random>

namespace fsgen {

void SearchConfig::validate() const {
  if (top_k < 1) throw ConfigError("top_k must be >= 1");
  if (!(eta > 0.0)) throw ConfigError("eta must be positive");
  if (n_steps < 0) throw ConfigError("n_steps must be >= 0");
  if (max_decode_len < 0) throw ConfigError("max_decode_len must be >= 0");
}

std::vector<TokenSequence> select_seeds(const FeatureTokenVocab& vocab,
                                        const std::vector<CorpusRecord>& corpus,
                                        int k) {
  if (k < 1) throw ConfigError("select_seeds: k must be >= 1");
  if (corpus.empty()) throw DataError("select_seeds: empty corpus");

  std::map<std::vector<int>, double> best;
  for (const auto& rec : corpus) {
    validate_record(vocab, rec);
    std::vector<int> key(rec.tokens.interior().begin(),
                         rec.tokens.interior().end());
    std::sort(key.begin(), key.end());
    key.erase(std::unique(key.begin(), key.end()), key.end());
    auto [it, fresh] = best.emplace(std::move(key), rec.utility);
    if (!fresh && rec.utility > it->second) it->second = rec.utility;
  }

  std::vector<std::pair<const std::vector<int>*, double>> ranked;
  ranked.reserve(best.size());
  for (const auto& [set, utility] : best) ranked.push_back({&set, utility});
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    if (a.first->size() != b.first->size()) return a.first->size() < b.first->size();
    return *a.first < *b.first;
  });

  std::vector<TokenSequence> seeds;
  const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(k),
                                                 ranked.size());
  seeds.reserve(take);
  for (std::size_t i = 0; i < take; ++i)
    seeds.push_back(wrap_interior(vocab, *ranked[i].first));
  return seeds;
}

Vector<float> ascend(const SubsetVae<float>& model, Vector<float> latent,
                     const SearchConfig& cfg) {
  auto oracle = [&model](const Vector<float>& e, Vector<float>& grad) {
    double value = 0.0;
    grad = model.utility_gradient(e, &value);
    return value;
  };
  return ascend_with(oracle, std::move(latent), cfg);
}

std::vector<int> postprocess_generated(const FeatureTokenVocab& vocab,
                                       const std::vector<int>& raw) {
  std::vector<int> kept;
  for (int tok : raw) {
    if (tok == vocab.eos()) break;
    if (vocab.is_feature(tok)) kept.push_back(tok);
  }
  std::sort(kept.begin(), kept.end());
  kept.erase(std::unique(kept.begin(), kept.end()), kept.end());
  return kept;
}

TokenSequence generate(const SubsetVae<float>& model, const Vector<float>& latent,
                       Index max_len) {
  if (!latent.allFinite()) throw SearchError("generation latent is not finite");
  const FeatureTokenVocab& vocab = model.vocab();
  std::vector<int> prefix{vocab.sos()};
  std::vector<int> raw;
  for (Index emitted = 0; emitted < max_len; ++emitted) {
    Vector<float> probs = model.decode_step(latent, prefix);
    Index argmax = 0;
    probs.maxCoeff(&argmax);
    const int tok = static_cast<int>(argmax);
    raw.push_back(tok);
    if (tok == vocab.eos()) break;
    // Only feature tokens may extend the prefix; a saturated prefix ends the
    // emission loop since nothing further can condition the decoder.
    if (vocab.is_feature(tok)) {
      if (static_cast<Index>(prefix.size()) > vocab.n_features) break;
      prefix.push_back(tok);
    }
  }
  std::vector<int> decoded = postprocess_generated(vocab, raw);
  if (decoded.empty())
    throw SearchError("generation produced no feature tokens before EOS");
  return subset_to_sequence(vocab, decoded);
}

CandidateResult select_best(const SubsetVae<float>& model,
                            const std::vector<CorpusRecord>& corpus,
                            const Dataset& a, const ModelKind& downstream,
                            const SearchConfig& cfg, std::uint64_t seed,
                            std::vector<CandidateResult>* all_candidates,
                            std::vector<std::string>* diagnostics) {
  cfg.validate();
  if (model.vocab().n_features != static_cast<int>(a.n_features()))
    throw DataError("search model and dataset disagree on the feature count");

  const std::vector<TokenSequence> seeds =
      select_seeds(model.vocab(), corpus, cfg.top_k);
  auto [train, val] = internal_split(a, derive_seed(seed, "internal"));
  const std::uint64_t score_seed = derive_seed(seed, "score");
  std::mt19937_64 eps_rng(derive_seed(seed, "search-eps"));
  std::normal_distribution<double> gauss(0.0, 1.0);
  const Index max_len = cfg.decode_len(model.vocab().n_features);

  std::vector<CandidateResult> candidates;
  for (const auto& seed_seq : seeds) {
    try {
      LatentDistribution<float> dist = model.encode(seed_seq);
      Vector<float> start;
      if (cfg.use_mean_latent) {
        start = dist.m;
      } else {
        Vector<float> eps(dist.m.size());
        for (Index i = 0; i < eps.size(); ++i)
          eps(i) = static_cast<float>(gauss(eps_rng));
        start = reparameterize(dist, eps);
      }

      CandidateResult cand;
      cand.seed = seed_seq;
      cand.predicted_before = model.evaluate_utility(start);
      cand.latent = ascend(model, start, cfg);
      cand.predicted_after = model.evaluate_utility(cand.latent);
      cand.generated = generate(model, cand.latent, max_len);
      cand.decoded = sequence_to_subset(model.vocab(), cand.generated);
      cand.downstream =
          fit_predict_score(train, val, cand.decoded, downstream, score_seed);
      candidates.push_back(std::move(cand));
    } catch (const SearchError& err) {
      if (diagnostics) {
        std::string set;
        for (int t : seed_seq.interior()) set += std::to_string(t) + " ";
        diagnostics->push_back("seed [" + set + "] skipped: " + err.what());
      }
    }
  }
  if (candidates.empty())
    throw SearchError(
        "every seed failed to decode a non-empty subset; inspect the corpus "
        "and the trained model");

  const CandidateResult* top = &candidates.front();
  for (const auto& cand : candidates) {
    if (cand.downstream.value != top->downstream.value) {
      if (cand.downstream.value > top->downstream.value) top = &cand;
    } else if (cand.decoded.size() != top->decoded.size()) {
      if (cand.decoded.size() < top->decoded.size()) top = &cand;
    } else if (cand.decoded < top->decoded) {
      top = &cand;
    }
  }
  CandidateResult winner = *top;
  if (all_candidates) *all_candidates = std::move(candidates);
  return winner;
}

}  // namespace fsgen
