#pragma once

#include "fsgen/autodiff.hpp"
#include "fsgen/corpus.hpp"
#include "fsgen/nn.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace fsgen {

struct Hyperparams {
  int token_embed_dim = 64;
  int n_layers_enc = 2;
  int n_layers_dec = 2;
  int n_heads = 8;
  int ffn_dim = 256;
  int latent_dim = 64;
  double alpha = 0.8;
  double beta = 0.2;
  double gamma = 0.001;
  Index batch_size = 1024;
  int epochs = 100;
  double learning_rate = 1e-4;
  int n_shuffles = 25;
  double dropout = 0.1;
  int evaluator_width = 200;

  void validate() const;
};

template <class S>
struct LatentDistribution {
  Vector<S> m;
  Vector<S> sigma;  // log-scale: the sampled point is m + eps .* exp(sigma)
};

/// e* = m + eps .* exp(sigma), elementwise.
template <class S>
Vector<S> reparameterize(const LatentDistribution<S>& dist, const Vector<S>& eps) {
  if (eps.size() != dist.m.size() || dist.sigma.size() != dist.m.size())
    throw DataError("reparameterize: vector length mismatch");
  return (dist.m.array() + eps.array() * dist.sigma.array().exp()).matrix();
}

/// Mean over latent dimensions of exp(sigma) - (1 + sigma) + m^2.
template <class S>
double kl_term(const LatentDistribution<S>& dist) {
  if (dist.sigma.size() != dist.m.size())
    throw DataError("kl_term: vector length mismatch");
  const auto& m = dist.m.array();
  const auto& s = dist.sigma.array();
  return static_cast<double>((s.exp() - (S(1) + s) + m.square()).mean());
}

struct TrainMeta {
  std::uint64_t seed = 0;
  int epochs_run = 0;
  double final_loss = 0.0;
  double final_rec = 0.0;
  double final_evt = 0.0;
  double final_kl = 0.0;
};

struct LossRow {
  int epoch = 0;
  double total = 0.0;
  double rec = 0.0;
  double evt = 0.0;
  double kl = 0.0;
};

/// Transformer encoder/decoder over token sequences with a variational latent
/// bottleneck and a feed-forward utility evaluator, trained jointly on
/// reconstruction, utility regression and a KL penalty.
template <class S>
class SubsetVae {
 public:
  struct Losses {
    double total = 0.0;
    double rec = 0.0;
    double evt = 0.0;
    double kl = 0.0;
  };

  /// Fresh model with seed-deterministic initialization.
  SubsetVae(FeatureTokenVocab vocab, Hyperparams hp, std::uint64_t init_seed);

  const FeatureTokenVocab& vocab() const { return vocab_; }
  const Hyperparams& hyper() const { return hp_; }
  ParamStore<S>& params() { return params_; }
  const ParamStore<S>& params() const { return params_; }

  /// Mean/log-scale heads after masked mean-pooling the encoded sequence.
  LatentDistribution<S> encode(const TokenSequence& seq) const;
  std::vector<LatentDistribution<S>> encode_many(
      const std::vector<TokenSequence>& seqs) const;

  /// Next-token distribution given a SOS-led prefix; sums to 1.
  Vector<S> decode_step(const Vector<S>& e_star, const std::vector<int>& prefix) const;

  /// Teacher-forced -log likelihood of the wire sequence (interior + EOS).
  double sequence_nll(const Vector<S>& e_star, const TokenSequence& seq) const;

  double evaluate_utility(const Vector<S>& e_star) const;

  /// d evaluate_utility / d e_star, analytic; optionally returns the value.
  Vector<S> utility_gradient(const Vector<S>& e_star, double* value = nullptr) const;

  /// Forward losses over a record batch without touching parameters.
  /// eps_rng == nullptr uses the latent mean (eps = 0).
  Losses joint_loss(const std::vector<CorpusRecord>& batch,
                    std::mt19937_64* eps_rng) const;

  /// Like joint_loss but zeroes parameter gradients, then runs backward so
  /// they hold this batch's exact gradient. Dropout is never applied here;
  /// the entry point exists for gradient verification against finite
  /// differences.
  Losses joint_loss_backward(const std::vector<CorpusRecord>& batch,
                             std::mt19937_64* eps_rng);

  /// Adam training over shuffled length-bucketed batches; returns one loss
  /// row per epoch. Deterministic given the seed.
  std::vector<LossRow> train(const std::vector<CorpusRecord>& corpus,
                             std::uint64_t seed);

  TrainMeta meta;

 private:
  struct Batch {
    Index n = 0;
    Index len_enc = 0;
    Index len_dec = 0;
    std::vector<int> enc_ids;
    Matrix<S> enc_mask;
    std::vector<int> dec_in;
    std::vector<int> dec_tgt;
    std::vector<S> tgt_weight;
    Matrix<S> dec_mask;
    Matrix<S> utility;  // n x 1
  };

  struct Fwd {
    ad::VarId m, sigma, e_star, rec, evt, kl, total;
  };

  Batch make_batch(const std::vector<const CorpusRecord*>& records) const;
  Fwd forward_batch(ad::Tape<S>& tape, const Batch& batch, bool track,
                    std::mt19937_64* drop_rng, std::mt19937_64* eps_rng) const;

  ad::VarId pv(ad::Tape<S>& tape, const std::string& name, bool track) const;
  ad::VarId linear(ad::Tape<S>& tape, ad::VarId x, const std::string& prefix,
                   bool track) const;
  ad::VarId norm(ad::Tape<S>& tape, ad::VarId x, const std::string& prefix,
                 bool track) const;
  ad::VarId drop(ad::Tape<S>& tape, ad::VarId x, std::mt19937_64* rng) const;
  ad::VarId mha(ad::Tape<S>& tape, ad::VarId xq, ad::VarId xkv,
                const std::string& prefix, const ad::AttentionDims& dims,
                const Matrix<S>& key_mask, bool causal, bool track,
                std::mt19937_64* drop_rng) const;
  ad::VarId encoder_pooled(ad::Tape<S>& tape, const std::vector<int>& ids,
                           const Matrix<S>& mask, Index n, Index len, bool track,
                           std::mt19937_64* drop_rng) const;
  ad::VarId decoder_logits(ad::Tape<S>& tape, ad::VarId e_star,
                           const std::vector<int>& dec_in, const Matrix<S>& dec_mask,
                           Index n, Index len, bool track,
                           std::mt19937_64* drop_rng) const;
  ad::VarId evaluator_out(ad::Tape<S>& tape, ad::VarId e_star, bool track) const;

  FeatureTokenVocab vocab_;
  Hyperparams hp_;
  ParamStore<S> params_;
};

extern template class SubsetVae<float>;
extern template class SubsetVae<double>;

}  // namespace fsgen
