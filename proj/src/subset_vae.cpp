#include "fsgen/subset_vae.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace fsgen {

void Hyperparams::validate() const {
  if (token_embed_dim < 1 || n_layers_enc < 1 || n_layers_dec < 1 || n_heads < 1 ||
      ffn_dim < 1 || latent_dim < 1 || evaluator_width < 1)
    throw ConfigError("model dimensions must be positive");
  if (token_embed_dim % n_heads != 0)
    throw ConfigError("n_heads must divide token_embed_dim");
  if (alpha < 0 || beta < 0 || gamma < 0)
    throw ConfigError("loss weights must be non-negative");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (!(learning_rate > 0)) throw ConfigError("learning_rate must be positive");
  if (n_shuffles < 0) throw ConfigError("n_shuffles must be >= 0");
  if (dropout < 0 || dropout >= 1) throw ConfigError("dropout must lie in [0,1)");
}

namespace {

template <class S>
Matrix<S> gaussian_matrix(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix<S> m(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) m(r, c) = static_cast<S>(g(rng));
  return m;
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

template <class S>
SubsetVae<S>::SubsetVae(FeatureTokenVocab vocab, Hyperparams hp,
                        std::uint64_t init_seed)
    : vocab_(vocab), hp_(hp) {
  hp_.validate();
  if (vocab_.n_features < 1) throw ConfigError("vocabulary needs >= 1 feature");

  const Index d = hp_.token_embed_dim;
  const Index V = vocab_.size();
  const Index lat = hp_.latent_dim;
  const Index ffn = hp_.ffn_dim;
  const Index W = hp_.evaluator_width;

  auto mk_linear = [&](const std::string& prefix, Index in, Index out) {
    params_.create(prefix + ".w", in, out);
    params_.create(prefix + ".b", 1, out);
  };
  auto mk_norm = [&](const std::string& prefix) {
    params_.create(prefix + ".g", 1, d);
    params_.create(prefix + ".b", 1, d);
  };
  auto mk_attn = [&](const std::string& prefix) {
    for (const char* side : {".q", ".k", ".v", ".o"})
      mk_linear(prefix + side, d, d);
  };

  params_.create("embed.table", V, d);
  for (int i = 0; i < hp_.n_layers_enc; ++i) {
    std::string L = "enc" + std::to_string(i);
    mk_attn(L + ".attn");
    mk_norm(L + ".ln1");
    mk_linear(L + ".ffn.1", d, ffn);
    mk_linear(L + ".ffn.2", ffn, d);
    mk_norm(L + ".ln2");
  }
  mk_linear("enc.head_m", d, lat);
  mk_linear("enc.head_s", d, lat);
  mk_linear("dec.mem", lat, d);
  for (int i = 0; i < hp_.n_layers_dec; ++i) {
    std::string L = "dec" + std::to_string(i);
    mk_attn(L + ".self");
    mk_norm(L + ".ln1");
    mk_attn(L + ".cross");
    mk_norm(L + ".ln2");
    mk_linear(L + ".ffn.1", d, ffn);
    mk_linear(L + ".ffn.2", ffn, d);
    mk_norm(L + ".ln3");
  }
  mk_linear("dec.out", d, V);
  mk_linear("evl.1", lat, W);
  mk_linear("evl.2", W, W);
  mk_linear("evl.3", W, 1);

  std::mt19937_64 rng(derive_seed(init_seed, "init"));
  for (auto& p : params_) {
    if (ends_with(p.name, ".g"))
      p.value.setOnes();
    else if (p.name == "enc.head_s.b")
      // Log-std starts low so early latent samples stay close to the mean;
      // a unit-noise start lets the decoder learn to ignore its conditioning.
      p.value.setConstant(S(-3));
    else if (p.value.rows() == 1)
      p.value.setZero();
    else if (p.name == "embed.table")
      fill_normal(p.value, S(0.02), rng);
    else
      fill_xavier(p.value, rng);
  }
}

template <class S>
ad::VarId SubsetVae<S>::pv(ad::Tape<S>& tape, const std::string& name,
                           bool track) const {
  const Param<S>& p = params_.at(name);
  // Tracking binds the tape leaf to the live parameter so backward() folds
  // gradients into it; only the training path requests this.
  if (track) return tape.leaf(const_cast<Param<S>&>(p));
  return tape.leaf(p.value);
}

template <class S>
ad::VarId SubsetVae<S>::linear(ad::Tape<S>& tape, ad::VarId x,
                               const std::string& prefix, bool track) const {
  ad::VarId y = ad::matmul(tape, x, pv(tape, prefix + ".w", track));
  return ad::add_row(tape, y, pv(tape, prefix + ".b", track));
}

template <class S>
ad::VarId SubsetVae<S>::norm(ad::Tape<S>& tape, ad::VarId x,
                             const std::string& prefix, bool track) const {
  return ad::layer_norm(tape, x, pv(tape, prefix + ".g", track),
                        pv(tape, prefix + ".b", track));
}

template <class S>
ad::VarId SubsetVae<S>::drop(ad::Tape<S>& tape, ad::VarId x,
                             std::mt19937_64* rng) const {
  if (!rng || hp_.dropout <= 0.0) return x;
  const S keep = S(1) - static_cast<S>(hp_.dropout);
  std::bernoulli_distribution coin(static_cast<double>(keep));
  Matrix<S> mask(tape.val(x).rows(), tape.val(x).cols());
  for (Index r = 0; r < mask.rows(); ++r)
    for (Index c = 0; c < mask.cols(); ++c) mask(r, c) = coin(*rng) ? S(1) : S(0);
  return ad::dropout(tape, x, std::move(mask), keep);
}

template <class S>
ad::VarId SubsetVae<S>::mha(ad::Tape<S>& tape, ad::VarId xq, ad::VarId xkv,
                            const std::string& prefix, const ad::AttentionDims& dims,
                            const Matrix<S>& key_mask, bool causal, bool track,
                            std::mt19937_64* drop_rng) const {
  ad::VarId q = linear(tape, xq, prefix + ".q", track);
  ad::VarId k = linear(tape, xkv, prefix + ".k", track);
  ad::VarId v = linear(tape, xkv, prefix + ".v", track);
  ad::VarId att = ad::attention(tape, q, k, v, dims, key_mask, causal);
  ad::VarId o = linear(tape, att, prefix + ".o", track);
  return drop(tape, o, drop_rng);
}

template <class S>
ad::VarId SubsetVae<S>::encoder_pooled(ad::Tape<S>& tape, const std::vector<int>& ids,
                                       const Matrix<S>& mask, Index n, Index len,
                                       bool track, std::mt19937_64* drop_rng) const {
  const Index d = hp_.token_embed_dim;
  ad::VarId x = ad::embedding(tape, pv(tape, "embed.table", track), ids);
  Matrix<S> pe = sinusoidal_positions<S>(len, d).replicate(n, 1);
  x = ad::add_const(tape, x, pe);
  ad::AttentionDims dims{n, len, len, hp_.n_heads};
  for (int i = 0; i < hp_.n_layers_enc; ++i) {
    std::string L = "enc" + std::to_string(i);
    ad::VarId h = mha(tape, x, x, L + ".attn", dims, mask, false, track, drop_rng);
    x = norm(tape, ad::add(tape, x, h), L + ".ln1", track);
    ad::VarId f = ad::gelu(tape, linear(tape, x, L + ".ffn.1", track));
    f = linear(tape, drop(tape, f, drop_rng), L + ".ffn.2", track);
    x = norm(tape, ad::add(tape, x, f), L + ".ln2", track);
  }
  return ad::masked_mean_pool(tape, x, mask);
}

template <class S>
ad::VarId SubsetVae<S>::decoder_logits(ad::Tape<S>& tape, ad::VarId e_star,
                                       const std::vector<int>& dec_in,
                                       const Matrix<S>& dec_mask, Index n, Index len,
                                       bool track, std::mt19937_64* drop_rng) const {
  const Index d = hp_.token_embed_dim;
  ad::VarId mem = linear(tape, e_star, "dec.mem", track);
  ad::VarId x = ad::embedding(tape, pv(tape, "embed.table", track), dec_in);
  Matrix<S> pe = sinusoidal_positions<S>(len, d).replicate(n, 1);
  x = ad::add_const(tape, x, pe);
  ad::AttentionDims self_dims{n, len, len, hp_.n_heads};
  ad::AttentionDims cross_dims{n, len, 1, hp_.n_heads};
  Matrix<S> mem_mask = Matrix<S>::Ones(n, 1);
  for (int i = 0; i < hp_.n_layers_dec; ++i) {
    std::string L = "dec" + std::to_string(i);
    ad::VarId h = mha(tape, x, x, L + ".self", self_dims, dec_mask, true, track, drop_rng);
    x = norm(tape, ad::add(tape, x, h), L + ".ln1", track);
    ad::VarId c = mha(tape, x, mem, L + ".cross", cross_dims, mem_mask, false, track,
                      drop_rng);
    x = norm(tape, ad::add(tape, x, c), L + ".ln2", track);
    ad::VarId f = ad::gelu(tape, linear(tape, x, L + ".ffn.1", track));
    f = linear(tape, drop(tape, f, drop_rng), L + ".ffn.2", track);
    x = norm(tape, ad::add(tape, x, f), L + ".ln3", track);
  }
  return linear(tape, x, "dec.out", track);
}

template <class S>
ad::VarId SubsetVae<S>::evaluator_out(ad::Tape<S>& tape, ad::VarId e_star,
                                      bool track) const {
  ad::VarId h = ad::tanh_of(tape, linear(tape, e_star, "evl.1", track));
  h = ad::tanh_of(tape, linear(tape, h, "evl.2", track));
  return linear(tape, h, "evl.3", track);
}

template <class S>
typename SubsetVae<S>::Batch SubsetVae<S>::make_batch(
    const std::vector<const CorpusRecord*>& records) const {
  if (records.empty()) throw DataError("joint loss batch must be non-empty");
  Batch b;
  b.n = static_cast<Index>(records.size());
  for (const auto* rec : records) {
    validate_record(vocab_, *rec);
    b.len_enc = std::max(b.len_enc, static_cast<Index>(rec->tokens.wire.size()));
  }
  b.len_dec = b.len_enc - 1;

  b.enc_ids.assign(static_cast<std::size_t>(b.n * b.len_enc), vocab_.pad());
  b.dec_in.assign(static_cast<std::size_t>(b.n * b.len_dec), vocab_.pad());
  b.dec_tgt.assign(static_cast<std::size_t>(b.n * b.len_dec), vocab_.pad());
  b.tgt_weight.assign(static_cast<std::size_t>(b.n * b.len_dec), S(0));
  b.enc_mask = Matrix<S>::Zero(b.n, b.len_enc);
  b.dec_mask = Matrix<S>::Zero(b.n, b.len_dec);
  b.utility.resize(b.n, 1);

  const S inv_n = S(1) / static_cast<S>(b.n);
  for (Index r = 0; r < b.n; ++r) {
    const auto& wire = records[static_cast<std::size_t>(r)]->tokens.wire;
    const Index len = static_cast<Index>(wire.size());
    for (Index j = 0; j < len; ++j) {
      b.enc_ids[static_cast<std::size_t>(r * b.len_enc + j)] =
          wire[static_cast<std::size_t>(j)];
      b.enc_mask(r, j) = S(1);
    }
    // Teacher forcing: inputs are wire[0..len-2], targets wire[1..len-1].
    for (Index j = 0; j + 1 < len; ++j) {
      b.dec_in[static_cast<std::size_t>(r * b.len_dec + j)] =
          wire[static_cast<std::size_t>(j)];
      b.dec_tgt[static_cast<std::size_t>(r * b.len_dec + j)] =
          wire[static_cast<std::size_t>(j + 1)];
      b.tgt_weight[static_cast<std::size_t>(r * b.len_dec + j)] = inv_n;
      b.dec_mask(r, j) = S(1);
    }
    b.utility(r, 0) =
        static_cast<S>(records[static_cast<std::size_t>(r)]->utility);
  }
  return b;
}

template <class S>
typename SubsetVae<S>::Fwd SubsetVae<S>::forward_batch(
    ad::Tape<S>& tape, const Batch& batch, bool track, std::mt19937_64* drop_rng,
    std::mt19937_64* eps_rng) const {
  Fwd f;
  ad::VarId pooled = encoder_pooled(tape, batch.enc_ids, batch.enc_mask, batch.n,
                                    batch.len_enc, track, drop_rng);
  f.m = linear(tape, pooled, "enc.head_m", track);
  f.sigma = linear(tape, pooled, "enc.head_s", track);

  Matrix<S> eps = eps_rng ? gaussian_matrix<S>(batch.n, hp_.latent_dim, *eps_rng)
                          : Matrix<S>::Zero(batch.n, hp_.latent_dim);
  f.e_star = ad::reparameterize(tape, f.m, f.sigma, std::move(eps));

  ad::VarId logits = decoder_logits(tape, f.e_star, batch.dec_in, batch.dec_mask,
                                    batch.n, batch.len_dec, track, drop_rng);
  f.rec = ad::sequence_nll(tape, logits, batch.dec_tgt, batch.tgt_weight);
  ad::VarId pred = evaluator_out(tape, f.e_star, track);
  f.evt = ad::mse(tape, pred, batch.utility);
  f.kl = ad::kl_penalty(tape, f.m, f.sigma);
  f.total = ad::weighted_sum(
      tape, {{static_cast<S>(hp_.alpha), f.evt},
             {static_cast<S>(hp_.beta), f.rec},
             {static_cast<S>(hp_.gamma), f.kl}});
  return f;
}

template <class S>
LatentDistribution<S> SubsetVae<S>::encode(const TokenSequence& seq) const {
  return encode_many({seq}).front();
}

template <class S>
std::vector<LatentDistribution<S>> SubsetVae<S>::encode_many(
    const std::vector<TokenSequence>& seqs) const {
  if (seqs.empty()) throw DataError("encode: no sequences");
  Index len = 0;
  for (const auto& s : seqs) {
    validate_wire(vocab_, s);
    len = std::max(len, static_cast<Index>(s.wire.size()));
  }
  const Index n = static_cast<Index>(seqs.size());
  std::vector<int> ids(static_cast<std::size_t>(n * len), vocab_.pad());
  Matrix<S> mask = Matrix<S>::Zero(n, len);
  for (Index r = 0; r < n; ++r) {
    const auto& wire = seqs[static_cast<std::size_t>(r)].wire;
    for (Index j = 0; j < static_cast<Index>(wire.size()); ++j) {
      ids[static_cast<std::size_t>(r * len + j)] = wire[static_cast<std::size_t>(j)];
      mask(r, j) = S(1);
    }
  }
  ad::Tape<S> tape;
  ad::VarId pooled = encoder_pooled(tape, ids, mask, n, len, false, nullptr);
  ad::VarId m = linear(tape, pooled, "enc.head_m", false);
  ad::VarId sg = linear(tape, pooled, "enc.head_s", false);
  std::vector<LatentDistribution<S>> out(static_cast<std::size_t>(n));
  for (Index r = 0; r < n; ++r) {
    out[static_cast<std::size_t>(r)].m = tape.val(m).row(r).transpose();
    out[static_cast<std::size_t>(r)].sigma = tape.val(sg).row(r).transpose();
  }
  return out;
}

template <class S>
Vector<S> SubsetVae<S>::decode_step(const Vector<S>& e_star,
                                    const std::vector<int>& prefix) const {
  if (prefix.empty() || prefix.front() != vocab_.sos())
    throw DataError("decode prefix must start with SOS");
  if (static_cast<Index>(prefix.size()) > vocab_.n_features + 1)
    throw DataError("decode prefix exceeds the maximum sequence length");
  for (std::size_t i = 1; i < prefix.size(); ++i)
    if (!vocab_.is_feature(prefix[i]))
      throw DataError("decode prefix interior must be feature tokens");
  if (e_star.size() != hp_.latent_dim)
    throw DataError("latent point has wrong dimension");

  const Index len = static_cast<Index>(prefix.size());
  ad::Tape<S> tape;
  ad::VarId e = tape.leaf(e_star.transpose());
  Matrix<S> mask = Matrix<S>::Ones(1, len);
  ad::VarId logits =
      decoder_logits(tape, e, prefix, mask, 1, len, false, nullptr);
  Vector<S> row = tape.val(logits).row(len - 1).transpose();
  S mx = row.maxCoeff();
  Vector<S> probs = (row.array() - mx).exp().matrix();
  return probs / probs.sum();
}

template <class S>
double SubsetVae<S>::sequence_nll(const Vector<S>& e_star,
                                  const TokenSequence& seq) const {
  validate_wire(vocab_, seq);
  if (e_star.size() != hp_.latent_dim)
    throw DataError("latent point has wrong dimension");
  const auto& wire = seq.wire;
  const Index len = static_cast<Index>(wire.size()) - 1;
  std::vector<int> dec_in(wire.begin(), wire.end() - 1);
  std::vector<int> tgt(wire.begin() + 1, wire.end());
  std::vector<S> w(static_cast<std::size_t>(len), S(1));
  ad::Tape<S> tape;
  ad::VarId e = tape.leaf(e_star.transpose());
  Matrix<S> mask = Matrix<S>::Ones(1, len);
  ad::VarId logits = decoder_logits(tape, e, dec_in, mask, 1, len, false, nullptr);
  ad::VarId nll = ad::sequence_nll(tape, logits, std::move(tgt), std::move(w));
  return static_cast<double>(tape.val(nll)(0, 0));
}

template <class S>
double SubsetVae<S>::evaluate_utility(const Vector<S>& e_star) const {
  if (e_star.size() != hp_.latent_dim)
    throw DataError("latent point has wrong dimension");
  ad::Tape<S> tape;
  ad::VarId out = evaluator_out(tape, tape.leaf(e_star.transpose()), false);
  return static_cast<double>(tape.val(out)(0, 0));
}

template <class S>
Vector<S> SubsetVae<S>::utility_gradient(const Vector<S>& e_star,
                                         double* value) const {
  if (e_star.size() != hp_.latent_dim)
    throw DataError("latent point has wrong dimension");
  ad::Tape<S> tape;
  ad::VarId e = tape.leaf(e_star.transpose());
  ad::VarId out = evaluator_out(tape, e, false);
  tape.backward(out);
  if (value) *value = static_cast<double>(tape.val(out)(0, 0));
  return tape.grad(e).row(0).transpose();
}

template <class S>
typename SubsetVae<S>::Losses SubsetVae<S>::joint_loss(
    const std::vector<CorpusRecord>& batch, std::mt19937_64* eps_rng) const {
  std::vector<const CorpusRecord*> ptrs;
  ptrs.reserve(batch.size());
  for (const auto& r : batch) ptrs.push_back(&r);
  Batch b = make_batch(ptrs);
  ad::Tape<S> tape;
  Fwd f = forward_batch(tape, b, false, nullptr, eps_rng);
  Losses out;
  out.total = static_cast<double>(tape.val(f.total)(0, 0));
  out.rec = static_cast<double>(tape.val(f.rec)(0, 0));
  out.evt = static_cast<double>(tape.val(f.evt)(0, 0));
  out.kl = static_cast<double>(tape.val(f.kl)(0, 0));
  return out;
}

template <class S>
typename SubsetVae<S>::Losses SubsetVae<S>::joint_loss_backward(
    const std::vector<CorpusRecord>& batch, std::mt19937_64* eps_rng) {
  std::vector<const CorpusRecord*> ptrs;
  ptrs.reserve(batch.size());
  for (const auto& r : batch) ptrs.push_back(&r);
  Batch b = make_batch(ptrs);
  params_.zero_grads();
  ad::Tape<S> tape;
  Fwd f = forward_batch(tape, b, true, nullptr, eps_rng);
  tape.backward(f.total);
  Losses out;
  out.total = static_cast<double>(tape.val(f.total)(0, 0));
  out.rec = static_cast<double>(tape.val(f.rec)(0, 0));
  out.evt = static_cast<double>(tape.val(f.evt)(0, 0));
  out.kl = static_cast<double>(tape.val(f.kl)(0, 0));
  return out;
}

template <class S>
std::vector<LossRow> SubsetVae<S>::train(const std::vector<CorpusRecord>& corpus,
                                         std::uint64_t seed) {
  if (corpus.empty()) throw DataError("train: empty corpus");
  if (distinct_subsets(corpus) < 2)
    throw DataError("train: corpus needs at least 2 distinct subsets");

  std::mt19937_64 rng(derive_seed(seed, "train"));
  Adam<S> opt;
  opt.lr = static_cast<S>(hp_.learning_rate);
  const Index n = static_cast<Index>(corpus.size());
  const Index bs = std::min<Index>(hp_.batch_size, n);

  std::vector<LossRow> history;
  history.reserve(static_cast<std::size_t>(hp_.epochs));

  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (int epoch = 1; epoch <= hp_.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    // Length bucketing: sorting the shuffled order keeps batches tight while
    // the shuffle varies bucket membership between epochs.
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return corpus[a].tokens.wire.size() < corpus[b].tokens.wire.size();
    });
    std::vector<std::pair<Index, Index>> spans;
    for (Index start = 0; start < n; start += bs)
      spans.emplace_back(start, std::min(n, start + bs));
    std::shuffle(spans.begin(), spans.end(), rng);

    LossRow row;
    row.epoch = epoch;
    double weight = 0;
    for (auto [start, stop] : spans) {
      std::vector<const CorpusRecord*> ptrs;
      ptrs.reserve(static_cast<std::size_t>(stop - start));
      for (Index i = start; i < stop; ++i)
        ptrs.push_back(&corpus[order[static_cast<std::size_t>(i)]]);
      Batch b = make_batch(ptrs);
      ad::Tape<S> tape;
      Fwd f = forward_batch(tape, b, true, &rng, &rng);
      tape.backward(f.total);
      opt.step(params_);
      double w = static_cast<double>(b.n);
      row.total += w * static_cast<double>(tape.val(f.total)(0, 0));
      row.rec += w * static_cast<double>(tape.val(f.rec)(0, 0));
      row.evt += w * static_cast<double>(tape.val(f.evt)(0, 0));
      row.kl += w * static_cast<double>(tape.val(f.kl)(0, 0));
      weight += w;
    }
    row.total /= weight;
    row.rec /= weight;
    row.evt /= weight;
    row.kl /= weight;
    history.push_back(row);
  }

  meta.seed = seed;
  meta.epochs_run = hp_.epochs;
  meta.final_loss = history.back().total;
  meta.final_rec = history.back().rec;
  meta.final_evt = history.back().evt;
  meta.final_kl = history.back().kl;
  return history;
}

template class SubsetVae<float>;
template class SubsetVae<double>;

}  // namespace fsgen
