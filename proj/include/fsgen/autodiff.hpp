#pragma once

#include "fsgen/types.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace fsgen {

/// A learnable tensor. `grad` accumulates across Tape::backward calls until an
/// optimizer consumes it; `m`/`v` are Adam moment buffers.
template <class S>
struct Param {
  std::string name;
  Matrix<S> value;
  Matrix<S> grad;
  Matrix<S> m;
  Matrix<S> v;
};

namespace ad {

using VarId = std::int32_t;

/// Reverse-mode tape over dense matrices. Nodes are created in topological
/// order by construction, so backward() is a single reverse sweep. The tape
/// is single-use: build a graph, call backward once, discard.
template <class S>
class Tape {
 public:
  VarId leaf(Matrix<S> value) { return push(std::move(value), nullptr, {}); }

  VarId leaf(Param<S>& p) {
    Matrix<S> copy = p.value;
    return push(std::move(copy), &p, {});
  }

  VarId node(Matrix<S> value, std::function<void(Tape&)> back) {
    return push(std::move(value), nullptr, std::move(back));
  }

  const Matrix<S>& val(VarId id) const { return nodes_[check(id)].value; }

  Matrix<S>& grad(VarId id) { return nodes_[check(id)].grad; }

  /// Seeds d(root)/d(root) = 1 (root must be 1x1), sweeps the tape in reverse
  /// and folds leaf gradients into their bound Params.
  void backward(VarId root) {
    if (val(root).rows() != 1 || val(root).cols() != 1)
      throw Error("autodiff: backward root must be a scalar node");
    for (auto& n : nodes_) {
      n.grad.resize(n.value.rows(), n.value.cols());
      n.grad.setZero();
    }
    nodes_[static_cast<std::size_t>(root)].grad(0, 0) = S(1);
    for (std::size_t i = nodes_.size(); i-- > 0;)
      if (nodes_[i].back) nodes_[i].back(*this);
    for (auto& n : nodes_)
      if (n.param) {
        if (n.param->grad.size() == 0) {
          n.param->grad.resize(n.value.rows(), n.value.cols());
          n.param->grad.setZero();
        }
        n.param->grad += n.grad;
      }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct NodeRec {
    Matrix<S> value;
    Matrix<S> grad;
    std::function<void(Tape&)> back;
    Param<S>* param = nullptr;
  };

  VarId push(Matrix<S> value, Param<S>* param, std::function<void(Tape&)> back) {
    NodeRec rec;
    rec.value = std::move(value);
    rec.back = std::move(back);
    rec.param = param;
    nodes_.push_back(std::move(rec));
    return static_cast<VarId>(nodes_.size() - 1);
  }

  std::size_t check(VarId id) const {
    auto i = static_cast<std::size_t>(id);
    if (id < 0 || i >= nodes_.size()) throw Error("autodiff: bad node id");
    return i;
  }

  std::vector<NodeRec> nodes_;
};

namespace detail {

inline void require(bool cond, const char* what) {
  if (!cond) throw Error(std::string("autodiff: ") + what);
}

}  // namespace detail

template <class S>
VarId matmul(Tape<S>& t, VarId a, VarId b) {
  detail::require(t.val(a).cols() == t.val(b).rows(), "matmul shape mismatch");
  Matrix<S> y = t.val(a) * t.val(b);
  return t.node(std::move(y), [a, b, self = static_cast<VarId>(t.size())](Tape<S>& t) {
    const Matrix<S>& dy = t.grad(self);
    t.grad(a).noalias() += dy * t.val(b).transpose();
    t.grad(b).noalias() += t.val(a).transpose() * dy;
  });
}

template <class S>
VarId add(Tape<S>& t, VarId a, VarId b) {
  detail::require(t.val(a).rows() == t.val(b).rows() &&
                         t.val(a).cols() == t.val(b).cols(),
                     "add shape mismatch");
  Matrix<S> y = t.val(a) + t.val(b);
  return t.node(std::move(y), [a, b, self = static_cast<VarId>(t.size())](Tape<S>& t) {
    t.grad(a) += t.grad(self);
    t.grad(b) += t.grad(self);
  });
}

/// y = x with `bias` (1 x d) added to every row.
template <class S>
VarId add_row(Tape<S>& t, VarId x, VarId bias) {
  detail::require(t.val(bias).rows() == 1 && t.val(bias).cols() == t.val(x).cols(),
                     "add_row bias must be 1 x cols(x)");
  Matrix<S> y = t.val(x).rowwise() + t.val(bias).row(0);
  return t.node(std::move(y), [x, bias, self = static_cast<VarId>(t.size())](Tape<S>& t) {
    t.grad(x) += t.grad(self);
    t.grad(bias).row(0) += t.grad(self).colwise().sum();
  });
}

/// y = x + c for a constant matrix c (positional encodings).
template <class S>
VarId add_const(Tape<S>& t, VarId x, const Matrix<S>& c) {
  detail::require(t.val(x).rows() == c.rows() && t.val(x).cols() == c.cols(),
                     "add_const shape mismatch");
  Matrix<S> y = t.val(x) + c;
  return t.node(std::move(y), [x, self = static_cast<VarId>(t.size())](Tape<S>& t) {
    t.grad(x) += t.grad(self);
  });
}

template <class S>
VarId scale(Tape<S>& t, VarId x, S c) {
  Matrix<S> y = t.val(x) * c;
  return t.node(std::move(y), [x, c, self = static_cast<VarId>(t.size())](Tape<S>& t) {
    t.grad(x) += t.grad(self) * c;
  });
}

template <class S>
VarId tanh_of(Tape<S>& t, VarId x) {
  Matrix<S> y = t.val(x).array().tanh().matrix();
  return t.node(std::move(y), [x, self = static_cast<VarId>(t.size())](Tape<S>& t) {
    t.grad(x).array() +=
        t.grad(self).array() * (S(1) - t.val(self).array().square());
  });
}

/// Gaussian error linear unit, tanh approximation.
template <class S>
VarId gelu(Tape<S>& t, VarId x) {
  const S c = S(0.7978845608028654);  // sqrt(2/pi)
  const S a = S(0.044715);
  const Matrix<S>& xv = t.val(x);
  Matrix<S> th = (c * (xv.array() + a * xv.array().cube())).tanh().matrix();
  Matrix<S> y = (S(0.5) * xv.array() * (S(1) + th.array())).matrix();
  return t.node(std::move(y), [x, c, a, th = std::move(th),
                               self = static_cast<VarId>(t.size())](Tape<S>& t) {
    const auto& xv = t.val(x).array();
    auto dth = (S(1) - th.array().square()) * c * (S(1) + S(3) * a * xv.square());
    t.grad(x).array() +=
        t.grad(self).array() * (S(0.5) * (S(1) + th.array()) + S(0.5) * xv * dth);
  });
}

/// Row-wise layer normalization with learnable gain/bias (each 1 x d).
template <class S>
VarId layer_norm(Tape<S>& t, VarId x, VarId gamma, VarId beta, S eps = S(1e-5)) {
  const Matrix<S>& xv = t.val(x);
  const Index d = xv.cols();
  detail::require(t.val(gamma).rows() == 1 && t.val(gamma).cols() == d &&
                         t.val(beta).rows() == 1 && t.val(beta).cols() == d,
                     "layer_norm gain/bias must be 1 x cols(x)");
  Matrix<S> xhat(xv.rows(), d);
  Vector<S> inv_std(xv.rows());
  for (Index r = 0; r < xv.rows(); ++r) {
    S mu = xv.row(r).mean();
    S var = (xv.row(r).array() - mu).square().mean();
    S inv = S(1) / std::sqrt(var + eps);
    inv_std[r] = inv;
    xhat.row(r) = (xv.row(r).array() - mu) * inv;
  }
  Matrix<S> y = ((xhat.array().rowwise() * t.val(gamma).row(0).array()).rowwise() +
                 t.val(beta).row(0).array())
                    .matrix();
  return t.node(std::move(y),
                [x, gamma, beta, xhat = std::move(xhat), inv_std = std::move(inv_std),
                 self = static_cast<VarId>(t.size())](Tape<S>& t) {
    const Matrix<S>& dy = t.grad(self);
    const Index d = dy.cols();
    t.grad(gamma).row(0) += (dy.array() * xhat.array()).colwise().sum().matrix();
    t.grad(beta).row(0) += dy.colwise().sum();
    const auto& g = t.val(gamma).row(0).array();
    for (Index r = 0; r < dy.rows(); ++r) {
      auto dxhat = (dy.row(r).array() * g).eval();
      S m1 = dxhat.mean();
      S m2 = (dxhat * xhat.row(r).array()).mean();
      t.grad(x).row(r).array() +=
          inv_std[r] * (dxhat - m1 - xhat.row(r).array() * m2);
    }
    (void)d;
  });
}

/// Inverted dropout with an externally drawn 0/1 keep mask so training steps
/// stay reproducible. Skip the op entirely for evaluation.
template <class S>
VarId dropout(Tape<S>& t, VarId x, Matrix<S> keep, S keep_prob) {
  detail::require(keep.rows() == t.val(x).rows() && keep.cols() == t.val(x).cols(),
                     "dropout mask shape mismatch");
  detail::require(keep_prob > S(0), "dropout keep probability must be positive");
  Matrix<S> y = (t.val(x).array() * keep.array() / keep_prob).matrix();
  return t.node(std::move(y), [x, keep = std::move(keep), keep_prob,
                               self = static_cast<VarId>(t.size())](Tape<S>& t) {
    t.grad(x).array() += t.grad(self).array() * keep.array() / keep_prob;
  });
}

/// Row gather from an embedding table; backward scatter-adds.
template <class S>
VarId embedding(Tape<S>& t, VarId table, std::vector<int> ids) {
  const Matrix<S>& tab = t.val(table);
  Matrix<S> y(static_cast<Index>(ids.size()), tab.cols());
  for (std::size_t r = 0; r < ids.size(); ++r) {
    detail::require(ids[r] >= 0 && ids[r] < tab.rows(), "embedding id out of range");
    y.row(static_cast<Index>(r)) = tab.row(ids[r]);
  }
  return t.node(std::move(y), [table, ids = std::move(ids),
                               self = static_cast<VarId>(t.size())](Tape<S>& t) {
    const Matrix<S>& dy = t.grad(self);
    for (std::size_t r = 0; r < ids.size(); ++r)
      t.grad(table).row(ids[r]) += dy.row(static_cast<Index>(r));
  });
}

struct AttentionDims {
  Index batch = 0;
  Index len_q = 0;
  Index len_kv = 0;
  int heads = 1;
};

/// Scaled dot-product multi-head attention over flattened (batch*len) x dim
/// inputs. `key_mask` is batch x len_kv with 1 for attendable keys; masked and
/// causally hidden logits are pushed to -1e9 before the row softmax. Row
/// softmax weights are retained for the backward sweep.
template <class S>
VarId attention(Tape<S>& t, VarId q, VarId k, VarId v, const AttentionDims& dims,
                Matrix<S> key_mask, bool causal) {
  const Index B = dims.batch, Lq = dims.len_q, Lkv = dims.len_kv;
  const int H = dims.heads;
  const Index d = t.val(q).cols();
  detail::require(d % H == 0, "attention heads must divide the model width");
  detail::require(t.val(q).rows() == B * Lq && t.val(k).rows() == B * Lkv &&
                         t.val(v).rows() == B * Lkv && t.val(k).cols() == d &&
                         t.val(v).cols() == d,
                     "attention input shape mismatch");
  detail::require(key_mask.rows() == B && key_mask.cols() == Lkv,
                     "attention key mask must be batch x len_kv");
  detail::require(!causal || Lq == Lkv, "causal attention needs len_q == len_kv");

  const Index dh = d / H;
  const S scale = S(1) / std::sqrt(static_cast<S>(dh));
  const S neg = S(-1e9);

  Matrix<S> probs(B * H * Lq, Lkv);
  Matrix<S> out(B * Lq, d);
  const Matrix<S>&Q = t.val(q), &K = t.val(k), &V = t.val(v);
  for (Index b = 0; b < B; ++b) {
    for (int h = 0; h < H; ++h) {
      auto Qb = Q.block(b * Lq, h * dh, Lq, dh);
      auto Kb = K.block(b * Lkv, h * dh, Lkv, dh);
      Matrix<S> sc = Qb * Kb.transpose() * scale;
      for (Index j = 0; j < Lkv; ++j)
        if (key_mask(b, j) == S(0)) sc.col(j).setConstant(neg);
      if (causal)
        for (Index i = 0; i < Lq; ++i)
          for (Index j = i + 1; j < Lkv; ++j) sc(i, j) = neg;
      for (Index i = 0; i < Lq; ++i) {
        S mx = sc.row(i).maxCoeff();
        Vector<S> e = (sc.row(i).array() - mx).exp().matrix().transpose();
        sc.row(i) = e.transpose() / e.sum();
      }
      probs.block((b * H + h) * Lq, 0, Lq, Lkv) = sc;
      out.block(b * Lq, h * dh, Lq, dh).noalias() =
          sc * V.block(b * Lkv, h * dh, Lkv, dh);
    }
  }
  return t.node(std::move(out),
                [q, k, v, dims, scale, probs = std::move(probs),
                 self = static_cast<VarId>(t.size())](Tape<S>& t) {
    const Index B = dims.batch, Lq = dims.len_q, Lkv = dims.len_kv;
    const int H = dims.heads;
    const Index d = t.val(q).cols();
    const Index dh = d / H;
    const Matrix<S>& dO = t.grad(self);
    const Matrix<S>&Q = t.val(q), &K = t.val(k), &V = t.val(v);
    for (Index b = 0; b < B; ++b) {
      for (int h = 0; h < H; ++h) {
        auto Pb = probs.block((b * H + h) * Lq, 0, Lq, Lkv);
        auto dOb = dO.block(b * Lq, h * dh, Lq, dh);
        auto Vb = V.block(b * Lkv, h * dh, Lkv, dh);
        Matrix<S> dP = dOb * Vb.transpose();
        t.grad(v).block(b * Lkv, h * dh, Lkv, dh).noalias() +=
            Pb.transpose() * dOb;
        Vector<S> rs = (dP.array() * Pb.array()).rowwise().sum().matrix();
        Matrix<S> dS =
            (Pb.array() * (dP.array().colwise() - rs.array()) * scale).matrix();
        t.grad(q).block(b * Lq, h * dh, Lq, dh).noalias() +=
            dS * K.block(b * Lkv, h * dh, Lkv, dh);
        t.grad(k).block(b * Lkv, h * dh, Lkv, dh).noalias() +=
            dS.transpose() * Q.block(b * Lq, h * dh, Lq, dh);
      }
    }
  });
}

/// Per-sequence mean over unmasked rows of a flattened (batch*len) x dim
/// matrix. `mask` is batch x len; every sequence must keep at least one row.
template <class S>
VarId masked_mean_pool(Tape<S>& t, VarId x, Matrix<S> mask) {
  const Index B = mask.rows(), L = mask.cols();
  detail::require(t.val(x).rows() == B * L, "masked_mean_pool shape mismatch");
  const Matrix<S>& xv = t.val(x);
  Matrix<S> y(B, xv.cols());
  Vector<S> counts(B);
  for (Index b = 0; b < B; ++b) {
    counts[b] = mask.row(b).sum();
    detail::require(counts[b] > S(0), "masked_mean_pool: empty sequence");
    y.row(b).setZero();
    for (Index l = 0; l < L; ++l)
      if (mask(b, l) != S(0)) y.row(b) += xv.row(b * L + l);
    y.row(b) /= counts[b];
  }
  return t.node(std::move(y), [x, mask = std::move(mask), counts = std::move(counts),
                               self = static_cast<VarId>(t.size())](Tape<S>& t) {
    const Matrix<S>& dy = t.grad(self);
    const Index B = mask.rows(), L = mask.cols();
    for (Index b = 0; b < B; ++b)
      for (Index l = 0; l < L; ++l)
        if (mask(b, l) != S(0)) t.grad(x).row(b * L + l) += dy.row(b) / counts[b];
  });
}

/// e* = m + eps ⊙ exp(sigma), the sampling rule with the noise injected.
template <class S>
VarId reparameterize(Tape<S>& t, VarId m, VarId sigma, Matrix<S> eps) {
  detail::require(t.val(m).rows() == t.val(sigma).rows() &&
                         t.val(m).cols() == t.val(sigma).cols() &&
                         eps.rows() == t.val(m).rows() && eps.cols() == t.val(m).cols(),
                     "reparameterize shape mismatch");
  Matrix<S> y =
      (t.val(m).array() + eps.array() * t.val(sigma).array().exp()).matrix();
  return t.node(std::move(y), [m, sigma, eps = std::move(eps),
                               self = static_cast<VarId>(t.size())](Tape<S>& t) {
    const Matrix<S>& dy = t.grad(self);
    t.grad(m) += dy;
    t.grad(sigma).array() +=
        dy.array() * eps.array() * t.val(sigma).array().exp();
  });
}

/// Mean over all batch entries of exp(sigma) - (1 + sigma) + m^2.
template <class S>
VarId kl_penalty(Tape<S>& t, VarId m, VarId sigma) {
  detail::require(t.val(m).rows() == t.val(sigma).rows() &&
                         t.val(m).cols() == t.val(sigma).cols(),
                     "kl_penalty shape mismatch");
  const auto& mv = t.val(m).array();
  const auto& sv = t.val(sigma).array();
  const S n = static_cast<S>(t.val(m).size());
  Matrix<S> y(1, 1);
  y(0, 0) = (sv.exp() - (S(1) + sv) + mv.square()).sum() / n;
  return t.node(std::move(y), [m, sigma, n, self = static_cast<VarId>(t.size())](Tape<S>& t) {
    S g = t.grad(self)(0, 0);
    t.grad(m).array() += g * S(2) * t.val(m).array() / n;
    t.grad(sigma).array() += g * (t.val(sigma).array().exp() - S(1)) / n;
  });
}

/// Weighted token cross-entropy: sum_r w_r * (logsumexp(logits_r) -
/// logits_r[target_r]). Callers fold position masking and the batch-mean
/// reduction into the per-row weights.
template <class S>
VarId sequence_nll(Tape<S>& t, VarId logits, std::vector<int> targets,
                   std::vector<S> row_weight) {
  const Matrix<S>& lg = t.val(logits);
  detail::require(static_cast<Index>(targets.size()) == lg.rows() &&
                         row_weight.size() == targets.size(),
                     "sequence_nll needs one target and weight per row");
  Matrix<S> probs(lg.rows(), lg.cols());
  S total = S(0);
  for (Index r = 0; r < lg.rows(); ++r) {
    int tgt = targets[static_cast<std::size_t>(r)];
    detail::require(tgt >= 0 && tgt < lg.cols(), "sequence_nll target out of range");
    S mx = lg.row(r).maxCoeff();
    Vector<S> e = (lg.row(r).array() - mx).exp().matrix().transpose();
    S z = e.sum();
    probs.row(r) = e.transpose() / z;
    total += row_weight[static_cast<std::size_t>(r)] *
             (mx + std::log(z) - lg(r, tgt));
  }
  Matrix<S> y(1, 1);
  y(0, 0) = total;
  return t.node(std::move(y),
                [logits, targets = std::move(targets), row_weight = std::move(row_weight),
                 probs = std::move(probs), self = static_cast<VarId>(t.size())](Tape<S>& t) {
    S g = t.grad(self)(0, 0);
    Matrix<S>& dl = t.grad(logits);
    for (Index r = 0; r < probs.rows(); ++r) {
      S w = g * row_weight[static_cast<std::size_t>(r)];
      dl.row(r) += w * probs.row(r);
      dl(r, targets[static_cast<std::size_t>(r)]) -= w;
    }
  });
}

/// Mean squared error against a constant target of the same shape.
template <class S>
VarId mse(Tape<S>& t, VarId pred, Matrix<S> target) {
  detail::require(t.val(pred).rows() == target.rows() &&
                         t.val(pred).cols() == target.cols(),
                     "mse shape mismatch");
  const S n = static_cast<S>(target.size());
  Matrix<S> y(1, 1);
  y(0, 0) = (t.val(pred) - target).array().square().sum() / n;
  return t.node(std::move(y), [pred, target = std::move(target), n,
                               self = static_cast<VarId>(t.size())](Tape<S>& t) {
    S g = t.grad(self)(0, 0);
    t.grad(pred) += g * S(2) / n * (t.val(pred) - target);
  });
}

/// out_r = x(r, cols[r]); the action-value gather for Q-learning.
template <class S>
VarId select_per_row(Tape<S>& t, VarId x, std::vector<int> cols) {
  const Matrix<S>& xv = t.val(x);
  detail::require(static_cast<Index>(cols.size()) == xv.rows(),
                     "select_per_row needs one column per row");
  Matrix<S> y(xv.rows(), 1);
  for (Index r = 0; r < xv.rows(); ++r) {
    int c = cols[static_cast<std::size_t>(r)];
    detail::require(c >= 0 && c < xv.cols(), "select_per_row column out of range");
    y(r, 0) = xv(r, c);
  }
  return t.node(std::move(y), [x, cols = std::move(cols),
                               self = static_cast<VarId>(t.size())](Tape<S>& t) {
    const Matrix<S>& dy = t.grad(self);
    for (Index r = 0; r < dy.rows(); ++r)
      t.grad(x)(r, cols[static_cast<std::size_t>(r)]) += dy(r, 0);
  });
}

template <class S>
VarId sum_all(Tape<S>& t, VarId x) {
  Matrix<S> y(1, 1);
  y(0, 0) = t.val(x).sum();
  return t.node(std::move(y), [x, self = static_cast<VarId>(t.size())](Tape<S>& t) {
    t.grad(x).array() += t.grad(self)(0, 0);
  });
}

/// Weighted sum of scalar nodes; the joint-loss combiner.
template <class S>
VarId weighted_sum(Tape<S>& t, const std::vector<std::pair<S, VarId>>& terms) {
  detail::require(!terms.empty(), "weighted_sum needs at least one term");
  Matrix<S> y(1, 1);
  y(0, 0) = S(0);
  for (auto& [w, id] : terms) {
    detail::require(t.val(id).size() == 1, "weighted_sum terms must be scalars");
    y(0, 0) += w * t.val(id)(0, 0);
  }
  return t.node(std::move(y), [terms, self = static_cast<VarId>(t.size())](Tape<S>& t) {
    S g = t.grad(self)(0, 0);
    for (auto& [w, id] : terms) t.grad(id)(0, 0) += g * w;
  });
}

}  // namespace ad
}  // namespace fsgen
