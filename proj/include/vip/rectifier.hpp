#pragma once

// Temporal importance rectifier: gated intra-personal fusion, text gating,
// cross-attention alignment, energy pooling and the person-level encoder.
// Building blocks operate on already-gathered valid rows; the masked_*
// wrappers take full T-row inputs plus a frame mask.

#include "vip/autodiff.hpp"

#include <cmath>
#include <optional>
#include <span>
#include <vector>

namespace vip::rect {

using ad::Var;

template <class S>
struct AttentionParams {
  Var<S> wq, wk, wv, wo;  // D x D, bias-free
};

template <class S>
struct NormParams {
  Var<S> gamma, beta;  // 1 x D
};

template <class S>
struct MlpParams {
  Var<S> w1, b1, w2, b2;
};

template <class S>
struct EncoderLayerParams {
  AttentionParams<S> attn;
  NormParams<S> ln1;
  MlpParams<S> ff;
  NormParams<S> ln2;
};

template <class S>
struct PoolParams {
  Var<S> w_p, b_p, q_p;  // D x D, 1 x D, 1 x D
};

// W2 gelu(x W1 + b1) + b2, row-wise.
template <class S>
Var<S> mlp(Var<S> x, const MlpParams<S>& p) {
  Var<S> h = ad::gelu(ad::add_row(ad::matmul(x, p.w1), p.b1));
  return ad::add_row(ad::matmul(h, p.w2), p.b2);
}

template <class S>
Var<S> layer_norm(Var<S> x, const NormParams<S>& p, S eps) {
  return ad::layer_norm_rows(x, p.gamma, p.beta, eps);
}

// Gated sum over sub-cues: sum_k sigmoid(((X_k W_v + b_v) q^T) / sqrt(D)) X_k.
// Gates are independent per row and per sub-cue. When `gates` is given, the
// R x 1 gate column of each sub-cue is appended to it.
template <class S>
Var<S> intra_fuse(std::span<const Var<S>> xs, Var<S> w_v, Var<S> b_v, Var<S> q,
                  std::vector<Mat<S>>* gates = nullptr) {
  const S inv_sqrt_d = S(1) / std::sqrt(S(xs.front().cols()));
  std::optional<Var<S>> acc;
  for (const auto& x : xs) {
    Var<S> e = ad::matmul_nt(ad::add_row(ad::matmul(x, w_v), b_v), q);
    Var<S> g = ad::sigmoid(ad::scale(e, inv_sqrt_d));
    if (gates != nullptr) gates->push_back(g.value());
    Var<S> term = ad::mul_col(x, g);
    acc = acc ? ad::add(*acc, term) : term;
  }
  return *acc;
}

// Text-conditioned gate sigmoid(MLP(f_text)) broadcast over rows. Without
// text the input is returned as is.
template <class S>
Var<S> semantic_gate(Var<S> f, const std::optional<Var<S>>& f_text, const MlpParams<S>& p) {
  if (!f_text) return f;
  return ad::mul_row(f, ad::sigmoid(mlp(*f_text, p)));
}

// Multi-head attention of `q_in` rows over `kv_in` rows, including the output
// projection. Per-head attention matrices are appended to `maps`.
template <class S>
Var<S> multi_head_attention(Var<S> q_in, Var<S> kv_in, const AttentionParams<S>& p, int heads,
                            std::vector<Mat<S>>* maps = nullptr) {
  const Eigen::Index d = p.wq.cols();
  const Eigen::Index dh = d / heads;
  const S inv_sqrt = S(1) / std::sqrt(S(dh));
  Var<S> q = ad::matmul(q_in, p.wq);
  Var<S> k = ad::matmul(kv_in, p.wk);
  Var<S> v = ad::matmul(kv_in, p.wv);
  std::vector<Var<S>> outs;
  for (int h = 0; h < heads; ++h) {
    Var<S> qh = heads == 1 ? q : ad::slice_cols(q, h * dh, dh);
    Var<S> kh = heads == 1 ? k : ad::slice_cols(k, h * dh, dh);
    Var<S> vh = heads == 1 ? v : ad::slice_cols(v, h * dh, dh);
    Var<S> a = ad::softmax_rows(ad::scale(ad::matmul_nt(qh, kh), inv_sqrt));
    if (maps != nullptr) maps->push_back(a.value());
    outs.push_back(ad::matmul(a, vh));
  }
  Var<S> cat = heads == 1 ? outs.front() : ad::concat_cols<S>(outs);
  return ad::matmul(cat, p.wo);
}

// LayerNorm(f_s + MHA(f_s -> f_d)).
template <class S>
Var<S> align(Var<S> f_s, Var<S> f_d, const AttentionParams<S>& p, const NormParams<S>& ln, int heads, S eps,
             std::vector<Mat<S>>* maps = nullptr) {
  return layer_norm(ad::add(f_s, multi_head_attention(f_s, f_d, p, heads, maps)), ln, eps);
}

template <class S>
struct MaskedAlign {
  Var<S> out;                // T x D; rows of invalid frames are zero
  std::vector<Mat<S>> maps;  // per head, T x T; invalid rows and columns zero
  bool empty = false;        // no valid frame; `out` is the spatial input
};

template <class S>
MaskedAlign<S> masked_align(Var<S> f_s, Var<S> f_d, const VectorXb& valid, const AttentionParams<S>& p,
                            const NormParams<S>& ln, int heads, S eps) {
  const Eigen::Index t = f_s.rows();
  std::vector<int> idx;
  for (Eigen::Index i = 0; i < t; ++i)
    if (valid(i)) idx.push_back(static_cast<int>(i));
  MaskedAlign<S> r;
  if (idx.empty()) {
    r.out = f_s;
    r.empty = true;
    for (int h = 0; h < heads; ++h) r.maps.push_back(Mat<S>::Zero(t, t));
    return r;
  }
  std::vector<Mat<S>> local;
  Var<S> a = align(ad::gather_rows(f_s, idx), ad::gather_rows(f_d, idx), p, ln, heads, eps, &local);
  r.out = ad::scatter_rows(a, idx, t);
  for (const auto& m : local) {
    Mat<S> full = Mat<S>::Zero(t, t);
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t j = 0; j < idx.size(); ++j) full(idx[i], idx[j]) = m(i, j);
    r.maps.push_back(std::move(full));
  }
  return r;
}

template <class S>
struct Pooled {
  Var<S> person;     // 1 x D
  Var<S> weights;    // 1 x R
};

// Energy pooling: softmax over rows of e = (F W_p + b_p) q_p^T, then the
// weighted sum of rows.
template <class S>
Pooled<S> temporal_pool(Var<S> f, const PoolParams<S>& p) {
  Var<S> e = ad::matmul_nt(ad::add_row(ad::matmul(f, p.w_p), p.b_p), p.q_p);  // R x 1
  Var<S> w = ad::softmax_rows(ad::transpose(e));
  return Pooled<S>{ad::matmul(w, f), w};
}

// Post-norm transformer encoder layer with a GELU feed-forward block.
template <class S>
Var<S> encoder_layer(Var<S> x, const EncoderLayerParams<S>& p, int heads, S eps,
                     std::vector<Mat<S>>* maps = nullptr) {
  Var<S> h = layer_norm(ad::add(x, multi_head_attention(x, x, p.attn, heads, maps)), p.ln1, eps);
  return layer_norm(ad::add(h, mlp(h, p.ff)), p.ln2, eps);
}

// Person-level encoder over the valid person rows; no positional terms, so it
// is permutation-equivariant.
template <class S>
Var<S> relate(Var<S> persons, std::span<const EncoderLayerParams<S>> layers, int heads, S eps) {
  Var<S> x = persons;
  for (const auto& l : layers) x = encoder_layer(x, l, heads, eps);
  return x;
}

}  // namespace vip::rect
