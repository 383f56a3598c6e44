#pragma once

// Minimal reverse-mode differentiation over dense Eigen matrices.
//
// A Tape owns every intermediate value of one forward pass. Ops are free
// functions taking and returning Var handles; each op records a closure that
// pushes the output gradient back to its parents. Nodes are only tracked when
// at least one parent is tracked.

#include "vip/types.hpp"

#include <cmath>
#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

namespace vip::ad {

template <class S>
class Tape;

template <class S>
class Var {
 public:
  Var() = default;
  Var(Tape<S>* tape, int id) : tape_(tape), id_(id) {}

  const Mat<S>& value() const { return tape_->value(id_); }
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  S scalar() const { return value()(0, 0); }
  int id() const { return id_; }
  Tape<S>* tape() const { return tape_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape<S>* tape_ = nullptr;
  int id_ = -1;
};

template <class S>
class Tape {
 public:
  using Backward = std::function<void(Tape&, int self)>;

  Var<S> constant(Mat<S> v) { return push(std::move(v), false, nullptr, {}); }

  // Tracked leaf. When `sink` is given, the accumulated gradient is added to
  // it at the end of backward().
  Var<S> variable(Mat<S> v, Mat<S>* sink = nullptr) {
    return push(std::move(v), true, sink, {});
  }

  Var<S> record(Mat<S> v, std::initializer_list<Var<S>> parents, Backward bw) {
    bool tracked = false;
    for (const auto& p : parents) tracked = tracked || nodes_[p.id()].tracked;
    return push(std::move(v), tracked, nullptr, tracked ? std::move(bw) : Backward{});
  }

  Var<S> record(Mat<S> v, std::span<const Var<S>> parents, Backward bw) {
    bool tracked = false;
    for (const auto& p : parents) tracked = tracked || nodes_[p.id()].tracked;
    return push(std::move(v), tracked, nullptr, tracked ? std::move(bw) : Backward{});
  }

  // Leaf that writes straight into an external gradient buffer, e.g. an
  // embedding table gather where copying the table would dominate.
  Var<S> external(Mat<S> v, Backward bw) { return push(std::move(v), true, nullptr, std::move(bw)); }

  const Mat<S>& value(int id) const { return nodes_[id].value; }
  bool tracked(int id) const { return nodes_[id].tracked; }

  template <class Derived>
  void accumulate(int id, const Eigen::MatrixBase<Derived>& g) {
    Node& n = nodes_[id];
    if (!n.tracked) return;
    if (n.grad.size() == 0) {
      n.grad = g;
    } else {
      n.grad += g;
    }
  }

  // Gradient of the last backward() root with respect to node `id`; zeros if
  // the node was never reached.
  Mat<S> grad(int id) const {
    const Node& n = nodes_[id];
    if (n.grad.size() == 0) return Mat<S>::Zero(n.value.rows(), n.value.cols());
    return n.grad;
  }
  const Mat<S>& grad_ref(int id) const { return nodes_[id].grad; }

  void backward(Var<S> root) {
    for (auto& n : nodes_) n.grad.resize(0, 0);
    Node& r = nodes_[root.id()];
    if (!r.tracked) return;
    r.grad = Mat<S>::Ones(r.value.rows(), r.value.cols());
    for (int i = root.id(); i >= 0; --i) {
      Node& n = nodes_[i];
      if (!n.tracked || n.grad.size() == 0) continue;
      if (n.backward) n.backward(*this, i);
      if (n.sink != nullptr) *n.sink += n.grad;
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Mat<S> value;
    Mat<S> grad;
    Backward backward;
    Mat<S>* sink = nullptr;
    bool tracked = false;
  };

  Var<S> push(Mat<S> v, bool tracked, Mat<S>* sink, Backward bw) {
    nodes_.push_back(Node{std::move(v), Mat<S>(), std::move(bw), sink, tracked});
    return Var<S>(this, static_cast<int>(nodes_.size()) - 1);
  }

  std::vector<Node> nodes_;
};

// ---------------------------------------------------------------------------
// Linear algebra

template <class S>
Var<S> matmul(Var<S> a, Var<S> b) {
  Tape<S>& t = *a.tape();
  const int ia = a.id(), ib = b.id();
  return t.record(a.value() * b.value(), {a, b}, [ia, ib](Tape<S>& t, int self) {
    const Mat<S>& g = t.grad_ref(self);
    if (t.tracked(ia)) t.accumulate(ia, g * t.value(ib).transpose());
    if (t.tracked(ib)) t.accumulate(ib, t.value(ia).transpose() * g);
  });
}

// a * b^T
template <class S>
Var<S> matmul_nt(Var<S> a, Var<S> b) {
  Tape<S>& t = *a.tape();
  const int ia = a.id(), ib = b.id();
  return t.record(a.value() * b.value().transpose(), {a, b}, [ia, ib](Tape<S>& t, int self) {
    const Mat<S>& g = t.grad_ref(self);
    if (t.tracked(ia)) t.accumulate(ia, g * t.value(ib));
    if (t.tracked(ib)) t.accumulate(ib, g.transpose() * t.value(ia));
  });
}

template <class S>
Var<S> transpose(Var<S> a) {
  Tape<S>& t = *a.tape();
  const int ia = a.id();
  return t.record(a.value().transpose(), {a}, [ia](Tape<S>& t, int self) {
    t.accumulate(ia, t.grad_ref(self).transpose());
  });
}

// ---------------------------------------------------------------------------
// Elementwise binary ops

template <class S>
Var<S> add(Var<S> a, Var<S> b) {
  Tape<S>& t = *a.tape();
  const int ia = a.id(), ib = b.id();
  return t.record(a.value() + b.value(), {a, b}, [ia, ib](Tape<S>& t, int self) {
    t.accumulate(ia, t.grad_ref(self));
    t.accumulate(ib, t.grad_ref(self));
  });
}

template <class S>
Var<S> sub(Var<S> a, Var<S> b) {
  Tape<S>& t = *a.tape();
  const int ia = a.id(), ib = b.id();
  return t.record(a.value() - b.value(), {a, b}, [ia, ib](Tape<S>& t, int self) {
    t.accumulate(ia, t.grad_ref(self));
    t.accumulate(ib, -t.grad_ref(self));
  });
}

template <class S>
Var<S> mul(Var<S> a, Var<S> b) {
  Tape<S>& t = *a.tape();
  const int ia = a.id(), ib = b.id();
  return t.record(a.value().cwiseProduct(b.value()), {a, b}, [ia, ib](Tape<S>& t, int self) {
    const Mat<S>& g = t.grad_ref(self);
    if (t.tracked(ia)) t.accumulate(ia, g.cwiseProduct(t.value(ib)));
    if (t.tracked(ib)) t.accumulate(ib, g.cwiseProduct(t.value(ia)));
  });
}

template <class S>
Var<S> div(Var<S> a, Var<S> b) {
  Tape<S>& t = *a.tape();
  const int ia = a.id(), ib = b.id();
  Mat<S> out = a.value().cwiseQuotient(b.value());
  return t.record(std::move(out), {a, b}, [ia, ib](Tape<S>& t, int self) {
    const Mat<S>& g = t.grad_ref(self);
    const Mat<S>& bv = t.value(ib);
    if (t.tracked(ia)) t.accumulate(ia, g.cwiseQuotient(bv));
    if (t.tracked(ib)) {
      t.accumulate(ib, -g.cwiseProduct(t.value(ia)).cwiseQuotient(bv.cwiseProduct(bv)));
    }
  });
}

template <class S>
Var<S> scale(Var<S> a, S s) {
  Tape<S>& t = *a.tape();
  const int ia = a.id();
  return t.record(a.value() * s, {a}, [ia, s](Tape<S>& t, int self) {
    t.accumulate(ia, t.grad_ref(self) * s);
  });
}

// a + r, with the 1xC row vector r broadcast over rows.
template <class S>
Var<S> add_row(Var<S> a, Var<S> r) {
  Tape<S>& t = *a.tape();
  const int ia = a.id(), ir = r.id();
  Mat<S> out = a.value().rowwise() + r.value().row(0);
  return t.record(std::move(out), {a, r}, [ia, ir](Tape<S>& t, int self) {
    const Mat<S>& g = t.grad_ref(self);
    t.accumulate(ia, g);
    if (t.tracked(ir)) t.accumulate(ir, g.colwise().sum());
  });
}

// a ⊙ r, with the 1xC row vector r broadcast over rows.
template <class S>
Var<S> mul_row(Var<S> a, Var<S> r) {
  Tape<S>& t = *a.tape();
  const int ia = a.id(), ir = r.id();
  Mat<S> out = a.value().array().rowwise() * r.value().row(0).array();
  return t.record(std::move(out), {a, r}, [ia, ir](Tape<S>& t, int self) {
    const Mat<S>& g = t.grad_ref(self);
    if (t.tracked(ia)) {
      Mat<S> ga = g.array().rowwise() * t.value(ir).row(0).array();
      t.accumulate(ia, ga);
    }
    if (t.tracked(ir)) t.accumulate(ir, g.cwiseProduct(t.value(ia)).colwise().sum());
  });
}

// a ⊙ c, with the Rx1 column vector c broadcast over columns.
template <class S>
Var<S> mul_col(Var<S> a, Var<S> c) {
  Tape<S>& t = *a.tape();
  const int ia = a.id(), ic = c.id();
  Mat<S> out = a.value().array().colwise() * c.value().col(0).array();
  return t.record(std::move(out), {a, c}, [ia, ic](Tape<S>& t, int self) {
    const Mat<S>& g = t.grad_ref(self);
    if (t.tracked(ia)) {
      Mat<S> ga = g.array().colwise() * t.value(ic).col(0).array();
      t.accumulate(ia, ga);
    }
    if (t.tracked(ic)) t.accumulate(ic, g.cwiseProduct(t.value(ia)).rowwise().sum());
  });
}

// a / c, with the Rx1 column vector c broadcast over columns.
template <class S>
Var<S> div_col(Var<S> a, Var<S> c) {
  Tape<S>& t = *a.tape();
  const int ia = a.id(), ic = c.id();
  Mat<S> out = a.value().array().colwise() / c.value().col(0).array();
  return t.record(std::move(out), {a, c}, [ia, ic](Tape<S>& t, int self) {
    const Mat<S>& g = t.grad_ref(self);
    const auto cv = t.value(ic).col(0).array();
    if (t.tracked(ia)) {
      Mat<S> ga = g.array().colwise() / cv;
      t.accumulate(ia, ga);
    }
    if (t.tracked(ic)) {
      Vec<S> gc = -(g.cwiseProduct(t.value(ia)).rowwise().sum().array() / (cv * cv)).matrix();
      t.accumulate(ic, gc);
    }
  });
}

// ---------------------------------------------------------------------------
// Elementwise unary ops

template <class S, class F, class DF>
Var<S> unary(Var<S> a, F f, DF df) {
  Tape<S>& t = *a.tape();
  const int ia = a.id();
  Mat<S> out = a.value().unaryExpr(f);
  return t.record(std::move(out), {a}, [ia, df](Tape<S>& t, int self) {
    // df receives (input, output).
    const Mat<S>& x = t.value(ia);
    const Mat<S>& y = t.value(self);
    Mat<S> d = x.binaryExpr(y, df);
    t.accumulate(ia, t.grad_ref(self).cwiseProduct(d));
  });
}

template <class S>
S sigmoid_scalar(S x) {
  if (x >= S(0)) return S(1) / (S(1) + std::exp(-x));
  const S e = std::exp(x);
  return e / (S(1) + e);
}

template <class S>
Var<S> sigmoid(Var<S> a) {
  return unary(a, [](S x) { return sigmoid_scalar(x); }, [](S, S y) { return y * (S(1) - y); });
}

template <class S>
Var<S> tanh(Var<S> a) {
  return unary(a, [](S x) { return std::tanh(x); }, [](S, S y) { return S(1) - y * y; });
}

template <class S>
Var<S> relu(Var<S> a) {
  return unary(a, [](S x) { return x > S(0) ? x : S(0); }, [](S x, S) { return x > S(0) ? S(1) : S(0); });
}

template <class S>
S softplus_scalar(S x) {
  return x > S(20) ? x : std::log1p(std::exp(x));
}

template <class S>
Var<S> softplus(Var<S> a) {
  return unary(a, [](S x) { return softplus_scalar(x); }, [](S x, S) { return sigmoid_scalar(x); });
}

// tanh approximation of GELU; smooth everywhere, which the finite-difference
// checks rely on.
template <class S>
Var<S> gelu(Var<S> a) {
  constexpr double k = 0.7978845608028654;  // sqrt(2/pi)
  return unary(
      a,
      [](S x) { return S(0.5) * x * (S(1) + std::tanh(S(k) * (x + S(0.044715) * x * x * x))); },
      [](S x, S) {
        const S u = S(k) * (x + S(0.044715) * x * x * x);
        const S th = std::tanh(u);
        const S du = S(k) * (S(1) + S(3 * 0.044715) * x * x);
        return S(0.5) * (S(1) + th) + S(0.5) * x * (S(1) - th * th) * du;
      });
}

template <class S>
Var<S> exp(Var<S> a) {
  return unary(a, [](S x) { return std::exp(x); }, [](S, S y) { return y; });
}

template <class S>
Var<S> log(Var<S> a) {
  return unary(a, [](S x) { return std::log(x); }, [](S x, S) { return S(1) / x; });
}

// ---------------------------------------------------------------------------
// Reductions and normalizations

template <class S>
Var<S> sum_all(Var<S> a) {
  Tape<S>& t = *a.tape();
  const int ia = a.id();
  Mat<S> out(1, 1);
  out(0, 0) = a.value().sum();
  return t.record(std::move(out), {a}, [ia](Tape<S>& t, int self) {
    const S g = t.grad_ref(self)(0, 0);
    const Mat<S>& x = t.value(ia);
    t.accumulate(ia, Mat<S>::Constant(x.rows(), x.cols(), g));
  });
}

// Column-wise mean over rows: RxC -> 1xC.
template <class S>
Var<S> mean_rows(Var<S> a) {
  Tape<S>& t = *a.tape();
  const int ia = a.id();
  const S inv = S(1) / S(a.rows());
  Mat<S> out = a.value().colwise().sum() * inv;
  return t.record(std::move(out), {a}, [ia, inv](Tape<S>& t, int self) {
    const Mat<S>& x = t.value(ia);
    Mat<S> g = t.grad_ref(self).replicate(x.rows(), 1) * inv;
    t.accumulate(ia, g);
  });
}

// Euclidean norm of every row: RxC -> Rx1.
template <class S>
Var<S> row_norms(Var<S> a) {
  Tape<S>& t = *a.tape();
  const int ia = a.id();
  Mat<S> out = a.value().rowwise().norm();
  return t.record(std::move(out), {a}, [ia](Tape<S>& t, int self) {
    const Mat<S>& x = t.value(ia);
    const Mat<S>& n = t.value(self);
    const Mat<S>& g = t.grad_ref(self);
    Mat<S> d = Mat<S>::Zero(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      if (n(i, 0) > S(0)) d.row(i) = x.row(i) * (g(i, 0) / n(i, 0));
    }
    t.accumulate(ia, d);
  });
}

// sqrt(|row|^2 + eps) - sqrt(eps): zero at the origin, smooth, increasing in
// the row norm.
template <class S>
Var<S> smooth_row_norms(Var<S> a, S eps) {
  Tape<S>& t = *a.tape();
  const int ia = a.id();
  const S root_eps = std::sqrt(eps);
  Mat<S> r = (a.value().rowwise().squaredNorm().array() + eps).sqrt().matrix();
  Mat<S> out = (r.array() - root_eps).matrix();
  return t.record(std::move(out), {a}, [ia, eps](Tape<S>& t, int self) {
    const Mat<S>& x = t.value(ia);
    const Mat<S>& g = t.grad_ref(self);
    Vec<S> r = (x.rowwise().squaredNorm().array() + eps).sqrt().matrix();
    Mat<S> d = x.array().colwise() * (g.col(0).array() / r.array());
    t.accumulate(ia, d);
  });
}

// Row-wise softmax.
template <class S>
Var<S> softmax_rows(Var<S> a) {
  Tape<S>& t = *a.tape();
  const int ia = a.id();
  const Mat<S>& x = a.value();
  Mat<S> y(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const S m = x.row(i).maxCoeff();
    auto e = (x.row(i).array() - m).exp();
    y.row(i) = (e / e.sum()).matrix();
  }
  return t.record(std::move(y), {a}, [ia](Tape<S>& t, int self) {
    const Mat<S>& y = t.value(self);
    const Mat<S>& g = t.grad_ref(self);
    Vec<S> dot = g.cwiseProduct(y).rowwise().sum();
    Mat<S> d = y.array() * (g.array().colwise() - dot.array());
    t.accumulate(ia, d);
  });
}

// log(sum(exp(a))) over every entry -> 1x1.
template <class S>
Var<S> logsumexp(Var<S> a) {
  Tape<S>& t = *a.tape();
  const int ia = a.id();
  const S m = a.value().maxCoeff();
  Mat<S> out(1, 1);
  out(0, 0) = m + std::log((a.value().array() - m).exp().sum());
  return t.record(std::move(out), {a}, [ia](Tape<S>& t, int self) {
    const Mat<S>& x = t.value(ia);
    const S lse = t.value(self)(0, 0);
    const S g = t.grad_ref(self)(0, 0);
    Mat<S> d = ((x.array() - lse).exp() * g).matrix();
    t.accumulate(ia, d);
  });
}

// Row-wise layer normalization with affine 1xC gamma and beta.
template <class S>
Var<S> layer_norm_rows(Var<S> a, Var<S> gamma, Var<S> beta, S eps) {
  Tape<S>& t = *a.tape();
  const int ia = a.id(), igm = gamma.id(), ibt = beta.id();
  const Mat<S>& x = a.value();
  const Eigen::Index c = x.cols();
  Mat<S> xhat(x.rows(), c);
  Vec<S> inv(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const S mu = x.row(i).mean();
    const S var = (x.row(i).array() - mu).square().mean();
    inv(i) = S(1) / std::sqrt(var + eps);
    xhat.row(i) = (x.row(i).array() - mu) * inv(i);
  }
  Mat<S> y = (xhat.array().rowwise() * gamma.value().row(0).array()).rowwise() + beta.value().row(0).array();
  return t.record(std::move(y), {a, gamma, beta},
                  [ia, igm, ibt, xhat = std::move(xhat), inv = std::move(inv)](Tape<S>& t, int self) {
                    const Mat<S>& g = t.grad_ref(self);
                    if (t.tracked(igm)) t.accumulate(igm, g.cwiseProduct(xhat).colwise().sum());
                    if (t.tracked(ibt)) t.accumulate(ibt, g.colwise().sum());
                    if (!t.tracked(ia)) return;
                    const S c = S(xhat.cols());
                    Mat<S> dxhat = g.array().rowwise() * t.value(igm).row(0).array();
                    Mat<S> dx(xhat.rows(), xhat.cols());
                    for (Eigen::Index i = 0; i < xhat.rows(); ++i) {
                      const S s1 = dxhat.row(i).sum();
                      const S s2 = dxhat.row(i).dot(xhat.row(i));
                      dx.row(i) = (inv(i) / c) * (c * dxhat.row(i).array() - s1 - xhat.row(i).array() * s2);
                    }
                    t.accumulate(ia, dx);
                  });
}

// ---------------------------------------------------------------------------
// Structural ops

template <class S>
Var<S> slice_cols(Var<S> a, Eigen::Index start, Eigen::Index n) {
  Tape<S>& t = *a.tape();
  const int ia = a.id();
  Mat<S> out = a.value().middleCols(start, n);
  return t.record(std::move(out), {a}, [ia, start, n](Tape<S>& t, int self) {
    const Mat<S>& x = t.value(ia);
    Mat<S> d = Mat<S>::Zero(x.rows(), x.cols());
    d.middleCols(start, n) = t.grad_ref(self);
    t.accumulate(ia, d);
  });
}

template <class S>
Var<S> concat_cols(std::span<const Var<S>> parts) {
  Tape<S>& t = *parts.front().tape();
  Eigen::Index rows = parts.front().rows(), cols = 0;
  for (const auto& p : parts) cols += p.cols();
  Mat<S> out(rows, cols);
  std::vector<int> ids;
  Eigen::Index off = 0;
  for (const auto& p : parts) {
    out.middleCols(off, p.cols()) = p.value();
    off += p.cols();
    ids.push_back(p.id());
  }
  return t.record(std::move(out), parts, [ids](Tape<S>& t, int self) {
    const Mat<S>& g = t.grad_ref(self);
    Eigen::Index off = 0;
    for (int id : ids) {
      const Eigen::Index c = t.value(id).cols();
      if (t.tracked(id)) t.accumulate(id, g.middleCols(off, c));
      off += c;
    }
  });
}

template <class S>
Var<S> concat_rows(std::span<const Var<S>> parts) {
  Tape<S>& t = *parts.front().tape();
  Eigen::Index cols = parts.front().cols(), rows = 0;
  for (const auto& p : parts) rows += p.rows();
  Mat<S> out(rows, cols);
  std::vector<int> ids;
  Eigen::Index off = 0;
  for (const auto& p : parts) {
    out.middleRows(off, p.rows()) = p.value();
    off += p.rows();
    ids.push_back(p.id());
  }
  return t.record(std::move(out), parts, [ids](Tape<S>& t, int self) {
    const Mat<S>& g = t.grad_ref(self);
    Eigen::Index off = 0;
    for (int id : ids) {
      const Eigen::Index r = t.value(id).rows();
      if (t.tracked(id)) t.accumulate(id, g.middleRows(off, r));
      off += r;
    }
  });
}

template <class S>
Var<S> gather_rows(Var<S> a, std::vector<int> idx) {
  Tape<S>& t = *a.tape();
  const int ia = a.id();
  Mat<S> out(static_cast<Eigen::Index>(idx.size()), a.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(i) = a.value().row(idx[i]);
  return t.record(std::move(out), {a}, [ia, idx = std::move(idx)](Tape<S>& t, int self) {
    const Mat<S>& x = t.value(ia);
    const Mat<S>& g = t.grad_ref(self);
    Mat<S> d = Mat<S>::Zero(x.rows(), x.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) d.row(idx[i]) += g.row(i);
    t.accumulate(ia, d);
  });
}

template <class S>
Var<S> slice_rows(Var<S> a, Eigen::Index start, Eigen::Index n) {
  Tape<S>& t = *a.tape();
  const int ia = a.id();
  Mat<S> out = a.value().middleRows(start, n);
  return t.record(std::move(out), {a}, [ia, start, n](Tape<S>& t, int self) {
    const Mat<S>& x = t.value(ia);
    Mat<S> d = Mat<S>::Zero(x.rows(), x.cols());
    d.middleRows(start, n) = t.grad_ref(self);
    t.accumulate(ia, d);
  });
}

// Inverse of gather_rows: row i of `a` lands in row idx[i] of a zero matrix
// with `total` rows.
template <class S>
Var<S> scatter_rows(Var<S> a, std::vector<int> idx, Eigen::Index total) {
  Tape<S>& t = *a.tape();
  const int ia = a.id();
  Mat<S> out = Mat<S>::Zero(total, a.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(idx[i]) = a.value().row(i);
  return t.record(std::move(out), {a}, [ia, idx = std::move(idx)](Tape<S>& t, int self) {
    const Mat<S>& g = t.grad_ref(self);
    Mat<S> d(static_cast<Eigen::Index>(idx.size()), g.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) d.row(i) = g.row(idx[i]);
    t.accumulate(ia, d);
  });
}

// Entries (r, c) of `a` stacked into a column.
template <class S>
Var<S> gather_entries(Var<S> a, std::vector<std::pair<int, int>> idx) {
  Tape<S>& t = *a.tape();
  const int ia = a.id();
  Mat<S> out(static_cast<Eigen::Index>(idx.size()), 1);
  for (std::size_t i = 0; i < idx.size(); ++i) out(i, 0) = a.value()(idx[i].first, idx[i].second);
  return t.record(std::move(out), {a}, [ia, idx = std::move(idx)](Tape<S>& t, int self) {
    const Mat<S>& x = t.value(ia);
    const Mat<S>& g = t.grad_ref(self);
    Mat<S> d = Mat<S>::Zero(x.rows(), x.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) d(idx[i].first, idx[i].second) += g(i, 0);
    t.accumulate(ia, d);
  });
}

// Rows of a parameter table; the gradient is scattered straight into
// `table_grad` (nullptr freezes the table).
template <class S>
Var<S> embed(Tape<S>& t, const Mat<S>& table, Mat<S>* table_grad, std::vector<int> idx) {
  Mat<S> out(static_cast<Eigen::Index>(idx.size()), table.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(i) = table.row(idx[i]);
  if (table_grad == nullptr) return t.constant(std::move(out));
  return t.external(std::move(out), [table_grad, idx = std::move(idx)](Tape<S>& t, int self) {
    const Mat<S>& g = t.grad_ref(self);
    for (std::size_t i = 0; i < idx.size(); ++i) table_grad->row(idx[i]) += g.row(i);
  });
}

template <class S>
Var<S> pick(Var<S> a, Eigen::Index r, Eigen::Index c) {
  Tape<S>& t = *a.tape();
  const int ia = a.id();
  Mat<S> out(1, 1);
  out(0, 0) = a.value()(r, c);
  return t.record(std::move(out), {a}, [ia, r, c](Tape<S>& t, int self) {
    const Mat<S>& x = t.value(ia);
    Mat<S> d = Mat<S>::Zero(x.rows(), x.cols());
    d(r, c) = t.grad_ref(self)(0, 0);
    t.accumulate(ia, d);
  });
}

// Cosine similarity of two 1xC rows -> 1x1.
template <class S>
Var<S> cosine(Var<S> a, Var<S> b) {
  Var<S> dot = sum_all(mul(a, b));
  Var<S> na = row_norms(a);
  Var<S> nb = row_norms(b);
  return div(dot, mul(na, nb));
}

}  // namespace vip::ad
