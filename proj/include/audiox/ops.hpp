#pragma once

// Differentiable ops over Var. Batched tensors are stacked along rows: a batch
// of B sequences with n tokens each is a (B*n x d) matrix, and ops that need
// sequence boundaries (attention, pooling, segment concat) take the per-item
// row count explicitly.

#include "audiox/autodiff.hpp"

#include <cmath>
#include <memory>
#include <vector>

namespace audiox::ad {

using detail::require;

template <typename Scalar>
Var<Scalar> add(Var<Scalar> a, Var<Scalar> b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "add: shape mismatch");
  Tape<Scalar>* t = a.tape;
  return t->push(a.value() + b.value(), t->needs_grad({a, b}), [t, a, b](const Mat<Scalar>& g) {
    t->accumulate(a.id, g);
    t->accumulate(b.id, g);
  });
}

template <typename Scalar>
Var<Scalar> sub(Var<Scalar> a, Var<Scalar> b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "sub: shape mismatch");
  Tape<Scalar>* t = a.tape;
  return t->push(a.value() - b.value(), t->needs_grad({a, b}), [t, a, b](const Mat<Scalar>& g) {
    t->accumulate(a.id, g);
    t->accumulate(b.id, -g);
  });
}

template <typename Scalar>
Var<Scalar> operator+(Var<Scalar> a, Var<Scalar> b) {
  return add(a, b);
}

template <typename Scalar>
Var<Scalar> operator-(Var<Scalar> a, Var<Scalar> b) {
  return sub(a, b);
}

template <typename Scalar>
Var<Scalar> scale(Var<Scalar> a, Scalar s) {
  Tape<Scalar>* t = a.tape;
  return t->push(a.value() * s, t->needs_grad({a}), [t, a, s](const Mat<Scalar>& g) { t->accumulate(a.id, g * s); });
}

template <typename Scalar>
Var<Scalar> hadamard(Var<Scalar> a, Var<Scalar> b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "hadamard: shape mismatch");
  Tape<Scalar>* t = a.tape;
  return t->push(a.value().cwiseProduct(b.value()), t->needs_grad({a, b}), [t, a, b](const Mat<Scalar>& g) {
    if (t->needs_grad(a.id)) t->accumulate(a.id, g.cwiseProduct(b.value()));
    if (t->needs_grad(b.id)) t->accumulate(b.id, g.cwiseProduct(a.value()));
  });
}

/// Adds a 1 x cols row vector to every row.
template <typename Scalar>
Var<Scalar> add_row(Var<Scalar> a, Var<Scalar> row) {
  require(row.rows() == 1 && row.cols() == a.cols(), "add_row: shape mismatch");
  Tape<Scalar>* t = a.tape;
  Mat<Scalar> out = a.value().rowwise() + row.value().row(0);
  return t->push(std::move(out), t->needs_grad({a, row}), [t, a, row](const Mat<Scalar>& g) {
    t->accumulate(a.id, g);
    if (t->needs_grad(row.id)) t->accumulate(row.id, g.colwise().sum());
  });
}

template <typename Scalar>
Var<Scalar> sigmoid(Var<Scalar> a) {
  Tape<Scalar>* t = a.tape;
  Mat<Scalar> y = a.value().unaryExpr([](Scalar x) { return Scalar(1) / (Scalar(1) + std::exp(-x)); });
  auto out = std::make_shared<Mat<Scalar>>(y);
  return t->push(std::move(y), t->needs_grad({a}), [t, a, out](const Mat<Scalar>& g) {
    t->accumulate(a.id, g.cwiseProduct(out->cwiseProduct((Scalar(1) - out->array()).matrix())));
  });
}

/// x * sigmoid(x)
template <typename Scalar>
Var<Scalar> silu(Var<Scalar> a) {
  Tape<Scalar>* t = a.tape;
  const Mat<Scalar>& x = a.value();
  Mat<Scalar> s = x.unaryExpr([](Scalar v) { return Scalar(1) / (Scalar(1) + std::exp(-v)); });
  Mat<Scalar> y = x.cwiseProduct(s);
  const bool needs = t->needs_grad({a});
  auto sig = needs ? std::make_shared<Mat<Scalar>>(std::move(s)) : nullptr;
  return t->push(std::move(y), needs, [t, a, sig](const Mat<Scalar>& g) {
    const auto& x = a.value();
    auto d = sig->array() * (Scalar(1) + x.array() * (Scalar(1) - sig->array()));
    t->accumulate(a.id, (g.array() * d).matrix());
  });
}

// ------------------------------------------------------------------- linear

template <typename Scalar>
Var<Scalar> matmul(Var<Scalar> a, Var<Scalar> b) {
  require(a.cols() == b.rows(), "matmul: inner dimension mismatch");
  Tape<Scalar>* t = a.tape;
  Mat<Scalar> out = a.value() * b.value();
  return t->push(std::move(out), t->needs_grad({a, b}), [t, a, b](const Mat<Scalar>& g) {
    if (t->needs_grad(a.id)) t->accumulate(a.id, g * b.value().transpose());
    if (t->needs_grad(b.id)) t->accumulate(b.id, a.value().transpose() * g);
  });
}

/// x W + b with W (in x out) and b (1 x out).
template <typename Scalar>
Var<Scalar> affine(Var<Scalar> x, Var<Scalar> w, Var<Scalar> b) {
  require(x.cols() == w.rows() && b.rows() == 1 && b.cols() == w.cols(), "affine: shape mismatch");
  Tape<Scalar>* t = x.tape;
  Mat<Scalar> out = x.value() * w.value();
  out.rowwise() += b.value().row(0);
  return t->push(std::move(out), t->needs_grad({x, w, b}), [t, x, w, b](const Mat<Scalar>& g) {
    if (t->needs_grad(x.id)) t->accumulate(x.id, g * w.value().transpose());
    if (t->needs_grad(w.id)) t->accumulate(w.id, x.value().transpose() * g);
    if (t->needs_grad(b.id)) t->accumulate(b.id, g.colwise().sum());
  });
}

/// Row-wise layer normalization with learned gain and shift.
template <typename Scalar>
Var<Scalar> layer_norm(Var<Scalar> x, Var<Scalar> gamma, Var<Scalar> beta, Scalar eps = Scalar(1e-5)) {
  require(gamma.cols() == x.cols() && beta.cols() == x.cols(), "layer_norm: shape mismatch");
  Tape<Scalar>* t = x.tape;
  const Mat<Scalar>& xv = x.value();
  const Index n = xv.cols();
  Mat<Scalar> xhat(xv.rows(), n);
  Vec<Scalar> inv_std(xv.rows());
  for (Index r = 0; r < xv.rows(); ++r) {
    const Scalar mean = xv.row(r).mean();
    const Scalar var = (xv.row(r).array() - mean).square().mean();
    inv_std(r) = Scalar(1) / std::sqrt(var + eps);
    xhat.row(r) = (xv.row(r).array() - mean) * inv_std(r);
  }
  Mat<Scalar> y = xhat.array().rowwise() * gamma.value().row(0).array();
  y.rowwise() += beta.value().row(0);
  const bool needs = t->needs_grad({x, gamma, beta});
  auto cache = needs ? std::make_shared<std::pair<Mat<Scalar>, Vec<Scalar>>>(std::move(xhat), std::move(inv_std))
                     : nullptr;
  return t->push(std::move(y), needs, [t, x, gamma, beta, cache](const Mat<Scalar>& g) {
    const auto& [xh, is] = *cache;
    if (t->needs_grad(gamma.id)) t->accumulate(gamma.id, g.cwiseProduct(xh).colwise().sum());
    if (t->needs_grad(beta.id)) t->accumulate(beta.id, g.colwise().sum());
    if (t->needs_grad(x.id)) {
      Mat<Scalar> dxh = g.array().rowwise() * gamma.value().row(0).array();
      Mat<Scalar> dx(dxh.rows(), dxh.cols());
      for (Index r = 0; r < dxh.rows(); ++r) {
        const Scalar m1 = dxh.row(r).mean();
        const Scalar m2 = dxh.row(r).cwiseProduct(xh.row(r)).mean();
        dx.row(r) = (dxh.row(r).array() - m1 - xh.row(r).array() * m2) * is(r);
      }
      t->accumulate(x.id, dx);
    }
  });
}

// ---------------------------------------------------------------- attention

/// Scaled dot-product attention, multi-head, block-diagonal over batch items.
/// q: (B*nq x d), k and v: (B*nk x d). Head h uses columns [h*d/heads, (h+1)*d/heads).
template <typename Scalar>
Var<Scalar> attention(Var<Scalar> q, Var<Scalar> k, Var<Scalar> v, int heads, Index nq, Index nk) {
  const Index d = q.cols();
  require(heads > 0 && d % heads == 0, "attention: model dim not divisible by heads");
  require(k.cols() == d && v.cols() == d && k.rows() == v.rows(), "attention: key/value shape mismatch");
  require(nq > 0 && nk > 0 && q.rows() % nq == 0 && k.rows() % nk == 0, "attention: bad segment sizes");
  const Index batch = q.rows() / nq;
  require(k.rows() / nk == batch, "attention: batch mismatch");
  const Index dh = d / heads;
  const Scalar sc = Scalar(1) / std::sqrt(static_cast<Scalar>(dh));

  Tape<Scalar>* t = q.tape;
  const bool needs = t->needs_grad({q, k, v});
  const auto& Q = q.value();
  const auto& K = k.value();
  const auto& V = v.value();
  Mat<Scalar> out(q.rows(), d);
  auto probs = needs ? std::make_shared<std::vector<Mat<Scalar>>>() : nullptr;
  if (probs) probs->reserve(static_cast<std::size_t>(batch * heads));
  Mat<Scalar> p;
  for (Index b = 0; b < batch; ++b) {
    for (int h = 0; h < heads; ++h) {
      auto qh = Q.block(b * nq, h * dh, nq, dh);
      auto kh = K.block(b * nk, h * dh, nk, dh);
      auto vh = V.block(b * nk, h * dh, nk, dh);
      p.noalias() = (qh * kh.transpose()) * sc;
      for (Index r = 0; r < nq; ++r) {
        const Scalar mx = p.row(r).maxCoeff();
        p.row(r) = (p.row(r).array() - mx).exp();
        p.row(r) /= p.row(r).sum();
      }
      out.block(b * nq, h * dh, nq, dh).noalias() = p * vh;
      if (probs) probs->push_back(p);
    }
  }
  return t->push(std::move(out), needs, [t, q, k, v, heads, nq, nk, batch, dh, sc, probs](const Mat<Scalar>& g) {
    const auto& Q = q.value();
    const auto& K = k.value();
    const auto& V = v.value();
    const bool gq = t->needs_grad(q.id), gk = t->needs_grad(k.id), gv = t->needs_grad(v.id);
    Mat<Scalar> dQ = Mat<Scalar>::Zero(gq ? Q.rows() : 0, Q.cols());
    Mat<Scalar> dK = Mat<Scalar>::Zero(gk ? K.rows() : 0, K.cols());
    Mat<Scalar> dV = Mat<Scalar>::Zero(gv ? V.rows() : 0, V.cols());
    Mat<Scalar> dP, dS;
    for (Index b = 0; b < batch; ++b) {
      for (int h = 0; h < heads; ++h) {
        const Mat<Scalar>& P = (*probs)[static_cast<std::size_t>(b * heads + h)];
        auto go = g.block(b * nq, h * dh, nq, dh);
        auto qh = Q.block(b * nq, h * dh, nq, dh);
        auto kh = K.block(b * nk, h * dh, nk, dh);
        auto vh = V.block(b * nk, h * dh, nk, dh);
        if (gv) dV.block(b * nk, h * dh, nk, dh).noalias() = P.transpose() * go;
        if (!gq && !gk) continue;
        dP.noalias() = go * vh.transpose();
        Vec<Scalar> rowdot = (dP.cwiseProduct(P)).rowwise().sum();
        dS = P.cwiseProduct((dP.colwise() - rowdot)) * sc;
        if (gq) dQ.block(b * nq, h * dh, nq, dh).noalias() = dS * kh;
        if (gk) dK.block(b * nk, h * dh, nk, dh).noalias() = dS.transpose() * qh;
      }
    }
    if (gq) t->accumulate(q.id, dQ);
    if (gk) t->accumulate(k.id, dK);
    if (gv) t->accumulate(v.id, dV);
  });
}

// ------------------------------------------------------------ shape & rows

/// Row-major reshape (same scalar order).
template <typename Scalar>
Var<Scalar> reshape(Var<Scalar> a, Index rows, Index cols) {
  require(rows * cols == a.value().size(), "reshape: size mismatch");
  Tape<Scalar>* t = a.tape;
  const Index r0 = a.rows(), c0 = a.cols();
  Mat<Scalar> out = Eigen::Map<const Mat<Scalar>>(a.value().data(), rows, cols);
  return t->push(std::move(out), t->needs_grad({a}), [t, a, r0, c0](const Mat<Scalar>& g) {
    t->accumulate(a.id, Eigen::Map<const Mat<Scalar>>(g.data(), r0, c0));
  });
}

/// Stacks `times` copies of `a` vertically.
template <typename Scalar>
Var<Scalar> tile_rows(Var<Scalar> a, Index times) {
  Tape<Scalar>* t = a.tape;
  const Index n = a.rows();
  Mat<Scalar> out = a.value().replicate(times, 1);
  return t->push(std::move(out), t->needs_grad({a}), [t, a, n, times](const Mat<Scalar>& g) {
    Mat<Scalar> acc = Mat<Scalar>::Zero(n, g.cols());
    for (Index i = 0; i < times; ++i) acc += g.middleRows(i * n, n);
    t->accumulate(a.id, acc);
  });
}

/// Repeats every row `n` times consecutively: (B x d) -> (B*n x d).
template <typename Scalar>
Var<Scalar> repeat_each_row(Var<Scalar> a, Index n) {
  Tape<Scalar>* t = a.tape;
  const auto& av = a.value();
  Mat<Scalar> out(av.rows() * n, av.cols());
  for (Index r = 0; r < av.rows(); ++r) out.middleRows(r * n, n) = av.row(r).replicate(n, 1);
  return t->push(std::move(out), t->needs_grad({a}), [t, a, n](const Mat<Scalar>& g) {
    Mat<Scalar> acc(a.rows(), g.cols());
    for (Index r = 0; r < acc.rows(); ++r) acc.row(r) = g.middleRows(r * n, n).colwise().sum();
    t->accumulate(a.id, acc);
  });
}

/// Mean over consecutive groups of `n` rows: (B*n x d) -> (B x d).
template <typename Scalar>
Var<Scalar> group_mean(Var<Scalar> a, Index n) {
  require(n > 0 && a.rows() % n == 0, "group_mean: rows not divisible by group size");
  Tape<Scalar>* t = a.tape;
  const auto& av = a.value();
  const Index groups = av.rows() / n;
  Mat<Scalar> out(groups, av.cols());
  for (Index r = 0; r < groups; ++r) out.row(r) = av.middleRows(r * n, n).colwise().mean();
  return t->push(std::move(out), t->needs_grad({a}), [t, a, n, groups](const Mat<Scalar>& g) {
    Mat<Scalar> acc(groups * n, g.cols());
    for (Index r = 0; r < groups; ++r) acc.middleRows(r * n, n) = (g.row(r) / static_cast<Scalar>(n)).replicate(n, 1);
    t->accumulate(a.id, acc);
  });
}

/// Per batch item, concatenates the item's segment of each input:
/// out item b = [in_0 rows of b; in_1 rows of b; ...]. `seg[i]` is rows per item of input i.
template <typename Scalar>
Var<Scalar> concat_segments(const std::vector<Var<Scalar>>& in, const std::vector<Index>& seg) {
  require(!in.empty() && in.size() == seg.size(), "concat_segments: arity mismatch");
  Tape<Scalar>* t = in[0].tape;
  const Index cols = in[0].cols();
  const Index batch = in[0].rows() / seg[0];
  Index per_item = 0;
  bool needs = false;
  for (std::size_t i = 0; i < in.size(); ++i) {
    require(in[i].cols() == cols && in[i].rows() == batch * seg[i], "concat_segments: shape mismatch");
    per_item += seg[i];
    needs = needs || t->needs_grad({in[i]});
  }
  Mat<Scalar> out(batch * per_item, cols);
  for (Index b = 0; b < batch; ++b) {
    Index off = b * per_item;
    for (std::size_t i = 0; i < in.size(); ++i) {
      out.middleRows(off, seg[i]) = in[i].value().middleRows(b * seg[i], seg[i]);
      off += seg[i];
    }
  }
  return t->push(std::move(out), needs, [t, in, seg, batch, per_item, cols](const Mat<Scalar>& g) {
    for (std::size_t i = 0; i < in.size(); ++i) {
      if (!t->needs_grad(in[i].id)) continue;
      Mat<Scalar> part(batch * seg[i], cols);
      Index off = 0;
      for (std::size_t j = 0; j < i; ++j) off += seg[j];
      for (Index b = 0; b < batch; ++b) part.middleRows(b * seg[i], seg[i]) = g.middleRows(b * per_item + off, seg[i]);
      t->accumulate(in[i].id, part);
    }
  });
}

/// Inverse of concat_segments for one input: extracts segment `which`.
template <typename Scalar>
Var<Scalar> select_segment(Var<Scalar> a, const std::vector<Index>& seg, std::size_t which) {
  Index per_item = 0, off = 0;
  for (std::size_t i = 0; i < seg.size(); ++i) {
    if (i < which) off += seg[i];
    per_item += seg[i];
  }
  require(which < seg.size() && a.rows() % per_item == 0, "select_segment: bad segments");
  Tape<Scalar>* t = a.tape;
  const Index batch = a.rows() / per_item, n = seg[which];
  Mat<Scalar> out(batch * n, a.cols());
  for (Index b = 0; b < batch; ++b) out.middleRows(b * n, n) = a.value().middleRows(b * per_item + off, n);
  return t->push(std::move(out), t->needs_grad({a}), [t, a, batch, n, per_item, off](const Mat<Scalar>& g) {
    Mat<Scalar> full = Mat<Scalar>::Zero(a.rows(), a.cols());
    for (Index b = 0; b < batch; ++b) full.middleRows(b * per_item + off, n) = g.middleRows(b * n, n);
    t->accumulate(a.id, full);
  });
}

/// out.row(i) = table.row(ids[i])
template <typename Scalar>
Var<Scalar> gather_rows(Var<Scalar> table, std::vector<int> ids) {
  Tape<Scalar>* t = table.tape;
  const auto& tv = table.value();
  Mat<Scalar> out(static_cast<Index>(ids.size()), tv.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    require(ids[i] >= 0 && ids[i] < tv.rows(), "gather_rows: index out of range");
    out.row(static_cast<Index>(i)) = tv.row(ids[i]);
  }
  return t->push(std::move(out), t->needs_grad({table}), [t, table, ids = std::move(ids)](const Mat<Scalar>& g) {
    Mat<Scalar> acc = Mat<Scalar>::Zero(table.rows(), table.cols());
    for (std::size_t i = 0; i < ids.size(); ++i) acc.row(ids[i]) += g.row(static_cast<Index>(i));
    t->accumulate(table.id, acc);
  });
}

// -------------------------------------------------------------------- losses

/// mean((pred - target)^2) as a 1x1 value.
template <typename Scalar>
Var<Scalar> mse(Var<Scalar> pred, const Mat<Scalar>& target) {
  require(pred.rows() == target.rows() && pred.cols() == target.cols(), "mse: shape mismatch");
  Tape<Scalar>* t = pred.tape;
  const Scalar n = static_cast<Scalar>(target.size());
  auto diff = std::make_shared<Mat<Scalar>>(pred.value() - target);
  Mat<Scalar> out(1, 1);
  out(0, 0) = diff->squaredNorm() / n;
  return t->push(std::move(out), t->needs_grad({pred}), [t, pred, diff, n](const Mat<Scalar>& g) {
    t->accumulate(pred.id, *diff * (Scalar(2) * g(0, 0) / n));
  });
}

/// mean(a^2) as a 1x1 value.
template <typename Scalar>
Var<Scalar> mean_square(Var<Scalar> a) {
  Tape<Scalar>* t = a.tape;
  const Scalar n = static_cast<Scalar>(a.value().size());
  Mat<Scalar> out(1, 1);
  out(0, 0) = a.value().squaredNorm() / n;
  return t->push(std::move(out), t->needs_grad({a}), [t, a, n](const Mat<Scalar>& g) {
    t->accumulate(a.id, a.value() * (Scalar(2) * g(0, 0) / n));
  });
}

}  // namespace audiox::ad
