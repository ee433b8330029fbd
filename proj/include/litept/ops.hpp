#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <utility>
#include <vector>

#include "litept/tape.hpp"

namespace litept {

inline constexpr double inv_sqrt2 = 0.70710678118654752440;

namespace detail {
inline std::vector<int> ids_of(std::initializer_list<int> ids) {
  std::vector<int> out;
  for (int id : ids)
    if (id >= 0) out.push_back(id);
  return out;
}
}  // namespace detail

// --- elementwise / structural -------------------------------------------

inline Value add(const Value& a, const Value& b) {
  auto out = std::make_shared<const Matrix>(add(a.value(), b.value()));
  Tape* t = detail::tape_of({&a, &b});
  if (!t) return Value::wrap(std::move(out));
  const int ia = detail::node_of(a), ib = detail::node_of(b);
  return t->emplace(
      std::move(out), detail::ids_of({ia, ib}),
      [ia, ib](Tape& tp, const Matrix& g) {
        if (ia >= 0) tp.accumulate(ia, g);
        if (ib >= 0) tp.accumulate(ib, g);
      },
      "add");
}

inline Value scale(const Value& x, double s) {
  auto out = std::make_shared<const Matrix>(scaled(x.value(), s));
  Tape* t = detail::tape_of({&x});
  if (!t) return Value::wrap(std::move(out));
  const int ix = x.node();
  return t->emplace(
      std::move(out), {ix}, [ix, s](Tape& tp, const Matrix& g) { tp.accumulate(ix, scaled(g, s)); },
      "scale");
}

/// y = x . w + bias, bias broadcast over rows (bias is 1 x Cout).
inline Value linear(const Value& x, const Value& w, const Value& bias) {
  const Matrix& X = x.value();
  const Matrix& W = w.value();
  const Matrix& B = bias.value();
  require<DimError>(X.cols() == W.rows(), "linear: x is ", shape_str(X), " but w is ", shape_str(W));
  require<DimError>(B.rows() == 1 && B.cols() == W.cols(), "linear: bias is ", shape_str(B),
                    " but w is ", shape_str(W));
  Matrix y = matmul(X, W);
  for (index_t r = 0; r < y.rows(); ++r)
    for (index_t c = 0; c < y.cols(); ++c) y(r, c) += B(0, c);
  auto out = std::make_shared<const Matrix>(std::move(y));
  Tape* t = detail::tape_of({&x, &w, &bias});
  if (!t) return Value::wrap(std::move(out));
  const int ix = detail::node_of(x), iw = detail::node_of(w), ib = detail::node_of(bias);
  auto xs = x.shared();
  auto ws = w.shared();
  return t->emplace(
      std::move(out), detail::ids_of({ix, iw, ib}),
      [ix, iw, ib, xs, ws](Tape& tp, const Matrix& g) {
        if (ix >= 0) tp.accumulate(ix, matmul_nt(g, *ws));
        if (iw >= 0) tp.accumulate(iw, matmul_tn(*xs, g));
        if (ib >= 0) tp.accumulate(ib, col_sums(g));
      },
      "linear");
}

inline Value matmul(const Value& a, const Value& b) {
  auto out = std::make_shared<const Matrix>(matmul(a.value(), b.value()));
  Tape* t = detail::tape_of({&a, &b});
  if (!t) return Value::wrap(std::move(out));
  const int ia = detail::node_of(a), ib = detail::node_of(b);
  auto as = a.shared();
  auto bs = b.shared();
  return t->emplace(
      std::move(out), detail::ids_of({ia, ib}),
      [ia, ib, as, bs](Tape& tp, const Matrix& g) {
        if (ia >= 0) tp.accumulate(ia, matmul_nt(g, *bs));
        if (ib >= 0) tp.accumulate(ib, matmul_tn(*as, g));
      },
      "matmul");
}

/// scale * (a . b^T) through the order-exact kernel (see matrix.hpp).
inline Value scaled_matmul_nt(const Value& a, const Value& b, double s) {
  auto out = std::make_shared<const Matrix>(scaled_dot_nt_exact(a.value(), b.value(), s));
  Tape* t = detail::tape_of({&a, &b});
  if (!t) return Value::wrap(std::move(out));
  const int ia = detail::node_of(a), ib = detail::node_of(b);
  auto as = a.shared();
  auto bs = b.shared();
  return t->emplace(
      std::move(out), detail::ids_of({ia, ib}),
      [ia, ib, as, bs, s](Tape& tp, const Matrix& g) {
        if (ia >= 0) tp.accumulate(ia, scaled(matmul(g, *bs), s));
        if (ib >= 0) tp.accumulate(ib, scaled(matmul_tn(g, *as), s));
      },
      "scaled_matmul_nt");
}

inline Value slice_cols(const Value& x, index_t start, index_t width) {
  const Matrix& X = x.value();
  require<DimError>(start >= 0 && width >= 0 && start + width <= X.cols(), "slice_cols: [", start,
                    ", ", start + width, ") out of ", shape_str(X));
  Matrix y(X.rows(), width);
  for (index_t r = 0; r < X.rows(); ++r)
    for (index_t c = 0; c < width; ++c) y(r, c) = X(r, start + c);
  auto out = std::make_shared<const Matrix>(std::move(y));
  Tape* t = detail::tape_of({&x});
  if (!t) return Value::wrap(std::move(out));
  const int ix = x.node();
  const index_t rows = X.rows(), cols = X.cols();
  return t->emplace(
      std::move(out), {ix},
      [ix, start, width, rows, cols](Tape& tp, const Matrix& g) {
        Matrix dx(rows, cols);
        for (index_t r = 0; r < rows; ++r)
          for (index_t c = 0; c < width; ++c) dx(r, start + c) = g(r, c);
        tp.accumulate(ix, dx);
      },
      "slice_cols");
}

inline Value concat_cols(const std::vector<Value>& parts) {
  require<DimError>(!parts.empty(), "concat_cols: no parts");
  index_t rows = parts[0].rows(), cols = 0;
  for (const Value& p : parts) {
    require<DimError>(p.rows() == rows, "concat_cols: row mismatch");
    cols += p.cols();
  }
  Matrix y(rows, cols);
  index_t off = 0;
  for (const Value& p : parts) {
    const Matrix& P = p.value();
    for (index_t r = 0; r < rows; ++r)
      for (index_t c = 0; c < P.cols(); ++c) y(r, off + c) = P(r, c);
    off += P.cols();
  }
  auto out = std::make_shared<const Matrix>(std::move(y));
  Tape* t = nullptr;
  for (const Value& p : parts)
    if (p.recorded()) {
      require<Error>(t == nullptr || t == p.tape(), "concat_cols: inputs on different tapes");
      t = p.tape();
    }
  if (!t) return Value::wrap(std::move(out));
  std::vector<int> in_ids;
  std::vector<std::pair<int, std::pair<index_t, index_t>>> spans;  // (node, (start, width))
  off = 0;
  for (const Value& p : parts) {
    spans.push_back({detail::node_of(p), {off, p.cols()}});
    if (p.recorded()) in_ids.push_back(p.node());
    off += p.cols();
  }
  return t->emplace(
      std::move(out), std::move(in_ids),
      [spans, rows](Tape& tp, const Matrix& g) {
        for (const auto& [id, span] : spans) {
          if (id < 0) continue;
          Matrix dp(rows, span.second);
          for (index_t r = 0; r < rows; ++r)
            for (index_t c = 0; c < span.second; ++c) dp(r, c) = g(r, span.first + c);
          tp.accumulate(id, dp);
        }
      },
      "concat_cols");
}

inline Value gather_rows(const Value& x, std::vector<index_t> rows) {
  const Matrix& X = x.value();
  Matrix y(static_cast<index_t>(rows.size()), X.cols());
  for (index_t i = 0; i < y.rows(); ++i) {
    const index_t r = rows[static_cast<std::size_t>(i)];
    require<RangeError>(r >= 0 && r < X.rows(), "gather_rows: index ", r, " out of ", X.rows());
    for (index_t c = 0; c < X.cols(); ++c) y(i, c) = X(r, c);
  }
  auto out = std::make_shared<const Matrix>(std::move(y));
  Tape* t = detail::tape_of({&x});
  if (!t) return Value::wrap(std::move(out));
  const int ix = x.node();
  const index_t n = X.rows(), cols = X.cols();
  return t->emplace(
      std::move(out), {ix},
      [ix, rows = std::move(rows), n, cols](Tape& tp, const Matrix& g) {
        Matrix dx(n, cols);
        for (index_t i = 0; i < g.rows(); ++i) {
          const index_t r = rows[static_cast<std::size_t>(i)];
          for (index_t c = 0; c < cols; ++c) dx(r, c) += g(i, c);
        }
        tp.accumulate(ix, dx);
      },
      "gather_rows");
}

/// Assembles an [n_rows x C] matrix from parts written at disjoint row sets;
/// unwritten rows stay zero. Throws if two parts address the same row.
inline Value scatter_rows(const std::vector<Value>& parts,
                          const std::vector<std::vector<index_t>>& rows, index_t n_rows) {
  require<DimError>(parts.size() == rows.size(), "scatter_rows: parts/rows size mismatch");
  require<DimError>(!parts.empty(), "scatter_rows: no parts");
  const index_t cols = parts[0].cols();
  Matrix y(n_rows, cols);
  std::vector<char> seen(static_cast<std::size_t>(n_rows), 0);
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const Matrix& P = parts[p].value();
    require<DimError>(P.cols() == cols, "scatter_rows: column mismatch");
    require<DimError>(P.rows() == static_cast<index_t>(rows[p].size()), "scatter_rows: row-list size mismatch");
    for (index_t i = 0; i < P.rows(); ++i) {
      const index_t r = rows[p][static_cast<std::size_t>(i)];
      require<RangeError>(r >= 0 && r < n_rows, "scatter_rows: index ", r, " out of ", n_rows);
      require<Error>(!seen[static_cast<std::size_t>(r)], "scatter_rows: row ", r, " written twice");
      seen[static_cast<std::size_t>(r)] = 1;
      for (index_t c = 0; c < cols; ++c) y(r, c) = P(i, c);
    }
  }
  auto out = std::make_shared<const Matrix>(std::move(y));
  Tape* t = nullptr;
  for (const Value& p : parts)
    if (p.recorded()) {
      require<Error>(t == nullptr || t == p.tape(), "scatter_rows: inputs on different tapes");
      t = p.tape();
    }
  if (!t) return Value::wrap(std::move(out));
  std::vector<int> in_ids;
  std::vector<int> part_ids;
  for (const Value& p : parts) {
    part_ids.push_back(detail::node_of(p));
    if (p.recorded()) in_ids.push_back(p.node());
  }
  return t->emplace(
      std::move(out), std::move(in_ids),
      [part_ids, rows, cols](Tape& tp, const Matrix& g) {
        for (std::size_t p = 0; p < part_ids.size(); ++p) {
          if (part_ids[p] < 0) continue;
          Matrix dp(static_cast<index_t>(rows[p].size()), cols);
          for (index_t i = 0; i < dp.rows(); ++i) {
            const index_t r = rows[p][static_cast<std::size_t>(i)];
            for (index_t c = 0; c < cols; ++c) dp(i, c) = g(r, c);
          }
          tp.accumulate(part_ids[p], dp);
        }
      },
      "scatter_rows");
}

// --- normalization & activations ------------------------------------------

/// Per-row standardization (population variance) followed by affine.
inline Value layer_norm(const Value& x, const Value& gamma, const Value& beta, double eps = 1e-5) {
  const Matrix& X = x.value();
  const Matrix& G = gamma.value();
  const Matrix& B = beta.value();
  const index_t N = X.rows(), C = X.cols();
  require<DimError>(C >= 1, "layer_norm: needs at least one channel");
  require<DimError>(G.rows() == 1 && G.cols() == C && B.rows() == 1 && B.cols() == C,
                    "layer_norm: affine shapes ", shape_str(G), "/", shape_str(B), " vs x ", shape_str(X));
  auto xhat = std::make_shared<Matrix>(N, C);
  auto inv_std = std::make_shared<std::vector<double>>(static_cast<std::size_t>(N));
  Matrix y(N, C);
  for (index_t r = 0; r < N; ++r) {
    double mean = 0.0;
    for (index_t c = 0; c < C; ++c) mean += X(r, c);
    mean /= static_cast<double>(C);
    double var = 0.0;
    for (index_t c = 0; c < C; ++c) {
      const double d = X(r, c) - mean;
      var += d * d;
    }
    var /= static_cast<double>(C);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[static_cast<std::size_t>(r)] = is;
    for (index_t c = 0; c < C; ++c) {
      const double xh = (X(r, c) - mean) * is;
      (*xhat)(r, c) = xh;
      y(r, c) = G(0, c) * xh + B(0, c);
    }
  }
  auto out = std::make_shared<const Matrix>(std::move(y));
  Tape* t = detail::tape_of({&x, &gamma, &beta});
  if (!t) return Value::wrap(std::move(out));
  const int ix = detail::node_of(x), ig = detail::node_of(gamma), ib = detail::node_of(beta);
  auto gs = gamma.shared();
  return t->emplace(
      std::move(out), detail::ids_of({ix, ig, ib}),
      [ix, ig, ib, xhat, inv_std, gs, N, C](Tape& tp, const Matrix& g) {
        if (ig >= 0) {
          Matrix dg(1, C);
          for (index_t r = 0; r < N; ++r)
            for (index_t c = 0; c < C; ++c) dg(0, c) += g(r, c) * (*xhat)(r, c);
          tp.accumulate(ig, dg);
        }
        if (ib >= 0) tp.accumulate(ib, col_sums(g));
        if (ix >= 0) {
          Matrix dx(N, C);
          for (index_t r = 0; r < N; ++r) {
            double sum_dxh = 0.0, sum_dxh_xh = 0.0;
            for (index_t c = 0; c < C; ++c) {
              const double dxh = g(r, c) * (*gs)(0, c);
              sum_dxh += dxh;
              sum_dxh_xh += dxh * (*xhat)(r, c);
            }
            const double is = (*inv_std)[static_cast<std::size_t>(r)];
            for (index_t c = 0; c < C; ++c) {
              const double dxh = g(r, c) * (*gs)(0, c);
              dx(r, c) = is / static_cast<double>(C) *
                         (static_cast<double>(C) * dxh - sum_dxh - (*xhat)(r, c) * sum_dxh_xh);
            }
          }
          tp.accumulate(ix, dx);
        }
      },
      "layer_norm");
}

struct BnState {
  Matrix running_mean;  // 1 x C
  Matrix running_var;   // 1 x C

  static BnState fresh(index_t channels) {
    BnState s;
    s.running_mean = Matrix(1, channels);
    s.running_var = Matrix(1, channels, 1.0);
    return s;
  }
};

enum class BnMode { Train, Eval };

/// Per-column batch normalization. Train mode normalizes with population
/// statistics of the current batch and folds them into the running estimates;
/// eval mode normalizes with the running estimates.
inline Value batch_norm(const Value& x, const Value& gamma, const Value& beta, BnState& state,
                        BnMode mode, double eps = 1e-5, double momentum = 0.1) {
  const Matrix& X = x.value();
  const Matrix& G = gamma.value();
  const Matrix& B = beta.value();
  const index_t N = X.rows(), C = X.cols();
  require<DimError>(G.rows() == 1 && G.cols() == C && B.rows() == 1 && B.cols() == C,
                    "batch_norm: affine shapes ", shape_str(G), "/", shape_str(B), " vs x ", shape_str(X));
  require<DimError>(state.running_mean.cols() == C && state.running_var.cols() == C,
                    "batch_norm: running stats have ", state.running_mean.cols(), " channels, x has ", C);
  if (mode == BnMode::Train)
    require<DataError>(N >= 2, "batch_norm: train mode needs at least 2 rows, got ", N);

  auto xhat = std::make_shared<Matrix>(N, C);
  auto inv_std = std::make_shared<std::vector<double>>(static_cast<std::size_t>(C));
  Matrix y(N, C);
  for (index_t c = 0; c < C; ++c) {
    double mean, var;
    if (mode == BnMode::Train) {
      mean = 0.0;
      for (index_t r = 0; r < N; ++r) mean += X(r, c);
      mean /= static_cast<double>(N);
      var = 0.0;
      for (index_t r = 0; r < N; ++r) {
        const double d = X(r, c) - mean;
        var += d * d;
      }
      var /= static_cast<double>(N);
      state.running_mean(0, c) = (1.0 - momentum) * state.running_mean(0, c) + momentum * mean;
      state.running_var(0, c) = (1.0 - momentum) * state.running_var(0, c) + momentum * var;
    } else {
      mean = state.running_mean(0, c);
      var = state.running_var(0, c);
    }
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[static_cast<std::size_t>(c)] = is;
    for (index_t r = 0; r < N; ++r) {
      const double xh = (X(r, c) - mean) * is;
      (*xhat)(r, c) = xh;
      y(r, c) = G(0, c) * xh + B(0, c);
    }
  }
  auto out = std::make_shared<const Matrix>(std::move(y));
  Tape* t = detail::tape_of({&x, &gamma, &beta});
  if (!t) return Value::wrap(std::move(out));
  const int ix = detail::node_of(x), ig = detail::node_of(gamma), ib = detail::node_of(beta);
  auto gs = gamma.shared();
  const bool train = mode == BnMode::Train;
  return t->emplace(
      std::move(out), detail::ids_of({ix, ig, ib}),
      [ix, ig, ib, xhat, inv_std, gs, N, C, train](Tape& tp, const Matrix& g) {
        if (ig >= 0) {
          Matrix dg(1, C);
          for (index_t r = 0; r < N; ++r)
            for (index_t c = 0; c < C; ++c) dg(0, c) += g(r, c) * (*xhat)(r, c);
          tp.accumulate(ig, dg);
        }
        if (ib >= 0) tp.accumulate(ib, col_sums(g));
        if (ix >= 0) {
          Matrix dx(N, C);
          for (index_t c = 0; c < C; ++c) {
            const double is = (*inv_std)[static_cast<std::size_t>(c)];
            if (train) {
              double sum_dxh = 0.0, sum_dxh_xh = 0.0;
              for (index_t r = 0; r < N; ++r) {
                const double dxh = g(r, c) * (*gs)(0, c);
                sum_dxh += dxh;
                sum_dxh_xh += dxh * (*xhat)(r, c);
              }
              for (index_t r = 0; r < N; ++r) {
                const double dxh = g(r, c) * (*gs)(0, c);
                dx(r, c) = is / static_cast<double>(N) *
                           (static_cast<double>(N) * dxh - sum_dxh - (*xhat)(r, c) * sum_dxh_xh);
              }
            } else {
              for (index_t r = 0; r < N; ++r) dx(r, c) = g(r, c) * (*gs)(0, c) * is;
            }
          }
          tp.accumulate(ix, dx);
        }
      },
      "batch_norm");
}

/// Exact-erf GELU: x * Phi(x).
inline Value gelu(const Value& x) {
  const Matrix& X = x.value();
  Matrix y(X.rows(), X.cols());
  const double* xd = X.data();
  double* yd = y.data();
  for (index_t i = 0, n = X.size(); i < n; ++i) {
    const double v = xd[i];
    yd[i] = v * 0.5 * (1.0 + std::erf(v * inv_sqrt2));
  }
  auto out = std::make_shared<const Matrix>(std::move(y));
  Tape* t = detail::tape_of({&x});
  if (!t) return Value::wrap(std::move(out));
  const int ix = x.node();
  auto xs = x.shared();
  return t->emplace(
      std::move(out), {ix},
      [ix, xs](Tape& tp, const Matrix& g) {
        Matrix dx(xs->rows(), xs->cols());
        const double* xd = xs->data();
        const double* gd = g.data();
        double* dd = dx.data();
        constexpr double inv_sqrt_2pi = 0.3989422804014326779;
        for (index_t i = 0, n = xs->size(); i < n; ++i) {
          const double v = xd[i];
          const double phi = 0.5 * (1.0 + std::erf(v * inv_sqrt2));
          const double pdf = inv_sqrt_2pi * std::exp(-0.5 * v * v);
          dd[i] = gd[i] * (phi + v * pdf);
        }
        tp.accumulate(ix, dx);
      },
      "gelu");
}

/// Row-wise softmax over the entries whose mask bit is set; masked positions
/// get exactly zero probability. mask is row-major, 1 = participate.
inline Value masked_softmax(const Value& logits, const std::vector<std::uint8_t>& mask) {
  const Matrix& L = logits.value();
  const index_t R = L.rows(), C = L.cols();
  require<DimError>(static_cast<index_t>(mask.size()) == R * C, "masked_softmax: mask has ",
                    mask.size(), " entries, logits are ", shape_str(L));
  auto probs = std::make_shared<Matrix>(R, C);
  for (index_t r = 0; r < R; ++r) {
    const std::uint8_t* mrow = mask.data() + r * C;
    double mx = -std::numeric_limits<double>::infinity();
    index_t live = 0;
    for (index_t c = 0; c < C; ++c)
      if (mrow[c]) {
        mx = std::max(mx, L(r, c));
        ++live;
      }
    require<DataError>(live > 0, "masked_softmax: row ", r, " fully masked");
    double denom = 0.0;
    for (index_t c = 0; c < C; ++c) {
      if (!mrow[c]) continue;
      const double e = std::exp(L(r, c) - mx);
      (*probs)(r, c) = e;
      denom += e;
    }
    for (index_t c = 0; c < C; ++c)
      if (mrow[c]) (*probs)(r, c) /= denom;
  }
  auto out = std::make_shared<const Matrix>(*probs);
  Tape* t = detail::tape_of({&logits});
  if (!t) return Value::wrap(std::move(out));
  const int il = logits.node();
  auto mk = std::make_shared<const std::vector<std::uint8_t>>(mask);
  return t->emplace(
      std::move(out), {il},
      [il, probs, mk, R, C](Tape& tp, const Matrix& g) {
        Matrix dl(R, C);
        for (index_t r = 0; r < R; ++r) {
          const std::uint8_t* mrow = mk->data() + r * C;
          double dot = 0.0;
          for (index_t c = 0; c < C; ++c)
            if (mrow[c]) dot += g(r, c) * (*probs)(r, c);
          for (index_t c = 0; c < C; ++c)
            if (mrow[c]) dl(r, c) = (*probs)(r, c) * (g(r, c) - dot);
        }
        tp.accumulate(il, dl);
      },
      "masked_softmax");
}

struct SegmentMaxResult {
  Value value;                   // S x C
  std::vector<index_t> argmax;   // S*C row indices, ties to the lowest row
};

/// Per-segment, per-channel maximum. Gradient flows only to the argmax row,
/// ties broken toward the lowest row index.
inline SegmentMaxResult segment_max(const Value& x, const std::vector<index_t>& segments,
                                    index_t n_segments) {
  const Matrix& X = x.value();
  const index_t N = X.rows(), C = X.cols();
  require<DimError>(static_cast<index_t>(segments.size()) == N, "segment_max: ", segments.size(),
                    " segment ids for ", N, " rows");
  Matrix y(n_segments, C, -std::numeric_limits<double>::infinity());
  std::vector<index_t> argmax(static_cast<std::size_t>(n_segments * C), -1);
  for (index_t r = 0; r < N; ++r) {
    const index_t s = segments[static_cast<std::size_t>(r)];
    require<RangeError>(s >= 0 && s < n_segments, "segment_max: segment id ", s, " out of ", n_segments);
    for (index_t c = 0; c < C; ++c) {
      if (X(r, c) > y(s, c)) {
        y(s, c) = X(r, c);
        argmax[static_cast<std::size_t>(s * C + c)] = r;
      }
    }
  }
  for (index_t s = 0; s < n_segments; ++s)
    require<DataError>(C == 0 || argmax[static_cast<std::size_t>(s * C)] >= 0, "segment_max: segment ",
                       s, " is empty");
  auto out = std::make_shared<const Matrix>(std::move(y));
  Tape* t = detail::tape_of({&x});
  if (!t) return SegmentMaxResult{Value::wrap(std::move(out)), std::move(argmax)};
  const int ix = x.node();
  auto am = std::make_shared<const std::vector<index_t>>(argmax);
  Value v = t->emplace(
      std::move(out), {ix},
      [ix, am, N, C](Tape& tp, const Matrix& g) {
        Matrix dx(N, C);
        for (index_t s = 0; s < g.rows(); ++s)
          for (index_t c = 0; c < C; ++c) dx((*am)[static_cast<std::size_t>(s * C + c)], c) += g(s, c);
        tp.accumulate(ix, dx);
      },
      "segment_max");
  return SegmentMaxResult{std::move(v), std::move(argmax)};
}

/// Scalar sum of x .* w with a fixed weight matrix; test utility for turning
/// any op output into a differentiable scalar.
inline Value weighted_sum(const Value& x, const Matrix& w) {
  const Matrix& X = x.value();
  require<DimError>(X.same_shape(w), "weighted_sum: shapes differ (", shape_str(X), " vs ",
                    shape_str(w), ")");
  double s = 0.0;
  const double* xd = X.data();
  const double* wd = w.data();
  for (index_t i = 0, n = X.size(); i < n; ++i) s += xd[i] * wd[i];
  auto out = std::make_shared<const Matrix>(Matrix::from_rows({{s}}));
  Tape* t = detail::tape_of({&x});
  if (!t) return Value::wrap(std::move(out));
  const int ix = x.node();
  auto ws = std::make_shared<const Matrix>(w);
  return t->emplace(
      std::move(out), {ix},
      [ix, ws](Tape& tp, const Matrix& g) { tp.accumulate(ix, scaled(*ws, g(0, 0))); },
      "weighted_sum");
}

}  // namespace litept
