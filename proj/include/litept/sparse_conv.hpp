#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "litept/ops.hpp"
#include "litept/voxelize.hpp"

namespace litept {

/// The K^3 integer displacements of a cubic kernel, enumerated in fixed
/// lexicographic (dz, dy, dx) order; the center sits at index (K^3 - 1) / 2.
inline std::vector<GridCoord> kernel_offsets(int kernel_size) {
  require<ConfigError>(kernel_size >= 1 && kernel_size % 2 == 1, "kernel size must be odd, got ",
                       kernel_size);
  const std::int64_t h = (kernel_size - 1) / 2;
  std::vector<GridCoord> offsets;
  offsets.reserve(static_cast<std::size_t>(kernel_size) * kernel_size * kernel_size);
  for (std::int64_t dz = -h; dz <= h; ++dz)
    for (std::int64_t dy = -h; dy <= h; ++dy)
      for (std::int64_t dx = -h; dx <= h; ++dx) offsets.push_back(GridCoord{dx, dy, dz});
  return offsets;
}

/// For each output point and kernel offset, the input row holding that
/// neighbor, or -1. Neighbors never cross scene boundaries. The per-offset
/// (out, in) pair lists drive the gathered GEMM formulation of the
/// convolution; for a fixed offset the map out -> in is injective, so
/// scatter writes within one offset never collide.
struct NeighborTable {
  int kernel_size = 0;
  index_t n_points = 0;
  std::vector<GridCoord> offsets;
  std::vector<std::int32_t> entries;  // n_points x K^3, row-major, -1 = missing
  std::vector<std::vector<std::pair<std::int32_t, std::int32_t>>> pairs;  // per offset: (out, in)

  std::int32_t at(index_t point, index_t offset) const {
    return entries[static_cast<std::size_t>(point * static_cast<index_t>(offsets.size()) + offset)];
  }
  index_t center_index() const { return static_cast<index_t>(offsets.size()) / 2; }
};

inline NeighborTable build_neighbor_table(const VoxelIndex& index, int kernel_size) {
  NeighborTable table;
  table.kernel_size = kernel_size;
  table.n_points = static_cast<index_t>(index.inverse.size());
  table.offsets = kernel_offsets(kernel_size);
  const index_t k3 = static_cast<index_t>(table.offsets.size());
  table.entries.assign(static_cast<std::size_t>(table.n_points * k3), -1);
  table.pairs.resize(table.offsets.size());
  for (index_t i = 0; i < table.n_points; ++i) {
    const VoxelKey& key = index.inverse[static_cast<std::size_t>(i)];
    for (index_t o = 0; o < k3; ++o) {
      const GridCoord& d = table.offsets[static_cast<std::size_t>(o)];
      const std::int32_t nbr = index.lookup(VoxelKey{key.scene, key.x + d[0], key.y + d[1], key.z + d[2]});
      if (nbr >= 0) {
        table.entries[static_cast<std::size_t>(i * k3 + o)] = nbr;
        table.pairs[static_cast<std::size_t>(o)].push_back({static_cast<std::int32_t>(i), nbr});
      }
    }
  }
  return table;
}

namespace detail {

/// y[out] += x[in] . W_o for every (out, in) pair of every offset, offsets in
/// ascending order. Each output row accumulates in a fixed order, so the
/// result is identical for any chunking of the row range.
inline Matrix sparse_conv_forward(const Matrix& x, const NeighborTable& table, const Matrix& w,
                                  index_t c_in, index_t c_out) {
  Matrix y(table.n_points, c_out);
  const index_t k3 = static_cast<index_t>(table.offsets.size());
  for (index_t o = 0; o < k3; ++o) {
    const auto& pairs = table.pairs[static_cast<std::size_t>(o)];
    if (pairs.empty()) continue;
    Matrix gathered(static_cast<index_t>(pairs.size()), c_in);
    for (std::size_t p = 0; p < pairs.size(); ++p)
      for (index_t c = 0; c < c_in; ++c) gathered(static_cast<index_t>(p), c) = x(pairs[p].second, c);
    Matrix wo(c_in, c_out);
    for (index_t r = 0; r < c_in; ++r)
      for (index_t c = 0; c < c_out; ++c) wo(r, c) = w(o * c_in + r, c);
    Matrix prod = matmul(gathered, wo);
    for (std::size_t p = 0; p < pairs.size(); ++p)
      for (index_t c = 0; c < c_out; ++c) y(pairs[p].first, c) += prod(static_cast<index_t>(p), c);
  }
  return y;
}

}  // namespace detail

/// Submanifold sparse convolution: output sites equal input sites, missing
/// neighbors contribute nothing. Weights are stacked per offset into one
/// (K^3 * Cin) x Cout matrix; no bias (the block's linear layer carries it).
inline Value sparse_conv(const Value& x, const std::shared_ptr<const NeighborTable>& table,
                         const Value& w) {
  const Matrix& X = x.value();
  const Matrix& W = w.value();
  const index_t k3 = static_cast<index_t>(table->offsets.size());
  require<DimError>(X.rows() == table->n_points, "sparse_conv: ", X.rows(), " rows vs table built for ",
                    table->n_points);
  require<DimError>(W.rows() % k3 == 0, "sparse_conv: weight rows ", W.rows(),
                    " not a multiple of K^3 = ", k3);
  const index_t c_in = W.rows() / k3;
  const index_t c_out = W.cols();
  require<DimError>(X.cols() == c_in, "sparse_conv: x has ", X.cols(), " channels, kernel expects ",
                    c_in);

  auto out = std::make_shared<const Matrix>(detail::sparse_conv_forward(X, *table, W, c_in, c_out));
  Tape* t = detail::tape_of({&x, &w});
  if (!t) return Value::wrap(std::move(out));
  const int ix = detail::node_of(x), iw = detail::node_of(w);
  auto xs = x.shared();
  auto ws = w.shared();
  return t->emplace(
      std::move(out), detail::ids_of({ix, iw}),
      [ix, iw, xs, ws, table, c_in, c_out, k3](Tape& tp, const Matrix& g) {
        if (ix >= 0) {
          // dX[in] += dY[out] . W_o^T; for fixed o the in rows are distinct
          Matrix dx(xs->rows(), c_in);
          for (index_t o = 0; o < k3; ++o) {
            const auto& pairs = table->pairs[static_cast<std::size_t>(o)];
            if (pairs.empty()) continue;
            Matrix gout(static_cast<index_t>(pairs.size()), c_out);
            for (std::size_t p = 0; p < pairs.size(); ++p)
              for (index_t c = 0; c < c_out; ++c) gout(static_cast<index_t>(p), c) = g(pairs[p].first, c);
            Matrix wo(c_in, c_out);
            for (index_t r = 0; r < c_in; ++r)
              for (index_t c = 0; c < c_out; ++c) wo(r, c) = (*ws)(o * c_in + r, c);
            Matrix prod = matmul_nt(gout, wo);
            for (std::size_t p = 0; p < pairs.size(); ++p)
              for (index_t c = 0; c < c_in; ++c) dx(pairs[p].second, c) += prod(static_cast<index_t>(p), c);
          }
          tp.accumulate(ix, dx);
        }
        if (iw >= 0) {
          Matrix dw(k3 * c_in, c_out);
          for (index_t o = 0; o < k3; ++o) {
            const auto& pairs = table->pairs[static_cast<std::size_t>(o)];
            if (pairs.empty()) continue;
            Matrix gin(static_cast<index_t>(pairs.size()), c_in);
            Matrix gout(static_cast<index_t>(pairs.size()), c_out);
            for (std::size_t p = 0; p < pairs.size(); ++p) {
              for (index_t c = 0; c < c_in; ++c) gin(static_cast<index_t>(p), c) = (*xs)(pairs[p].second, c);
              for (index_t c = 0; c < c_out; ++c) gout(static_cast<index_t>(p), c) = g(pairs[p].first, c);
            }
            Matrix dwo = matmul_tn(gin, gout);
            for (index_t r = 0; r < c_in; ++r)
              for (index_t c = 0; c < c_out; ++c) dw(o * c_in + r, c) = dwo(r, c);
          }
          tp.accumulate(iw, dw);
        }
      },
      "sparse_conv");
}

}  // namespace litept
