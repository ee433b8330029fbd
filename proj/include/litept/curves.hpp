#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <numeric>
#include <vector>

#include "litept/voxelize.hpp"

namespace litept {

inline constexpr int kCurveBits = 21;  // 3 x 21 = 63 code bits

// --- Morton (z-order) --------------------------------------------------------

namespace detail {

inline std::uint64_t spread_bits_21(std::uint64_t v) {
  v &= 0x1fffffull;
  v = (v | (v << 32)) & 0x001f00000000ffffull;
  v = (v | (v << 16)) & 0x001f0000ff0000ffull;
  v = (v | (v << 8)) & 0x100f00f00f00f00full;
  v = (v | (v << 4)) & 0x10c30c30c30c30c3ull;
  v = (v | (v << 2)) & 0x1249249249249249ull;
  return v;
}

inline std::uint64_t compact_bits_21(std::uint64_t v) {
  v &= 0x1249249249249249ull;
  v = (v ^ (v >> 2)) & 0x10c30c30c30c30c3ull;
  v = (v ^ (v >> 4)) & 0x100f00f00f00f00full;
  v = (v ^ (v >> 8)) & 0x001f0000ff0000ffull;
  v = (v ^ (v >> 16)) & 0x001f00000000ffffull;
  v = (v ^ (v >> 32)) & 0x1fffffull;
  return v;
}

inline void check_curve_range(std::uint64_t x, std::uint64_t y, std::uint64_t z, int bits) {
  const std::uint64_t lim = 1ull << bits;
  require<RangeError>(x < lim && y < lim && z < lim, "curve coordinate (", x, ", ", y, ", ", z,
                      ") exceeds ", bits, "-bit range");
}

}  // namespace detail

/// Bit interleave with x at bit 0, y at bit 1, z at bit 2 of each level.
inline std::uint64_t morton_encode(std::uint64_t x, std::uint64_t y, std::uint64_t z) {
  detail::check_curve_range(x, y, z, kCurveBits);
  return detail::spread_bits_21(x) | (detail::spread_bits_21(y) << 1) |
         (detail::spread_bits_21(z) << 2);
}

inline std::array<std::uint64_t, 3> morton_decode(std::uint64_t code) {
  return {detail::compact_bits_21(code), detail::compact_bits_21(code >> 1),
          detail::compact_bits_21(code >> 2)};
}

// --- Hilbert -----------------------------------------------------------------
// Skilling's transpose transform: the Hilbert index is carried as one bit per
// axis per level; packing puts axis 0 in the top bit of each 3-bit group.

namespace detail {

inline void hilbert_axes_to_transpose(std::uint32_t* X, int bits) {
  std::uint32_t M = 1u << (bits - 1), P, Q, t;
  for (Q = M; Q > 1; Q >>= 1) {  // inverse undo
    P = Q - 1;
    for (int i = 0; i < 3; ++i) {
      if (X[i] & Q) {
        X[0] ^= P;
      } else {
        t = (X[0] ^ X[i]) & P;
        X[0] ^= t;
        X[i] ^= t;
      }
    }
  }
  for (int i = 1; i < 3; ++i) X[i] ^= X[i - 1];  // Gray encode
  t = 0;
  for (Q = M; Q > 1; Q >>= 1)
    if (X[2] & Q) t ^= Q - 1;
  for (int i = 0; i < 3; ++i) X[i] ^= t;
}

inline void hilbert_transpose_to_axes(std::uint32_t* X, int bits) {
  std::uint32_t N = 2u << (bits - 1), P, Q, t;
  t = X[2] >> 1;  // Gray decode by H ^ (H/2)
  for (int i = 2; i > 0; --i) X[i] ^= X[i - 1];
  X[0] ^= t;
  for (Q = 2; Q != N; Q <<= 1) {  // undo excess work
    P = Q - 1;
    for (int i = 2; i >= 0; --i) {
      if (X[i] & Q) {
        X[0] ^= P;
      } else {
        t = (X[0] ^ X[i]) & P;
        X[0] ^= t;
        X[i] ^= t;
      }
    }
  }
}

inline std::uint64_t pack_transpose(const std::uint32_t* X, int bits) {
  std::uint64_t code = 0;
  for (int b = bits - 1; b >= 0; --b)
    for (int i = 0; i < 3; ++i) code = (code << 1) | ((X[i] >> b) & 1u);
  return code;
}

inline void unpack_transpose(std::uint64_t code, std::uint32_t* X, int bits) {
  X[0] = X[1] = X[2] = 0;
  for (int b = 0; b < bits; ++b)
    for (int i = 2; i >= 0; --i) {
      X[i] |= static_cast<std::uint32_t>(code & 1u) << b;
      code >>= 1;
    }
}

}  // namespace detail

inline std::uint64_t hilbert_encode(std::uint64_t x, std::uint64_t y, std::uint64_t z,
                                    int order_bits = kCurveBits) {
  require<ConfigError>(order_bits >= 1 && order_bits <= kCurveBits, "hilbert order must be in [1, ",
                       kCurveBits, "], got ", order_bits);
  detail::check_curve_range(x, y, z, order_bits);
  std::uint32_t X[3] = {static_cast<std::uint32_t>(x), static_cast<std::uint32_t>(y),
                        static_cast<std::uint32_t>(z)};
  detail::hilbert_axes_to_transpose(X, order_bits);
  return detail::pack_transpose(X, order_bits);
}

inline std::array<std::uint64_t, 3> hilbert_decode(std::uint64_t code, int order_bits = kCurveBits) {
  require<ConfigError>(order_bits >= 1 && order_bits <= kCurveBits, "hilbert order must be in [1, ",
                       kCurveBits, "], got ", order_bits);
  std::uint32_t X[3];
  detail::unpack_transpose(code, X, order_bits);
  detail::hilbert_transpose_to_axes(X, order_bits);
  return {X[0], X[1], X[2]};
}

// --- serialization -----------------------------------------------------------

/// Trans variants permute the axes to (y, z, x) before encoding.
enum class CurveKind { ZOrder, ZOrderTrans, Hilbert, HilbertTrans };

inline const char* curve_name(CurveKind k) {
  switch (k) {
    case CurveKind::ZOrder: return "z";
    case CurveKind::ZOrderTrans: return "z-trans";
    case CurveKind::Hilbert: return "hilbert";
    case CurveKind::HilbertTrans: return "hilbert-trans";
  }
  return "?";
}

inline std::uint64_t curve_code(CurveKind kind, std::uint64_t x, std::uint64_t y, std::uint64_t z) {
  switch (kind) {
    case CurveKind::ZOrder: return morton_encode(x, y, z);
    case CurveKind::ZOrderTrans: return morton_encode(y, z, x);
    case CurveKind::Hilbert: return hilbert_encode(x, y, z);
    case CurveKind::HilbertTrans: return hilbert_encode(y, z, x);
  }
  throw ConfigError("unknown curve kind");
}

/// Fixed per-block rotation through the four serialization curves.
inline CurveKind curve_schedule(index_t block_index) {
  static constexpr CurveKind kCycle[4] = {CurveKind::ZOrder, CurveKind::ZOrderTrans,
                                          CurveKind::Hilbert, CurveKind::HilbertTrans};
  return kCycle[static_cast<std::size_t>(((block_index % 4) + 4) % 4)];
}

/// Curve-sorted point order cut into fixed-size groups. Groups never span
/// scene boundaries; a scene's final partial group is padded by repeating the
/// scene's last real point, with the pad mask cleared on those slots.
struct SerializedOrder {
  std::vector<index_t> perm;           // the N real indices, serialized order
  std::vector<index_t> slots;          // n_groups * group_size indices
  std::vector<std::uint8_t> pad_mask;  // 1 = real point, 0 = pad
  std::vector<index_t> real_counts;    // per group; pads only at group tails
  index_t group_size = 0;
  index_t n_groups = 0;

  index_t group_start(index_t g) const { return g * group_size; }
};

inline SerializedOrder serialize(const LevelGeometry& geom, CurveKind kind, index_t n_group) {
  require<ConfigError>(n_group >= 1, "group size must be >= 1, got ", n_group);
  SerializedOrder order;
  order.group_size = n_group;
  order.perm.reserve(geom.grid.size());

  for (index_t s = 0; s < geom.num_scenes(); ++s) {
    const index_t lo = geom.offsets[static_cast<std::size_t>(s)];
    const index_t hi = geom.offsets[static_cast<std::size_t>(s) + 1];
    const index_t m = hi - lo;
    if (m == 0) continue;

    std::int64_t mn[3] = {INT64_MAX, INT64_MAX, INT64_MAX};
    for (index_t i = lo; i < hi; ++i)
      for (int k = 0; k < 3; ++k)
        mn[k] = std::min(mn[k], geom.grid[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)]);

    std::vector<std::pair<std::uint64_t, index_t>> keyed(static_cast<std::size_t>(m));
    for (index_t i = lo; i < hi; ++i) {
      const auto& g = geom.grid[static_cast<std::size_t>(i)];
      keyed[static_cast<std::size_t>(i - lo)] = {
          curve_code(kind, static_cast<std::uint64_t>(g[0] - mn[0]),
                     static_cast<std::uint64_t>(g[1] - mn[1]), static_cast<std::uint64_t>(g[2] - mn[2])),
          i};
    }
    std::stable_sort(keyed.begin(), keyed.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });

    const index_t scene_groups = (m + n_group - 1) / n_group;
    for (index_t i = 0; i < m; ++i) order.perm.push_back(keyed[static_cast<std::size_t>(i)].second);
    const index_t last_real = keyed.back().second;
    for (index_t g = 0; g < scene_groups; ++g) {
      const index_t got = std::min(n_group, m - g * n_group);
      for (index_t j = 0; j < n_group; ++j) {
        if (j < got) {
          order.slots.push_back(keyed[static_cast<std::size_t>(g * n_group + j)].second);
          order.pad_mask.push_back(1);
        } else {
          order.slots.push_back(last_real);
          order.pad_mask.push_back(0);
        }
      }
      order.real_counts.push_back(got);
    }
    order.n_groups += scene_groups;
  }
  return order;
}

}  // namespace litept
