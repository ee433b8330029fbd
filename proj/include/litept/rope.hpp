#pragma once

#include <array>
#include <cmath>
#include <span>
#include <vector>

#include "litept/ops.hpp"
#include "litept/voxelize.hpp"

namespace litept {

enum class RopeMode { Cartesian, Spherical };

/// Layout of the rotary embedding within one attention head. The head
/// dimension splits into three per-axis subspaces (equal thirds unless
/// overridden), each rotated by one coordinate with the frequency law
/// theta_j = base^(-2j / d_axis).
struct RopeConfig {
  int head_dim = 0;
  double base = 100.0;
  RopeMode mode = RopeMode::Cartesian;
  std::array<int, 3> axis_split{0, 0, 0};  // zeros = equal thirds

  std::array<int, 3> resolved_split() const {
    require<ConfigError>(head_dim > 0, "rope: head_dim must be positive, got ", head_dim);
    require<ConfigError>(base > 0, "rope: base frequency must be positive, got ", base);
    std::array<int, 3> s = axis_split;
    if (s[0] == 0 && s[1] == 0 && s[2] == 0) {
      require<ConfigError>(head_dim % 6 == 0, "rope: head_dim ", head_dim,
                           " not divisible by 6 for the equal-thirds split");
      s = {head_dim / 3, head_dim / 3, head_dim / 3};
    }
    require<ConfigError>(s[0] + s[1] + s[2] == head_dim, "rope: axis split ", s[0], ":", s[1], ":",
                         s[2], " does not sum to head_dim ", head_dim);
    for (int d : s)
      require<ConfigError>(d >= 0 && d % 2 == 0, "rope: axis sub-dimension ", d, " must be even");
    return s;
  }
};

/// Rotates consecutive pairs (v[2j], v[2j+1]) by angle t * base^(-2j / d).
inline std::vector<double> rope_1d(std::span<const double> v, double t, double base) {
  const auto d = static_cast<index_t>(v.size());
  require<ConfigError>(d % 2 == 0, "rope_1d: dimension ", d, " must be even");
  std::vector<double> out(v.begin(), v.end());
  for (index_t j = 0; j * 2 < d; ++j) {
    const double theta = std::pow(base, -2.0 * static_cast<double>(j) / static_cast<double>(d));
    const double ang = t * theta;
    const double c = std::cos(ang), s = std::sin(ang);
    const double a = out[static_cast<std::size_t>(2 * j)];
    const double b = out[static_cast<std::size_t>(2 * j + 1)];
    out[static_cast<std::size_t>(2 * j)] = a * c - b * s;
    out[static_cast<std::size_t>(2 * j + 1)] = a * s + b * c;
  }
  return out;
}

/// Per-axis rotary embedding of one head vector at position p.
inline std::vector<double> point_rope(std::span<const double> f, const std::array<double, 3>& p,
                                      const RopeConfig& cfg) {
  require<DimError>(static_cast<int>(f.size()) == cfg.head_dim, "point_rope: vector has ", f.size(),
                    " dims, config expects ", cfg.head_dim);
  const auto split = cfg.resolved_split();
  std::vector<double> out;
  out.reserve(f.size());
  std::size_t off = 0;
  for (int axis = 0; axis < 3; ++axis) {
    const auto d = static_cast<std::size_t>(split[static_cast<std::size_t>(axis)]);
    auto rotated = rope_1d(f.subspan(off, d), p[static_cast<std::size_t>(axis)], cfg.base);
    out.insert(out.end(), rotated.begin(), rotated.end());
    off += d;
  }
  return out;
}

namespace detail {

/// In-place rotation of every row of x (layout: heads x head_dim per row) by
/// its own position triple; sign -1 applies the inverse rotation.
inline void rope_rotate_rows(Matrix& x, std::span<const std::array<double, 3>> pos, int heads,
                             const RopeConfig& cfg, double sign) {
  const auto split = cfg.resolved_split();
  const index_t d_h = cfg.head_dim;
  require<DimError>(x.cols() == static_cast<index_t>(heads) * d_h, "rope: row width ", x.cols(),
                    " != heads * head_dim = ", heads * d_h);
  require<DimError>(static_cast<index_t>(pos.size()) == x.rows(), "rope: ", pos.size(),
                    " positions for ", x.rows(), " rows");
  for (index_t r = 0; r < x.rows(); ++r) {
    double* row = x.row(r);
    for (int h = 0; h < heads; ++h) {
      index_t off = static_cast<index_t>(h) * d_h;
      for (int axis = 0; axis < 3; ++axis) {
        const int d = split[static_cast<std::size_t>(axis)];
        const double t = sign * pos[static_cast<std::size_t>(r)][static_cast<std::size_t>(axis)];
        for (int j = 0; j * 2 < d; ++j) {
          const double theta = std::pow(cfg.base, -2.0 * static_cast<double>(j) / static_cast<double>(d));
          const double ang = t * theta;
          const double c = std::cos(ang), s = std::sin(ang);
          const double a = row[off + 2 * j];
          const double b = row[off + 2 * j + 1];
          row[off + 2 * j] = a * c - b * s;
          row[off + 2 * j + 1] = a * s + b * c;
        }
        off += d;
      }
    }
  }
}

}  // namespace detail

/// Tape op: PointROPE applied row-wise. The rotation is a fixed isometry, so
/// the backward pass is the inverse rotation of the upstream gradient.
inline Value point_rope_rows(const Value& x, std::shared_ptr<const std::vector<std::array<double, 3>>> pos,
                             int heads, const RopeConfig& cfg) {
  Matrix y = x.value();
  detail::rope_rotate_rows(y, {pos->data(), pos->size()}, heads, cfg, 1.0);
  auto out = std::make_shared<const Matrix>(std::move(y));
  Tape* t = detail::tape_of({&x});
  if (!t) return Value::wrap(std::move(out));
  const int ix = x.node();
  return t->emplace(
      std::move(out), {ix},
      [ix, pos, heads, cfg](Tape& tp, const Matrix& g) {
        Matrix dx = g;
        detail::rope_rotate_rows(dx, {pos->data(), pos->size()}, heads, cfg, -1.0);
        tp.accumulate(ix, dx);
      },
      "point_rope");
}

/// Positions fed to the rotary embedding at one stage: the grid coordinates
/// themselves in Cartesian mode, or (r, theta, phi) about the per-scene
/// centroid in spherical mode (theta measured from +z, phi = atan2(y, x)).
inline std::vector<std::array<double, 3>> rope_positions(const LevelGeometry& geom, RopeMode mode) {
  std::vector<std::array<double, 3>> pos(geom.grid.size());
  if (mode == RopeMode::Cartesian) {
    for (std::size_t i = 0; i < geom.grid.size(); ++i)
      pos[i] = {static_cast<double>(geom.grid[i][0]), static_cast<double>(geom.grid[i][1]),
                static_cast<double>(geom.grid[i][2])};
    return pos;
  }
  for (index_t s = 0; s < geom.num_scenes(); ++s) {
    const index_t lo = geom.offsets[static_cast<std::size_t>(s)];
    const index_t hi = geom.offsets[static_cast<std::size_t>(s) + 1];
    double cx = 0, cy = 0, cz = 0;
    for (index_t i = lo; i < hi; ++i) {
      cx += static_cast<double>(geom.grid[static_cast<std::size_t>(i)][0]);
      cy += static_cast<double>(geom.grid[static_cast<std::size_t>(i)][1]);
      cz += static_cast<double>(geom.grid[static_cast<std::size_t>(i)][2]);
    }
    const double inv = hi > lo ? 1.0 / static_cast<double>(hi - lo) : 0.0;
    cx *= inv;
    cy *= inv;
    cz *= inv;
    for (index_t i = lo; i < hi; ++i) {
      const double dx = static_cast<double>(geom.grid[static_cast<std::size_t>(i)][0]) - cx;
      const double dy = static_cast<double>(geom.grid[static_cast<std::size_t>(i)][1]) - cy;
      const double dz = static_cast<double>(geom.grid[static_cast<std::size_t>(i)][2]) - cz;
      const double r = std::sqrt(dx * dx + dy * dy + dz * dz);
      const double theta = r > 0 ? std::acos(std::clamp(dz / r, -1.0, 1.0)) : 0.0;
      const double phi = (dx == 0.0 && dy == 0.0) ? 0.0 : std::atan2(dy, dx);
      pos[static_cast<std::size_t>(i)] = {r, theta, phi};
    }
  }
  return pos;
}

/// Brute-force reference for the attention logits: rotates every q/k row
/// per pair and takes plain dot products, no batching. Includes the
/// 1/sqrt(d_h) scale like the block itself.
inline Matrix attn_scores_oracle(const Matrix& q, const Matrix& k,
                                 const std::vector<std::array<double, 3>>& coords,
                                 const RopeConfig& cfg) {
  require<DimError>(q.cols() == cfg.head_dim && k.cols() == cfg.head_dim,
                    "attn_scores_oracle: rows must be head_dim wide");
  require<DimError>(q.rows() == static_cast<index_t>(coords.size()) && k.rows() == q.rows(),
                    "attn_scores_oracle: coords size mismatch");
  const auto split = cfg.resolved_split();
  const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.head_dim));
  const index_t n = q.rows(), d = cfg.head_dim;

  auto rotate_row = [&](const double* src, const std::array<double, 3>& p, std::vector<double>& dst) {
    dst.assign(src, src + d);
    std::size_t off = 0;
    for (int axis = 0; axis < 3; ++axis) {
      const int da = split[static_cast<std::size_t>(axis)];
      const double t = p[static_cast<std::size_t>(axis)];
      for (int j = 0; j * 2 < da; ++j) {
        const double theta = std::pow(cfg.base, -2.0 * static_cast<double>(j) / static_cast<double>(da));
        const double ang = t * theta;
        const double c = std::cos(ang), s = std::sin(ang);
        const double a = dst[off + 2 * static_cast<std::size_t>(j)];
        const double b = dst[off + 2 * static_cast<std::size_t>(j) + 1];
        dst[off + 2 * static_cast<std::size_t>(j)] = a * c - b * s;
        dst[off + 2 * static_cast<std::size_t>(j) + 1] = a * s + b * c;
      }
      off += static_cast<std::size_t>(da);
    }
  };

  Matrix logits(n, n);
  std::vector<double> qi, kj;
  for (index_t i = 0; i < n; ++i) {
    rotate_row(q.row(i), coords[static_cast<std::size_t>(i)], qi);
    for (index_t j = 0; j < n; ++j) {
      rotate_row(k.row(j), coords[static_cast<std::size_t>(j)], kj);
      double acc = 0.0;
      for (index_t t = 0; t < d; ++t) acc += qi[static_cast<std::size_t>(t)] * kj[static_cast<std::size_t>(t)];
      logits(i, j) = acc * scale;
    }
  }
  return logits;
}

}  // namespace litept
