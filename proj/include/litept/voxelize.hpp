#pragma once

#include <algorithm>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "litept/pointbatch.hpp"

namespace litept {

/// Per-point lattice location within the batch: scene id plus grid coords.
struct VoxelKey {
  std::int32_t scene;
  std::int64_t x, y, z;

  bool operator==(const VoxelKey& o) const {
    return scene == o.scene && x == o.x && y == o.y && z == o.z;
  }
};

struct VoxelKeyHash {
  static std::uint64_t mix(std::uint64_t v) {
    v ^= v >> 33;
    v *= 0xff51afd7ed558ccdull;
    v ^= v >> 33;
    v *= 0xc4ceb9fe1a85ec53ull;
    return v ^ (v >> 33);
  }
  std::size_t operator()(const VoxelKey& k) const {
    std::uint64_t h = mix(static_cast<std::uint64_t>(k.scene) + 0x9e3779b97f4a7c15ull);
    h = mix(h ^ static_cast<std::uint64_t>(k.x));
    h = mix(h ^ static_cast<std::uint64_t>(k.y));
    h = mix(h ^ static_cast<std::uint64_t>(k.z));
    return static_cast<std::size_t>(h);
  }
};

/// Hash map from (scene, grid coord) to row index plus the inverse array.
struct VoxelIndex {
  std::unordered_map<VoxelKey, std::int32_t, VoxelKeyHash> map;
  std::vector<VoxelKey> inverse;  // row -> key

  std::int32_t lookup(const VoxelKey& k) const {
    auto it = map.find(k);
    return it == map.end() ? -1 : it->second;
  }
};

/// Geometry of one resolution level: lattice coordinates and scene offsets.
struct LevelGeometry {
  std::vector<GridCoord> grid;
  std::vector<index_t> offsets;

  index_t num_points() const { return static_cast<index_t>(grid.size()); }
  index_t num_scenes() const { return offsets.empty() ? 0 : static_cast<index_t>(offsets.size()) - 1; }

  std::vector<std::int32_t> scene_ids() const {
    std::vector<std::int32_t> ids(grid.size());
    for (index_t s = 0; s < num_scenes(); ++s)
      for (index_t i = offsets[static_cast<std::size_t>(s)]; i < offsets[static_cast<std::size_t>(s) + 1]; ++i)
        ids[static_cast<std::size_t>(i)] = static_cast<std::int32_t>(s);
    return ids;
  }
};

inline LevelGeometry level_of(const PointBatch& b) {
  require<DataError>(b.voxelized(), "batch is not voxelized");
  return LevelGeometry{b.grid_coords, b.batch_offsets};
}

inline VoxelIndex build_voxel_index(const LevelGeometry& g) {
  VoxelIndex idx;
  idx.map.reserve(g.grid.size() * 2);
  idx.inverse.reserve(g.grid.size());
  const auto scenes = g.scene_ids();
  for (std::size_t i = 0; i < g.grid.size(); ++i) {
    VoxelKey k{scenes[i], g.grid[i][0], g.grid[i][1], g.grid[i][2]};
    auto [it, inserted] = idx.map.emplace(k, static_cast<std::int32_t>(i));
    require<DataError>(inserted, "duplicate grid cell at row ", i, "; voxelize first");
    idx.inverse.push_back(k);
  }
  return idx;
}

/// True floor division, correct for negatives.
inline std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b, r = a % b;
  return (r != 0 && ((r < 0) != (b < 0))) ? q - 1 : q;
}

/// Snaps coordinates to the grid and collapses duplicate cells within each
/// scene onto the first-seen row; collapsed coords and features are averaged.
inline PointBatch voxelize(const PointBatch& batch, double grid_size_m) {
  require<ConfigError>(grid_size_m > 0, "grid size must be positive, got ", grid_size_m);
  batch.validate();
  const index_t n = batch.num_points();
  const index_t c = batch.features.cols();

  std::unordered_map<VoxelKey, std::int32_t, VoxelKeyHash> cell_of;  // key -> output row
  cell_of.reserve(static_cast<std::size_t>(n) * 2);

  std::vector<GridCoord> out_grid;
  std::vector<std::uint16_t> out_labels;
  std::vector<index_t> out_offsets{0};
  std::vector<index_t> counts;
  std::vector<index_t> scene_of_out;
  // accumulate sums, divide once at the end
  std::vector<double> coord_sum;
  std::vector<double> feat_sum;

  for (index_t s = 0; s < batch.num_scenes(); ++s) {
    for (index_t i = batch.batch_offsets[static_cast<std::size_t>(s)];
         i < batch.batch_offsets[static_cast<std::size_t>(s) + 1]; ++i) {
      GridCoord gc;
      for (index_t k = 0; k < 3; ++k)
        gc[static_cast<std::size_t>(k)] =
            static_cast<std::int64_t>(std::floor(batch.coords(i, k) / grid_size_m));
      VoxelKey key{static_cast<std::int32_t>(s), gc[0], gc[1], gc[2]};
      auto [it, inserted] = cell_of.emplace(key, static_cast<std::int32_t>(out_grid.size()));
      if (inserted) {
        out_grid.push_back(gc);
        counts.push_back(0);
        scene_of_out.push_back(s);
        if (batch.has_labels()) out_labels.push_back(batch.labels[static_cast<std::size_t>(i)]);
        coord_sum.resize(out_grid.size() * 3, 0.0);
        feat_sum.resize(out_grid.size() * static_cast<std::size_t>(c), 0.0);
      }
      const auto row = static_cast<std::size_t>(it->second);
      counts[row] += 1;
      for (index_t k = 0; k < 3; ++k) coord_sum[row * 3 + static_cast<std::size_t>(k)] += batch.coords(i, k);
      for (index_t k = 0; k < c; ++k)
        feat_sum[row * static_cast<std::size_t>(c) + static_cast<std::size_t>(k)] += batch.features(i, k);
    }
    out_offsets.push_back(static_cast<index_t>(out_grid.size()));
  }

  const index_t m = static_cast<index_t>(out_grid.size());
  PointBatch out;
  out.coords = Matrix(m, 3);
  out.features = Matrix(m, c);
  for (index_t r = 0; r < m; ++r) {
    const double inv = 1.0 / static_cast<double>(counts[static_cast<std::size_t>(r)]);
    for (index_t k = 0; k < 3; ++k)
      out.coords(r, k) = coord_sum[static_cast<std::size_t>(r) * 3 + static_cast<std::size_t>(k)] * inv;
    for (index_t k = 0; k < c; ++k)
      out.features(r, k) =
          feat_sum[static_cast<std::size_t>(r) * static_cast<std::size_t>(c) + static_cast<std::size_t>(k)] * inv;
  }
  out.grid_coords = std::move(out_grid);
  out.labels = std::move(out_labels);
  out.batch_offsets = std::move(out_offsets);
  out.grid_size = grid_size_m;
  out.validate();
  return out;
}

/// Parent-to-child assignment for one stride-2 (or stride-k) grid pooling.
/// Children are ordered lexicographically by (scene, gz, gy, gx).
struct PoolingPlan {
  std::vector<index_t> segments;      // fine row -> child id, dense in [0, child_count)
  LevelGeometry child;                // child lattice, coords already floor-divided
  index_t child_count = 0;
  index_t fine_count = 0;
  std::int64_t stride = 2;
  std::vector<index_t> saved_argmax;  // populated by grid_pool during forward
};

inline PoolingPlan build_pooling_plan(const LevelGeometry& fine, std::int64_t stride = 2) {
  require<ConfigError>(stride >= 1, "pooling stride must be >= 1, got ", stride);
  PoolingPlan plan;
  plan.stride = stride;
  plan.fine_count = fine.num_points();
  const auto scenes = fine.scene_ids();

  struct ChildKey {
    std::int32_t scene;
    std::int64_t z, y, x;
    bool operator<(const ChildKey& o) const {
      if (scene != o.scene) return scene < o.scene;
      if (z != o.z) return z < o.z;
      if (y != o.y) return y < o.y;
      return x < o.x;
    }
    bool operator==(const ChildKey& o) const = default;
  };

  std::vector<ChildKey> keys(fine.grid.size());
  for (std::size_t i = 0; i < fine.grid.size(); ++i)
    keys[i] = ChildKey{scenes[i], floor_div(fine.grid[i][2], stride), floor_div(fine.grid[i][1], stride),
                       floor_div(fine.grid[i][0], stride)};

  std::vector<ChildKey> uniq = keys;
  std::sort(uniq.begin(), uniq.end());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());

  plan.child_count = static_cast<index_t>(uniq.size());
  plan.child.grid.resize(uniq.size());
  plan.child.offsets.assign(1, 0);
  std::int32_t cur_scene = 0;
  for (std::size_t i = 0; i < uniq.size(); ++i) {
    plan.child.grid[i] = GridCoord{uniq[i].x, uniq[i].y, uniq[i].z};
    while (cur_scene < uniq[i].scene) {
      plan.child.offsets.push_back(static_cast<index_t>(i));
      ++cur_scene;
    }
  }
  const auto n_scenes = fine.num_scenes();
  while (static_cast<index_t>(plan.child.offsets.size()) <= n_scenes)
    plan.child.offsets.push_back(static_cast<index_t>(uniq.size()));

  std::unordered_map<VoxelKey, index_t, VoxelKeyHash> child_id;
  child_id.reserve(uniq.size() * 2);
  for (std::size_t i = 0; i < uniq.size(); ++i)
    child_id.emplace(VoxelKey{uniq[i].scene, uniq[i].x, uniq[i].y, uniq[i].z}, static_cast<index_t>(i));

  plan.segments.resize(keys.size());
  for (std::size_t i = 0; i < keys.size(); ++i)
    plan.segments[i] = child_id.at(VoxelKey{keys[i].scene, keys[i].x, keys[i].y, keys[i].z});
  return plan;
}

}  // namespace litept
