#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "litept/matrix.hpp"

namespace litept {

using GridCoord = std::array<std::int64_t, 3>;

/// Batched point set: world coordinates in meters, integer grid coordinates
/// (empty until voxelized), a feature matrix, and per-scene start offsets.
struct PointBatch {
  Matrix coords;                        // N x 3, meters
  std::vector<GridCoord> grid_coords;   // N entries once voxelized, else empty
  Matrix features;                      // N x C
  std::vector<index_t> batch_offsets;   // scenes; first 0, last N, strictly increasing
  std::vector<std::uint16_t> labels;    // optional, N entries or empty
  double grid_size = 0.0;               // voxel edge used for grid_coords; 0 = not voxelized

  index_t num_points() const { return coords.rows(); }
  index_t num_scenes() const {
    return batch_offsets.empty() ? 0 : static_cast<index_t>(batch_offsets.size()) - 1;
  }
  bool voxelized() const { return !grid_coords.empty() || num_points() == 0; }
  bool has_labels() const { return !labels.empty(); }

  static PointBatch single_scene(Matrix coords, Matrix features,
                                 std::vector<std::uint16_t> labels = {}) {
    PointBatch b;
    const index_t n = coords.rows();
    b.coords = std::move(coords);
    b.features = std::move(features);
    b.labels = std::move(labels);
    b.batch_offsets = n > 0 ? std::vector<index_t>{0, n} : std::vector<index_t>{0};
    b.validate();
    return b;
  }

  void validate() const {
    const index_t n = num_points();
    require<DimError>(coords.cols() == 3 || n == 0, "point batch: coords must be Nx3, got ",
                      shape_str(coords));
    require<DimError>(features.rows() == n, "point batch: ", n, " coords vs ", features.rows(),
                      " feature rows");
    require<DimError>(grid_coords.empty() || static_cast<index_t>(grid_coords.size()) == n,
                      "point batch: ", grid_coords.size(), " grid coords for ", n, " points");
    require<DimError>(labels.empty() || static_cast<index_t>(labels.size()) == n, "point batch: ",
                      labels.size(), " labels for ", n, " points");
    require<DimError>(!batch_offsets.empty() && batch_offsets.front() == 0 && batch_offsets.back() == n,
                      "point batch: offsets must start at 0 and end at ", n);
    for (std::size_t i = 1; i < batch_offsets.size(); ++i)
      require<DimError>(batch_offsets[i] > batch_offsets[i - 1],
                        "point batch: offsets not strictly increasing");
  }

  /// Scene id per point, derived from batch_offsets.
  std::vector<std::int32_t> scene_ids() const {
    std::vector<std::int32_t> ids(static_cast<std::size_t>(num_points()));
    for (index_t s = 0; s < num_scenes(); ++s)
      for (index_t i = batch_offsets[static_cast<std::size_t>(s)];
           i < batch_offsets[static_cast<std::size_t>(s) + 1]; ++i)
        ids[static_cast<std::size_t>(i)] = static_cast<std::int32_t>(s);
    return ids;
  }
};

}  // namespace litept
