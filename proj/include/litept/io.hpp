#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "litept/pointbatch.hpp"
#include "litept/random.hpp"

namespace litept {

// --- ASCII table format -----------------------------------------------------
// One point per line: x y z f1 ... fC [label]. The label column is only
// parsed when the caller asks for it; by default every column after xyz is a
// feature.

inline PointBatch read_ascii(const std::string& path, bool last_column_is_label = false) {
  std::ifstream in(path);
  require<IoError>(in.good(), "cannot open ", path);
  std::vector<std::vector<double>> rows;
  std::string line;
  index_t line_no = 0;
  index_t ncols = -1;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::vector<double> vals;
    double v;
    while (ls >> v) vals.push_back(v);
    if (vals.empty()) {
      std::string rest;
      ls.clear();
      ls >> rest;
      require<ParseError>(rest.empty(), path, ":", line_no, ": unparseable token '", rest, "'");
      continue;  // blank line
    }
    require<ParseError>(!ls.fail() || ls.eof(), path, ":", line_no, ": unparseable row");
    {
      std::string rest;
      ls.clear();
      if (ls >> rest) throw ParseError(cat(path, ":", line_no, ": trailing token '", rest, "'"));
    }
    require<ParseError>(static_cast<index_t>(vals.size()) >= 3, path, ":", line_no,
                        ": expected at least x y z, got ", vals.size(), " columns");
    if (ncols < 0) ncols = static_cast<index_t>(vals.size());
    require<ParseError>(static_cast<index_t>(vals.size()) == ncols, path, ":", line_no,
                        ": ragged row (", vals.size(), " columns, expected ", ncols, ")");
    for (double x : vals)
      require<ParseError>(std::isfinite(x), path, ":", line_no, ": non-finite value");
    rows.push_back(std::move(vals));
  }
  const index_t n = static_cast<index_t>(rows.size());
  const index_t label_cols = (last_column_is_label && ncols > 3) ? 1 : 0;
  const index_t c = n == 0 ? 0 : ncols - 3 - label_cols;
  Matrix coords(n, 3), feats(n, c);
  std::vector<std::uint16_t> labels;
  if (label_cols) labels.resize(static_cast<std::size_t>(n));
  for (index_t r = 0; r < n; ++r) {
    for (index_t k = 0; k < 3; ++k) coords(r, k) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(k)];
    for (index_t k = 0; k < c; ++k) feats(r, k) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(3 + k)];
    if (label_cols) {
      const double lv = rows[static_cast<std::size_t>(r)].back();
      require<ParseError>(lv >= 0 && lv <= 65535 && lv == static_cast<double>(static_cast<std::uint16_t>(lv)),
                          path, ":", r + 1, ": label ", lv, " not a u16");
      labels[static_cast<std::size_t>(r)] = static_cast<std::uint16_t>(lv);
    }
  }
  if (n == 0) {
    PointBatch b;
    b.coords = Matrix(0, 3);
    b.features = Matrix(0, 0);
    b.batch_offsets = {0};
    return b;
  }
  return PointBatch::single_scene(std::move(coords), std::move(feats), std::move(labels));
}

inline void write_ascii(const PointBatch& b, const std::string& path) {
  std::ofstream out(path);
  require<IoError>(out.good(), "cannot write ", path);
  out.precision(17);
  for (index_t r = 0; r < b.num_points(); ++r) {
    out << b.coords(r, 0) << ' ' << b.coords(r, 1) << ' ' << b.coords(r, 2);
    for (index_t c = 0; c < b.features.cols(); ++c) out << ' ' << b.features(r, c);
    if (b.has_labels()) out << ' ' << b.labels[static_cast<std::size_t>(r)];
    out << '\n';
  }
  require<IoError>(out.good(), "write failed for ", path);
}

// --- LPTC binary container --------------------------------------------------
// Little-endian, fixed layout: magic "LPTC", version u16, point count u64,
// feature channel count u16, grid size f64, then f64 coord triples, then f64
// feature rows, then (optionally) one u16 label per point.

namespace detail {

inline constexpr char kSceneMagic[4] = {'L', 'P', 'T', 'C'};
inline constexpr std::uint16_t kSceneVersion = 1;

template <class T>
void put_le(std::string& buf, T v) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &v, sizeof(T));
  // the build targets little-endian hosts; preserve the layout byte for byte
  buf.append(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <class T>
T get_le(const std::string& buf, std::size_t& pos, const char* what) {
  require<IoError>(pos + sizeof(T) <= buf.size(), "truncated payload while reading ", what);
  T v;
  std::memcpy(&v, buf.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require<IoError>(in.good(), "cannot open ", path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spill(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  require<IoError>(out.good(), "cannot write ", path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  require<IoError>(out.good(), "write failed for ", path);
}

}  // namespace detail

inline std::string encode_binary(const PointBatch& b) {
  b.validate();
  require<DimError>(b.num_scenes() <= 1, "LPTC holds a single scene, batch has ", b.num_scenes());
  std::string buf;
  buf.append(detail::kSceneMagic, 4);
  detail::put_le<std::uint16_t>(buf, detail::kSceneVersion);
  detail::put_le<std::uint64_t>(buf, static_cast<std::uint64_t>(b.num_points()));
  detail::put_le<std::uint16_t>(buf, static_cast<std::uint16_t>(b.features.cols()));
  detail::put_le<double>(buf, b.grid_size);
  for (index_t r = 0; r < b.num_points(); ++r)
    for (index_t k = 0; k < 3; ++k) detail::put_le<double>(buf, b.coords(r, k));
  for (index_t r = 0; r < b.num_points(); ++r)
    for (index_t c = 0; c < b.features.cols(); ++c) detail::put_le<double>(buf, b.features(r, c));
  if (b.has_labels())
    for (index_t r = 0; r < b.num_points(); ++r)
      detail::put_le<std::uint16_t>(buf, b.labels[static_cast<std::size_t>(r)]);
  return buf;
}

inline PointBatch decode_binary(const std::string& buf, const std::string& origin = "<memory>") {
  std::size_t pos = 0;
  require<IoError>(buf.size() >= 4 && std::memcmp(buf.data(), detail::kSceneMagic, 4) == 0,
                   origin, ": bad magic, not an LPTC file");
  pos = 4;
  const auto version = detail::get_le<std::uint16_t>(buf, pos, "version");
  require<IoError>(version == detail::kSceneVersion, origin, ": unsupported LPTC version ", version);
  const auto n64 = detail::get_le<std::uint64_t>(buf, pos, "point count");
  const auto c16 = detail::get_le<std::uint16_t>(buf, pos, "channel count");
  const auto grid = detail::get_le<double>(buf, pos, "grid size");
  const index_t n = static_cast<index_t>(n64);
  const index_t c = static_cast<index_t>(c16);
  const std::size_t need_coords = static_cast<std::size_t>(n) * 3 * sizeof(double);
  const std::size_t need_feats = static_cast<std::size_t>(n) * static_cast<std::size_t>(c) * sizeof(double);
  const std::size_t body = buf.size() - pos;
  const std::size_t with_labels = need_coords + need_feats + static_cast<std::size_t>(n) * sizeof(std::uint16_t);
  const bool has_labels = body == with_labels && n > 0;
  require<IoError>(body == need_coords + need_feats || has_labels, origin,
                   ": payload length ", body, " does not match declared counts (", n, " points, ", c,
                   " channels)");
  Matrix coords(n, 3), feats(n, c);
  for (index_t r = 0; r < n; ++r)
    for (index_t k = 0; k < 3; ++k) coords(r, k) = detail::get_le<double>(buf, pos, "coords");
  for (index_t r = 0; r < n; ++r)
    for (index_t k = 0; k < c; ++k) feats(r, k) = detail::get_le<double>(buf, pos, "features");
  std::vector<std::uint16_t> labels;
  if (has_labels) {
    labels.resize(static_cast<std::size_t>(n));
    for (index_t r = 0; r < n; ++r)
      labels[static_cast<std::size_t>(r)] = detail::get_le<std::uint16_t>(buf, pos, "labels");
  }
  PointBatch b;
  if (n == 0) {
    b.coords = Matrix(0, 3);
    b.features = Matrix(0, c);
    b.batch_offsets = {0};
  } else {
    b = PointBatch::single_scene(std::move(coords), std::move(feats), std::move(labels));
  }
  b.grid_size = grid;
  return b;
}

inline void write_binary(const PointBatch& b, const std::string& path) {
  detail::spill(path, encode_binary(b));
}

inline PointBatch read_binary(const std::string& path) {
  return decode_binary(detail::slurp(path), path);
}

/// Loads a scene by file extension: .lptc is binary, everything else ASCII.
inline PointBatch read_scene(const std::string& path, bool ascii_labels = false) {
  if (path.size() >= 5 && path.compare(path.size() - 5, 5, ".lptc") == 0) return read_binary(path);
  return read_ascii(path, ascii_labels);
}

inline void write_scene(const PointBatch& b, const std::string& path) {
  if (path.size() >= 5 && path.compare(path.size() - 5, 5, ".lptc") == 0)
    write_binary(b, path);
  else
    write_ascii(b, path);
}

// --- synthetic scenes --------------------------------------------------------

/// Uniform random points in a cube of side extent_m centered at the origin,
/// labeled by planar slabs along the given axis. Features are the raw xyz.
inline PointBatch make_synthetic_scene_axis(std::uint64_t seed, index_t n_points, double extent_m,
                                            int n_classes, int axis) {
  require<ConfigError>(n_points >= 1, "synthetic scene needs n_points >= 1");
  require<ConfigError>(n_classes >= 1, "synthetic scene needs n_classes >= 1");
  require<ConfigError>(axis >= 0 && axis < 3, "axis must be 0, 1 or 2");
  Rng rng(seed);
  Matrix coords(n_points, 3), feats(n_points, 3);
  std::vector<std::uint16_t> labels(static_cast<std::size_t>(n_points));
  const double half = extent_m / 2.0;
  const double slab = extent_m / static_cast<double>(n_classes);
  for (index_t r = 0; r < n_points; ++r) {
    for (index_t k = 0; k < 3; ++k) {
      const double v = (rng.uniform() - 0.5) * extent_m;
      coords(r, k) = v;
      feats(r, k) = v;
    }
    auto cls = static_cast<std::int64_t>(std::floor((coords(r, axis) + half) / slab));
    cls = std::max<std::int64_t>(0, std::min<std::int64_t>(n_classes - 1, cls));
    labels[static_cast<std::size_t>(r)] = static_cast<std::uint16_t>(cls);
  }
  return PointBatch::single_scene(std::move(coords), std::move(feats), std::move(labels));
}

/// Seeded variant that also draws the slab axis from the PRNG.
inline PointBatch make_synthetic_scene(std::uint64_t seed, index_t n_points, double extent_m,
                                       int n_classes) {
  Rng axis_rng(seed ^ 0x5ca1ab1e5eedull);
  const int axis = static_cast<int>(axis_rng.below(3));
  return make_synthetic_scene_axis(seed, n_points, extent_m, n_classes, axis);
}

}  // namespace litept
