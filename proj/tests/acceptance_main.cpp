// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Criteria 1 and 8 drive the installed CLI binary end to end.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <vector>

#include "fd_check.hpp"
#include "litept/litept.hpp"

#ifndef LITEPT_CLI_PATH
#define LITEPT_CLI_PATH "litept"
#endif

using namespace litept;
using litept::testing::FdCheck;
using litept::testing::random_matrix;

namespace {

struct Check {
  std::string label;
  double time_limit_s;
  std::function<void()> body;
};

void expect(bool cond, const std::string& what) {
  if (!cond) throw DataError(what);
}

std::filesystem::path tmp_dir() {
  auto dir = std::filesystem::temp_directory_path() / "litept_acceptance";
  std::filesystem::create_directories(dir);
  return dir;
}

struct CliRun {
  int code;
  std::string out;
};

CliRun run_cli(const std::string& args) {
  const auto out_path = tmp_dir() / "cli_stdout.txt";
  const std::string cmd = cat(LITEPT_CLI_PATH, " ", args, " > ", out_path.string(), " 2>&1");
  const int status = std::system(cmd.c_str());
  std::ifstream in(out_path);
  std::stringstream ss;
  ss << in.rdbuf();
  return {WEXITSTATUS(status), ss.str()};
}

// ---- criterion bodies -------------------------------------------------------

void criterion_param_counts() {
  const struct {
    const char* name;
    double published;
  } presets[] = {{"s", 12.7e6}, {"s-star", 16.0e6}, {"b", 45.1e6}, {"l", 85.9e6}};
  for (const auto& p : presets) {
    const ParamTable table = count_params(preset(p.name));
    long long row_sum = 0;
    for (const ParamRow& r : table.rows) row_sum += r.count;
    expect(row_sum == table.total, cat(p.name, ": itemized rows sum to ", row_sum, ", total is ",
                                       table.total));
    const double rel = std::abs(static_cast<double>(table.total) / p.published - 1.0);
    expect(rel < 0.05, cat(p.name, ": total ", table.total, " deviates ", rel * 100,
                           "% from the published ", p.published));
    std::cout << "    " << p.name << ": " << table.total << " params ("
              << (rel * 100) << "% off " << p.published / 1e6 << "M)\n";
  }
  // the CLI surface: `params --model s` prints the same total
  const CliRun cli = run_cli("params --model s --format csv");
  expect(cli.code == 0, "params CLI exited nonzero");
  expect(cli.out.find("stage,kind,params") != std::string::npos, "params CSV header missing");
  const long long s_total = count_params(preset("s")).total;
  std::ostringstream needle;
  needle << s_total;
  const CliRun text = run_cli("params --model s");
  expect(text.out.find(needle.str()) != std::string::npos, "params CLI total mismatch");
}

void criterion_stage_dispatch() {
  ModelWeights s = build_model(preset("s"), 1);
  for (const std::string& name : s.names()) {
    for (int i = 0; i < 3; ++i)
      expect(!(name.starts_with(cat("enc", i, "/")) &&
               (name.find("/attn/") != std::string::npos || name.find("/ffn/") != std::string::npos)),
             cat("attention parameter in conv stage: ", name));
    for (int i = 3; i < 5; ++i)
      expect(!(name.starts_with(cat("enc", i, "/")) && name.find("/conv/") != std::string::npos),
             cat("conv parameter in attention stage: ", name));
  }
  ModelWeights star = build_model(preset("s-star"), 1);
  std::set<std::string> s_names(s.names().begin(), s.names().end());
  std::set<std::string> star_names(star.names().begin(), star.names().end());
  for (const auto& n : s_names)
    expect(star_names.count(n) == 1, cat("s-star lost parameter ", n));
  std::vector<std::string> extra;
  for (const auto& n : star_names)
    if (!s_names.count(n)) extra.push_back(n);
  expect(!extra.empty(), "s-star adds no decoder blocks");
  for (const auto& n : extra)
    expect(n.starts_with("dec") && n.find("/block") != std::string::npos,
           cat("unexpected extra parameter ", n));
  // mirrored kinds per the printed architecture: attention at D3, conv below
  expect(star.index_of("dec3/block1/attn/qkv/w") >= 0, "missing D3 attention block");
  expect(star.index_of("dec2/block1/conv/w") >= 0, "missing D2 conv block");
  expect(star.index_of("dec1/block1/conv/w") >= 0, "missing D1 conv block");
  expect(star.index_of("dec0/block1/conv/w") >= 0, "missing D0 conv block");
  for (const auto& n : extra)
    expect(!n.starts_with("dec3") || n.find("/conv/") == std::string::npos,
           cat("conv parameter in mirrored attention stage: ", n));
}

void criterion_translation_invariance() {
  Rng rng(3003);
  double worst = 0.0;
  for (int d_h : {6, 18}) {
    RopeConfig cfg;
    cfg.head_dim = d_h;
    for (int draw = 0; draw < 50; ++draw) {
      const index_t n = 6;
      Matrix qk = random_matrix(n, 2 * d_h, rng.next_u64());
      std::vector<std::array<double, 3>> pos(static_cast<std::size_t>(n));
      std::vector<std::array<double, 3>> shifted(static_cast<std::size_t>(n));
      std::array<double, 3> t{};
      for (auto& v : t) v = static_cast<double>(rng.uniform_int(-1000, 1000));
      for (auto& p : pos)
        for (auto& v : p) v = static_cast<double>(rng.uniform_int(-1000, 1000));
      for (std::size_t i = 0; i < pos.size(); ++i)
        for (int a = 0; a < 3; ++a)
          shifted[i][static_cast<std::size_t>(a)] =
              pos[i][static_cast<std::size_t>(a)] + t[static_cast<std::size_t>(a)];

      // the block's own kernels: rotate then the order-exact dot
      auto logits_at = [&](const std::vector<std::array<double, 3>>& where) {
        Matrix q(n, d_h), k(n, d_h);
        for (index_t r = 0; r < n; ++r)
          for (index_t c = 0; c < d_h; ++c) {
            q(r, c) = qk(r, c);
            k(r, c) = qk(r, d_h + c);
          }
        detail::rope_rotate_rows(q, {where.data(), where.size()}, 1, cfg, 1.0);
        detail::rope_rotate_rows(k, {where.data(), where.size()}, 1, cfg, 1.0);
        return scaled_dot_nt_exact(q, k, 1.0 / std::sqrt(static_cast<double>(d_h)));
      };
      worst = std::max(worst, max_abs_diff(logits_at(pos), logits_at(shifted)));
    }
  }
  std::cout << "    worst logit drift under +-1000 shifts: " << worst << "\n";
  expect(worst < 1e-9, cat("translation invariance violated: ", worst));
}

void criterion_isometry_and_split() {
  Rng rng(3004);
  double worst = 0.0;
  for (int d_h : {6, 18}) {
    RopeConfig cfg;
    cfg.head_dim = d_h;
    for (int draw = 0; draw < 200; ++draw) {
      std::vector<double> f(static_cast<std::size_t>(d_h));
      for (auto& v : f) v = rng.uniform(-2.0, 2.0);
      std::array<double, 3> p{static_cast<double>(rng.uniform_int(-1000, 1000)),
                              static_cast<double>(rng.uniform_int(-1000, 1000)),
                              static_cast<double>(rng.uniform_int(-1000, 1000))};
      auto r = point_rope(f, p, cfg);
      double n0 = 0, n1 = 0;
      for (std::size_t i = 0; i < f.size(); ++i) {
        n0 += f[i] * f[i];
        n1 += r[i] * r[i];
      }
      worst = std::max(worst, std::abs(std::sqrt(n0) - std::sqrt(n1)));
    }
  }
  expect(worst < 1e-12, cat("norm drift ", worst));
  // C=252, H=14: head_dim 18, per-axis sub-dimension exactly 6
  const ModelConfig s = preset("s");
  const RopeConfig rc = s.rope_for(252, 14);
  expect(rc.head_dim == 18, cat("head_dim ", rc.head_dim));
  const auto split = rc.resolved_split();
  expect(split == std::array<int, 3>{6, 6, 6}, "per-axis sub-dimension is not 6");
  std::cout << "    norm drift " << worst << "; C=252/H=14 split 6:6:6\n";
}

void criterion_sparse_conv_oracle() {
  Rng rng(3005);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<GridCoord> grid;
    for (std::int64_t z = 0; z < 6; ++z)
      for (std::int64_t y = 0; y < 6; ++y)
        for (std::int64_t x = 0; x < 6; ++x)
          if (rng.uniform() < 0.5) grid.push_back({x, y, z});
    if (grid.empty()) grid.push_back({0, 0, 0});
    LevelGeometry g;
    g.grid = grid;
    g.offsets = {0, static_cast<index_t>(grid.size())};
    auto table = std::make_shared<const NeighborTable>(build_neighbor_table(build_voxel_index(g), 3));
    const index_t c_in = 1 + static_cast<index_t>(rng.below(4));
    const index_t c_out = 1 + static_cast<index_t>(rng.below(4));
    Matrix x = random_matrix(static_cast<index_t>(grid.size()), c_in, rng.next_u64());
    Matrix w = random_matrix(27 * c_in, c_out, rng.next_u64());
    Matrix y = sparse_conv(Value::wrap(x), table, Value::wrap(w)).value();

    // dense zero-padded oracle over the 6^3 volume, restricted to occupied sites
    const auto offsets = kernel_offsets(3);
    std::vector<index_t> dense(6 * 6 * 6, -1);
    for (std::size_t i = 0; i < grid.size(); ++i)
      dense[static_cast<std::size_t>(grid[i][2] * 36 + grid[i][1] * 6 + grid[i][0])] =
          static_cast<index_t>(i);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      for (index_t co = 0; co < c_out; ++co) {
        double acc = 0.0;
        for (std::size_t o = 0; o < offsets.size(); ++o) {
          const std::int64_t nx = grid[i][0] + offsets[o][0];
          const std::int64_t ny = grid[i][1] + offsets[o][1];
          const std::int64_t nz = grid[i][2] + offsets[o][2];
          if (nx < 0 || ny < 0 || nz < 0 || nx >= 6 || ny >= 6 || nz >= 6) continue;
          const index_t src = dense[static_cast<std::size_t>(nz * 36 + ny * 6 + nx)];
          if (src < 0) continue;
          for (index_t ci = 0; ci < c_in; ++ci)
            acc += x(src, ci) * w(static_cast<index_t>(o) * c_in + ci, co);
        }
        worst = std::max(worst, std::abs(acc - y(static_cast<index_t>(i), co)));
      }
    }
  }
  std::cout << "    max |sparse - dense oracle| = " << worst << "\n";
  expect(worst < 1e-10, cat("sparse/dense mismatch ", worst));
}

void criterion_curves() {
  Rng rng(3006);
  for (int i = 0; i < 100000; ++i) {
    const std::uint64_t x = rng.below(1ull << 21), y = rng.below(1ull << 21), z = rng.below(1ull << 21);
    const auto m = morton_decode(morton_encode(x, y, z));
    expect(m[0] == x && m[1] == y && m[2] == z, "morton round-trip failed");
    const auto h = hilbert_decode(hilbert_encode(x, y, z));
    expect(h[0] == x && h[1] == y && h[2] == z, "hilbert round-trip failed");
  }
  for (int bits : {2, 3}) {
    const std::uint64_t side = 1ull << bits, cells = side * side * side;
    std::vector<int> seen(cells, 0);
    for (std::uint64_t x = 0; x < side; ++x)
      for (std::uint64_t y = 0; y < side; ++y)
        for (std::uint64_t z = 0; z < side; ++z) seen[hilbert_encode(x, y, z, bits)] += 1;
    for (std::uint64_t c = 0; c < cells; ++c) expect(seen[c] == 1, "hilbert not bijective");
    for (std::uint64_t t = 0; t + 1 < cells; ++t) {
      const auto a = hilbert_decode(t, bits), b = hilbert_decode(t + 1, bits);
      std::uint64_t l1 = 0;
      for (int k = 0; k < 3; ++k) l1 += a[k] > b[k] ? a[k] - b[k] : b[k] - a[k];
      expect(l1 == 1, cat("hilbert step ", t, " has L1 distance ", l1));
    }
  }
  // serialization properties over random multi-scene batches
  for (int trial = 0; trial < 10; ++trial) {
    PointBatch a = voxelize(make_synthetic_scene(900 + trial, 700, 2.0, 2), 0.02);
    for (CurveKind kind : {CurveKind::ZOrder, CurveKind::ZOrderTrans, CurveKind::Hilbert,
                           CurveKind::HilbertTrans}) {
      SerializedOrder order = serialize(level_of(a), kind, 16);
      std::vector<index_t> sorted = order.perm;
      std::sort(sorted.begin(), sorted.end());
      for (index_t i = 0; i < a.num_points(); ++i)
        expect(sorted[static_cast<std::size_t>(i)] == i, "perm is not a permutation");
      for (index_t g = 0; g < order.n_groups; ++g) {
        const index_t m = order.real_counts[static_cast<std::size_t>(g)];
        expect(m >= 1, "group without a real point");
        for (index_t j = 0; j < order.group_size; ++j) {
          const bool real = order.pad_mask[static_cast<std::size_t>(g * order.group_size + j)];
          expect(real == (j < m), "pads not confined to the group tail");
          if (!real)
            expect(order.slots[static_cast<std::size_t>(g * order.group_size + j)] ==
                       order.slots[static_cast<std::size_t>(g * order.group_size + m - 1)],
                   "pad does not replicate the last real point");
        }
      }
    }
  }
}

void criterion_gradients() {
  double worst_op = 0.0;
  std::vector<std::pair<std::string, double>> results;
  auto check_op = [&](const std::string& name, FdCheck check) {
    const double err = check.max_rel_err();
    results.push_back({name, err});
    worst_op = std::max(worst_op, err);
  };

  check_op("linear", {[](const std::vector<Value>& v) { return linear(v[0], v[1], v[2]); },
                      {random_matrix(3, 4, 1), random_matrix(4, 2, 2), random_matrix(1, 2, 3)},
                      {0, 1, 2}});
  check_op("layer_norm", {[](const std::vector<Value>& v) { return layer_norm(v[0], v[1], v[2]); },
                          {random_matrix(4, 6, 4), random_matrix(1, 6, 5), random_matrix(1, 6, 6)},
                          {0, 1, 2}});
  check_op("batch_norm", {[](const std::vector<Value>& v) {
                            BnState s = BnState::fresh(4);
                            return batch_norm(v[0], v[1], v[2], s, BnMode::Train);
                          },
                          {random_matrix(8, 4, 7), random_matrix(1, 4, 8), random_matrix(1, 4, 9)},
                          {0, 1, 2}});
  check_op("gelu", {[](const std::vector<Value>& v) { return gelu(v[0]); },
                    {random_matrix(4, 5, 10)},
                    {0}});
  {
    std::vector<std::uint8_t> mask(24, 1);
    mask[5] = mask[11] = mask[17] = 0;
    check_op("masked_softmax",
             {[mask](const std::vector<Value>& v) { return masked_softmax(v[0], mask); },
              {random_matrix(4, 6, 11)},
              {0}});
  }
  check_op("segment_max", {[](const std::vector<Value>& v) {
                             return segment_max(v[0], {0, 1, 0, 1, 2, 2, 0}, 3).value;
                           },
                           {random_matrix(7, 3, 12)},
                           {0}});
  check_op("cross_entropy", {[](const std::vector<Value>& v) {
                               return cross_entropy(v[0], std::vector<std::uint16_t>{1, 0, 3, 2});
                             },
                             {random_matrix(4, 4, 13)},
                             {0}});
  {
    PointBatch b = voxelize(make_synthetic_scene(14, 12, 0.4, 2), 0.05);
    auto table =
        std::make_shared<const NeighborTable>(build_neighbor_table(build_voxel_index(level_of(b)), 3));
    check_op("sparse_conv",
             {[table](const std::vector<Value>& v) { return sparse_conv(v[0], table, v[1]); },
              {random_matrix(b.num_points(), 2, 15), random_matrix(27 * 2, 3, 16)},
              {0, 1}});
    check_op("conv_block", {[table](const std::vector<Value>& v) {
                              ConvBlockWeights w{v[1], v[2], v[3], v[4], v[5]};
                              return conv_block(v[0], table, w);
                            },
                            {random_matrix(b.num_points(), 2, 17), random_matrix(27 * 2, 2, 18),
                             random_matrix(2, 2, 19), random_matrix(1, 2, 20),
                             random_matrix(1, 2, 21), random_matrix(1, 2, 22)},
                            {0, 1, 2, 3, 4, 5}});
    check_op("stem", {[table](const std::vector<Value>& v) {
                        StemWeights w{v[1], v[2], v[3]};
                        return stem(v[0], table, w);
                      },
                      {random_matrix(b.num_points(), 2, 23), random_matrix(27 * 2, 4, 24),
                       random_matrix(1, 4, 25), random_matrix(1, 4, 26)},
                      {0, 1, 2, 3}});
    PoolingPlan plan = build_pooling_plan(level_of(b), 2);
    check_op("grid_pool", {[plan](const std::vector<Value>& v) mutable {
                             BnState s = BnState::fresh(3);
                             PoolWeights w{v[1], v[2], v[3], v[4], &s};
                             return grid_pool(v[0], plan, w, BnMode::Train);
                           },
                           {random_matrix(b.num_points(), 2, 27), random_matrix(2, 3, 28),
                            random_matrix(1, 3, 29), random_matrix(1, 3, 30), random_matrix(1, 3, 31)},
                           {0, 1, 2, 3, 4}});
    check_op("grid_unpool",
             {[plan](const std::vector<Value>& v) {
                BnState s1 = BnState::fresh(3), s2 = BnState::fresh(3);
                UnpoolWeights w{v[2], v[3], v[6], v[7], v[4], v[5], v[8], v[9], &s1, &s2};
                return grid_unpool(v[0], v[1], plan, w, BnMode::Train);
              },
              {random_matrix(plan.child_count, 2, 32), random_matrix(b.num_points(), 2, 33),
               random_matrix(2, 3, 34), random_matrix(1, 3, 35), random_matrix(2, 3, 36),
               random_matrix(1, 3, 37), random_matrix(1, 3, 38), random_matrix(1, 3, 39),
               random_matrix(1, 3, 40), random_matrix(1, 3, 41)},
              {0, 1, 2, 3, 4, 5, 6, 7, 8, 9}});
  }
  {
    PointBatch b = voxelize(make_synthetic_scene(42, 5, 0.4, 2), 0.05);
    LevelGeometry g = level_of(b);
    SerializedOrder order = serialize(g, CurveKind::ZOrder, 8);
    auto positions = rope_positions(g, RopeMode::Cartesian);
    RopeConfig rc;
    rc.head_dim = 6;
    const index_t c = 6;
    check_op("attn_block",
             {[order, positions, rc](const std::vector<Value>& v) {
                AttnBlockWeights w{v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8], v[9], v[10],
                                   v[11], v[12], v[13], v[14]};
                return attn_block(v[0], order, positions, w, 1, rc);
              },
              {random_matrix(b.num_points(), c, 43), Matrix(1, c, 1.0), random_matrix(1, c, 44),
               Matrix(1, c, 1.0), random_matrix(1, c, 45), random_matrix(c, 3 * c, 46),
               random_matrix(1, 3 * c, 47), random_matrix(c, c, 48), random_matrix(1, c, 49),
               Matrix(1, c, 1.0), random_matrix(1, c, 50), random_matrix(c, 4 * c, 51),
               random_matrix(1, 4 * c, 52), random_matrix(4 * c, c, 53), random_matrix(1, c, 54)},
              {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14}});
    auto pos_ptr = std::make_shared<std::vector<std::array<double, 3>>>(positions);
    check_op("point_rope",
             {[pos_ptr, rc](const std::vector<Value>& v) { return point_rope_rows(v[0], pos_ptr, 1, rc); },
              {random_matrix(static_cast<index_t>(pos_ptr->size()), 6, 55)},
              {0}});
  }

  for (const auto& [name, err] : results) {
    std::cout << "    " << name << ": " << err << "\n";
    expect(err < 1e-4, cat(name, " gradient error ", err, " >= 1e-4"));
  }

  const GradCheckResult e2e = model_grad_check(micro_preset(), 1, 30, 160);
  std::cout << "    micro end-to-end over 30 parameters: " << e2e.max_rel_err << "\n";
  expect(e2e.max_rel_err < 1e-3, cat("end-to-end gradient error ", e2e.max_rel_err));
}

void criterion_toy_overfit() {
  const auto csv_a = tmp_dir() / "train_a.csv";
  const auto csv_b = tmp_dir() / "train_b.csv";
  const std::string args = "train-toy --model micro --steps 300 --lr 1e-3 --seed 1 --points 2000";
  const CliRun a = run_cli(cat(args, " --out ", csv_a.string()));
  expect(a.code == 0, cat("train-toy exited ", a.code));
  const auto acc_pos = a.out.find("final_accuracy=");
  expect(acc_pos != std::string::npos, "train-toy printed no final accuracy");
  const double acc = std::atof(a.out.c_str() + acc_pos + std::string("final_accuracy=").size());
  std::cout << "    final accuracy " << acc << "\n";
  expect(acc >= 0.99, cat("accuracy ", acc, " < 0.99"));

  const CliRun b = run_cli(cat(args, " --out ", csv_b.string()));
  expect(b.code == 0, "second train-toy run failed");
  std::ifstream fa(csv_a), fb(csv_b);
  std::stringstream sa, sb;
  sa << fa.rdbuf();
  sb << fb.rdbuf();
  expect(sa.str() == sb.str(), "loss curves differ between identical runs");
  expect(sa.str().find("step,loss") != std::string::npos, "missing CSV header");
}

void criterion_rope_ablation() {
  double mean_on = 0.0, mean_off = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    ModelConfig cfg = micro_preset();
    PointBatch scene = voxelize(make_synthetic_scene(seed, 2000, 2.0, 4), cfg.grid_size);
    cfg.rope_enabled = true;
    const double on = train_toy(cfg, scene, 300, 1e-3, seed).losses.back();
    cfg.rope_enabled = false;
    const double off = train_toy(cfg, scene, 300, 1e-3, seed).losses.back();
    std::cout << "    seed " << seed << ": final loss " << on << " (rope) vs " << off
              << " (no rope)\n";
    mean_on += on / 5.0;
    mean_off += off / 5.0;
  }
  std::cout << "    mean final loss " << mean_on << " (rope) vs " << mean_off << " (no rope)\n";
  expect(mean_on < mean_off, cat("rope mean ", mean_on, " not lower than no-rope mean ", mean_off));
}

void criterion_determinism() {
  ModelConfig cfg = preset("s");
  cfg.in_channels = 3;
  PointBatch scene = voxelize(make_synthetic_scene(1, 50000, 2.0, 4), cfg.grid_size);
  std::cout << "    voxelized to " << scene.num_points() << " points\n";
  ModelWeights w = build_model(cfg, 1);
  Matrix first = forward(w, scene).logits.value();
  for (int run = 1; run < 3; ++run) {
    Matrix again = forward(w, scene).logits.value();
    expect(again == first, cat("forward run ", run, " differs bit-wise"));
  }
}

void criterion_profiler() {
  const ModelConfig s = preset("s");
  const ProfileReport params = profile_params(s);
  const ParamTable table = count_params(s);
  expect(params.rows.size() == table.rows.size(), "row count mismatch vs count_params");
  double frac = 0.0;
  for (std::size_t i = 0; i < params.rows.size(); ++i) {
    expect(params.rows[i].stage == table.rows[i].stage && params.rows[i].kind == table.rows[i].kind,
           "row identity mismatch vs count_params");
    expect(params.rows[i].params == table.rows[i].count, "row count mismatch vs count_params");
    frac += params.rows[i].param_fraction;
  }
  expect(std::abs(frac - 1.0) < 1e-9, cat("param fractions sum to ", frac));

  ModelConfig micro = micro_preset();
  PointBatch scene = voxelize(make_synthetic_scene(5, 3000, 2.0, 4), micro.grid_size);
  ModelWeights w = build_model(micro, 1);
  const ProfileReport lat = profile_latency(w, scene, 5, 1);
  double tfrac = 0.0, max_row = 0.0;
  for (const ProfileRow& r : lat.rows) {
    tfrac += r.time_fraction;
    max_row = std::max(max_row, r.time_us);
  }
  expect(std::abs(tfrac - 1.0) < 1e-6, cat("time fractions sum to ", tfrac));
  expect(lat.total_time_us >= max_row, "composition law violated: total < max stage");
  std::cout << "    total " << lat.total_time_us << " us, max stage " << max_row << " us\n";
}

}  // namespace

int main() {
  const std::vector<Check> checks = {
      {"criterion 1: parameter-count reproduction (S/S*/B/L within 5%)", 1.0, criterion_param_counts},
      {"criterion 2: stage-dispatch registry audit (Eq. 2 + symmetric decoder)", 30.0,
       criterion_stage_dispatch},
      {"criterion 3: PointROPE translation invariance (d_h 6 and 18, shifts to 1000)", 10.0,
       criterion_translation_invariance},
      {"criterion 4: PointROPE isometry and subspace accounting", 10.0, criterion_isometry_and_split},
      {"criterion 5: sparse conv vs dense oracle (50 subsets of a 6^3 grid)", 30.0,
       criterion_sparse_conv_oracle},
      {"criterion 6: curve bijectivity, Hilbert adjacency, serialization laws", 30.0, criterion_curves},
      {"criterion 7: gradient integrity (per-op and end-to-end)", 120.0, criterion_gradients},
      {"criterion 8: toy overfit to 99% accuracy, deterministic", 300.0, criterion_toy_overfit},
      {"criterion 9: PointROPE ablation ordering over 5 seeds", 1500.0, criterion_rope_ablation},
      {"criterion 10: bit-identical forward on a 50k-point scene, 3 runs", 120.0,
       criterion_determinism},
      {"criterion 11: profiler consistency and composition law", 60.0, criterion_profiler},
  };

  int failures = 0;
  for (const Check& c : checks) {
    const auto t0 = std::chrono::steady_clock::now();
    std::string error;
    try {
      c.body();
    } catch (const std::exception& e) {
      error = e.what();
    }
    const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
    if (error.empty() && dt.count() >= c.time_limit_s)
      error = cat("runtime ", dt.count(), " s exceeded the ", c.time_limit_s, " s budget");
    if (error.empty()) {
      std::cout << "[PASS] " << c.label << " (" << dt.count() << " s)\n";
    } else {
      std::cout << "[FAIL] " << c.label << " (" << dt.count() << " s): " << error << "\n";
      ++failures;
    }
  }
  if (failures) std::cout << failures << " criterion(s) failed\n";
  return failures ? 1 : 0;
}
