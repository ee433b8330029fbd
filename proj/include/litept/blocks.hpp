#pragma once

#include <cmath>
#include <memory>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "litept/curves.hpp"
#include "litept/rope.hpp"
#include "litept/sparse_conv.hpp"

namespace litept {

// --- convolution block -------------------------------------------------------

struct ConvBlockWeights {
  Value conv_w;          // (K^3 * C) x C
  Value lin_w, lin_b;    // C x C, 1 x C
  Value ln_g, ln_b;      // 1 x C
};

/// x + LN(linear(sparse_conv(x))); channels preserved.
inline Value conv_block(const Value& x, const std::shared_ptr<const NeighborTable>& table,
                        const ConvBlockWeights& w) {
  require<DimError>(w.lin_w.rows() == x.cols() && w.lin_w.cols() == x.cols(),
                    "conv_block: channels must be preserved, got x ", shape_str(x.value()),
                    " and linear ", shape_str(w.lin_w.value()));
  Value y = sparse_conv(x, table, w.conv_w);
  y = linear(y, w.lin_w, w.lin_b);
  y = layer_norm(y, w.ln_g, w.ln_b);
  return add(x, y);
}

struct StemWeights {
  Value conv_w;        // (K^3 * Cin) x Cstem
  Value ln_g, ln_b;    // 1 x Cstem
  bool has_proj = false;
  Value proj_w, proj_b;  // bridges Cstem -> C0 when they differ
};

/// One wide sparse convolution lifting raw features, then LayerNorm and GELU.
inline Value stem(const Value& x, const std::shared_ptr<const NeighborTable>& table,
                  const StemWeights& w) {
  Value y = sparse_conv(x, table, w.conv_w);
  y = layer_norm(y, w.ln_g, w.ln_b);
  y = gelu(y);
  if (w.has_proj) y = linear(y, w.proj_w, w.proj_b);
  return y;
}

// --- grid pooling ------------------------------------------------------------

struct PoolWeights {
  Value lin_w, lin_b;  // Cin x Cout, 1 x Cout
  Value bn_g, bn_b;    // 1 x Cout
  BnState* bn_state = nullptr;
};

/// Project, max-pool within each partition, then GELU and BatchNorm.
inline Value grid_pool(const Value& x, PoolingPlan& plan, const PoolWeights& w, BnMode mode) {
  require<DimError>(x.rows() == plan.fine_count, "grid_pool: ", x.rows(),
                    " rows vs plan built for ", plan.fine_count);
  Value y = linear(x, w.lin_w, w.lin_b);
  SegmentMaxResult sm = segment_max(y, plan.segments, plan.child_count);
  plan.saved_argmax = sm.argmax;
  y = gelu(sm.value);
  return batch_norm(y, w.bn_g, w.bn_b, *w.bn_state, mode);
}

struct UnpoolWeights {
  Value child_lin_w, child_lin_b, child_bn_g, child_bn_b;
  Value skip_lin_w, skip_lin_b, skip_bn_g, skip_bn_b;
  BnState* child_bn_state = nullptr;
  BnState* skip_bn_state = nullptr;
};

/// Broadcast child features to their parents, push each branch through its
/// own linear / GELU / BatchNorm, and merge by summation.
inline Value grid_unpool(const Value& child_feats, const Value& skip_feats, const PoolingPlan& plan,
                         const UnpoolWeights& w, BnMode mode) {
  require<DimError>(child_feats.rows() == plan.child_count, "grid_unpool: ", child_feats.rows(),
                    " child rows vs plan with ", plan.child_count);
  require<DimError>(skip_feats.rows() == plan.fine_count, "grid_unpool: ", skip_feats.rows(),
                    " skip rows vs plan with ", plan.fine_count);
  require<DimError>(w.child_lin_w.cols() == w.skip_lin_w.cols(),
                    "grid_unpool: branch channel mismatch after projection (child ",
                    w.child_lin_w.cols(), " vs skip ", w.skip_lin_w.cols(), ")");
  Value up = gather_rows(child_feats, plan.segments);
  up = batch_norm(gelu(linear(up, w.child_lin_w, w.child_lin_b)), w.child_bn_g, w.child_bn_b,
                  *w.child_bn_state, mode);
  Value skip = batch_norm(gelu(linear(skip_feats, w.skip_lin_w, w.skip_lin_b)), w.skip_bn_g,
                          w.skip_bn_b, *w.skip_bn_state, mode);
  return add(up, skip);
}

// --- attention block ---------------------------------------------------------

struct AttnBlockWeights {
  Value ln0_g, ln0_b;      // extra LayerNorm at the head of the attention branch
  Value ln1_g, ln1_b;      // pre-attention LayerNorm
  Value qkv_w, qkv_b;      // C x 3C, 1 x 3C
  Value proj_w, proj_b;    // C x C, 1 x C
  Value ffn_ln_g, ffn_ln_b;
  Value up_w, up_b;        // C x FC
  Value down_w, down_b;    // FC x C
};

namespace detail {

inline std::vector<index_t> group_rows(const SerializedOrder& order, index_t g) {
  const index_t m = order.real_counts[static_cast<std::size_t>(g)];
  const index_t start = order.group_start(g);
  return {order.slots.begin() + start, order.slots.begin() + start + m};
}

/// One group's attention output over its real slots (pads sit at the tail of
/// every group, contribute zero weight, and receive no writes).
inline Value attn_group(const Value& qkv, const std::vector<index_t>& rows,
                        const std::vector<std::array<double, 3>>& positions, int heads,
                        const RopeConfig& cfg, bool rope_enabled) {
  const index_t c = qkv.cols() / 3;
  const index_t d_h = cfg.head_dim;
  const auto m = static_cast<index_t>(rows.size());
  Value sub = gather_rows(qkv, rows);
  auto pos = std::make_shared<std::vector<std::array<double, 3>>>();
  pos->reserve(rows.size());
  for (index_t r : rows) pos->push_back(positions[static_cast<std::size_t>(r)]);
  const double scale = 1.0 / std::sqrt(static_cast<double>(d_h));
  const std::vector<std::uint8_t> live(static_cast<std::size_t>(m * m), 1);

  std::vector<Value> head_outs;
  head_outs.reserve(static_cast<std::size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    Value q = slice_cols(sub, static_cast<index_t>(h) * d_h, d_h);
    Value k = slice_cols(sub, c + static_cast<index_t>(h) * d_h, d_h);
    Value v = slice_cols(sub, 2 * c + static_cast<index_t>(h) * d_h, d_h);
    if (rope_enabled) {
      q = point_rope_rows(q, pos, 1, cfg);
      k = point_rope_rows(k, pos, 1, cfg);
    }
    Value logits = scaled_matmul_nt(q, k, scale);
    Value probs = masked_softmax(logits, live);
    head_outs.push_back(matmul(probs, v));
  }
  return concat_cols(head_outs);
}

}  // namespace detail

/// Pre-norm PointROPE attention block: attention branch with the extra
/// LayerNorm, residual add, then the FFN branch with its own residual.
inline Value attn_block(const Value& x, const SerializedOrder& order,
                        const std::vector<std::array<double, 3>>& positions,
                        const AttnBlockWeights& w, int heads, const RopeConfig& cfg,
                        bool rope_enabled = true) {
  const index_t n = x.rows();
  const index_t c = x.cols();
  require<DimError>(static_cast<index_t>(positions.size()) == n, "attn_block: ", positions.size(),
                    " positions for ", n, " points");
  require<DimError>(c == static_cast<index_t>(heads) * cfg.head_dim, "attn_block: channels ", c,
                    " != heads ", heads, " x head_dim ", cfg.head_dim);
  require<DimError>(static_cast<index_t>(order.perm.size()) == n,
                    "attn_block: order built for ", order.perm.size(), " points, got ", n);

  Value h0 = layer_norm(x, w.ln0_g, w.ln0_b);
  Value h1 = layer_norm(h0, w.ln1_g, w.ln1_b);
  Value qkv = linear(h1, w.qkv_w, w.qkv_b);

  const index_t n_groups = order.n_groups;
  std::vector<Value> parts(static_cast<std::size_t>(n_groups));
  std::vector<std::vector<index_t>> row_lists(static_cast<std::size_t>(n_groups));
  auto run_group = [&](index_t g) {
    row_lists[static_cast<std::size_t>(g)] = detail::group_rows(order, g);
    parts[static_cast<std::size_t>(g)] = detail::attn_group(
        qkv, row_lists[static_cast<std::size_t>(g)], positions, heads, cfg, rope_enabled);
  };
  // groups are independent; parallel execution is only taken off-tape since
  // tape recording is single-threaded by contract
  if (!qkv.recorded() && thread_count() > 1) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(thread_count())
#endif
    for (index_t g = 0; g < n_groups; ++g) run_group(g);
  } else {
    for (index_t g = 0; g < n_groups; ++g) run_group(g);
  }

  Value attn = scatter_rows(parts, row_lists, n);
  attn = linear(attn, w.proj_w, w.proj_b);
  Value x2 = add(x, attn);

  Value f = layer_norm(x2, w.ffn_ln_g, w.ffn_ln_b);
  f = linear(f, w.up_w, w.up_b);
  f = gelu(f);
  f = linear(f, w.down_w, w.down_b);
  return add(x2, f);
}

/// The logits the block computes for one (group, head), through the exact
/// same kernels as the block itself; test hook for the brute-force oracle.
inline Matrix attn_group_logits(const Matrix& qkv, const SerializedOrder& order,
                                const std::vector<std::array<double, 3>>& positions, index_t group,
                                int head, int heads, const RopeConfig& cfg, bool rope_enabled = true) {
  const index_t c = qkv.cols() / 3;
  const index_t d_h = cfg.head_dim;
  const auto rows = detail::group_rows(order, group);
  Value sub = gather_rows(Value::wrap(qkv), rows);
  std::vector<std::array<double, 3>> pos;
  pos.reserve(rows.size());
  for (index_t r : rows) pos.push_back(positions[static_cast<std::size_t>(r)]);
  Matrix q = slice_cols(sub, static_cast<index_t>(head) * d_h, d_h).value();
  Matrix k = slice_cols(sub, c + static_cast<index_t>(head) * d_h, d_h).value();
  if (rope_enabled) {
    detail::rope_rotate_rows(q, {pos.data(), pos.size()}, 1, cfg, 1.0);
    detail::rope_rotate_rows(k, {pos.data(), pos.size()}, 1, cfg, 1.0);
  }
  return scaled_dot_nt_exact(q, k, 1.0 / std::sqrt(static_cast<double>(d_h)));
}

/// Full slot-grid attention probabilities for one (group, head): real rows
/// hold the softmax over real keys, pad rows and pad columns are exactly 0.
inline Matrix attn_group_probs(const Matrix& qkv, const SerializedOrder& order,
                               const std::vector<std::array<double, 3>>& positions, index_t group,
                               int head, int heads, const RopeConfig& cfg, bool rope_enabled = true) {
  Matrix logits = attn_group_logits(qkv, order, positions, group, head, heads, cfg, rope_enabled);
  const index_t m = logits.rows();
  const std::vector<std::uint8_t> live(static_cast<std::size_t>(m * m), 1);
  Matrix probs = masked_softmax(Value::wrap(logits), live).value();
  const index_t gs = order.group_size;
  Matrix full(gs, gs);
  for (index_t i = 0; i < m; ++i)
    for (index_t j = 0; j < m; ++j) full(i, j) = probs(i, j);
  return full;
}

}  // namespace litept
