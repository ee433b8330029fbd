#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "litept/blocks.hpp"
#include "litept/io.hpp"

namespace litept {

enum class BlockKind { Conv, Attn, Both };
enum class DecoderKind { Light, Symmetric };

struct StageConfig {
  int channels = 0;
  int blocks = 0;
  BlockKind kind = BlockKind::Conv;
  int heads = 0;        // attention stages only
  int mlp_ratio = 4;    // FFN hidden = mlp_ratio * channels
  int group_size = 1024;
  int kernel = 3;       // conv stages only
};

struct DecoderStageConfig {
  int channels = 0;
  int blocks = 0;  // 0 for the light decoder
  BlockKind kind = BlockKind::Conv;
  int heads = 0;
};

struct StemConfig {
  int channels = 36;
  int kernel = 5;
};

struct ModelConfig {
  std::string name = "custom";
  int in_channels = 6;
  int num_classes = 20;
  StemConfig stem;
  std::vector<StageConfig> stages;          // encoder, shallow to deep
  std::vector<DecoderStageConfig> decoder;  // index-aligned with encoder stages 0..L-2
  DecoderKind decoder_kind = DecoderKind::Light;
  int conv_transition = 3;  // L_c: stages below it are convolutional
  double rope_base = 100.0;
  RopeMode rope_mode = RopeMode::Cartesian;
  std::array<int, 3> rope_split{0, 0, 0};
  bool rope_enabled = true;
  std::optional<CurveKind> curve_override;
  double grid_size = 0.02;

  index_t num_stages() const { return static_cast<index_t>(stages.size()); }

  RopeConfig rope_for(int channels, int heads) const {
    RopeConfig rc;
    rc.head_dim = channels / heads;
    rc.base = rope_base;
    rc.mode = rope_mode;
    rc.axis_split = rope_split;
    return rc;
  }

  void validate() const {
    require<ConfigError>(!stages.empty(), "model ", name, ": no stages");
    require<ConfigError>(in_channels >= 1, "model ", name, ": in_channels must be >= 1");
    require<ConfigError>(num_classes >= 1, "model ", name, ": num_classes must be >= 1");
    require<ConfigError>(stem.channels >= 1 && stem.kernel >= 1 && stem.kernel % 2 == 1, "model ",
                         name, ": stem needs odd kernel and positive width");
    require<ConfigError>(static_cast<index_t>(decoder.size()) == num_stages() - 1, "model ", name,
                         ": decoder has ", decoder.size(), " stages, expected ", num_stages() - 1);
    for (std::size_t i = 0; i < stages.size(); ++i) {
      const StageConfig& s = stages[i];
      const std::string where = cat("model ", name, ", stage E", i);
      require<ConfigError>(s.channels >= 1 && s.blocks >= 1, where, ": channels/blocks must be positive");
      if (s.kind != BlockKind::Conv) {
        require<ConfigError>(s.heads >= 1, where, ": attention stage needs heads");
        require<ConfigError>(s.channels % s.heads == 0, where, ": channels ", s.channels,
                             " not divisible by heads ", s.heads);
        try {
          rope_for(s.channels, s.heads).resolved_split();
        } catch (const ConfigError& e) {
          throw ConfigError(cat(where, ": ", e.what()));
        }
        require<ConfigError>(s.group_size >= 1, where, ": group size must be >= 1");
      }
      if (s.kind != BlockKind::Attn)
        require<ConfigError>(s.kernel >= 1 && s.kernel % 2 == 1, where, ": kernel must be odd");
    }
    for (std::size_t d = 0; d < decoder.size(); ++d) {
      const DecoderStageConfig& s = decoder[d];
      const std::string where = cat("model ", name, ", stage D", d);
      require<ConfigError>(s.channels >= 1, where, ": channels must be positive");
      if (decoder_kind == DecoderKind::Symmetric && s.blocks > 0 && s.kind != BlockKind::Conv) {
        require<ConfigError>(s.heads >= 1 && s.channels % s.heads == 0, where,
                             ": attention decoder stage needs dividing heads");
        try {
          rope_for(s.channels, s.heads).resolved_split();
        } catch (const ConfigError& e) {
          throw ConfigError(cat(where, ": ", e.what()));
        }
      }
    }
  }
};

// --- presets -------------------------------------------------------------

namespace detail {
inline StageConfig conv_stage(int c, int b, int kernel = 3) {
  StageConfig s;
  s.channels = c;
  s.blocks = b;
  s.kind = BlockKind::Conv;
  s.kernel = kernel;
  return s;
}
inline StageConfig attn_stage(int c, int b, int heads, int group = 1024) {
  StageConfig s;
  s.channels = c;
  s.blocks = b;
  s.kind = BlockKind::Attn;
  s.heads = heads;
  s.group_size = group;
  return s;
}
}  // namespace detail

inline ModelConfig litept_s() {
  ModelConfig m;
  m.name = "s";
  m.stages = {detail::conv_stage(36, 2), detail::conv_stage(72, 2), detail::conv_stage(144, 2),
              detail::attn_stage(252, 6, 14), detail::attn_stage(504, 2, 28)};
  m.decoder = {{72}, {72}, {144}, {252}};
  m.conv_transition = 3;
  return m;
}

inline ModelConfig litept_s_star() {
  ModelConfig m = litept_s();
  m.name = "s-star";
  m.decoder_kind = DecoderKind::Symmetric;
  m.decoder = {{72, 2, BlockKind::Conv, 0},
               {72, 2, BlockKind::Conv, 0},
               {144, 2, BlockKind::Conv, 0},
               {252, 2, BlockKind::Attn, 14}};
  return m;
}

inline ModelConfig litept_b() {
  ModelConfig m;
  m.name = "b";
  m.stages = {detail::conv_stage(54, 3), detail::conv_stage(108, 3), detail::conv_stage(216, 3),
              detail::attn_stage(432, 12, 24), detail::attn_stage(576, 3, 32)};
  m.decoder = {{72}, {108}, {216}, {432}};
  m.conv_transition = 3;
  return m;
}

inline ModelConfig litept_l() {
  ModelConfig m;
  m.name = "l";
  m.stages = {detail::conv_stage(72, 3), detail::conv_stage(144, 3), detail::conv_stage(288, 3),
              detail::attn_stage(576, 12, 32), detail::attn_stage(864, 3, 48)};
  m.decoder = {{72}, {144}, {288}, {576}};
  m.conv_transition = 3;
  return m;
}

/// Three-stage desk-scale preset, small enough for end-to-end
/// finite-difference checks and toy training.
inline ModelConfig micro_preset() {
  ModelConfig m;
  m.name = "micro";
  m.in_channels = 3;
  m.num_classes = 4;
  m.stem = StemConfig{12, 3};
  m.stages = {detail::conv_stage(12, 1), detail::conv_stage(24, 1), detail::attn_stage(36, 1, 6, 16)};
  m.decoder = {{24}, {24}};
  m.conv_transition = 2;
  return m;
}

inline ModelConfig preset(const std::string& name) {
  if (name == "s") return litept_s();
  if (name == "s-star" || name == "s*") return litept_s_star();
  if (name == "b") return litept_b();
  if (name == "l") return litept_l();
  if (name == "micro") return micro_preset();
  throw ConfigError(cat("unknown model preset '", name, "' (expected s, s-star, b, l or micro)"));
}

// --- weight registry -------------------------------------------------------

/// Flat registry of named parameter matrices plus BatchNorm running stats.
/// Iteration follows registration order, which is fixed by construction.
class ModelWeights {
 public:
  ModelConfig cfg;

  int add_param(const std::string& name, Matrix m) {
    require<ConfigError>(!index_.count(name), "duplicate parameter ", name);
    index_[name] = static_cast<int>(names_.size());
    names_.push_back(name);
    params_.push_back(std::make_shared<Matrix>(std::move(m)));
    return static_cast<int>(names_.size()) - 1;
  }

  BnState& add_bn_state(const std::string& name, index_t channels) {
    auto [it, inserted] = bn_.emplace(name, BnState::fresh(channels));
    require<ConfigError>(inserted, "duplicate batch-norm state ", name);
    return it->second;
  }

  int index_of(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? -1 : it->second;
  }

  std::shared_ptr<Matrix>& param(const std::string& name) {
    const int i = index_of(name);
    require<ConfigError>(i >= 0, "unknown parameter ", name);
    return params_[static_cast<std::size_t>(i)];
  }

  const std::vector<std::string>& names() const { return names_; }
  std::vector<std::shared_ptr<Matrix>>& params() { return params_; }
  const std::vector<std::shared_ptr<Matrix>>& params() const { return params_; }

  BnState& bn_state(const std::string& name) {
    auto it = bn_.find(name);
    require<ConfigError>(it != bn_.end(), "unknown batch-norm state ", name);
    return it->second;
  }
  std::map<std::string, BnState>& bn_states() { return bn_; }
  const std::map<std::string, BnState>& bn_states() const { return bn_; }

  long long total_elements() const {
    long long n = 0;
    for (const auto& p : params_) n += static_cast<long long>(p->size());
    return n;
  }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, int> index_;
  std::vector<std::shared_ptr<Matrix>> params_;
  std::map<std::string, BnState> bn_;
};

namespace detail {

struct Initializer {
  ModelWeights& w;
  Rng rng;

  void uniform_fan_in(const std::string& name, index_t rows, index_t cols, index_t fan_in) {
    const double s = std::sqrt(1.0 / static_cast<double>(fan_in));
    w.add_param(name, Matrix::random_uniform(rows, cols, -s, s, rng));
  }
  void zeros(const std::string& name, index_t rows, index_t cols) { w.add_param(name, Matrix(rows, cols)); }
  void ones(const std::string& name, index_t rows, index_t cols) { w.add_param(name, Matrix(rows, cols, 1.0)); }

  void linear(const std::string& prefix, index_t c_in, index_t c_out) {
    uniform_fan_in(prefix + "/w", c_in, c_out, c_in);
    zeros(prefix + "/b", 1, c_out);
  }
  void layer_norm(const std::string& prefix, index_t c) {
    ones(prefix + "/gamma", 1, c);
    zeros(prefix + "/beta", 1, c);
  }
  void batch_norm(const std::string& prefix, index_t c) {
    ones(prefix + "/gamma", 1, c);
    zeros(prefix + "/beta", 1, c);
    w.add_bn_state(prefix, c);
  }
  void conv(const std::string& name, int kernel, index_t c_in, index_t c_out) {
    const index_t k3 = static_cast<index_t>(kernel) * kernel * kernel;
    uniform_fan_in(name, k3 * c_in, c_out, k3 * c_in);
  }
  void conv_block(const std::string& prefix, int kernel, index_t c) {
    conv(prefix + "/conv/w", kernel, c, c);
    linear(prefix + "/linear", c, c);
    layer_norm(prefix + "/ln", c);
  }
  void attn_block(const std::string& prefix, index_t c, int mlp_ratio) {
    layer_norm(prefix + "/attn/ln0", c);
    layer_norm(prefix + "/attn/ln1", c);
    linear(prefix + "/attn/qkv", c, 3 * c);
    linear(prefix + "/attn/proj", c, c);
    layer_norm(prefix + "/ffn/ln", c);
    linear(prefix + "/ffn/up", c, mlp_ratio * c);
    linear(prefix + "/ffn/down", mlp_ratio * c, c);
  }
};

}  // namespace detail

/// Materializes all parameters for a config with seeded uniform(+-sqrt(1/fan_in))
/// init for linear/conv weights, unit gamma and zero beta/bias elsewhere.
inline ModelWeights build_model(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ModelWeights w;
  w.cfg = cfg;
  detail::Initializer init{w, Rng(seed)};

  init.conv("stem/conv/w", cfg.stem.kernel, cfg.in_channels, cfg.stem.channels);
  init.layer_norm("stem/ln", cfg.stem.channels);
  if (cfg.stem.channels != cfg.stages[0].channels)
    init.linear("stem/proj", cfg.stem.channels, cfg.stages[0].channels);

  const index_t L = cfg.num_stages();
  for (index_t i = 0; i < L; ++i) {
    const StageConfig& s = cfg.stages[static_cast<std::size_t>(i)];
    for (int j = 0; j < s.blocks; ++j) {
      const std::string prefix = cat("enc", i, "/block", j);
      if (s.kind != BlockKind::Attn) init.conv_block(prefix, s.kernel, s.channels);
      if (s.kind != BlockKind::Conv) init.attn_block(prefix, s.channels, s.mlp_ratio);
    }
    if (i + 1 < L) {
      const std::string prefix = cat("pool", i + 1);
      init.linear(prefix + "/linear", s.channels, cfg.stages[static_cast<std::size_t>(i + 1)].channels);
      init.batch_norm(prefix + "/bn", cfg.stages[static_cast<std::size_t>(i + 1)].channels);
    }
  }

  for (index_t d = L - 2; d >= 0; --d) {
    const DecoderStageConfig& s = cfg.decoder[static_cast<std::size_t>(d)];
    const index_t child_c = d == L - 2 ? cfg.stages.back().channels
                                       : cfg.decoder[static_cast<std::size_t>(d + 1)].channels;
    const index_t skip_c = cfg.stages[static_cast<std::size_t>(d)].channels;
    const std::string prefix = cat("dec", d, "/unpool");
    init.linear(prefix + "/child/linear", child_c, s.channels);
    init.batch_norm(prefix + "/child/bn", s.channels);
    init.linear(prefix + "/skip/linear", skip_c, s.channels);
    init.batch_norm(prefix + "/skip/bn", s.channels);
    if (cfg.decoder_kind == DecoderKind::Symmetric) {
      for (int j = 0; j < s.blocks; ++j) {
        const std::string bp = cat("dec", d, "/block", j);
        if (s.kind != BlockKind::Attn) init.conv_block(bp, 3, s.channels);
        if (s.kind != BlockKind::Conv) {
          const int ratio = 4;
          init.attn_block(bp, s.channels, ratio);
        }
      }
    }
  }

  init.linear("head", cfg.decoder.empty() ? cfg.stages.back().channels : cfg.decoder[0].channels,
              cfg.num_classes);
  return w;
}

// --- analytic parameter table ----------------------------------------------

struct ParamRow {
  std::string stage;
  std::string kind;
  long long count = 0;
};

struct ParamTable {
  std::vector<ParamRow> rows;
  long long total = 0;
};

namespace detail {

struct RowAccum {
  std::vector<ParamRow> rows;
  std::map<std::pair<std::string, std::string>, std::size_t> where;

  void add(const std::string& stage, const std::string& kind, long long count) {
    auto key = std::make_pair(stage, kind);
    auto it = where.find(key);
    if (it == where.end()) {
      where[key] = rows.size();
      rows.push_back(ParamRow{stage, kind, count});
    } else {
      rows[it->second].count += count;
    }
  }

  void conv_block(const std::string& stage, long long k, long long c, long long blocks) {
    add(stage, "conv", blocks * k * k * k * c * c);
    add(stage, "linear", blocks * (c * c + c));
    add(stage, "norm", blocks * 2 * c);
  }
  void attn_block(const std::string& stage, long long c, long long ratio, long long blocks) {
    add(stage, "attn", blocks * (c * 3 * c + 3 * c + c * c + c));
    add(stage, "ffn", blocks * (c * ratio * c + ratio * c + ratio * c * c + c));
    add(stage, "norm", blocks * 6 * c);
  }
};

}  // namespace detail

/// Analytic per-stage, per-layer-kind parameter counts; no weights are
/// materialized. Row (stage, kind) totals match the registry exactly.
inline ParamTable count_params(const ModelConfig& cfg) {
  cfg.validate();
  detail::RowAccum acc;
  const long long cin = cfg.in_channels, cs = cfg.stem.channels;
  const long long ks = cfg.stem.kernel;
  acc.add("stem", "conv", ks * ks * ks * cin * cs);
  acc.add("stem", "norm", 2 * cs);
  if (cfg.stem.channels != cfg.stages[0].channels)
    acc.add("stem", "linear", cs * cfg.stages[0].channels + cfg.stages[0].channels);

  const index_t L = cfg.num_stages();
  for (index_t i = 0; i < L; ++i) {
    const StageConfig& s = cfg.stages[static_cast<std::size_t>(i)];
    const std::string stage = cat("E", i);
    if (s.kind != BlockKind::Attn) acc.conv_block(stage, s.kernel, s.channels, s.blocks);
    if (s.kind != BlockKind::Conv) acc.attn_block(stage, s.channels, s.mlp_ratio, s.blocks);
    if (i + 1 < L) {
      const long long co = cfg.stages[static_cast<std::size_t>(i + 1)].channels;
      acc.add(cat("P", i + 1), "linear", static_cast<long long>(s.channels) * co + co);
      acc.add(cat("P", i + 1), "norm", 2 * co);
    }
  }

  for (index_t d = L - 2; d >= 0; --d) {
    const DecoderStageConfig& s = cfg.decoder[static_cast<std::size_t>(d)];
    const long long child_c = d == L - 2 ? cfg.stages.back().channels
                                         : cfg.decoder[static_cast<std::size_t>(d + 1)].channels;
    const long long skip_c = cfg.stages[static_cast<std::size_t>(d)].channels;
    const long long c = s.channels;
    const std::string stage = cat("D", d);
    acc.add(stage, "linear", child_c * c + c + skip_c * c + c);
    acc.add(stage, "norm", 4 * c);
    if (cfg.decoder_kind == DecoderKind::Symmetric && s.blocks > 0) {
      if (s.kind != BlockKind::Attn) acc.conv_block(stage, 3, c, s.blocks);
      if (s.kind != BlockKind::Conv) acc.attn_block(stage, c, 4, s.blocks);
    }
  }

  const long long hin = cfg.decoder.empty() ? cfg.stages.back().channels : cfg.decoder[0].channels;
  acc.add("head", "linear", hin * cfg.num_classes + cfg.num_classes);

  ParamTable table;
  table.rows = std::move(acc.rows);
  for (const ParamRow& r : table.rows) table.total += r.count;
  return table;
}

// --- forward ------------------------------------------------------------------

struct ForwardHooks {
  std::function<void(const std::string& stage, const std::string& kind, index_t points, double seconds)>
      on_stage;
};

struct ForwardOptions {
  Tape* tape = nullptr;
  BnMode bn_mode = BnMode::Eval;
  ForwardHooks* hooks = nullptr;
};

struct ForwardRun {
  Value logits;
  std::vector<Value> bound;           // tape leaves, index-aligned with the registry
  std::vector<index_t> stage_points;  // encoder resolution per stage
};

namespace detail {

struct ForwardCtx {
  ModelWeights& w;
  const ForwardOptions& opt;
  std::vector<Value> bound;

  explicit ForwardCtx(ModelWeights& weights, const ForwardOptions& options) : w(weights), opt(options) {
    bound.reserve(w.params().size());
    for (auto& p : w.params()) bound.push_back(opt.tape ? opt.tape->leaf(p) : Value::wrap(p));
  }

  const Value& p(const std::string& name) {
    const int i = w.index_of(name);
    require<ConfigError>(i >= 0, "forward: missing parameter ", name);
    return bound[static_cast<std::size_t>(i)];
  }

  ConvBlockWeights conv_weights(const std::string& prefix) {
    return ConvBlockWeights{p(prefix + "/conv/w"), p(prefix + "/linear/w"), p(prefix + "/linear/b"),
                            p(prefix + "/ln/gamma"), p(prefix + "/ln/beta")};
  }
  AttnBlockWeights attn_weights(const std::string& prefix) {
    return AttnBlockWeights{p(prefix + "/attn/ln0/gamma"), p(prefix + "/attn/ln0/beta"),
                            p(prefix + "/attn/ln1/gamma"), p(prefix + "/attn/ln1/beta"),
                            p(prefix + "/attn/qkv/w"),     p(prefix + "/attn/qkv/b"),
                            p(prefix + "/attn/proj/w"),    p(prefix + "/attn/proj/b"),
                            p(prefix + "/ffn/ln/gamma"),   p(prefix + "/ffn/ln/beta"),
                            p(prefix + "/ffn/up/w"),       p(prefix + "/ffn/up/b"),
                            p(prefix + "/ffn/down/w"),     p(prefix + "/ffn/down/b")};
  }
  PoolWeights pool_weights(const std::string& prefix) {
    return PoolWeights{p(prefix + "/linear/w"), p(prefix + "/linear/b"), p(prefix + "/bn/gamma"),
                       p(prefix + "/bn/beta"), &w.bn_state(prefix + "/bn")};
  }
  UnpoolWeights unpool_weights(const std::string& prefix) {
    return UnpoolWeights{p(prefix + "/child/linear/w"), p(prefix + "/child/linear/b"),
                         p(prefix + "/child/bn/gamma"),  p(prefix + "/child/bn/beta"),
                         p(prefix + "/skip/linear/w"),   p(prefix + "/skip/linear/b"),
                         p(prefix + "/skip/bn/gamma"),   p(prefix + "/skip/bn/beta"),
                         &w.bn_state(prefix + "/child/bn"), &w.bn_state(prefix + "/skip/bn")};
  }

  template <class Fn>
  void timed(const std::string& stage, const std::string& kind, index_t points, Fn&& fn) {
    if (!opt.hooks || !opt.hooks->on_stage) {
      fn();
      return;
    }
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
    opt.hooks->on_stage(stage, kind, points, dt.count());
  }
};

/// Runs the block sequence of one stage (encoder or symmetric-decoder).
inline Value run_stage_blocks(ForwardCtx& ctx, Value f, const LevelGeometry& level,
                              const std::string& prefix, BlockKind kind, int blocks, int kernel,
                              int heads, int group_size, const ModelConfig& cfg) {
  std::shared_ptr<const NeighborTable> table;
  if (kind != BlockKind::Attn) {
    const VoxelIndex index = build_voxel_index(level);
    table = std::make_shared<const NeighborTable>(build_neighbor_table(index, kernel));
  }
  std::vector<std::array<double, 3>> positions;
  std::map<CurveKind, SerializedOrder> orders;
  RopeConfig rc;
  if (kind != BlockKind::Conv) {
    positions = rope_positions(level, cfg.rope_mode);
    rc = cfg.rope_for(static_cast<int>(f.cols()), heads);
  }
  for (int j = 0; j < blocks; ++j) {
    if (kind != BlockKind::Attn) f = conv_block(f, table, ctx.conv_weights(cat(prefix, "/block", j)));
    if (kind != BlockKind::Conv) {
      const CurveKind ck = cfg.curve_override.value_or(curve_schedule(j));
      auto it = orders.find(ck);
      if (it == orders.end()) it = orders.emplace(ck, serialize(level, ck, group_size)).first;
      f = attn_block(f, it->second, positions, ctx.attn_weights(cat(prefix, "/block", j)), heads, rc,
                     cfg.rope_enabled);
    }
  }
  return f;
}

}  // namespace detail

/// Whole-network forward: stem, encoder stages with pooling, decoder with
/// unpooling and skips, linear segmentation head. Output rows align with the
/// voxelized input points.
inline ForwardRun forward(ModelWeights& weights, const PointBatch& batch, const ForwardOptions& opt = {}) {
  const ModelConfig& cfg = weights.cfg;
  batch.validate();
  ForwardRun run;
  if (batch.num_points() == 0) {
    run.logits = Value::wrap(Matrix(0, cfg.num_classes));
    return run;
  }
  require<DataError>(batch.voxelized(), "forward: batch must be voxelized first");
  require<DimError>(batch.features.cols() == cfg.in_channels, "forward: batch has ",
                    batch.features.cols(), " feature channels, model expects ", cfg.in_channels);

  detail::ForwardCtx ctx(weights, opt);
  const index_t L = cfg.num_stages();

  std::vector<LevelGeometry> levels(static_cast<std::size_t>(L));
  levels[0] = level_of(batch);
  std::vector<PoolingPlan> plans(static_cast<std::size_t>(L - 1));

  Value f = Value::wrap(batch.features);

  ctx.timed("stem", "stem", levels[0].num_points(), [&] {
    const VoxelIndex index = build_voxel_index(levels[0]);
    auto table = std::make_shared<const NeighborTable>(build_neighbor_table(index, cfg.stem.kernel));
    StemWeights sw{ctx.p("stem/conv/w"), ctx.p("stem/ln/gamma"), ctx.p("stem/ln/beta")};
    if (weights.index_of("stem/proj/w") >= 0) {
      sw.has_proj = true;
      sw.proj_w = ctx.p("stem/proj/w");
      sw.proj_b = ctx.p("stem/proj/b");
    }
    f = stem(f, table, sw);
  });

  std::vector<Value> skips(static_cast<std::size_t>(L));
  for (index_t i = 0; i < L; ++i) {
    const StageConfig& s = cfg.stages[static_cast<std::size_t>(i)];
    run.stage_points.push_back(levels[static_cast<std::size_t>(i)].num_points());
    require<DataError>(levels[static_cast<std::size_t>(i)].num_points() > 0, "forward: stage E", i,
                       " received no points");
    const char* kind_name = s.kind == BlockKind::Conv ? "conv" : s.kind == BlockKind::Attn ? "attn" : "conv+attn";
    ctx.timed(cat("E", i), kind_name, levels[static_cast<std::size_t>(i)].num_points(), [&] {
      f = detail::run_stage_blocks(ctx, f, levels[static_cast<std::size_t>(i)], cat("enc", i), s.kind,
                                   s.blocks, s.kernel, s.heads, s.group_size, cfg);
    });
    skips[static_cast<std::size_t>(i)] = f;
    if (i + 1 < L) {
      ctx.timed(cat("P", i + 1), "pool", levels[static_cast<std::size_t>(i)].num_points(), [&] {
        plans[static_cast<std::size_t>(i)] = build_pooling_plan(levels[static_cast<std::size_t>(i)], 2);
        levels[static_cast<std::size_t>(i + 1)] = plans[static_cast<std::size_t>(i)].child;
        f = grid_pool(f, plans[static_cast<std::size_t>(i)], ctx.pool_weights(cat("pool", i + 1)),
                      opt.bn_mode);
      });
    }
  }

  for (index_t d = L - 2; d >= 0; --d) {
    const DecoderStageConfig& s = cfg.decoder[static_cast<std::size_t>(d)];
    ctx.timed(cat("D", d), "unpool", levels[static_cast<std::size_t>(d)].num_points(), [&] {
      f = grid_unpool(f, skips[static_cast<std::size_t>(d)], plans[static_cast<std::size_t>(d)],
                      ctx.unpool_weights(cat("dec", d, "/unpool")), opt.bn_mode);
    });
    if (cfg.decoder_kind == DecoderKind::Symmetric && s.blocks > 0) {
      const char* kind_name = s.kind == BlockKind::Conv ? "conv" : s.kind == BlockKind::Attn ? "attn" : "conv+attn";
      ctx.timed(cat("D", d), kind_name, levels[static_cast<std::size_t>(d)].num_points(), [&] {
        f = detail::run_stage_blocks(ctx, f, levels[static_cast<std::size_t>(d)], cat("dec", d), s.kind,
                                     s.blocks, 3, s.heads, cfg.stages[static_cast<std::size_t>(d)].group_size,
                                     cfg);
      });
    }
  }

  ctx.timed("head", "head", levels[0].num_points(), [&] {
    f = linear(f, ctx.p("head/w"), ctx.p("head/b"));
  });
  run.logits = f;
  run.bound = std::move(ctx.bound);
  return run;
}

// --- checkpoints ---------------------------------------------------------------
// LPTW container: named-tensor index over the LPTC primitives.

namespace detail {
inline constexpr char kWeightsMagic[4] = {'L', 'P', 'T', 'W'};
inline constexpr std::uint16_t kWeightsVersion = 1;

inline void put_string(std::string& buf, const std::string& s) {
  require<IoError>(s.size() <= 0xffff, "string too long for container: ", s.size());
  put_le<std::uint16_t>(buf, static_cast<std::uint16_t>(s.size()));
  buf.append(s);
}
inline std::string get_string(const std::string& buf, std::size_t& pos) {
  const auto n = get_le<std::uint16_t>(buf, pos, "string length");
  require<IoError>(pos + n <= buf.size(), "truncated string");
  std::string s = buf.substr(pos, n);
  pos += n;
  return s;
}
inline void put_matrix(std::string& buf, const Matrix& m) {
  put_le<std::uint64_t>(buf, static_cast<std::uint64_t>(m.rows()));
  put_le<std::uint64_t>(buf, static_cast<std::uint64_t>(m.cols()));
  for (index_t r = 0; r < m.rows(); ++r)
    for (index_t c = 0; c < m.cols(); ++c) put_le<double>(buf, m(r, c));
}
inline Matrix get_matrix(const std::string& buf, std::size_t& pos) {
  const auto rows = static_cast<index_t>(get_le<std::uint64_t>(buf, pos, "tensor rows"));
  const auto cols = static_cast<index_t>(get_le<std::uint64_t>(buf, pos, "tensor cols"));
  Matrix m(rows, cols);
  for (index_t r = 0; r < rows; ++r)
    for (index_t c = 0; c < cols; ++c) m(r, c) = get_le<double>(buf, pos, "tensor data");
  return m;
}
}  // namespace detail

inline void save_weights(const ModelWeights& w, const std::string& path) {
  std::string buf;
  buf.append(detail::kWeightsMagic, 4);
  detail::put_le<std::uint16_t>(buf, detail::kWeightsVersion);
  detail::put_string(buf, w.cfg.name);
  const std::uint64_t entries = w.names().size() + 2 * w.bn_states().size();
  detail::put_le<std::uint64_t>(buf, entries);
  for (std::size_t i = 0; i < w.names().size(); ++i) {
    buf.push_back(0);  // kind: parameter
    detail::put_string(buf, w.names()[i]);
    detail::put_matrix(buf, *w.params()[i]);
  }
  for (const auto& [name, state] : w.bn_states()) {
    buf.push_back(1);  // kind: running mean
    detail::put_string(buf, name);
    detail::put_matrix(buf, state.running_mean);
    buf.push_back(2);  // kind: running var
    detail::put_string(buf, name);
    detail::put_matrix(buf, state.running_var);
  }
  detail::spill(path, buf);
}

/// Loads a checkpoint into an already-built model; names and shapes must match.
inline void load_weights(ModelWeights& w, const std::string& path) {
  const std::string buf = detail::slurp(path);
  std::size_t pos = 0;
  require<IoError>(buf.size() >= 4 && std::memcmp(buf.data(), detail::kWeightsMagic, 4) == 0, path,
                   ": bad magic, not an LPTW checkpoint");
  pos = 4;
  const auto version = detail::get_le<std::uint16_t>(buf, pos, "version");
  require<IoError>(version == detail::kWeightsVersion, path, ": unsupported LPTW version ", version);
  detail::get_string(buf, pos);  // model name, informational
  const auto entries = detail::get_le<std::uint64_t>(buf, pos, "entry count");
  std::size_t loaded_params = 0;
  for (std::uint64_t e = 0; e < entries; ++e) {
    require<IoError>(pos < buf.size(), path, ": truncated entry");
    const auto kind = static_cast<unsigned char>(buf[pos++]);
    const std::string name = detail::get_string(buf, pos);
    Matrix m = detail::get_matrix(buf, pos);
    if (kind == 0) {
      const int i = w.index_of(name);
      require<IoError>(i >= 0, path, ": checkpoint parameter ", name, " unknown to this model");
      require<IoError>(w.params()[static_cast<std::size_t>(i)]->same_shape(m), path, ": shape mismatch for ",
                       name);
      *w.params()[static_cast<std::size_t>(i)] = std::move(m);
      ++loaded_params;
    } else if (kind == 1) {
      w.bn_state(name).running_mean = std::move(m);
    } else if (kind == 2) {
      w.bn_state(name).running_var = std::move(m);
    } else {
      throw IoError(cat(path, ": unknown tensor kind ", static_cast<int>(kind)));
    }
  }
  require<IoError>(loaded_params == w.names().size(), path, ": checkpoint holds ", loaded_params,
                   " of ", w.names().size(), " parameters");
}

}  // namespace litept
