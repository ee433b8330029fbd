#pragma once

#include <cmath>
#include <vector>

#include "litept/train.hpp"

namespace litept {

/// |a - f| relative to max(1, |a|, |f|): relative for large gradients,
/// absolute near zero.
inline double grad_rel_err(double analytic, double fd) {
  return std::abs(analytic - fd) / std::max({1.0, std::abs(analytic), std::abs(fd)});
}

struct GradCheckResult {
  double max_rel_err = 0.0;
  int samples = 0;
};

/// End-to-end check of the whole backward pass: the tape gradient of the
/// cross-entropy loss on a synthetic scene versus central finite differences
/// over randomly sampled parameter entries.
inline GradCheckResult model_grad_check(const ModelConfig& cfg, std::uint64_t seed, int n_samples = 30,
                                        index_t n_points = 160, double h = 1e-5) {
  PointBatch scene = make_synthetic_scene(seed + 17, n_points, 1.2, cfg.num_classes);
  scene = voxelize(scene, cfg.grid_size);
  ModelWeights weights = build_model(cfg, seed);

  Tape tape;
  ForwardOptions opt;
  opt.tape = &tape;
  opt.bn_mode = BnMode::Train;
  ForwardRun run = forward(weights, scene, opt);
  Value loss = cross_entropy(run.logits, {scene.labels.data(), scene.labels.size()});
  tape.backward(loss);
  std::vector<Matrix> analytic;
  analytic.reserve(run.bound.size());
  for (const Value& b : run.bound) analytic.push_back(tape.grad(b));

  auto loss_at = [&]() {
    ForwardOptions fd_opt;
    fd_opt.bn_mode = BnMode::Train;
    ForwardRun r = forward(weights, scene, fd_opt);
    return cross_entropy(r.logits, {scene.labels.data(), scene.labels.size()}).value()(0, 0);
  };

  Rng rng(seed ^ 0x9e3779b9ull);
  GradCheckResult result;
  result.samples = n_samples;
  for (int s = 0; s < n_samples; ++s) {
    const auto pi = static_cast<std::size_t>(rng.below(weights.params().size()));
    Matrix& p = *weights.params()[pi];
    const auto ei = static_cast<index_t>(rng.below(static_cast<std::uint64_t>(p.size())));
    const double saved = p.flat()[static_cast<std::size_t>(ei)];
    p.flat()[static_cast<std::size_t>(ei)] = saved + h;
    const double up = loss_at();
    p.flat()[static_cast<std::size_t>(ei)] = saved - h;
    const double down = loss_at();
    p.flat()[static_cast<std::size_t>(ei)] = saved;
    const double fd = (up - down) / (2.0 * h);
    const double an = analytic[pi].flat()[static_cast<std::size_t>(ei)];
    result.max_rel_err = std::max(result.max_rel_err, grad_rel_err(an, fd));
  }
  return result;
}

}  // namespace litept
