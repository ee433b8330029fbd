#pragma once

#include <cmath>
#include <ostream>
#include <span>
#include <vector>

#include "litept/network.hpp"

namespace litept {

/// Mean negative log-softmax of the true class, max-subtracted for stability.
inline Value cross_entropy(const Value& logits, std::span<const std::uint16_t> labels) {
  const Matrix& Z = logits.value();
  const index_t N = Z.rows(), K = Z.cols();
  require<DimError>(static_cast<index_t>(labels.size()) == N, "cross_entropy: ", labels.size(),
                    " labels for ", N, " rows");
  for (index_t r = 0; r < N; ++r)
    require<RangeError>(labels[static_cast<std::size_t>(r)] < K, "cross_entropy: label ",
                        labels[static_cast<std::size_t>(r)], " out of range [0, ", K, ") at row ", r);
  auto probs = std::make_shared<Matrix>(N, K);
  double loss = 0.0;
  for (index_t r = 0; r < N; ++r) {
    double mx = Z(r, 0);
    for (index_t c = 1; c < K; ++c) mx = std::max(mx, Z(r, c));
    double denom = 0.0;
    for (index_t c = 0; c < K; ++c) {
      const double e = std::exp(Z(r, c) - mx);
      (*probs)(r, c) = e;
      denom += e;
    }
    for (index_t c = 0; c < K; ++c) (*probs)(r, c) /= denom;
    loss -= std::log((*probs)(r, labels[static_cast<std::size_t>(r)]));
  }
  loss /= static_cast<double>(N);
  auto out = std::make_shared<const Matrix>(Matrix::from_rows({{loss}}));
  Tape* t = detail::tape_of({&logits});
  if (!t) return Value::wrap(std::move(out));
  const int iz = logits.node();
  std::vector<std::uint16_t> lab(labels.begin(), labels.end());
  return t->emplace(
      std::move(out), {iz},
      [iz, probs, lab = std::move(lab), N, K](Tape& tp, const Matrix& g) {
        Matrix dz = *probs;
        for (index_t r = 0; r < N; ++r) dz(r, lab[static_cast<std::size_t>(r)]) -= 1.0;
        const double s = g(0, 0) / static_cast<double>(N);
        for (double& v : dz.flat()) v *= s;
        tp.accumulate(iz, dz);
      },
      "cross_entropy");
}

// --- AdamW ---------------------------------------------------------------

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.05;  // decoupled
};

struct AdamWState {
  std::int64_t step = 0;
  std::vector<Matrix> m;  // first moments, shapes mirror the parameters
  std::vector<Matrix> v;  // second moments

  static AdamWState fresh(const ModelWeights& w) {
    AdamWState s;
    s.m.reserve(w.params().size());
    s.v.reserve(w.params().size());
    for (const auto& p : w.params()) {
      s.m.emplace_back(p->rows(), p->cols());
      s.v.emplace_back(p->rows(), p->cols());
    }
    return s;
  }
};

/// One decoupled-weight-decay Adam update with bias-corrected moments.
inline void adamw_step(ModelWeights& weights, const std::vector<Matrix>& grads, AdamWState& state,
                       const AdamWConfig& cfg) {
  auto& params = weights.params();
  require<DimError>(grads.size() == params.size() && state.m.size() == params.size(),
                    "adamw_step: gradient/state count mismatch");
  state.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& p = *params[i];
    const Matrix& g = grads[i];
    require<DimError>(p.same_shape(g), "adamw_step: gradient shape ", shape_str(g),
                      " vs parameter ", shape_str(p));
    Matrix& m = state.m[i];
    Matrix& v = state.v[i];
    double* pd = p.data();
    double* md = m.data();
    double* vd = v.data();
    const double* gd = g.data();
    for (index_t e = 0, n = p.size(); e < n; ++e) {
      md[e] = cfg.beta1 * md[e] + (1.0 - cfg.beta1) * gd[e];
      vd[e] = cfg.beta2 * vd[e] + (1.0 - cfg.beta2) * gd[e] * gd[e];
      const double mhat = md[e] / bc1;
      const double vhat = vd[e] / bc2;
      pd[e] -= cfg.lr * (mhat / (std::sqrt(vhat) + cfg.eps) + cfg.weight_decay * pd[e]);
    }
  }
}

// --- toy training loop -----------------------------------------------------

struct ToyTrainResult {
  std::vector<double> losses;  // one entry per step, evaluated before the update
  double final_accuracy = 0.0;
};

/// Full-batch training of one labeled scene; deterministic in the seed.
/// Emits "step,loss" CSV rows to `csv` when provided; the trained weights are
/// copied out through `final_weights` for checkpointing.
inline ToyTrainResult train_toy(const ModelConfig& cfg, const PointBatch& scene, int steps, double lr,
                                std::uint64_t seed, std::ostream* csv = nullptr,
                                double weight_decay = 0.05, ModelWeights* final_weights = nullptr) {
  require<ConfigError>(steps >= 1, "train_toy: steps must be >= 1");
  require<DataError>(scene.has_labels(), "train_toy: scene has no labels");
  require<DataError>(scene.voxelized(), "train_toy: voxelize the scene first");

  ModelWeights weights = build_model(cfg, seed);
  AdamWState state = AdamWState::fresh(weights);
  AdamWConfig adam;
  adam.lr = lr;
  adam.weight_decay = weight_decay;

  ToyTrainResult result;
  if (csv) *csv << "step,loss\n";
  for (int step = 1; step <= steps; ++step) {
    Tape tape;
    ForwardOptions opt;
    opt.tape = &tape;
    opt.bn_mode = BnMode::Train;
    ForwardRun run;
    Value loss;
    try {
      run = forward(weights, scene, opt);
      loss = cross_entropy(run.logits, {scene.labels.data(), scene.labels.size()});
    } catch (const Error& e) {
      // diverged weights surface as non-finite failures inside the forward
      throw DataError(cat("train_toy: run failed at step ", step, ": ", e.what()));
    }
    const double loss_v = loss.value()(0, 0);
    require<DataError>(std::isfinite(loss_v), "train_toy: loss diverged (non-finite) at step ", step);
    result.losses.push_back(loss_v);
    if (csv) *csv << step << ',' << loss_v << '\n';
    tape.backward(loss);
    std::vector<Matrix> grads;
    grads.reserve(run.bound.size());
    for (const Value& b : run.bound) grads.push_back(tape.grad(b));
    adamw_step(weights, grads, state, adam);
  }

  ForwardOptions eval_opt;
  eval_opt.bn_mode = BnMode::Eval;
  ForwardRun eval = forward(weights, scene, eval_opt);
  const Matrix& logits = eval.logits.value();
  index_t correct = 0;
  for (index_t r = 0; r < logits.rows(); ++r) {
    index_t best = 0;
    for (index_t c = 1; c < logits.cols(); ++c)
      if (logits(r, c) > logits(r, best)) best = c;
    if (best == scene.labels[static_cast<std::size_t>(r)]) ++correct;
  }
  result.final_accuracy =
      logits.rows() ? static_cast<double>(correct) / static_cast<double>(logits.rows()) : 0.0;
  if (final_weights) *final_weights = weights;
  return result;
}

}  // namespace litept
