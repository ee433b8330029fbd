#pragma once

// Finite-difference oracle for op-level gradient checks: central differences
// of a weighted scalar of the op output, compared entry-by-entry against the
// tape gradients. The differencing itself is the independent reference.

#include <functional>
#include <vector>

#include "litept/gradcheck.hpp"
#include "litept/ops.hpp"

namespace litept::testing {

struct FdCheck {
  // builds the op output from the given input values (leaves or wraps)
  std::function<Value(const std::vector<Value>&)> op;
  std::vector<Matrix> inputs;
  std::vector<int> diff_inputs;  // indices of inputs whose gradient is checked
  double h = 1e-5;
  std::uint64_t seed = 42;

  double max_rel_err() const {
    // fixed random weights turn the op output into a scalar
    Rng rng(seed);
    Value probe = op(wrap_all(inputs));
    const Matrix weights =
        Matrix::random_uniform(probe.rows(), probe.cols(), -1.0, 1.0, rng);

    // analytic route: tape backward
    Tape tape;
    std::vector<Value> leaves;
    leaves.reserve(inputs.size());
    for (const Matrix& m : inputs) leaves.push_back(tape.leaf(m));
    Value scalar = weighted_sum(op(leaves), weights);
    tape.backward(scalar);

    double worst = 0.0;
    for (int idx : diff_inputs) {
      const Matrix& analytic = tape.grad(leaves[static_cast<std::size_t>(idx)]);
      for (index_t e = 0; e < inputs[static_cast<std::size_t>(idx)].size(); ++e) {
        std::vector<Matrix> probe_inputs = inputs;
        auto& entry = probe_inputs[static_cast<std::size_t>(idx)].flat()[static_cast<std::size_t>(e)];
        const double saved = entry;
        entry = saved + h;
        const double up = scalar_of(probe_inputs, weights);
        entry = saved - h;
        const double down = scalar_of(probe_inputs, weights);
        const double fd = (up - down) / (2.0 * h);
        worst = std::max(worst, grad_rel_err(analytic.flat()[static_cast<std::size_t>(e)], fd));
      }
    }
    return worst;
  }

 private:
  static std::vector<Value> wrap_all(const std::vector<Matrix>& ms) {
    std::vector<Value> vs;
    vs.reserve(ms.size());
    for (const Matrix& m : ms) vs.push_back(Value::wrap(m));
    return vs;
  }

  double scalar_of(const std::vector<Matrix>& ms, const Matrix& weights) const {
    const Matrix out = op(wrap_all(ms)).value();
    double s = 0.0;
    for (index_t i = 0; i < out.size(); ++i)
      s += out.flat()[static_cast<std::size_t>(i)] * weights.flat()[static_cast<std::size_t>(i)];
    return s;
  }
};

inline Matrix random_matrix(index_t rows, index_t cols, std::uint64_t seed, double lo = -2.0,
                            double hi = 2.0) {
  Rng rng(seed);
  return Matrix::random_uniform(rows, cols, lo, hi, rng);
}

}  // namespace litept::testing
