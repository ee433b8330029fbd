#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "litept/matrix.hpp"

namespace litept {

class Tape;

/// Handle to a forward result. Always carries the value; additionally carries
/// the id of the producing tape node when the computation is recorded. Ops on
/// unrecorded values run pure, so inference pays no tape cost and
/// intermediates free as soon as the handle goes out of scope.
class Value {
 public:
  Value() = default;

  static Value wrap(Matrix m) { return Value(std::make_shared<const Matrix>(std::move(m)), nullptr, -1); }
  static Value wrap(std::shared_ptr<const Matrix> m) { return Value(std::move(m), nullptr, -1); }

  const Matrix& value() const { return *data_; }
  std::shared_ptr<const Matrix> shared() const { return data_; }
  index_t rows() const { return data_ ? data_->rows() : 0; }
  index_t cols() const { return data_ ? data_->cols() : 0; }

  bool recorded() const { return tape_ != nullptr; }
  Tape* tape() const { return tape_; }
  int node() const { return node_; }

 private:
  friend class Tape;
  Value(std::shared_ptr<const Matrix> data, Tape* tape, int node)
      : data_(std::move(data)), tape_(tape), node_(node) {}

  std::shared_ptr<const Matrix> data_;
  Tape* tape_ = nullptr;
  int node_ = -1;
};

/// Reverse-mode tape. Nodes are appended in forward order, so ids are
/// topologically sorted by construction; backward walks ids strictly in
/// reverse and visits each node at most once.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Matrix& grad_out)>;

  Value leaf(Matrix m) { return leaf(std::make_shared<const Matrix>(std::move(m))); }

  Value leaf(std::shared_ptr<const Matrix> m) {
    m->check_finite("tape leaf");
    const int id = add_node({}, nullptr, "leaf", m->rows(), m->cols());
    return Value(std::move(m), this, id);
  }

  /// Records one computed node. `inputs` lists producing node ids of the
  /// recorded inputs only (unrecorded operands are captured by the closure).
  Value emplace(std::shared_ptr<const Matrix> out, std::vector<int> inputs, BackwardFn backward,
                const char* kind) {
    for (int id : inputs)
      require<Error>(id >= 0 && id < static_cast<int>(nodes_.size()), "tape: bad input node id");
    const int id = add_node(std::move(inputs), std::move(backward), kind, out->rows(), out->cols());
    return Value(std::move(out), this, id);
  }

  /// Seeds d(root)/d(root) = 1 and propagates. `root` must be a recorded 1x1
  /// value on this tape.
  void backward(const Value& root) {
    require<Error>(root.recorded() && root.tape() == this, "backward: root not recorded on this tape");
    require<DimError>(root.rows() == 1 && root.cols() == 1, "backward: root must be scalar, got ",
                      shape_str(root.value()));
    require<Error>(!backward_done_, "backward: already run on this tape");
    backward_done_ = true;
    grads_.resize(nodes_.size());
    has_grad_.assign(nodes_.size(), 0);
    accumulate(root.node(), Matrix::from_rows({{1.0}}));
    for (int id = root.node(); id >= 0; --id) {
      if (!has_grad_[static_cast<std::size_t>(id)]) continue;
      const Node& n = nodes_[static_cast<std::size_t>(id)];
      if (n.backward) n.backward(*this, grads_[static_cast<std::size_t>(id)]);
    }
  }

  void accumulate(int node, const Matrix& g) {
    auto idx = static_cast<std::size_t>(node);
    const Node& n = nodes_[idx];
    require<DimError>(g.rows() == n.rows && g.cols() == n.cols, "gradient shape ", shape_str(g),
                      " does not match node shape ", n.rows, "x", n.cols);
    if (!has_grad_[idx]) {
      grads_[idx] = g;
      has_grad_[idx] = 1;
    } else {
      add_inplace(grads_[idx], g);
    }
  }

  bool has_grad(const Value& v) const {
    if (!v.recorded() || v.tape() != this) return false;
    auto idx = static_cast<std::size_t>(v.node());
    return idx < has_grad_.size() && has_grad_[idx];
  }

  /// Gradient of the backward root w.r.t. `v`; zeros if no path reached it.
  const Matrix& grad(const Value& v) {
    require<Error>(v.recorded() && v.tape() == this, "grad: value not recorded on this tape");
    grads_.resize(nodes_.size());
    has_grad_.resize(nodes_.size(), 0);
    auto idx = static_cast<std::size_t>(v.node());
    if (!has_grad_[idx]) {
      grads_[idx] = Matrix(v.rows(), v.cols());
      has_grad_[idx] = 1;
    }
    return grads_[idx];
  }

  std::size_t size() const { return nodes_.size(); }
  const char* kind(int node) const { return nodes_[static_cast<std::size_t>(node)].kind; }
  const std::vector<int>& inputs(int node) const { return nodes_[static_cast<std::size_t>(node)].inputs; }

 private:
  struct Node {
    std::vector<int> inputs;
    BackwardFn backward;
    const char* kind;
    index_t rows, cols;
  };

  int add_node(std::vector<int> inputs, BackwardFn backward, const char* kind, index_t rows, index_t cols) {
    nodes_.push_back(Node{std::move(inputs), std::move(backward), kind, rows, cols});
    return static_cast<int>(nodes_.size()) - 1;
  }

  std::vector<Node> nodes_;
  std::vector<Matrix> grads_;
  std::vector<char> has_grad_;
  bool backward_done_ = false;
};

namespace detail {

/// Tape that an op should record on: the one shared by all recorded inputs.
inline Tape* tape_of(std::initializer_list<const Value*> vs) {
  Tape* t = nullptr;
  for (const Value* v : vs) {
    if (!v->recorded()) continue;
    require<Error>(t == nullptr || t == v->tape(), "op inputs recorded on different tapes");
    t = v->tape();
  }
  return t;
}

inline int node_of(const Value& v) { return v.recorded() ? v.node() : -1; }

}  // namespace detail

}  // namespace litept
