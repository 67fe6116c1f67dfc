#pragma once

// Define-by-run reverse-mode differentiation over dense Eigen buffers.
//
// A Tape becomes the active tape of its thread for its lifetime. Operations
// whose inputs require gradients record a backward rule on the active tape;
// without an active tape they only compute values. backward() walks the tape
// in reverse, accumulates gradients into every leaf that requires them and
// clears the tape.

#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "mftraj/error.hpp"

namespace mftraj::ad {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline Index shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? ", " : "") << shape[i];
  os << ']';
  return os.str();
}

template <typename Scalar>
class Tape;

template <typename Scalar>
struct Node {
  Shape shape;
  std::shared_ptr<Vector<Scalar>> value;
  Vector<Scalar> grad;  // empty until the first contribution arrives
  bool requires_grad = false;
  std::function<void(Node&)> backward;
  const Tape<Scalar>* tape = nullptr;

  template <typename Derived>
  void accumulate(const Eigen::DenseBase<Derived>& contribution) {
    if (!requires_grad) return;
    if (grad.size() == 0)
      grad = contribution.derived().template reshaped<Eigen::RowMajor>();
    else
      grad += contribution.derived().template reshaped<Eigen::RowMajor>();
  }
};

/// Shape-tagged handle to a node. Copies share the node; `alias()` shares the
/// value buffer but owns a separate gradient.
template <typename Scalar>
class Tensor {
 public:
  using Vec = Vector<Scalar>;
  using Mat = RowMatrix<Scalar>;
  using NodePtr = std::shared_ptr<Node<Scalar>>;

  Tensor() = default;
  explicit Tensor(NodePtr node) : node_(std::move(node)) {}

  static Tensor constant(Shape shape, Vec values) { return make(std::move(shape), std::move(values), false); }
  static Tensor variable(Shape shape, Vec values) { return make(std::move(shape), std::move(values), true); }
  static Tensor zeros(Shape shape, bool requires_grad = false) {
    const Index n = shape_size(shape);
    return make(std::move(shape), Vec::Zero(n), requires_grad);
  }
  static Tensor full(Shape shape, Scalar value) {
    const Index n = shape_size(shape);
    return make(std::move(shape), Vec::Constant(n, value), false);
  }
  static Tensor scalar(Scalar value, bool requires_grad = false) {
    return make(Shape{}, Vec::Constant(1, value), requires_grad);
  }
  template <typename Derived>
  static Tensor from_matrix(const Eigen::MatrixBase<Derived>& m, bool requires_grad = false) {
    Mat row_major = m;
    Vec flat = Eigen::Map<const Vec>(row_major.data(), row_major.size());
    return make(Shape{row_major.rows(), row_major.cols()}, std::move(flat), requires_grad);
  }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  Index rank() const { return static_cast<Index>(node_->shape.size()); }
  Index dim(Index axis) const { return node_->shape.at(static_cast<std::size_t>(axis)); }
  Index size() const { return node_->value->size(); }
  bool requires_grad() const { return node_->requires_grad; }
  bool on_tape() const { return node_->tape != nullptr; }

  const Vec& values() const { return *node_->value; }
  /// Writes go to the shared buffer, visible through every alias.
  Vec& mutable_values() const { return *node_->value; }
  Scalar item() const {
    if (size() != 1) throw ShapeError("item() on tensor of shape " + shape_string(shape()));
    return (*node_->value)[0];
  }
  Scalar operator[](Index i) const { return (*node_->value)[i]; }

  /// Rank-2 view; rank 1 is viewed as a single row, rank 0 as 1x1.
  Eigen::Map<const Mat> matrix() const {
    const auto [r, c] = matrix_dims(shape());
    return Eigen::Map<const Mat>(node_->value->data(), r, c);
  }

  bool has_grad() const { return node_->grad.size() != 0; }
  /// Zero-filled when no gradient reached this tensor.
  Vec grad() const { return has_grad() ? node_->grad : Vec::Zero(size()); }
  void zero_grad() const { node_->grad.resize(0); }

  Tensor alias() const {
    auto n = std::make_shared<Node<Scalar>>();
    n->shape = node_->shape;
    n->value = node_->value;
    n->requires_grad = node_->requires_grad;
    return Tensor(std::move(n));
  }
  Tensor detach() const { return make(shape(), values(), false); }
  Tensor deep_copy() const { return make(shape(), values(), requires_grad()); }

  const NodePtr& node() const { return node_; }

  static std::pair<Index, Index> matrix_dims(const Shape& s) {
    if (s.empty()) return {1, 1};
    if (s.size() == 1) return {1, s[0]};
    if (s.size() == 2) return {s[0], s[1]};
    throw ShapeError("matrix view of rank-" + std::to_string(s.size()) + " tensor " + shape_string(s));
  }

 private:
  static Tensor make(Shape shape, Vec values, bool requires_grad) {
    if (shape_size(shape) != values.size())
      throw ShapeError("tensor of shape " + shape_string(shape) + " given " + std::to_string(values.size()) +
                       " values");
    auto n = std::make_shared<Node<Scalar>>();
    n->shape = std::move(shape);
    n->value = std::make_shared<Vec>(std::move(values));
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
  }

  NodePtr node_;
};

/// Ordered record of operations. The most recently constructed live tape
/// of a thread is its active tape; tapes must be destroyed in reverse order.
template <typename Scalar>
class Tape {
 public:
  Tape() : previous_(active_) { active_ = this; }
  ~Tape() {
    clear();
    active_ = previous_;
  }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* active() { return active_; }

  /// Suspends recording on this thread for the guard's lifetime.
  class Pause {
   public:
    Pause() : saved_(active_) { active_ = nullptr; }
    ~Pause() { active_ = saved_; }
    Pause(const Pause&) = delete;
    Pause& operator=(const Pause&) = delete;

   private:
    Tape* saved_;
  };

  std::size_t size() const { return nodes_.size(); }

  void record(const std::shared_ptr<Node<Scalar>>& node) {
    node->tape = this;
    nodes_.push_back(node);
  }

  /// Seeds d(loss)/d(loss) = 1 and applies every backward rule once in
  /// reverse recording order, then clears the tape.
  void backward(const Tensor<Scalar>& loss) {
    if (loss.size() != 1) throw ShapeError("backward() needs a scalar loss, got " + shape_string(loss.shape()));
    if (loss.node()->tape != this) throw Error("loss is not recorded on this tape");
    loss.node()->grad = Vector<Scalar>::Ones(1);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
      Node<Scalar>& n = **it;
      if (n.grad.size() != 0 && n.backward) n.backward(n);
    }
    clear();
  }

  /// Releases backward rules and detaches recorded nodes.
  void clear() {
    for (auto& n : nodes_) {
      n->backward = nullptr;
      n->tape = nullptr;
    }
    nodes_.clear();
  }

 private:
  std::vector<std::shared_ptr<Node<Scalar>>> nodes_;
  Tape* previous_;
  static thread_local Tape* active_;
};

template <typename Scalar>
thread_local Tape<Scalar>* Tape<Scalar>::active_ = nullptr;

template <typename Scalar>
void backward(const Tensor<Scalar>& loss) {
  Tape<Scalar>* tape = Tape<Scalar>::active();
  if (tape == nullptr) throw Error("backward() without an active tape");
  tape->backward(loss);
}

namespace detail {

/// Creates an op result; when any input requires gradients and a tape is
/// active, the result requires gradients and `rule` is recorded for it.
template <typename Scalar, typename Rule>
Tensor<Scalar> make_result(Shape shape, Vector<Scalar> values, std::initializer_list<const Tensor<Scalar>*> inputs,
                           Rule&& rule) {
  auto n = std::make_shared<Node<Scalar>>();
  n->shape = std::move(shape);
  n->value = std::make_shared<Vector<Scalar>>(std::move(values));
  bool needs = false;
  for (const Tensor<Scalar>* in : inputs) needs = needs || in->requires_grad();
  Tape<Scalar>* tape = Tape<Scalar>::active();
  if (needs && tape != nullptr) {
    n->requires_grad = true;
    n->backward = std::forward<Rule>(rule);
    tape->record(n);
  }
  return Tensor<Scalar>(std::move(n));
}

template <typename Scalar, typename Rule>
Tensor<Scalar> make_result_n(Shape shape, Vector<Scalar> values, const std::vector<Tensor<Scalar>>& inputs,
                             Rule&& rule) {
  auto n = std::make_shared<Node<Scalar>>();
  n->shape = std::move(shape);
  n->value = std::make_shared<Vector<Scalar>>(std::move(values));
  bool needs = false;
  for (const Tensor<Scalar>& in : inputs) needs = needs || in.requires_grad();
  Tape<Scalar>* tape = Tape<Scalar>::active();
  if (needs && tape != nullptr) {
    n->requires_grad = true;
    n->backward = std::forward<Rule>(rule);
    tape->record(n);
  }
  return Tensor<Scalar>(std::move(n));
}

}  // namespace detail

}  // namespace mftraj::ad
