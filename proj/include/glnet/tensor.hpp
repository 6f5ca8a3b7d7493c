#pragma once

// Dense row-major float tensor with reverse-mode autodiff.
//
// TensorT<S> has value semantics over shared buffers: copying a tensor
// aliases its data/grad storage. Ops executed while gradients are enabled
// record a NodeT in a define-by-run graph; backward() topologically orders
// the recorded nodes into a TapeT (every node appears after all nodes that
// produce its inputs) and runs their pullbacks in reverse, accumulating into
// .grad buffers. Gradients accumulate across backward calls until zero_grad.
//
// Every op validates shapes eagerly and checks its forward output for
// non-finite values (a NumericError on finite inputs means a genuine
// overflow, which callers treat as a hard abort).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace glnet {

using Shape = std::vector<int>;

// ---------------------------------------------------------------------------
// Errors. The CLI maps these to exit codes: ConfigError/IoError -> 2,
// NumericError -> 3, VerificationError -> 1. ShapeError signals a programming
// or input-contract bug and also maps to 2 at the CLI boundary.
// ---------------------------------------------------------------------------
class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class VerificationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::int64_t shape_numel(const Shape& s) {
  std::int64_t n = 1;
  for (int e : s) n *= e;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << ',';
    os << s[i];
  }
  os << ']';
  return os.str();
}

inline void check(bool cond, const std::string& msg) {
  if (!cond) throw ShapeError(msg);
}

// Overload selecting the exception class via a tag argument, e.g.
// check(ok, "...", IoError{""}).
template <typename E>
inline void check(bool cond, const std::string& msg, const E&) {
  if (!cond) throw E(msg);
}

// ---------------------------------------------------------------------------
// Gradient mode (thread-local). NoGradGuard disables graph recording, used
// for inference and finite-difference replays.
// ---------------------------------------------------------------------------
namespace detail {
inline thread_local int no_grad_depth = 0;
}

inline bool grad_enabled() { return detail::no_grad_depth == 0; }

struct NoGradGuard {
  NoGradGuard() { ++detail::no_grad_depth; }
  ~NoGradGuard() { --detail::no_grad_depth; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};

// ---------------------------------------------------------------------------
// Graph node: parent links (producers of this op's inputs) plus a pullback
// closure that routes the output gradient into the input gradients. The
// closure captures buffers (shared_ptr<vector<S>>), never nodes, so the graph
// has child->parent edges only and no reference cycles.
// ---------------------------------------------------------------------------
template <typename S>
struct NodeT {
  const char* op = "";
  std::vector<std::shared_ptr<NodeT<S>>> parents;
  std::function<void()> apply;
  // The op output's grad buffer. backward() zeroes these for every node on the
  // tape before running pullbacks, so repeated backward calls over one graph
  // accumulate into leaf grads only (intermediates hold the last pass).
  std::shared_ptr<std::vector<S>> out_grad;
};

template <typename S>
class TensorT {
 public:
  using Scalar = S;

  TensorT() = default;

  static TensorT zeros(Shape shape) {
    TensorT t;
    t.shape_ = std::move(shape);
    t.validate_shape();
    t.data_ = std::make_shared<std::vector<S>>(static_cast<std::size_t>(shape_numel(t.shape_)),
                                               S(0));
    return t;
  }

  static TensorT full(Shape shape, S value) {
    TensorT t = zeros(std::move(shape));
    std::fill(t.data_->begin(), t.data_->end(), value);
    return t;
  }

  static TensorT from(Shape shape, std::vector<S> values) {
    TensorT t;
    t.shape_ = std::move(shape);
    t.validate_shape();
    check(static_cast<std::int64_t>(values.size()) == shape_numel(t.shape_),
          "tensor: value count " + std::to_string(values.size()) + " does not match shape " +
              shape_str(t.shape_));
    t.data_ = std::make_shared<std::vector<S>>(std::move(values));
    return t;
  }

  bool defined() const { return static_cast<bool>(data_); }
  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  std::int64_t size() const { return data_ ? static_cast<std::int64_t>(data_->size()) : 0; }
  int extent(int axis) const {
    check(axis >= 0 && axis < rank(), "tensor: axis out of range");
    return shape_[static_cast<std::size_t>(axis)];
  }

  S* data() { return data_->data(); }
  const S* data() const { return data_->data(); }
  S* grad() { return grad_ ? grad_->data() : nullptr; }
  const S* grad() const { return grad_ ? grad_->data() : nullptr; }
  bool requires_grad() const { return requires_grad_; }

  // Marks a leaf as trainable; allocates its gradient buffer.
  void set_requires_grad(bool flag) {
    requires_grad_ = flag;
    if (flag && !grad_) {
      grad_ = std::make_shared<std::vector<S>>(data_->size(), S(0));
    }
  }

  void alloc_grad() {
    if (!grad_) grad_ = std::make_shared<std::vector<S>>(data_->size(), S(0));
  }

  void zero_grad() {
    if (grad_) std::fill(grad_->begin(), grad_->end(), S(0));
  }

  S item() const {
    check(size() == 1, "tensor: item() requires a single-element tensor, got " +
                           shape_str(shape_));
    return (*data_)[0];
  }

  // Detached value copy (fresh buffer, no graph, no grad).
  TensorT detach_copy() const {
    TensorT t;
    t.shape_ = shape_;
    t.data_ = std::make_shared<std::vector<S>>(*data_);
    return t;
  }

  // Public internals: free-function ops need direct buffer/graph access.
  Shape shape_;
  std::shared_ptr<std::vector<S>> data_;
  std::shared_ptr<std::vector<S>> grad_;
  std::shared_ptr<NodeT<S>> node_;
  bool requires_grad_ = false;

 private:
  void validate_shape() const {
    check(!shape_.empty() && shape_.size() <= 5, "tensor: rank must be 1..5, got shape " +
                                                     shape_str(shape_));
    for (int e : shape_)
      check(e > 0, "tensor: extents must be positive, got shape " + shape_str(shape_));
  }
};

using Tensor = TensorT<float>;

// Cast between scalar types (fresh buffer, no graph).
template <typename TO, typename FROM>
TensorT<TO> cast_tensor(const TensorT<FROM>& x) {
  TensorT<TO> out = TensorT<TO>::zeros(x.shape());
  const FROM* src = x.data();
  TO* dst = out.data();
  for (std::int64_t i = 0; i < x.size(); ++i) dst[i] = static_cast<TO>(src[i]);
  return out;
}

template <typename S>
void ensure_finite(const TensorT<S>& t, const char* op) {
  const S* p = t.data();
  const std::int64_t n = t.size();
  for (std::int64_t i = 0; i < n; ++i) {
    if (!std::isfinite(static_cast<double>(p[i]))) {
      throw NumericError(std::string(op) + ": non-finite value in forward output");
    }
  }
}

// ---------------------------------------------------------------------------
// Op-recording helper. Marks `out` as requiring grad, allocates its gradient
// buffer, and attaches a node whose parents are the producers of the inputs.
// The pullback receives the output gradient buffer (allocated here, after the
// pullback closure was constructed) and must accumulate (never overwrite)
// into the inputs' grad buffers.
// ---------------------------------------------------------------------------
template <typename S, typename Fn>
void record_op(TensorT<S>& out, const char* name,
               std::initializer_list<const TensorT<S>*> inputs, Fn&& pullback) {
  if (!grad_enabled()) return;
  bool any = false;
  for (const TensorT<S>* in : inputs) {
    if (in->requires_grad_) any = true;
  }
  if (!any) return;
  out.requires_grad_ = true;
  out.alloc_grad();
  auto node = std::make_shared<NodeT<S>>();
  node->op = name;
  for (const TensorT<S>* in : inputs) {
    if (in->node_) node->parents.push_back(in->node_);
  }
  node->apply = [pb = std::forward<Fn>(pullback), og = out.grad_]() { pb(og->data()); };
  node->out_grad = out.grad_;
  out.node_ = node;
}

// ---------------------------------------------------------------------------
// Tape: nodes in topological order (a node appears after every node that
// produces one of its inputs). backward() executes it in reverse.
// ---------------------------------------------------------------------------
template <typename S>
struct TapeT {
  std::vector<NodeT<S>*> order;
};

template <typename S>
TapeT<S> build_tape(NodeT<S>* root) {
  TapeT<S> tape;
  if (!root) return tape;
  std::unordered_set<NodeT<S>*> visited;
  // Iterative post-order DFS: parents (producers) are emitted before the
  // nodes that consume them.
  std::vector<std::pair<NodeT<S>*, std::size_t>> stack;
  stack.emplace_back(root, 0);
  visited.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      NodeT<S>* parent = node->parents[next++].get();
      if (visited.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      tape.order.push_back(node);
      stack.pop_back();
    }
  }
  return tape;
}

template <typename S>
void backward(TensorT<S>& loss) {
  check(loss.defined(), "backward: undefined tensor");
  check(loss.size() == 1,
        "backward: loss must be a scalar, got shape " + shape_str(loss.shape()));
  if (!loss.requires_grad_) {
    throw ShapeError("backward: loss does not require gradients (no recorded ops)");
  }
  loss.alloc_grad();
  TapeT<S> tape = build_tape(loss.node_.get());
  for (NodeT<S>* node : tape.order) {
    if (node->out_grad) std::fill(node->out_grad->begin(), node->out_grad->end(), S(0));
  }
  (*loss.grad_)[0] += S(1);
  for (auto it = tape.order.rbegin(); it != tape.order.rend(); ++it) {
    if ((*it)->apply) (*it)->apply();
  }
}

}  // namespace glnet
