#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace patrec::diff {

namespace detail {

// 64-byte aligned storage so vectorized kernels peel identically on every
// allocation; run-to-run determinism depends on it.
template <class S>
struct AlignedAllocator {
  using value_type = S;
  static constexpr std::size_t alignment = 64;

  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) {}

  S* allocate(std::size_t n) {
    void* p = ::operator new(n * sizeof(S), std::align_val_t(alignment));
    return static_cast<S*>(p);
  }
  void deallocate(S* p, std::size_t) noexcept {
    ::operator delete(p, std::align_val_t(alignment));
  }
  bool operator==(const AlignedAllocator&) const { return true; }
  bool operator!=(const AlignedAllocator&) const { return false; }
};

template <class S>
using AlignedVector = std::vector<S, AlignedAllocator<S>>;

template <class S>
struct TensorNode {
  std::vector<int> shape;
  AlignedVector<S> value;
  AlignedVector<S> grad;  // allocated on first use; always value-sized once present
  bool requires_grad = false;
};

inline std::int64_t shape_numel(const std::vector<int>& shape) {
  std::int64_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw std::invalid_argument("tensor: non-positive dimension");
    n *= d;
  }
  return n;
}

} // namespace detail

// Shared-ownership handle to a dense tensor. Gradients accumulate additively
// across uses; shapes are fixed at construction.
template <class S>
class Tensor {
 public:
  using scalar_type = S;

  Tensor() = default;

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false) {
    Tensor t;
    t.node_ = std::make_shared<detail::TensorNode<S>>();
    const std::int64_t n = detail::shape_numel(shape);
    t.node_->shape = std::move(shape);
    t.node_->value.assign(static_cast<std::size_t>(n), S(0));
    t.node_->requires_grad = requires_grad;
    return t;
  }

  static Tensor full(std::vector<int> shape, S fill, bool requires_grad = false) {
    Tensor t = zeros(std::move(shape), requires_grad);
    for (S& x : t.node_->value) x = fill;
    return t;
  }

  static Tensor from_vector(std::vector<int> shape, const std::vector<S>& v,
                            bool requires_grad = false) {
    if (detail::shape_numel(shape) != static_cast<std::int64_t>(v.size()))
      throw std::invalid_argument("tensor: value count does not match shape");
    Tensor t;
    t.node_ = std::make_shared<detail::TensorNode<S>>();
    t.node_->shape = std::move(shape);
    t.node_->value.assign(v.begin(), v.end());
    t.node_->requires_grad = requires_grad;
    return t;
  }

  static Tensor scalar(S v, bool requires_grad = false) {
    return from_vector({1}, {v}, requires_grad);
  }

  bool defined() const { return node_ != nullptr; }
  const std::vector<int>& shape() const { return node_->shape; }
  std::int64_t numel() const { return static_cast<std::int64_t>(node_->value.size()); }
  int dim(int i) const { return node_->shape.at(i); }
  int ndim() const { return static_cast<int>(node_->shape.size()); }

  // Handle semantics: a const Tensor still exposes its mutable storage, the
  // way a const shared_ptr does. Backward closures rely on this.
  bool requires_grad() const { return node_ && node_->requires_grad; }
  void set_requires_grad(bool rg) const { node_->requires_grad = rg; }

  std::span<S> value() const { return node_->value; }

  bool has_grad() const { return node_ && !node_->grad.empty(); }
  std::span<S> grad() const {
    if (node_->grad.empty()) node_->grad.assign(node_->value.size(), S(0));
    return node_->grad;
  }
  void zero_grad() const {
    if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), S(0));
  }

  S item() const {
    if (numel() != 1) throw std::logic_error("tensor: item() on non-scalar");
    return node_->value[0];
  }

  bool same_storage(const Tensor& o) const { return node_ == o.node_; }

 private:
  std::shared_ptr<detail::TensorNode<S>> node_;
};

// Reverse-mode tape. Constructing a Graph makes it the active tape for the
// current thread (define-by-run, rebuilt per training step); ops record a
// backward closure when any input is tracked. Backward runs the closures in
// reverse recording order, which visits every node after all its consumers.
template <class S>
class Graph {
 public:
  Graph() : prev_(active_ref()) { active_ref() = this; }
  ~Graph() { active_ref() = prev_; }
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  static Graph* active() { return active_ref(); }

  void record(std::function<void()> backward) { nodes_.push_back(std::move(backward)); }

  std::size_t size() const { return nodes_.size(); }

  void backward(Tensor<S> root) {
    if (ran_) throw std::logic_error("graph: backward already ran");
    if (!root.requires_grad() || nodes_.empty())
      throw std::logic_error("graph: backward called before a tracked forward");
    if (root.numel() != 1) throw std::logic_error("graph: backward root must be scalar");
    ran_ = true;
    root.grad()[0] += S(1);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
  }

 private:
  static Graph*& active_ref() {
    thread_local Graph* g = nullptr;
    return g;
  }
  std::vector<std::function<void()>> nodes_;
  Graph* prev_ = nullptr;
  bool ran_ = false;
};

namespace detail {

template <class S, class... Ts>
bool should_track(const Ts&... inputs) {
  return Graph<S>::active() != nullptr && (... || inputs.requires_grad());
}

} // namespace detail

} // namespace patrec::diff
