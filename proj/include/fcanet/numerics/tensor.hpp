#pragma once

#include <concepts>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace fcanet::numerics {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& dims);
std::string shape_str(const Shape& dims);

namespace detail {

template <std::floating_point T>
struct Node;

// One recorded operation. `forward` recomputes the owning node's values from
// the inputs (used both for the initial evaluation and for tape replay);
// `backward` reads the owning node's grad and accumulates into the inputs.
template <std::floating_point T>
struct OpRecord {
  std::string kind;
  std::uint64_t seq = 0;
  std::vector<std::shared_ptr<Node<T>>> inputs;
  std::function<void(Node<T>&)> forward;
  std::function<void(const Node<T>&)> backward;
};

template <std::floating_point T>
struct Node {
  Shape dims;
  std::vector<T> data;
  std::vector<T> grad;  // empty until first accumulation
  bool requires_grad = false;
  std::unique_ptr<OpRecord<T>> record;  // null for leaves

  std::vector<T>& ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), T(0));
    return grad;
  }
};

}  // namespace detail

// Dense row-major tensor with reverse-mode gradient support.
//
// Copies are shallow: two Tensor handles may refer to the same storage and
// graph node. Use clone() for a detached deep copy.
template <std::floating_point T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  Tensor(Shape dims, std::vector<T> values, bool requires_grad = false);

  static Tensor zeros(const Shape& dims, bool requires_grad = false);
  static Tensor full(const Shape& dims, T value, bool requires_grad = false);
  static Tensor scalar(T value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& dims() const;
  std::size_t rank() const { return dims().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const T> values() const;
  // Direct write access, e.g. for optimizer updates. Does not touch the tape.
  std::span<T> mutable_values();
  T item() const;

  bool requires_grad() const;
  void set_requires_grad(bool on);
  bool has_grad() const;
  std::span<const T> grad() const;
  std::span<T> mutable_grad();
  void zero_grad();

  // Reverse-mode sweep from this scalar. Leaf grads accumulate across calls;
  // intermediate grads are reset on each call.
  void backward() const;

  // Deep copy of values (and nothing else): a fresh leaf.
  Tensor clone(bool requires_grad = false) const;
  // Shares nothing with the graph; same values.
  Tensor detach() const { return clone(false); }

  // Empty for leaves.
  std::string op_kind() const;

  detail::Node<T>& node() const;
  const std::shared_ptr<detail::Node<T>>& node_ptr() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node<T>> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node<T>> node_;
};

// Re-run every recorded op reachable from `root` in creation order. Leaf
// values may have been edited in between; outputs are refreshed in place.
template <std::floating_point T>
void replay(const Tensor<T>& root);

// While alive, new operations are not recorded on the tape.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

// Harness-sensitivity fixture: scales the upstream gradient of every op whose
// kind equals `op_kind` by `factor` during backward. Empty kind disables it.
void set_backward_fault(const std::string& op_kind, double factor);

namespace detail {

// Build a node from `forward`, run it, and attach a tape record when any
// input participates in gradients.
template <std::floating_point T>
Tensor<T> make_op(std::string kind, Shape out_dims, std::vector<Tensor<T>> inputs,
                  std::function<void(Node<T>&)> forward,
                  std::function<void(const Node<T>&)> backward);

}  // namespace detail

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace fcanet::numerics
