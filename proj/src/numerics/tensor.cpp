#include "fcanet/numerics/tensor.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "fcanet/common/errors.hpp"

namespace fcanet::numerics {

namespace {

thread_local bool t_grad_enabled = true;
thread_local std::uint64_t t_next_seq = 0;

struct BackwardFault {
  std::string kind;
  double factor = 1.0;
};
thread_local BackwardFault t_fault;

template <std::floating_point T>
std::vector<detail::Node<T>*> topo_order(detail::Node<T>* root) {
  std::vector<detail::Node<T>*> order;
  std::unordered_set<detail::Node<T>*> seen;
  // (node, next-input-index) explicit stack; graphs can be deep.
  std::vector<std::pair<detail::Node<T>*, std::size_t>> stack;
  stack.emplace_back(root, 0);
  seen.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (node->record && next < node->record->inputs.size()) {
      detail::Node<T>* child = node->record->inputs[next++].get();
      if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
      continue;
    }
    order.push_back(node);
    stack.pop_back();
  }
  return order;  // inputs before consumers
}

}  // namespace

std::size_t shape_numel(const Shape& dims) {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& dims) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < dims.size(); ++i) os << (i ? "," : "") << dims[i];
  os << ']';
  return os.str();
}

template <std::floating_point T>
Tensor<T>::Tensor(Shape dims, std::vector<T> values, bool requires_grad) {
  for (std::size_t d : dims) {
    if (d == 0) throw ShapeError("tensor extents must be positive, got " + shape_str(dims));
  }
  if (shape_numel(dims) != values.size()) {
    throw ShapeError("tensor of shape " + shape_str(dims) + " cannot hold " +
                     std::to_string(values.size()) + " values");
  }
  node_ = std::make_shared<detail::Node<T>>();
  node_->dims = std::move(dims);
  node_->data = std::move(values);
  node_->requires_grad = requires_grad;
}

template <std::floating_point T>
Tensor<T> Tensor<T>::zeros(const Shape& dims, bool requires_grad) {
  return full(dims, T(0), requires_grad);
}

template <std::floating_point T>
Tensor<T> Tensor<T>::full(const Shape& dims, T value, bool requires_grad) {
  return Tensor(dims, std::vector<T>(shape_numel(dims), value), requires_grad);
}

template <std::floating_point T>
Tensor<T> Tensor<T>::scalar(T value, bool requires_grad) {
  return Tensor(Shape{1}, std::vector<T>{value}, requires_grad);
}

template <std::floating_point T>
detail::Node<T>& Tensor<T>::node() const {
  if (!node_) throw ArgumentError("use of an undefined tensor");
  return *node_;
}

template <std::floating_point T>
const Shape& Tensor<T>::dims() const {
  return node().dims;
}

template <std::floating_point T>
std::size_t Tensor<T>::dim(std::size_t axis) const {
  const Shape& d = dims();
  if (axis >= d.size()) throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_str(d));
  return d[axis];
}

template <std::floating_point T>
std::size_t Tensor<T>::numel() const {
  return node().data.size();
}

template <std::floating_point T>
std::span<const T> Tensor<T>::values() const {
  return node().data;
}

template <std::floating_point T>
std::span<T> Tensor<T>::mutable_values() {
  return node().data;
}

template <std::floating_point T>
T Tensor<T>::item() const {
  if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape_str(dims()));
  return node().data[0];
}

template <std::floating_point T>
bool Tensor<T>::requires_grad() const {
  return node().requires_grad;
}

template <std::floating_point T>
void Tensor<T>::set_requires_grad(bool on) {
  node().requires_grad = on;
}

template <std::floating_point T>
bool Tensor<T>::has_grad() const {
  return !node().grad.empty();
}

template <std::floating_point T>
std::span<const T> Tensor<T>::grad() const {
  return node().grad;
}

template <std::floating_point T>
std::span<T> Tensor<T>::mutable_grad() {
  return node().ensure_grad();
}

template <std::floating_point T>
void Tensor<T>::zero_grad() {
  auto& g = node().grad;
  std::fill(g.begin(), g.end(), T(0));
}

template <std::floating_point T>
void Tensor<T>::backward() const {
  detail::Node<T>& root = node();
  if (root.data.size() != 1) {
    throw ArgumentError("backward() needs a scalar loss, got shape " + shape_str(root.dims));
  }
  if (!root.requires_grad) return;

  const auto order = topo_order(&root);
  for (detail::Node<T>* n : order) {
    if (n->record) {
      n->grad.assign(n->data.size(), T(0));
    }
  }
  root.ensure_grad()[0] += T(1);

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node<T>* n = *it;
    if (!n->record || !n->record->backward) continue;
    if (!t_fault.kind.empty() && n->record->kind == t_fault.kind) {
      for (T& g : n->grad) g = static_cast<T>(g * t_fault.factor);
    }
    n->record->backward(*n);
  }
}

template <std::floating_point T>
Tensor<T> Tensor<T>::clone(bool requires_grad) const {
  return Tensor(dims(), node().data, requires_grad);
}

template <std::floating_point T>
std::string Tensor<T>::op_kind() const {
  return node().record ? node().record->kind : std::string{};
}

template <std::floating_point T>
void replay(const Tensor<T>& root) {
  std::vector<detail::Node<T>*> nodes;
  std::unordered_set<detail::Node<T>*> seen;
  std::vector<detail::Node<T>*> stack{&root.node()};
  while (!stack.empty()) {
    detail::Node<T>* n = stack.back();
    stack.pop_back();
    if (!seen.insert(n).second || !n->record) continue;
    nodes.push_back(n);
    for (auto& in : n->record->inputs) stack.push_back(in.get());
  }
  std::sort(nodes.begin(), nodes.end(),
            [](auto* a, auto* b) { return a->record->seq < b->record->seq; });
  for (detail::Node<T>* n : nodes) n->record->forward(*n);
}

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

bool grad_enabled() { return t_grad_enabled; }

void set_backward_fault(const std::string& op_kind, double factor) {
  t_fault.kind = op_kind;
  t_fault.factor = factor;
}

namespace detail {

template <std::floating_point T>
Tensor<T> make_op(std::string kind, Shape out_dims, std::vector<Tensor<T>> inputs,
                  std::function<void(Node<T>&)> forward,
                  std::function<void(const Node<T>&)> backward) {
  auto out = std::make_shared<Node<T>>();
  out->dims = std::move(out_dims);
  out->data.assign(shape_numel(out->dims), T(0));
  forward(*out);

  const bool track = t_grad_enabled &&
                     std::any_of(inputs.begin(), inputs.end(),
                                 [](const Tensor<T>& t) { return t.defined() && t.requires_grad(); });
  if (track) {
    auto rec = std::make_unique<OpRecord<T>>();
    rec->kind = std::move(kind);
    rec->seq = t_next_seq++;
    for (auto& t : inputs) {
      if (t.defined()) rec->inputs.push_back(t.node_ptr());
    }
    rec->forward = std::move(forward);
    rec->backward = std::move(backward);
    out->record = std::move(rec);
    out->requires_grad = true;
  }
  return Tensor<T>(std::move(out));
}

template Tensor<float> make_op(std::string, Shape, std::vector<Tensor<float>>,
                               std::function<void(Node<float>&)>,
                               std::function<void(const Node<float>&)>);
template Tensor<double> make_op(std::string, Shape, std::vector<Tensor<double>>,
                                std::function<void(Node<double>&)>,
                                std::function<void(const Node<double>&)>);

}  // namespace detail

template class Tensor<float>;
template class Tensor<double>;
template void replay(const Tensor<float>&);
template void replay(const Tensor<double>&);

}  // namespace fcanet::numerics
