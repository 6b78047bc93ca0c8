#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace darsd {

using Shape = std::vector<std::size_t>;

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericDomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class DegenerateVectorError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

class Tape;

namespace detail {

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;
  const Tape* tape = nullptr;  // tape that produced this value, if any
  std::size_t node = 0;

  std::span<double> grad_buffer() {
    if (grad.empty()) grad.assign(data.size(), 0.0);
    return grad;
  }
};

}  // namespace detail

// Dense row-major float64 array. Copies share storage: a Tensor is a handle.
class Tensor {
 public:
  Tensor() = default;

  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false)
      : impl_(std::make_shared<detail::TensorImpl>()) {
    if (shape_size(shape) != data.size()) {
      throw ShapeError("tensor data length " + std::to_string(data.size()) +
                       " does not match shape " + shape_str(shape));
    }
    impl_->shape = std::move(shape);
    impl_->data = std::move(data);
    impl_->requires_grad = requires_grad;
  }

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    const auto n = shape_size(shape);
    return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
  }

  static Tensor full(Shape shape, double value) {
    const auto n = shape_size(shape);
    return Tensor(std::move(shape), std::vector<double>(n, value));
  }

  static Tensor scalar(double value, bool requires_grad = false) {
    return Tensor({}, {value}, requires_grad);
  }

  static Tensor vector(std::vector<double> values, bool requires_grad = false) {
    const auto n = values.size();
    return Tensor({n}, std::move(values), requires_grad);
  }

  bool defined() const { return static_cast<bool>(impl_); }
  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return impl_->shape.at(axis); }
  std::size_t size() const { return impl_->data.size(); }

  std::span<const double> data() const { return impl_->data; }
  // Only leaves should be mutated (optimizer updates, gradient probes).
  std::span<double> mutable_data() { return impl_->data; }
  const std::vector<double>& values() const { return impl_->data; }

  double item() const {
    if (size() != 1) {
      throw ContractError("item() on tensor of shape " + shape_str(shape()));
    }
    return impl_->data[0];
  }
  double operator[](std::size_t i) const { return impl_->data[i]; }
  double at(std::size_t i, std::size_t j) const {
    return impl_->data[i * impl_->shape.back() + j];
  }

  bool requires_grad() const { return impl_->requires_grad; }
  bool has_grad() const { return !impl_->grad.empty(); }
  std::span<const double> grad() const { return impl_->grad; }
  std::span<double> grad_buffer() {
    if (!impl_->requires_grad) {
      throw ContractError("gradient requested on tensor without requires_grad");
    }
    return impl_->grad_buffer();
  }
  void zero_grad() { impl_->grad.assign(impl_->data.size(), 0.0); }
  void clear_grad() { impl_->grad.clear(); }

  // Fresh leaf holding a copy of the values, outside any tape.
  Tensor detach() const { return Tensor(shape(), impl_->data, false); }
  Tensor clone(bool requires_grad) const {
    return Tensor(shape(), impl_->data, requires_grad);
  }

  const std::shared_ptr<detail::TensorImpl>& impl() const { return impl_; }
  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl)
      : impl_(std::move(impl)) {}

 private:
  std::shared_ptr<detail::TensorImpl> impl_;
};

// Define-by-run record of differentiable operations. One tape per training
// step and per thread; nodes are replayed in exact reverse recording order.
class Tape {
 public:
  using Backward = std::function<void(detail::TensorImpl& output)>;

  struct Node {
    std::string op;
    std::vector<std::shared_ptr<detail::TensorImpl>> inputs;
    std::shared_ptr<detail::TensorImpl> output;
    Backward backward;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape*& active() {
    thread_local Tape* current = nullptr;
    return current;
  }

  std::size_t size() const { return nodes_.size(); }
  const std::vector<Node>& nodes() const { return nodes_; }

  void record(std::string op,
              std::vector<std::shared_ptr<detail::TensorImpl>> inputs,
              const std::shared_ptr<detail::TensorImpl>& output,
              Backward backward) {
    output->tape = this;
    output->node = nodes_.size();
    nodes_.push_back(
        Node{std::move(op), std::move(inputs), output, std::move(backward)});
  }

  void backward(const Tensor& loss) {
    if (!loss.defined() || loss.size() != 1) {
      throw ContractError("backward() requires a scalar loss, got shape " +
                          (loss.defined() ? shape_str(loss.shape()) : "<none>"));
    }
    const auto& root = loss.impl();
    if (root->tape != this) {
      throw ContractError("backward() on a loss not recorded on this tape");
    }
    root->grad_buffer()[0] += 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
      auto& node = *it;
      if (node.output->grad.empty()) continue;
      node.backward(*node.output);
    }
    // Leaves that were on the tape but unreachable still get a zero buffer.
    for (auto& node : nodes_) {
      for (auto& in : node.inputs) {
        if (in->requires_grad) in->grad_buffer();
      }
    }
  }

 private:
  std::vector<Node> nodes_;
};

// Activates a tape for the current thread for the lifetime of the scope.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape) : previous_(Tape::active()) {
    Tape::active() = &tape;
  }
  ~TapeScope() { Tape::active() = previous_; }
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

// Suspends recording (evaluation, statistics) for the lifetime of the scope.
class NoGradScope {
 public:
  NoGradScope() : previous_(Tape::active()) { Tape::active() = nullptr; }
  ~NoGradScope() { Tape::active() = previous_; }
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  Tape* previous_;
};

namespace detail {

// Builds an op result and records it when any input participates in autodiff.
inline Tensor make_result(const char* op, Shape shape, std::vector<double> data,
                          std::vector<Tensor> inputs, Tape::Backward backward) {
  Tensor out(std::move(shape), std::move(data));
  Tape* tape = Tape::active();
  if (tape == nullptr) return out;
  bool needs = false;
  for (const auto& t : inputs) needs = needs || t.requires_grad();
  if (!needs) return out;
  out.impl()->requires_grad = true;
  std::vector<std::shared_ptr<TensorImpl>> impls;
  impls.reserve(inputs.size());
  for (const auto& t : inputs) impls.push_back(t.impl());
  tape->record(op, std::move(impls), out.impl(), std::move(backward));
  return out;
}

}  // namespace detail

}  // namespace darsd
