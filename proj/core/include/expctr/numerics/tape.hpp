#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <unordered_map>
#include <vector>

#include "expctr/numerics/tensor.hpp"

namespace expctr::numerics {

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; only valid while
/// the owning tape is alive and has not been cleared.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  Tape& tape() const;
  std::size_t index() const noexcept { return index_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t index, std::uint64_t generation)
      : tape_(tape), index_(index), generation_(generation) {}

  Tape* tape_ = nullptr;
  std::size_t index_ = 0;
  std::uint64_t generation_ = 0;
};

/// What a backward function sees: the op's output, the incoming gradient,
/// the input values, and gradient buffers for inputs that require one
/// (null otherwise).
struct BackwardContext {
  const Tensor& output;
  const Tensor& output_grad;
  std::vector<const Tensor*> inputs;
  std::vector<Tensor*> input_grads;

  const Tensor& input(std::size_t k) const { return *inputs[k]; }
  Tensor* grad(std::size_t k) const { return input_grads[k]; }
};

using BackwardFn = std::function<void(const BackwardContext&)>;

/// Dynamic reverse-mode tape. A forward pass records nodes; backward walks
/// them in reverse and finally accumulates leaf gradients into the
/// trainable Parameters that were bound with `parameter()`.
class Tape {
 public:
  Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);

  /// Binds a Parameter. Frozen parameters become constants. Binding the same
  /// parameter twice returns the same node.
  Var parameter(Parameter& p);

  Var record(const char* op, Tensor value, std::initializer_list<Var> inputs, BackwardFn backward);
  Var record(const char* op, Tensor value, const std::vector<Var>& inputs, BackwardFn backward);

  const Tensor& value(const Var& v) const;
  const Tensor& gradient(const Var& v) const;
  bool requires_grad(const Var& v) const;

  /// Seeds a single-element output with 1.
  void backward(const Var& output);
  void backward(const Var& output, const Tensor& seed);

  void clear();
  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor owned;
    const Tensor* external = nullptr;
    Tensor grad;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    Parameter* parameter = nullptr;
    bool requires_grad = false;
    const char* op = "";

    const Tensor& value() const { return external ? *external : owned; }
  };

  void check(const Var& v, const char* where) const;
  Var push(Node node);

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, std::size_t> bound_;
  std::uint64_t generation_ = 0;
  bool backward_done_ = false;
};

}  // namespace expctr::numerics
