#include "expctr/numerics/tape.hpp"

#include <atomic>
#include <stdexcept>
#include <string>

namespace expctr::numerics {

namespace {

std::uint64_t next_generation() {
  static std::atomic<std::uint64_t> counter{0};
  return ++counter;
}

void accumulate(Tensor& into, const Tensor& from) {
  auto dst = into.values();
  auto src = from.values();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace

const Tensor& Var::value() const { return tape().value(*this); }

Tape& Var::tape() const {
  if (!tape_) throw std::logic_error("var: not bound to a tape");
  return *tape_;
}

Tape::Tape() : generation_(next_generation()) {}

void Tape::check(const Var& v, const char* where) const {
  if (v.tape_ != this || v.generation_ != generation_ || v.index_ >= nodes_.size()) {
    throw std::logic_error(std::string(where) +
                           ": variable was not recorded by this tape's current forward pass");
  }
}

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1, generation_);
}

Var Tape::constant(Tensor value) {
  Node node;
  node.owned = std::move(value);
  node.op = "constant";
  return push(std::move(node));
}

Var Tape::parameter(Parameter& p) {
  if (auto it = bound_.find(&p); it != bound_.end()) return Var(this, it->second, generation_);
  Node node;
  node.external = &p.value;
  node.parameter = p.trainable ? &p : nullptr;
  node.requires_grad = p.trainable;
  node.op = "parameter";
  Var v = push(std::move(node));
  bound_.emplace(&p, v.index());
  return v;
}

Var Tape::record(const char* op, Tensor value, std::initializer_list<Var> inputs,
                 BackwardFn backward) {
  return record(op, std::move(value), std::vector<Var>(inputs), std::move(backward));
}

Var Tape::record(const char* op, Tensor value, const std::vector<Var>& inputs,
                 BackwardFn backward) {
  Node node;
  node.owned = std::move(value);
  node.op = op;
  for (const Var& in : inputs) {
    check(in, op);
    node.inputs.push_back(in.index());
    node.requires_grad = node.requires_grad || nodes_[in.index()].requires_grad;
  }
  if (node.requires_grad) node.backward = std::move(backward);
  return push(std::move(node));
}

const Tensor& Tape::value(const Var& v) const {
  check(v, "value");
  return nodes_[v.index()].value();
}

const Tensor& Tape::gradient(const Var& v) const {
  check(v, "gradient");
  if (!backward_done_) throw std::logic_error("gradient: backward has not been run");
  return nodes_[v.index()].grad;
}

bool Tape::requires_grad(const Var& v) const {
  check(v, "requires_grad");
  return nodes_[v.index()].requires_grad;
}

void Tape::backward(const Var& output) {
  check(output, "backward");
  const Tensor& out = nodes_[output.index()].value();
  if (out.size() != 1) {
    throw ShapeError("backward: output " + to_string(out.shape()) + " needs an explicit seed");
  }
  backward(output, Tensor(out.shape(), 1.0));
}

void Tape::backward(const Var& output, const Tensor& seed) {
  check(output, "backward");
  Node& root = nodes_[output.index()];
  if (root.value().size() != seed.size()) {
    throw ShapeError("backward: seed " + to_string(seed.shape()) + " does not match output " +
                     to_string(root.value().shape()));
  }
  for (auto& n : nodes_) n.grad = Tensor();
  if (!root.requires_grad) {
    backward_done_ = true;
    return;
  }
  root.grad = Tensor(root.value().shape(), std::vector<double>(seed.values().begin(), seed.values().end()));

  for (std::size_t idx = output.index() + 1; idx-- > 0;) {
    Node& node = nodes_[idx];
    if (!node.requires_grad || node.grad.empty() || !node.backward) continue;
    BackwardContext ctx{node.value(), node.grad, {}, {}};
    ctx.inputs.reserve(node.inputs.size());
    ctx.input_grads.reserve(node.inputs.size());
    for (std::size_t in : node.inputs) {
      Node& input = nodes_[in];
      ctx.inputs.push_back(&input.value());
      if (input.requires_grad) {
        if (input.grad.empty()) input.grad = Tensor(input.value().shape());
        ctx.input_grads.push_back(&input.grad);
      } else {
        ctx.input_grads.push_back(nullptr);
      }
    }
    node.backward(ctx);
  }

  for (auto& node : nodes_) {
    if (!node.parameter || node.grad.empty()) continue;
    Tensor& target = node.parameter->grad;
    if (!target.same_shape(node.grad)) target = Tensor(node.grad.shape());
    accumulate(target, node.grad);
  }
  backward_done_ = true;
}

void Tape::clear() {
  nodes_.clear();
  bound_.clear();
  generation_ = next_generation();
  backward_done_ = false;
}

}  // namespace expctr::numerics
