#include "genad/numerics/tape.hpp"

#include <algorithm>

#include "genad/errors.hpp"

namespace genad::numerics {

const Tensor& Var::value() const { return tape->value(id); }
const Tensor& Var::grad() const { return tape->grad(id); }

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, {}, {}, false});
  return Var{this, nodes_.size() - 1};
}

Var Tape::variable(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, {}, {}, true});
  return Var{this, nodes_.size() - 1};
}

Var Tape::record(Tensor value, std::vector<std::size_t> inputs, Backward backward) {
  const bool needs = std::any_of(inputs.begin(), inputs.end(),
                                 [this](std::size_t i) { return nodes_[i].needs_grad; });
  Node node{std::move(value), {}, std::move(inputs), {}, needs};
  if (needs) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var{this, nodes_.size() - 1};
}

void Tape::backward(Var loss) {
  if (loss.tape != this) throw ContractError("backward: loss belongs to another tape");
  const Tensor& lv = nodes_[loss.id].value;
  if (lv.size() != 1) {
    throw ContractError("backward: loss must be scalar, got shape " + shape_string(lv.shape()));
  }
  for (Node& n : nodes_) n.grad = Tensor();
  grad_buffer(loss.id)[0] = 1.0;
  for (std::size_t id = loss.id + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.needs_grad || !n.backward || n.grad.empty()) continue;
    n.backward(*this, id);
  }
}

const Tensor& Tape::grad(std::size_t id) const {
  const Node& n = nodes_[id];
  if (!n.grad.empty()) return n.grad;
  zero_scratch_ = Tensor(n.value.shape(), 0.0);
  return zero_scratch_;
}

Tensor& Tape::grad_buffer(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad = Tensor(n.value.shape(), 0.0);
  return n.grad;
}

void Tape::accumulate(std::size_t id, const Tensor& g) {
  if (!nodes_[id].needs_grad) return;
  Tensor& buf = grad_buffer(id);
  if (!buf.same_shape(g)) {
    throw ShapeError("gradient shape " + shape_string(g.shape()) + " does not match value shape " +
                     shape_string(buf.shape()));
  }
  double* dst = buf.data();
  const double* src = g.data();
  for (std::size_t i = 0; i < buf.size(); ++i) dst[i] += src[i];
}

void Tape::clear() { nodes_.clear(); }

BoundParameters::BoundParameters(Tape& tape, const ParameterSet& params, bool track_gradients)
    : tape_(&tape) {
  for (const auto& [name, value] : params) {
    vars_.emplace(name, track_gradients ? tape.variable(value) : tape.constant(value));
  }
}

Var BoundParameters::operator[](const std::string& name) const {
  auto it = vars_.find(name);
  if (it == vars_.end()) throw ContractError("unknown parameter '" + name + "'");
  return it->second;
}

ParameterSet BoundParameters::gradients() const {
  ParameterSet out;
  for (const auto& [name, var] : vars_) out.emplace(name, tape_->grad(var.id));
  return out;
}

std::size_t parameter_count(const ParameterSet& params) {
  std::size_t n = 0;
  for (const auto& [name, t] : params) n += t.size();
  return n;
}

}  // namespace genad::numerics
