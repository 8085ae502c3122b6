#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "genad/numerics/tensor.hpp"

namespace genad::numerics {

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape lives
/// and has not been cleared.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Tensor& grad() const;
};

/// Reverse-mode differentiation by operation recording.
///
/// Nodes are appended in evaluation order, so the node sequence is already a
/// topological order and backward() walks it in reverse. Each node owns its value,
/// a lazily allocated gradient buffer, and a closure that pushes its gradient to
/// its inputs.
class Tape {
 public:
  /// Receives the tape and the id of the node whose gradient is being propagated.
  using Backward = std::function<void(Tape&, std::size_t)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf that never receives a gradient.
  Var constant(Tensor value);
  /// Leaf whose gradient is tracked.
  Var variable(Tensor value);

  /// Records an operation result. `backward` may be empty when no input needs a gradient.
  Var record(Tensor value, std::vector<std::size_t> inputs, Backward backward);

  /// Seeds d(loss)/d(loss) = 1 and propagates to every node that needs a gradient.
  /// The loss must hold a single element.
  void backward(Var loss);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  /// Gradient of a node after backward(); a zero tensor when nothing flowed into it.
  const Tensor& grad(std::size_t id) const;
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }

  /// Adds `g` (same shape as the node's value) into the node's gradient buffer.
  void accumulate(std::size_t id, const Tensor& g);
  /// Mutable gradient buffer, allocated as zeros on first use.
  Tensor& grad_buffer(std::size_t id);

  std::size_t size() const noexcept { return nodes_.size(); }
  void clear();

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<std::size_t> inputs;
    Backward backward;
    bool needs_grad = false;
  };

  std::vector<Node> nodes_;
  mutable Tensor zero_scratch_;
};

/// Ordered, named collection of tensors. Iteration order is lexicographic by name,
/// which fixes the serialization and optimizer order.
using ParameterSet = std::map<std::string, Tensor>;

/// Parameters bound onto a tape as gradient-tracked leaves.
class BoundParameters {
 public:
  /// Binds every parameter as a leaf; with `track_gradients` false they are
  /// constants (inference).
  BoundParameters(Tape& tape, const ParameterSet& params, bool track_gradients = true);

  Var operator[](const std::string& name) const;
  Tape& tape() const noexcept { return *tape_; }
  /// Copies each bound leaf's gradient out of the tape, in parameter order.
  ParameterSet gradients() const;

 private:
  Tape* tape_;
  std::map<std::string, Var> vars_;
};

std::size_t parameter_count(const ParameterSet& params);

}  // namespace genad::numerics
