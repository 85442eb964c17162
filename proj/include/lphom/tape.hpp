#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "lphom/tensor.hpp"

namespace lphom {

// Trainable tensor with its accumulated gradient.
template <typename T>
struct Parameter {
  BasicTensor<T> value;
  BasicTensor<T> grad;
};

// Named parameters in registration order. Models refer to entries by index so
// that copies of a model stay self-consistent.
template <typename T>
class ParameterSet {
 public:
  int add(std::string name, BasicTensor<T> init);

  std::size_t count() const { return params_.size(); }
  std::size_t numel() const;

  Parameter<T>& at(int id) { return params_.at(static_cast<std::size_t>(id)); }
  const Parameter<T>& at(int id) const { return params_.at(static_cast<std::size_t>(id)); }
  const std::string& name(int id) const { return names_.at(static_cast<std::size_t>(id)); }
  // -1 when absent.
  int find(std::string_view name) const;

  void zero_grad();

  template <typename U>
  ParameterSet<U> cast() const {
    ParameterSet<U> out;
    for (std::size_t i = 0; i < params_.size(); ++i) {
      out.add(names_[i], params_[i].value.template cast<U>());
    }
    return out;
  }

 private:
  std::vector<std::string> names_;
  std::vector<Parameter<T>> params_;
};

// Handle to a value recorded on a tape.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Records kernel outputs in execution order together with adjoint closures.
// Creation order is a topological order, so backward() replays it in reverse.
// With recording disabled, values are kept but no adjoints are stored.
template <typename T>
class Tape {
 public:
  using TensorT = BasicTensor<T>;
  using BackwardFn = std::function<void(Tape&, const TensorT& grad_out)>;

  explicit Tape(bool record = true) : record_(record) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return record_; }

  Var constant(TensorT value);
  // Leaf whose gradient is kept on the tape and readable through grad().
  Var leaf(TensorT value);
  // Leaf holding a parameter's value. Binding the same parameter twice returns
  // the same variable.
  Var param(const Parameter<T>& p);

  // Adds the gradients of every parameter of `params` bound on this tape into
  // its grad field.
  void collect_grads(ParameterSet<T>& params) const;

  const TensorT& value(Var v) const { return node(v).value; }
  bool requires_grad(Var v) const { return v.valid() && node(v).requires_grad; }

  // Gradient accumulated for v by the last backward(); zeros if none reached it.
  TensorT grad(Var v) const;

  // Used by kernels: stores an output and, when any input needs a gradient,
  // the closure that propagates grad_out to the inputs.
  Var record(TensorT value, std::initializer_list<Var> inputs, BackwardFn fn,
             std::string_view kernel);

  // Gradient buffer of v, allocated as zeros on first use.
  TensorT& grad_buffer(Var v);

  // Reverse sweep from a scalar loss. The tape cannot be swept twice.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }
  // Number of adjoint closures run by the last backward().
  std::size_t adjoints_visited() const { return visited_; }

 private:
  struct Node {
    TensorT value;
    TensorT grad;
    BackwardFn backward;
    bool requires_grad = false;
    bool keep_grad = false;
  };

  Node& node(Var v);
  const Node& node(Var v) const;

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter<T>*, int> bound_;
  bool record_;
  bool consumed_ = false;
  std::size_t visited_ = 0;
};

}  // namespace lphom
