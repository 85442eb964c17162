#include "lphom/tape.hpp"

#include "lphom/errors.hpp"

namespace lphom {

template <typename T>
int ParameterSet<T>::add(std::string name, BasicTensor<T> init) {
  if (find(name) >= 0) throw ShapeError("duplicate parameter name " + name);
  Parameter<T> p;
  p.grad = BasicTensor<T>(init.shape());
  p.value = std::move(init);
  names_.push_back(std::move(name));
  params_.push_back(std::move(p));
  return static_cast<int>(params_.size()) - 1;
}

template <typename T>
std::size_t ParameterSet<T>::numel() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

template <typename T>
int ParameterSet<T>::find(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return static_cast<int>(i);
  }
  return -1;
}

template <typename T>
void ParameterSet<T>::zero_grad() {
  for (auto& p : params_) std::fill(p.grad.storage().begin(), p.grad.storage().end(), T(0));
}

template <typename T>
typename Tape<T>::Node& Tape<T>::node(Var v) {
  if (v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size()) {
    throw ShapeError("invalid tape variable " + std::to_string(v.id));
  }
  return nodes_[static_cast<std::size_t>(v.id)];
}

template <typename T>
const typename Tape<T>::Node& Tape<T>::node(Var v) const {
  if (v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size()) {
    throw ShapeError("invalid tape variable " + std::to_string(v.id));
  }
  return nodes_[static_cast<std::size_t>(v.id)];
}

template <typename T>
Var Tape<T>::constant(TensorT value) {
  value.check_finite("constant");
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

template <typename T>
Var Tape<T>::leaf(TensorT value) {
  Var v = constant(std::move(value));
  auto& n = nodes_.back();
  n.requires_grad = record_;
  n.keep_grad = true;
  return v;
}

template <typename T>
Var Tape<T>::param(const Parameter<T>& p) {
  if (auto it = bound_.find(&p); it != bound_.end()) return Var{it->second};
  Var v = leaf(p.value);
  bound_.emplace(&p, v.id);
  return v;
}

template <typename T>
void Tape<T>::collect_grads(ParameterSet<T>& params) const {
  for (std::size_t i = 0; i < params.count(); ++i) {
    auto& p = params.at(static_cast<int>(i));
    auto it = bound_.find(&p);
    if (it == bound_.end()) continue;
    const Node& n = nodes_[static_cast<std::size_t>(it->second)];
    if (n.grad.empty()) continue;
    auto& dst = p.grad.storage();
    const auto& src = n.grad.storage();
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
  }
}

template <typename T>
BasicTensor<T> Tape<T>::grad(Var v) const {
  const Node& n = node(v);
  if (n.grad.empty()) return TensorT(n.value.shape());
  return n.grad;
}

template <typename T>
Var Tape<T>::record(TensorT value, std::initializer_list<Var> inputs, BackwardFn fn,
                    std::string_view kernel) {
  value.check_finite(kernel);
  Node n;
  n.value = std::move(value);
  if (record_) {
    for (Var in : inputs) {
      if (requires_grad(in)) {
        n.requires_grad = true;
        break;
      }
    }
  }
  if (n.requires_grad) n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

template <typename T>
BasicTensor<T>& Tape<T>::grad_buffer(Var v) {
  Node& n = node(v);
  if (n.grad.empty()) n.grad = TensorT(n.value.shape());
  return n.grad;
}

template <typename T>
void Tape<T>::backward(Var loss) {
  if (consumed_) throw ShapeError("backward called twice on the same tape");
  const Node& l = node(loss);
  if (l.value.size() != 1) {
    throw ShapeError("backward needs a scalar loss, got shape " + shape_str(l.value.shape()));
  }
  consumed_ = true;
  visited_ = 0;
  if (!l.requires_grad) return;
  grad_buffer(loss)[0] = T(1);
  for (int i = loss.id; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.grad.empty()) continue;
    if (n.backward) {
      n.grad.check_finite("backward");
      n.backward(*this, n.grad);
      ++visited_;
      // Interior gradients are not needed once propagated.
      n.grad = TensorT();
      n.backward = nullptr;
    }
    if (!n.keep_grad) n.grad = TensorT();
  }
}

template class ParameterSet<float>;
template class ParameterSet<double>;
template class Tape<float>;
template class Tape<double>;

}  // namespace lphom
