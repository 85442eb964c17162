#pragma once

#include <cmath>
#include <string>

#include "lphom/ops.hpp"
#include "lphom/rng.hpp"

// Parameterized building blocks shared by the networks. Each layer stores
// indices into the owning model's ParameterSet.
namespace lphom::layers {

template <typename T>
BasicTensor<T> fan_in_normal(Shape shape, int fan_in, Rng& rng, double gain = 1.0) {
  return BasicTensor<T>::randn(std::move(shape), rng, static_cast<T>(gain / std::sqrt(static_cast<double>(fan_in))));
}

template <typename T>
struct Conv2d {
  int weight = -1;
  int bias = -1;
  int stride = 1;
  int pad = 0;

  static Conv2d make(ParameterSet<T>& ps, const std::string& name, int in, int out, int k, int stride,
                     int pad, Rng& rng, double gain = 1.0) {
    Conv2d c;
    c.weight = ps.add(name + ".weight", fan_in_normal<T>({out, in, k, k}, in * k * k, rng, gain));
    c.bias = ps.add(name + ".bias", BasicTensor<T>({out}));
    c.stride = stride;
    c.pad = pad;
    return c;
  }

  Var operator()(Tape<T>& tape, const ParameterSet<T>& ps, Var x) const {
    return ops::conv2d(tape, x, tape.param(ps.at(weight)), tape.param(ps.at(bias)), stride, pad);
  }
};

template <typename T>
struct ConvTranspose2d {
  int weight = -1;
  int bias = -1;
  int stride = 2;
  int pad = 1;

  static ConvTranspose2d make(ParameterSet<T>& ps, const std::string& name, int in, int out, int k,
                              int stride, int pad, Rng& rng) {
    ConvTranspose2d c;
    // Each output pixel receives about in * (k / stride)^2 contributions.
    const int fan = in * (k / stride) * (k / stride);
    c.weight = ps.add(name + ".weight", fan_in_normal<T>({in, out, k, k}, fan, rng));
    c.bias = ps.add(name + ".bias", BasicTensor<T>({out}));
    c.stride = stride;
    c.pad = pad;
    return c;
  }

  Var operator()(Tape<T>& tape, const ParameterSet<T>& ps, Var x) const {
    return ops::conv_transpose2d(tape, x, tape.param(ps.at(weight)), tape.param(ps.at(bias)), stride, pad);
  }
};

template <typename T>
struct Linear {
  int weight = -1;
  int bias = -1;

  static Linear make(ParameterSet<T>& ps, const std::string& name, int in, int out, Rng& rng,
                     double gain = 1.0) {
    Linear l;
    l.weight = ps.add(name + ".weight", fan_in_normal<T>({out, in}, in, rng, gain));
    l.bias = ps.add(name + ".bias", BasicTensor<T>({out}));
    return l;
  }

  Var operator()(Tape<T>& tape, const ParameterSet<T>& ps, Var x) const {
    return ops::linear(tape, x, tape.param(ps.at(weight)), tape.param(ps.at(bias)));
  }
};

template <typename T>
struct GroupNorm {
  int gamma = -1;
  int beta = -1;
  int groups = 8;

  static GroupNorm make(ParameterSet<T>& ps, const std::string& name, int channels, int groups = 8) {
    GroupNorm g;
    g.gamma = ps.add(name + ".gamma", BasicTensor<T>({channels}, T(1)));
    g.beta = ps.add(name + ".beta", BasicTensor<T>({channels}));
    g.groups = groups;
    return g;
  }

  Var operator()(Tape<T>& tape, const ParameterSet<T>& ps, Var x) const {
    return ops::group_norm(tape, x, tape.param(ps.at(gamma)), tape.param(ps.at(beta)), groups);
  }
};

}  // namespace lphom::layers
