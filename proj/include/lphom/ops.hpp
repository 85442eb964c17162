#pragma once

#include <span>

#include "lphom/tape.hpp"

// Differentiable kernels. Every kernel records its output on the tape and
// checks it for NaN/Inf. Optional inputs (biases) may be passed as Var{}.
namespace lphom::ops {

// x (N,C,H,W) * w (O,C,kH,kW) -> (N,O,Ho,Wo), Ho = (H + 2*pad - kH) / stride + 1.
template <typename T>
Var conv2d(Tape<T>& tape, Var x, Var w, Var bias, int stride = 1, int pad = 0);

// x (N,I,H,W), w (I,O,kH,kW) -> (N,O,Ho,Wo), Ho = (H - 1) * stride - 2*pad + kH.
template <typename T>
Var conv_transpose2d(Tape<T>& tape, Var x, Var w, Var bias, int stride = 1, int pad = 0);

// x (N,in), w (out,in), bias (out) -> (N,out).
template <typename T>
Var linear(Tape<T>& tape, Var x, Var w, Var bias);

// Per-sample normalization over channel groups; gamma/beta are (C).
template <typename T>
Var group_norm(Tape<T>& tape, Var x, Var gamma, Var beta, int groups = 8, double eps = 1e-5);

template <typename T>
Var silu(Tape<T>& tape, Var x);
template <typename T>
Var relu(Tape<T>& tape, Var x);
template <typename T>
Var sigmoid(Tape<T>& tape, Var x);
template <typename T>
Var exp(Tape<T>& tape, Var x);
// Elementwise clamp; gradient passes only where lo < x < hi.
template <typename T>
Var clamp(Tape<T>& tape, Var x, double lo, double hi);
template <typename T>
Var scale(Tape<T>& tape, Var x, double s);

// 2x2 average pooling with stride 2.
template <typename T>
Var avg_pool2d(Tape<T>& tape, Var x);
// 2x nearest-neighbour upsampling.
template <typename T>
Var upsample_nearest2x(Tape<T>& tape, Var x);

template <typename T>
Var add(Tape<T>& tape, Var a, Var b);
template <typename T>
Var sub(Tape<T>& tape, Var a, Var b);
template <typename T>
Var mul(Tape<T>& tape, Var a, Var b);
// x (N,C,H,W) + e (N,C) broadcast over H and W.
template <typename T>
Var add_channel_bias(Tape<T>& tape, Var x, Var e);

template <typename T>
Var concat_channels(Tape<T>& tape, Var a, Var b);
// Channels [begin, end) of x (N,C,...).
template <typename T>
Var slice_channels(Tape<T>& tape, Var x, int begin, int end);
// Keeps dimension 0 and flattens the rest.
template <typename T>
Var flatten(Tape<T>& tape, Var x);
// (N,C,H,W) -> (N,C).
template <typename T>
Var global_avg_pool(Tape<T>& tape, Var x);
// Rows of table (K,d) picked by indices -> (N,d).
template <typename T>
Var embedding(Tape<T>& tape, Var table, std::span<const int> indices);

// Scalar reductions.
template <typename T>
Var mean(Tape<T>& tape, Var x);
template <typename T>
Var sum(Tape<T>& tape, Var x);
template <typename T>
Var mse(Tape<T>& tape, Var a, Var b);
// Batch mean of 0.5 * sum(mu^2 + exp(logvar) - 1 - logvar) over each item.
template <typename T>
Var kl_standard_normal(Tape<T>& tape, Var mu, Var logvar);
// Mean softmax cross-entropy of logits (N,K) against class indices.
template <typename T>
Var cross_entropy(Tape<T>& tape, Var logits, std::span<const int> targets);

}  // namespace lphom::ops
