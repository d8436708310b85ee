#pragma once

#include <span>
#include <utility>
#include <vector>

#include "ifthen/rng.hpp"
#include "ifthen/tensor.hpp"

namespace ifthen {

// Differentiable primitives over row-major dense tensors. Every op returns a
// fresh tensor wired into the graph; backward rules accumulate into parent
// gradients.

// (m, k) x (k, n) -> (m, n). A higher-rank lhs contracts its last axis:
// (..., k) x (k, n) -> (..., n).
Tensor matmul(const Tensor& a, const Tensor& b);

// Batched matmul over identical leading dims: a (..., m, k) with
// b (..., k, n), or b (..., n, k) when trans_b is set.
Tensor bmm(const Tensor& a, const Tensor& b, bool trans_b = false);

// Elementwise; b may broadcast when its shape is a trailing suffix of a's.
Tensor add(const Tensor& a, const Tensor& b);
Tensor multiply(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& a, double factor);

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
Tensor slice(const Tensor& a, std::size_t axis, std::size_t start, std::size_t stop);
Tensor transpose(const Tensor& a, std::size_t axis_a, std::size_t axis_b);
Tensor reshape(const Tensor& a, Shape shape);

// table (V, d), ids of length prod(out_prefix) -> out_prefix + (d).
// Gradients scatter-add into the table rows, so repeated ids accumulate.
Tensor embedding_lookup(const Tensor& table, std::span<const int> ids, Shape out_prefix);

Tensor softmax(const Tensor& a, std::size_t axis);
Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor relu(const Tensor& a);

// Normalizes the last axis to zero mean and unit variance (population
// variance, no affine part).
Tensor layer_norm(const Tensor& a, double eps = 1e-6);

// Inverted dropout: identity when train is false; otherwise keeps each
// element with probability 1-p and scales by 1/(1-p).
Tensor dropout(const Tensor& a, double p, bool train, Rng& rng);

// One LSTM cell update. Gate layout along the 4h axis is [input, forget,
// cell, output]; returns (h, c). Built from the primitives above, so it
// backpropagates through its constituents.
// x (b, in), h_prev/c_prev (b, h), w_ih (in, 4h), w_hh (h, 4h), bias (4h).
std::pair<Tensor, Tensor> lstm_cell_step(const Tensor& x, const Tensor& h_prev,
                                         const Tensor& c_prev, const Tensor& w_ih,
                                         const Tensor& w_hh, const Tensor& bias);

// logits (..., V) against one target id per row, averaged over rows whose
// target is not ignore_id. Throws when every target is ignored.
Tensor cross_entropy(const Tensor& logits, std::span<const int> targets, int ignore_id);

Tensor sum(const Tensor& a);  // scalar

}  // namespace ifthen
