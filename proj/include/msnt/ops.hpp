#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "msnt/random.hpp"
#include "msnt/tensor.hpp"

// Differentiable tensor operations. Every op records itself on the active
// tape when one of its inputs requires grad.
namespace msnt {

// [m x k] x [k x n] -> [m x n].
Tensor matmul(const Tensor& a, const Tensor& b);
// a x b^T for a [m x k], b [n x k] -> [m x n].
Tensor matmul_transposed(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& x);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
// x [m x n] + bias [n], broadcast over rows.
Tensor add_row_vector(const Tensor& x, const Tensor& bias);
Tensor reshape(const Tensor& x, Shape shape);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

// Max-subtracted softmax along `axis`.
Tensor softmax(const Tensor& x, std::size_t axis);
Tensor log_softmax(const Tensor& x, std::size_t axis);
// Normalizes over the last axis, then applies gamma * x_hat + beta.
Tensor layernorm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double epsilon = 1e-12);

// Tanh approximation: 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3))).
Tensor gelu(const Tensor& x);
Tensor tanh(const Tensor& x);

// -log softmax(logits)[target] for a vector of class scores.
Tensor cross_entropy(const Tensor& logits, std::size_t target);
// Mean cross-entropy over the rows of [n x c] logits.
Tensor cross_entropy(const Tensor& logits, std::span<const std::size_t> targets);

// Rows of `table` selected by `ids` -> [ids.size() x table.cols()].
Tensor embedding_lookup(const Tensor& table, std::span<const std::size_t> ids);
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows);
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t count);
Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t count);
Tensor concat_rows(std::span<const Tensor> parts);
Tensor concat_cols(std::span<const Tensor> parts);

// Inverted dropout; identity when `training` is false or rate is zero.
Tensor dropout(const Tensor& x, double rate, bool training, Rng& rng);

}  // namespace msnt
