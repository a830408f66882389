#pragma once

#include <span>
#include <vector>

#include "dbr/nncore/graph.hpp"
#include "dbr/nncore/tensor.hpp"

namespace dbr::nn {

enum class Activation { relu, sigmoid, tanh };

Var add(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var sum(Var a);

/// [m x k] * [k x n].
Var matmul(Var a, Var b);

/// x * W^T without bias. x is [N x D], weight is [O x D].
Var linear(Var x, Var weight);

/// x * W^T + b. x is [D] or [N x D], weight is [O x D], bias is [O].
Var dense(Var x, Var weight, Var bias);

Var activation(Var x, Activation kind);
inline Var relu(Var x) { return activation(x, Activation::relu); }
inline Var sigmoid(Var x) { return activation(x, Activation::sigmoid); }
inline Var tanh(Var x) { return activation(x, Activation::tanh); }

/// Cross-correlation. input is [C x H x W] or [N x C x H x W]; kernels [K x C x kh x kw]; bias [K].
Var conv2d(Var input, Var kernels, Var bias, int stride, int padding);

/// Max pooling over square windows; ties resolve to the first element in row-major order.
Var max_pool2d(Var input, int window, int stride);

Var reshape(Var x, Shape shape);

/// Column-wise concatenation of [N x D_i] matrices.
Var concat_cols(std::span<const Var> parts);
Var slice_cols(Var x, std::size_t start, std::size_t count);
/// Row-wise concatenation of [N_i x D] matrices.
Var concat_rows(std::span<const Var> parts);
Var slice_rows(Var x, std::size_t start, std::size_t count);
/// Mean of `blocks` consecutive row blocks: [(blocks*N) x F] -> [N x F].
Var mean_row_blocks(Var x, std::size_t blocks);

/// Mean softmax cross-entropy over the rows of `logits` ([K] or [N x K]).
Var softmax_cross_entropy(Var logits, std::span<const int> labels);

// Graph-free helpers.

std::vector<double> softmax(std::span<const double> logits);

struct CrossEntropy {
    double loss = 0.0;
    std::vector<double> grad_logits;
};

/// loss = -log softmax(logits)[true_class]; grad = softmax - onehot.
CrossEntropy softmax_cross_entropy(std::span<const double> logits, int true_class);

/// Index of the maximum; ties resolve to the lowest index.
std::size_t argmax(std::span<const double> values);

/// Standalone kernels for callers that do not need a tape.
Tensor conv2d_forward(const Tensor& input, const Tensor& kernels, const Tensor& bias, int stride, int padding);
Tensor max_pool2d_forward(const Tensor& input, int window, int stride);
Tensor dense_forward(const Tensor& input, const Tensor& weight, const Tensor& bias);
Tensor activation_forward(const Tensor& input, Activation kind);

}  // namespace dbr::nn
