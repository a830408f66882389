#pragma once

#include <Eigen/Core>

#include "dbr/errors.hpp"
#include "dbr/nncore/tensor.hpp"

namespace dbr::nn {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixView = Eigen::Map<RowMatrix>;
using ConstMatrixView = Eigen::Map<const RowMatrix>;
using VectorView = Eigen::Map<Eigen::VectorXd>;
using ConstVectorView = Eigen::Map<const Eigen::VectorXd>;

inline MatrixView as_matrix(Tensor& t, std::size_t rows, std::size_t cols) {
    if (rows * cols != t.size()) throw DimensionError("matrix view does not cover tensor " + shape_string(t.shape()));
    return MatrixView(t.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

inline ConstMatrixView as_matrix(const Tensor& t, std::size_t rows, std::size_t cols) {
    if (rows * cols != t.size()) throw DimensionError("matrix view does not cover tensor " + shape_string(t.shape()));
    return ConstMatrixView(t.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

/// Rank-2 view; rank-1 tensors are treated as a single row.
inline MatrixView as_matrix(Tensor& t) {
    if (t.rank() == 1) return as_matrix(t, 1, t.dim(0));
    if (t.rank() != 2) throw DimensionError("expected a matrix, got " + shape_string(t.shape()));
    return as_matrix(t, t.dim(0), t.dim(1));
}

inline ConstMatrixView as_matrix(const Tensor& t) {
    if (t.rank() == 1) return as_matrix(t, 1, t.dim(0));
    if (t.rank() != 2) throw DimensionError("expected a matrix, got " + shape_string(t.shape()));
    return as_matrix(t, t.dim(0), t.dim(1));
}

inline VectorView as_vector(Tensor& t) { return VectorView(t.data(), static_cast<Eigen::Index>(t.size())); }
inline ConstVectorView as_vector(const Tensor& t) {
    return ConstVectorView(t.data(), static_cast<Eigen::Index>(t.size()));
}

}  // namespace dbr::nn
