#pragma once

#include "gdesigner/matrix.hpp"

namespace gdesigner {

/// Thin SVD: m = U * diag(singular_values) * V^T with k = min(rows, cols)
/// orthonormal columns in U and V and singular values sorted non-increasing.
struct SvdResult {
    Matrix u;
    std::vector<double> singular_values;
    Matrix v;
};

/// One-sided Jacobi SVD. Adequate for the small dense matrices used here.
/// Throws NumericError if the sweep cap is exhausted before convergence.
SvdResult svd(const Matrix& m);

/// Singular-value soft-thresholding: U * diag(max(s_i - threshold, 0)) * V^T.
/// This is the proximal operator of threshold * nuclear_norm at step 1.
Matrix svt(const Matrix& m, double threshold);

/// Sum of singular values.
double nuclear_norm(const Matrix& m);

} // namespace gdesigner
