#pragma once

// Test-side oracles, independent of the library's closed-form solution paths.

#include <algorithm>
#include <vector>

#include "gdesigner/designer.hpp"
#include "gdesigner/matrix.hpp"
#include "gdesigner/svd.hpp"

namespace oracles {

using namespace gdesigner;

/// The refinement objective of the anchor-regularized sparsification with Z
/// held fixed: 1/2 ||S - ZWZ^T||_F^2 + 1/2 ||A - ZWZ^T||_F^2 + zeta ||W||_*.
inline double refinement_objective(const Matrix& w, const Matrix& s, const Matrix& anchor,
                                   const Matrix& z, double zeta) {
    const Matrix zwz = matmul(matmul(z, w), z.transpose());
    const Matrix ds = s - zwz;
    const Matrix da = anchor - zwz;
    return 0.5 * dot(ds, ds) + 0.5 * dot(da, da) + zeta * nuclear_norm(w);
}

/// Proximal-gradient descent on the refinement objective, evaluating the
/// smooth gradient matrix-wise (no algebraic shortcut through Z^T Z = I).
inline Matrix refinement_pgd(const Matrix& s, const Matrix& anchor, const Matrix& z,
                             double zeta, int iterations = 5000, double step = 0.2) {
    const std::size_t r = z.cols();
    Matrix w(r, r);
    for (int it = 0; it < iterations; ++it) {
        const Matrix zwz = matmul(matmul(z, w), z.transpose());
        const Matrix grad_smooth =
            matmul(matmul(z.transpose(), (zwz - s) + (zwz - anchor)), z);
        w = svt(w - grad_smooth * step, step * zeta);
    }
    return w;
}

/// All execution orders of a small DAG that satisfy the precedence
/// constraint, found by checking every permutation.
inline std::vector<std::vector<std::size_t>> valid_orders_brute_force(
    const CommTopology& topology) {
    std::vector<std::size_t> perm(topology.n);
    for (std::size_t i = 0; i < topology.n; ++i) perm[i] = i;
    std::vector<std::vector<std::size_t>> valid;
    do {
        std::vector<std::size_t> position(topology.n);
        for (std::size_t idx = 0; idx < perm.size(); ++idx) position[perm[idx]] = idx;
        bool ok = true;
        for (const auto& e : topology.edges)
            if (position[e.from] >= position[e.to]) ok = false;
        if (ok) valid.push_back(perm);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return valid;
}

} // namespace oracles
