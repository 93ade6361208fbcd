#include "gdesigner/svd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gdesigner/errors.hpp"

namespace gdesigner {
namespace {

constexpr int kMaxSweeps = 100;
constexpr double kPairTol = 1e-12;

// One-sided Jacobi on a tall-or-square matrix (rows >= cols): rotate column
// pairs of a working copy until all columns are mutually orthogonal, then
// read off singular values as column norms. The input is scaled by its
// largest entry, and any column whose norm falls 100 orders of magnitude
// below the matrix norm is deflated to exact zero: rotating such a column
// against a full-size one pushes the arithmetic into the denormal range
// where the overlap can no longer be cancelled and the sweeps spin forever.
// Deflation is terminal (a zero column never re-enters a rotation) and
// perturbs the decomposition by a relative 1e-100 at most, far below every
// tolerance in use.
SvdResult svd_tall(const Matrix& m) {
    const std::size_t rows = m.rows(), cols = m.cols();
    const double scale = max_abs(m);
    Matrix b = m;
    if (scale > 0.0) {
        // Divide entrywise: multiplying by 1/scale overflows when the whole
        // matrix sits in the denormal range.
        for (std::size_t i = 0; i < b.size(); ++i) b.data()[i] /= scale;
    }
    Matrix v = Matrix::identity(cols);

    const double column_floor = frobenius_norm(b) * 1e-100;

    bool converged = false;
    for (int sweep = 0; sweep < kMaxSweeps && !converged; ++sweep) {
        for (std::size_t j = 0; j < cols; ++j) {
            double n = 0.0;
            for (std::size_t i = 0; i < rows; ++i) n += b(i, j) * b(i, j);
            if (std::sqrt(n) <= column_floor)
                for (std::size_t i = 0; i < rows; ++i) b(i, j) = 0.0;
        }
        converged = true;
        for (std::size_t p = 0; p + 1 < cols; ++p) {
            for (std::size_t q = p + 1; q < cols; ++q) {
                double alpha = 0.0, beta = 0.0, gamma = 0.0, gamma_scale = 0.0;
                for (std::size_t i = 0; i < rows; ++i) {
                    alpha += b(i, p) * b(i, p);
                    beta += b(i, q) * b(i, q);
                    const double prod = b(i, p) * b(i, q);
                    gamma += prod;
                    gamma_scale += std::fabs(prod);
                }
                if (alpha == 0.0 || beta == 0.0) continue;
                // sqrt(alpha) * sqrt(beta), not sqrt(alpha * beta): the
                // product underflows for tiny columns and a zero threshold
                // would spin forever. The gamma_scale term stops the sweep
                // when the overlap is below the rounding noise of its own
                // summation, where further rotations cannot reduce it.
                double thresh = kPairTol * std::sqrt(alpha) * std::sqrt(beta);
                thresh = std::max(thresh, 8.0 * 2.220446049250313e-16 * gamma_scale);
                thresh = std::max(thresh, 1e-300);
                if (std::fabs(gamma) <= thresh) continue;
                converged = false;

                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                                 (std::fabs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (std::size_t i = 0; i < rows; ++i) {
                    const double bp = b(i, p), bq = b(i, q);
                    b(i, p) = c * bp - s * bq;
                    b(i, q) = s * bp + c * bq;
                }
                for (std::size_t i = 0; i < cols; ++i) {
                    const double vp = v(i, p), vq = v(i, q);
                    v(i, p) = c * vp - s * vq;
                    v(i, q) = s * vp + c * vq;
                }
            }
        }
    }
    if (!converged)
        throw NumericError("svd: one-sided Jacobi did not converge in " +
                           std::to_string(kMaxSweeps) + " sweeps");

    // Column norms in scaled units (for normalizing U) and original units.
    std::vector<double> norms(cols);
    std::vector<double> sigma(cols);
    for (std::size_t j = 0; j < cols; ++j) {
        double n = 0.0;
        for (std::size_t i = 0; i < rows; ++i) n += b(i, j) * b(i, j);
        norms[j] = std::sqrt(n);
        sigma[j] = norms[j] * scale;
    }

    std::vector<std::size_t> order(cols);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t c) { return sigma[a] > sigma[c]; });

    SvdResult r;
    r.u = Matrix(rows, cols);
    r.v = Matrix(cols, cols);
    r.singular_values.resize(cols);
    const double tiny = 1e-300;
    for (std::size_t jj = 0; jj < cols; ++jj) {
        const std::size_t src = order[jj];
        r.singular_values[jj] = sigma[src];
        for (std::size_t i = 0; i < cols; ++i) r.v(i, jj) = v(i, src);
        if (norms[src] > tiny) {
            for (std::size_t i = 0; i < rows; ++i) r.u(i, jj) = b(i, src) / norms[src];
        }
    }
    // Columns with zero singular value need an orthonormal completion so that
    // U^T U = I still holds: Gram-Schmidt canonical basis vectors against the
    // columns placed so far.
    for (std::size_t jj = 0; jj < cols; ++jj) {
        if (r.singular_values[jj] > tiny) continue;
        for (std::size_t e = 0; e < rows; ++e) {
            std::vector<double> cand(rows, 0.0);
            cand[e] = 1.0;
            for (std::size_t k = 0; k < cols; ++k) {
                if (k == jj) continue;
                double proj = 0.0;
                for (std::size_t i = 0; i < rows; ++i) proj += cand[i] * r.u(i, k);
                for (std::size_t i = 0; i < rows; ++i) cand[i] -= proj * r.u(i, k);
            }
            double n = 0.0;
            for (double x : cand) n += x * x;
            n = std::sqrt(n);
            if (n > 1e-6) {
                for (std::size_t i = 0; i < rows; ++i) r.u(i, jj) = cand[i] / n;
                break;
            }
        }
        r.singular_values[jj] = 0.0;
    }
    return r;
}

} // namespace

SvdResult svd(const Matrix& m) {
    if (m.rows() == 0 || m.cols() == 0) throw ConfigError("svd: empty matrix");
    if (!m.all_finite()) throw NumericError("svd: non-finite input");
    if (m.rows() >= m.cols()) return svd_tall(m);
    SvdResult t = svd_tall(m.transpose());
    SvdResult r;
    r.u = std::move(t.v);
    r.v = std::move(t.u);
    r.singular_values = std::move(t.singular_values);
    return r;
}

Matrix svt(const Matrix& m, double threshold) {
    if (threshold < 0.0) throw ConfigError("svt: negative threshold");
    SvdResult s = svd(m);
    const std::size_t k = s.singular_values.size();
    Matrix us(m.rows(), k);
    for (std::size_t j = 0; j < k; ++j) {
        const double shrunk = std::max(s.singular_values[j] - threshold, 0.0);
        for (std::size_t i = 0; i < m.rows(); ++i) us(i, j) = s.u(i, j) * shrunk;
    }
    return matmul(us, s.v.transpose());
}

double nuclear_norm(const Matrix& m) {
    SvdResult s = svd(m);
    double total = 0.0;
    for (double x : s.singular_values) total += x;
    return total;
}

} // namespace gdesigner
