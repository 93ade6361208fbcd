#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "gdesigner/rng.hpp"

namespace gdesigner {

/// Dense row-major matrix of doubles. Small sizes throughout (agent counts,
/// hidden widths), so the storage is a plain vector and all ops are exact-order
/// deterministic.
class Matrix {
public:
    Matrix() : rows_(0), cols_(0) {}
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> entries);

    static Matrix identity(std::size_t n);
    static Matrix diag(const std::vector<double>& d);
    /// Entries i.i.d. uniform in [lo, hi), drawn row-major.
    static Matrix random_uniform(std::size_t rows, std::size_t cols, Rng& rng,
                                 double lo = -1.0, double hi = 1.0);
    static Matrix random_gaussian(std::size_t rows, std::size_t cols, Rng& rng);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    const std::vector<double>& entries() const { return data_; }

    bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }
    bool all_finite() const;

    Matrix transpose() const;
    Matrix& operator+=(const Matrix& o);
    Matrix& operator-=(const Matrix& o);
    Matrix& operator*=(double s);

    friend Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
    friend Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
    friend Matrix operator*(Matrix a, double s) { return a *= s; }
    friend Matrix operator*(double s, Matrix a) { return a *= s; }
    friend bool operator==(const Matrix& a, const Matrix& b) {
        return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
    }

private:
    std::size_t rows_, cols_;
    std::vector<double> data_;
};

/// OpenMP-parallel product; per-entry dot products run in a fixed order, so
/// the result is bit-identical to matmul_serial at any thread count.
Matrix matmul(const Matrix& a, const Matrix& b);
/// Plain triple loop kept as the reference implementation for tests/benchmarks.
Matrix matmul_serial(const Matrix& a, const Matrix& b);

Matrix hadamard(const Matrix& a, const Matrix& b);
Matrix map(const Matrix& a, const std::function<double(double)>& f);
Matrix clamp(const Matrix& a, double lo, double hi);
double frobenius_norm(const Matrix& a);
double dot(const Matrix& a, const Matrix& b);
double max_abs(const Matrix& a);

double sigmoid(double x);
double relu(double x);
/// log(x) - log(1-x); caller guarantees x in (0,1).
double logit(double x);

/// Central finite differences of a scalar function of a matrix.
Matrix finite_diff_grad(const std::function<double(const Matrix&)>& f,
                        const Matrix& at, double h = 1e-5);

std::string shape_string(const Matrix& m);

} // namespace gdesigner
