#pragma once

#include <cstddef>
#include <vector>

namespace driftbench::linalg {

using Vector = std::vector<double>;

// Dense row-major matrix of doubles. The only numeric carrier in the repo;
// kept deliberately small (no views, no expression templates).
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
    Matrix(std::size_t r, std::size_t c, std::vector<double> d);

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    std::size_t size() const { return data.size(); }
    bool empty() const { return data.empty(); }

    static Matrix identity(std::size_t n);

    Vector row(std::size_t i) const;
    Vector col(std::size_t j) const;
};

bool all_finite(const Matrix& m);
bool all_finite(const Vector& v);

Matrix transpose(const Matrix& m);
Matrix matmul(const Matrix& a, const Matrix& b);
Vector matvec(const Matrix& a, const Vector& x);

// Thin SVD m = u * diag(sigma) * vt with min(rows, cols) triplets, singular
// values descending. Columns of u and rows of vt are orthonormal; vectors
// carry the project-wide sign convention (largest-|entry| of each right
// singular vector positive, ties to the lowest index).
struct SvdResult {
    Matrix u;      // m x r
    Vector sigma;  // r, descending, >= 0
    Matrix vt;     // r x n

    // Numerical rank: count of sigma_i > 1e-12 * sigma_0.
    std::size_t rank() const;
};

SvdResult svd(const Matrix& m);

// Symmetric eigendecomposition, eigenvalues descending, eigenvectors as
// orthonormal sign-fixed columns.
struct EigResult {
    Vector values;
    Matrix vectors;  // columns are eigenvectors
};

EigResult sym_eig(const Matrix& c);

// Population mean and covariance (divide by n) of n samples in the rows of x.
struct MeanCov {
    Vector mean;
    Matrix cov;
};

MeanCov covariance(const Matrix& x);

double frobenius_norm_sq(const Matrix& m);
double frobenius_norm(const Matrix& m);

// Flips v (and the paired u column, when given) so the largest-absolute
// entry of v is positive; ties broken by lowest index. Idempotent.
void sign_fix(Vector& v, Vector* paired = nullptr);

constexpr double kRankRelTol = 1e-12;

}  // namespace driftbench::linalg
