#include "driftbench/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "driftbench/errors.hpp"

namespace driftbench::linalg {

namespace {

constexpr double kJacobiTol = 1e-14;   // off-diagonal norm vs input Frobenius norm
constexpr int kMaxSweeps = 60;

}  // namespace

Matrix::Matrix(std::size_t r, std::size_t c, std::vector<double> d) : rows(r), cols(c), data(std::move(d)) {
    if (rows * cols != data.size()) {
        throw InvalidInputError("Matrix: rows*cols=" + std::to_string(rows * cols) +
                                " does not match data length " + std::to_string(data.size()));
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Vector Matrix::row(std::size_t i) const {
    return Vector(data.begin() + static_cast<std::ptrdiff_t>(i * cols),
                  data.begin() + static_cast<std::ptrdiff_t>((i + 1) * cols));
}

Vector Matrix::col(std::size_t j) const {
    Vector out(rows);
    for (std::size_t i = 0; i < rows; ++i) out[i] = (*this)(i, j);
    return out;
}

bool all_finite(const Matrix& m) {
    for (double v : m.data)
        if (!std::isfinite(v)) return false;
    return true;
}

bool all_finite(const Vector& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

Matrix transpose(const Matrix& m) {
    Matrix t(m.cols, m.rows);
    for (std::size_t i = 0; i < m.rows; ++i)
        for (std::size_t j = 0; j < m.cols; ++j) t(j, i) = m(i, j);
    return t;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows) throw InvalidInputError("matmul: inner dimensions differ");
    Matrix c(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < b.cols; ++j) c(i, j) += aik * b(k, j);
        }
    }
    return c;
}

Vector matvec(const Matrix& a, const Vector& x) {
    if (a.cols != x.size()) throw InvalidInputError("matvec: dimension mismatch");
    Vector y(a.rows, 0.0);
    for (std::size_t i = 0; i < a.rows; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < a.cols; ++j) s += a(i, j) * x[j];
        y[i] = s;
    }
    return y;
}

double frobenius_norm_sq(const Matrix& m) {
    double s = 0.0;
    for (double v : m.data) s += v * v;
    return s;
}

double frobenius_norm(const Matrix& m) { return std::sqrt(frobenius_norm_sq(m)); }

void sign_fix(Vector& v, Vector* paired) {
    std::size_t arg = 0;
    double best = -1.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double a = std::fabs(v[i]);
        if (a > best) {  // strict: ties keep the lowest index
            best = a;
            arg = i;
        }
    }
    if (!v.empty() && v[arg] < 0.0) {
        for (double& x : v) x = -x;
        if (paired)
            for (double& x : *paired) x = -x;
    }
}

std::size_t SvdResult::rank() const {
    if (sigma.empty()) return 0;
    const double cutoff = kRankRelTol * sigma[0];
    std::size_t r = 0;
    for (double s : sigma)
        if (s > cutoff) ++r;
    return r;
}

namespace {

// One-sided Jacobi on the columns of b (m x n, m >= n): rotates column pairs
// until they are mutually orthogonal, accumulating rotations into v (n x n).
// Afterwards sigma_j = ||b_col_j|| and u_j = b_col_j / sigma_j.
void one_sided_jacobi(Matrix& b, Matrix& v, double input_fro) {
    const std::size_t m = b.rows;
    const std::size_t n = b.cols;
    const double thresh = kJacobiTol * input_fro;
    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
        double off_sq = 0.0;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                double app = 0.0, aqq = 0.0, apq = 0.0;
                for (std::size_t i = 0; i < m; ++i) {
                    const double bp = b(i, p);
                    const double bq = b(i, q);
                    app += bp * bp;
                    aqq += bq * bq;
                    apq += bp * bq;
                }
                off_sq += 2.0 * apq * apq;
                if (apq == 0.0) continue;
                const double tau = (aqq - app) / (2.0 * apq);
                const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::fabs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                for (std::size_t i = 0; i < m; ++i) {
                    const double bp = b(i, p);
                    const double bq = b(i, q);
                    b(i, p) = c * bp - s * bq;
                    b(i, q) = s * bp + c * bq;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double vp = v(i, p);
                    const double vq = v(i, q);
                    v(i, p) = c * vp - s * vq;
                    v(i, q) = s * vp + c * vq;
                }
            }
        }
        if (std::sqrt(off_sq) <= thresh) break;
    }
}

// Completes column k of u with a unit vector orthogonal to columns [0, k).
// Deterministic: scans canonical basis vectors in index order.
void fill_orthonormal_column(Matrix& u, std::size_t k) {
    const std::size_t m = u.rows;
    for (std::size_t cand = 0; cand < m; ++cand) {
        Vector w(m, 0.0);
        w[cand] = 1.0;
        for (int pass = 0; pass < 2; ++pass) {  // twice for re-orthogonalization
            for (std::size_t j = 0; j < k; ++j) {
                double dot = 0.0;
                for (std::size_t i = 0; i < m; ++i) dot += w[i] * u(i, j);
                for (std::size_t i = 0; i < m; ++i) w[i] -= dot * u(i, j);
            }
        }
        double norm = 0.0;
        for (double x : w) norm += x * x;
        norm = std::sqrt(norm);
        if (norm > 0.5) {
            for (std::size_t i = 0; i < m; ++i) u(i, k) = w[i] / norm;
            return;
        }
    }
    throw InvalidInputError("svd: failed to complete orthonormal basis");
}

// SVD for the m >= n case.
SvdResult svd_tall(const Matrix& a) {
    const std::size_t m = a.rows;
    const std::size_t n = a.cols;
    Matrix b = a;
    Matrix v = Matrix::identity(n);
    one_sided_jacobi(b, v, frobenius_norm(a));

    // Column norms are the singular values; sort descending (index ascending on ties).
    Vector norms(n);
    for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < m; ++i) s += b(i, j) * b(i, j);
        norms[j] = std::sqrt(s);
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&norms](std::size_t x, std::size_t y) { return norms[x] > norms[y]; });

    SvdResult out;
    out.u = Matrix(m, n);
    out.sigma = Vector(n);
    out.vt = Matrix(n, n);
    const double sigma_max = norms[order[0]];
    const double zero_cut = sigma_max > 0.0 ? 1e-13 * sigma_max : 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t j = order[k];
        out.sigma[k] = norms[j];
        for (std::size_t i = 0; i < n; ++i) out.vt(k, i) = v(i, j);
        if (norms[j] > zero_cut) {
            for (std::size_t i = 0; i < m; ++i) out.u(i, k) = b(i, j) / norms[j];
        } else {
            fill_orthonormal_column(out.u, k);
        }
    }

    // Sign convention on the right singular vectors, left flipped in tandem.
    for (std::size_t k = 0; k < n; ++k) {
        Vector vk = out.vt.row(k);
        Vector uk = out.u.col(k);
        sign_fix(vk, &uk);
        for (std::size_t i = 0; i < n; ++i) out.vt(k, i) = vk[i];
        for (std::size_t i = 0; i < m; ++i) out.u(i, k) = uk[i];
    }
    return out;
}

}  // namespace

SvdResult svd(const Matrix& a) {
    if (a.rows == 0 || a.cols == 0) throw EmptyInputError("svd: empty matrix");
    if (!all_finite(a)) throw InvalidInputError("svd: non-finite entries");
    if (a.rows >= a.cols) return svd_tall(a);
    // Wide case: decompose the transpose and swap the factors.
    SvdResult t = svd_tall(transpose(a));
    SvdResult out;
    out.sigma = t.sigma;
    out.u = transpose(t.vt);
    out.vt = transpose(t.u);
    // Re-apply the convention: it is defined on the right vectors of the
    // original matrix, which were the left vectors of the transpose.
    const std::size_t r = out.sigma.size();
    for (std::size_t k = 0; k < r; ++k) {
        Vector vk = out.vt.row(k);
        Vector uk = out.u.col(k);
        sign_fix(vk, &uk);
        for (std::size_t i = 0; i < out.vt.cols; ++i) out.vt(k, i) = vk[i];
        for (std::size_t i = 0; i < out.u.rows; ++i) out.u(i, k) = uk[i];
    }
    return out;
}

EigResult sym_eig(const Matrix& c) {
    if (c.rows == 0) throw EmptyInputError("sym_eig: empty matrix");
    if (c.rows != c.cols) throw InvalidInputError("sym_eig: matrix not square");
    if (!all_finite(c)) throw InvalidInputError("sym_eig: non-finite entries");
    const std::size_t n = c.rows;
    double max_abs = 0.0;
    for (double v : c.data) max_abs = std::max(max_abs, std::fabs(v));
    double asym = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) asym = std::max(asym, std::fabs(c(i, j) - c(j, i)));
    if (asym > 1e-12 * std::max(1.0, max_abs)) throw InvalidInputError("sym_eig: matrix not symmetric");

    // Symmetrize so C and C^T decompose bit-identically.
    Matrix s(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) s(i, j) = 0.5 * (c(i, j) + c(j, i));

    Matrix v = Matrix::identity(n);
    const double thresh = kJacobiTol * frobenius_norm(s);
    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
        double off_sq = 0.0;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double spq = s(p, q);
                off_sq += 2.0 * spq * spq;
                if (spq == 0.0) continue;
                const double tau = (s(q, q) - s(p, p)) / (2.0 * spq);
                const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::fabs(tau) + std::sqrt(1.0 + tau * tau));
                const double co = 1.0 / std::sqrt(1.0 + t * t);
                const double si = t * co;
                for (std::size_t i = 0; i < n; ++i) {
                    const double sip = s(i, p);
                    const double siq = s(i, q);
                    s(i, p) = co * sip - si * siq;
                    s(i, q) = si * sip + co * siq;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double spi = s(p, i);
                    const double sqi = s(q, i);
                    s(p, i) = co * spi - si * sqi;
                    s(q, i) = si * spi + co * sqi;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double vip = v(i, p);
                    const double viq = v(i, q);
                    v(i, p) = co * vip - si * viq;
                    v(i, q) = si * vip + co * viq;
                }
            }
        }
        if (std::sqrt(off_sq) <= thresh) break;
    }

    Vector values(n);
    for (std::size_t i = 0; i < n; ++i) values[i] = s(i, i);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&values](std::size_t x, std::size_t y) { return values[x] > values[y]; });

    EigResult out;
    out.values = Vector(n);
    out.vectors = Matrix(n, n);
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t j = order[k];
        out.values[k] = values[j];
        Vector col = v.col(j);
        sign_fix(col);
        for (std::size_t i = 0; i < n; ++i) out.vectors(i, k) = col[i];
    }
    return out;
}

MeanCov covariance(const Matrix& x) {
    if (x.rows == 0) throw EmptyInputError("covariance: no samples");
    if (!all_finite(x)) throw InvalidInputError("covariance: non-finite entries");
    const std::size_t n = x.rows;
    const std::size_t d = x.cols;
    MeanCov out;
    out.mean = Vector(d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) out.mean[j] += x(i, j);
    for (double& m : out.mean) m /= static_cast<double>(n);

    out.cov = Matrix(d, d);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t a = 0; a < d; ++a) {
            const double da = x(i, a) - out.mean[a];
            for (std::size_t b = a; b < d; ++b) {
                out.cov(a, b) += da * (x(i, b) - out.mean[b]);
            }
        }
    }
    for (std::size_t a = 0; a < d; ++a) {
        for (std::size_t b = a; b < d; ++b) {
            const double v = out.cov(a, b) / static_cast<double>(n);
            out.cov(a, b) = v;
            out.cov(b, a) = v;
        }
    }
    return out;
}

}  // namespace driftbench::linalg
