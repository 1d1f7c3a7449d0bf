#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "matrix.hpp"

namespace lipnext {

/// a == u * diag(s) * v^T with u (m x n, orthonormal columns), v (n x n,
/// orthogonal), s sorted descending. Thin factorization; requires m >= n
/// internally, svd() transposes for wide inputs.
struct SvdResult {
    Matrix u;
    std::vector<double> s;
    Matrix v;
};

namespace detail {

// One-sided Jacobi on the columns of w, accumulating rotations into v.
// Each rotation orthogonalizes one column pair; a sweep with no rotations
// means all pairwise inner products are at rounding level.
inline void jacobi_orthogonalize(Matrix& w, Matrix& v) {
    const std::size_t m = w.rows(), n = w.cols();
    const int max_sweeps = 60;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        bool rotated = false;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                double alpha = 0, beta = 0, gamma = 0;
                for (std::size_t i = 0; i < m; ++i) {
                    const double wp = w(i, p), wq = w(i, q);
                    alpha += wp * wp;
                    beta += wq * wq;
                    gamma += wp * wq;
                }
                if (std::abs(gamma) <= 1e-15 * std::sqrt(alpha * beta)) continue;

                const double tau = (beta - alpha) / (2.0 * gamma);
                const double t = (tau >= 0 ? 1.0 : -1.0) /
                                 (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (std::size_t i = 0; i < m; ++i) {
                    const double wp = w(i, p), wq = w(i, q);
                    w(i, p) = c * wp - s * wq;
                    w(i, q) = s * wp + c * wq;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double vp = v(i, p), vq = v(i, q);
                    v(i, p) = c * vp - s * vq;
                    v(i, q) = s * vp + c * vq;
                }
                rotated = true;
            }
        }
        if (!rotated) return;
    }
}

// Replace (near-)zero columns of u with unit vectors orthogonal to all other
// columns, so u always has orthonormal columns even for rank-deficient input.
inline void complete_orthonormal(Matrix& u, const std::vector<std::size_t>& degenerate) {
    const std::size_t m = u.rows(), n = u.cols();
    for (std::size_t col : degenerate) {
        for (std::size_t attempt = 0; attempt < m; ++attempt) {
            Matrix cand(m, 1);
            cand(attempt, 0) = 1.0;
            for (std::size_t j = 0; j < n; ++j) {
                if (j == col) continue;
                double dot = 0;
                for (std::size_t i = 0; i < m; ++i) dot += cand(i, 0) * u(i, j);
                for (std::size_t i = 0; i < m; ++i) cand(i, 0) -= dot * u(i, j);
            }
            double norm = 0;
            for (std::size_t i = 0; i < m; ++i) norm += cand(i, 0) * cand(i, 0);
            norm = std::sqrt(norm);
            if (norm > 0.5) {  // canonical basis vector survived projection
                for (std::size_t i = 0; i < m; ++i) u(i, col) = cand(i, 0) / norm;
                break;
            }
        }
    }
}

}  // namespace detail

inline SvdResult svd(const Matrix& a) {
    if (a.rows() < a.cols()) {
        SvdResult r = svd(transpose(a));
        return SvdResult{std::move(r.v), std::move(r.s), std::move(r.u)};
    }
    const std::size_t m = a.rows(), n = a.cols();

    Matrix w = a;
    Matrix v = Matrix::identity(n);
    detail::jacobi_orthogonalize(w, v);

    // Column norms of the rotated matrix are the singular values.
    std::vector<double> sigma(n);
    for (std::size_t j = 0; j < n; ++j) {
        double s = 0;
        for (std::size_t i = 0; i < m; ++i) s += w(i, j) * w(i, j);
        sigma[j] = std::sqrt(s);
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t(0));
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return sigma[i] > sigma[j]; });

    SvdResult r;
    r.u = Matrix(m, n);
    r.v = Matrix(n, n);
    r.s.resize(n);
    std::vector<std::size_t> degenerate;
    const double tiny = 1e-300;
    for (std::size_t jj = 0; jj < n; ++jj) {
        const std::size_t j = order[jj];
        r.s[jj] = sigma[j];
        if (sigma[j] > tiny) {
            for (std::size_t i = 0; i < m; ++i) r.u(i, jj) = w(i, j) / sigma[j];
        } else {
            degenerate.push_back(jj);
        }
        for (std::size_t i = 0; i < n; ++i) r.v(i, jj) = v(i, j);
    }
    if (!degenerate.empty()) detail::complete_orthonormal(r.u, degenerate);
    return r;
}

/// Largest singular value.
inline double spectral_norm(const Matrix& a) {
    SvdResult r = svd(a);
    return r.s.empty() ? 0.0 : r.s.front();
}

}  // namespace lipnext
