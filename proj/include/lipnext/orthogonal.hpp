#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "matrix.hpp"
#include "rng.hpp"
#include "svd.hpp"

namespace lipnext {

/// ||X^T X - I||_F: how far X sits from the orthogonal manifold.
inline double orthogonality_drift(const Matrix& x) {
    if (!x.square()) throw std::invalid_argument("orthogonality_drift: matrix must be square");
    Matrix g = matmul_atb(x, x);
    for (std::size_t i = 0; i < g.rows(); ++i) g(i, i) -= 1.0;
    return frobenius_norm(g);
}

/// Nearest orthogonal matrix: A = U S V^T -> U V^T. Refuses near-singular
/// input, where "nearest" is numerically meaningless.
inline Matrix polar_project(const Matrix& a) {
    if (!a.square()) throw std::invalid_argument("polar_project: matrix must be square");
    SvdResult r = svd(a);
    if (r.s.back() <= 1e-12)
        throw std::runtime_error("polar_project: input is singular to working precision (sigma_min = " +
                                 std::to_string(r.s.back()) + ")");
    return matmul_abt(r.u, r.v);
}

/// Haar-distributed orthogonal matrix: Householder QR of a Gaussian matrix
/// with the Q columns sign-corrected so R has positive diagonal (plain QR is
/// not Haar without this fix).
inline Matrix random_orthogonal(std::size_t n, Rng& rng) {
    Matrix a = rng.gaussian_matrix(n, n);
    Matrix q = Matrix::identity(n);

    std::vector<double> v(n);
    for (std::size_t k = 0; k < n; ++k) {
        double norm = 0;
        for (std::size_t i = k; i < n; ++i) norm += a(i, k) * a(i, k);
        norm = std::sqrt(norm);
        if (norm == 0.0) continue;

        const double alpha = a(k, k) >= 0 ? -norm : norm;
        double vnorm2 = 0;
        for (std::size_t i = k; i < n; ++i) {
            v[i] = a(i, k) - (i == k ? alpha : 0.0);
            vnorm2 += v[i] * v[i];
        }
        if (vnorm2 == 0.0) continue;

        // Reflect the trailing block of a and all of q: M -= 2 v (v^T M) / v'v.
        for (std::size_t j = k; j < n; ++j) {
            double dot = 0;
            for (std::size_t i = k; i < n; ++i) dot += v[i] * a(i, j);
            const double f = 2.0 * dot / vnorm2;
            for (std::size_t i = k; i < n; ++i) a(i, j) -= f * v[i];
        }
        for (std::size_t j = 0; j < n; ++j) {
            double dot = 0;
            for (std::size_t i = k; i < n; ++i) dot += v[i] * q(i, j);
            const double f = 2.0 * dot / vnorm2;
            for (std::size_t i = k; i < n; ++i) q(i, j) -= f * v[i];
        }
    }

    // q currently holds H_{n-1}..H_0, i.e. Q^T; transpose and fold in the
    // diagonal signs of R.
    Matrix result(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        const double sign = a(i, i) >= 0 ? 1.0 : -1.0;
        for (std::size_t j = 0; j < n; ++j) result(j, i) = sign * q(i, j);
    }
    return result;
}

inline constexpr double kDriftTolRetracted = 1e-6;   // right after a retraction
inline constexpr double kDriftTolLoose = 1e-3;       // between retractions

/// Square matrix constrained (softly) to the orthogonal manifold. The
/// optimizer keeps updates on the manifold up to FastExp truncation error;
/// validate() is the hard backstop that catches divergence.
struct OrthogonalParam {
    Matrix value;
    double drift_tolerance = kDriftTolLoose;

    OrthogonalParam() = default;
    explicit OrthogonalParam(Matrix v, double tol = kDriftTolLoose)
        : value(std::move(v)), drift_tolerance(tol) {
        if (!value.square())
            throw std::invalid_argument("OrthogonalParam: matrix must be square");
    }

    static OrthogonalParam random(std::size_t n, Rng& rng, double tol = kDriftTolLoose) {
        return OrthogonalParam(random_orthogonal(n, rng), tol);
    }

    std::size_t dim() const { return value.rows(); }
    double drift() const { return orthogonality_drift(value); }

    void validate(const std::string& name) const {
        const double d = drift();
        if (d > drift_tolerance)
            throw std::runtime_error("orthogonality drift " + std::to_string(d) + " on '" + name +
                                     "' exceeds tolerance " + std::to_string(drift_tolerance));
    }

    void retract() { value = polar_project(value); }
};

}  // namespace lipnext
