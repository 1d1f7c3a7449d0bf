#pragma once

#include <cmath>

#include "matrix.hpp"

namespace lipnext {

/// exp(A) by scaling-and-squaring: halve A until its Frobenius norm drops
/// below 0.25, run the Taylor series to convergence (next term below 1e-16
/// of the running result), then undo the scaling by repeated squaring.
/// For the norms this produces, Taylor converges in ~15 terms and the
/// squaring step is backward stable.
inline Matrix matrix_exp(const Matrix& a) {
    if (!a.square()) throw std::invalid_argument("matrix_exp: matrix must be square");
    const std::size_t n = a.rows();

    int squarings = 0;
    double norm = frobenius_norm(a);
    while (norm >= 0.25 && squarings < 64) {
        norm /= 2.0;
        ++squarings;
    }
    Matrix scaled = a;
    if (squarings > 0) scaled *= std::ldexp(1.0, -squarings);

    Matrix result = Matrix::identity(n);
    Matrix term = Matrix::identity(n);
    for (int k = 1; k <= 64; ++k) {
        term = matmul(term, scaled);
        term *= 1.0 / k;
        result += term;
        if (frobenius_norm(term) < 1e-16 * frobenius_norm(result)) break;
    }

    for (int s = 0; s < squarings; ++s) result = matmul(result, result);
    return result;
}

}  // namespace lipnext
