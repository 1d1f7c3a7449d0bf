#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace lipnext {

/// Dense row-major matrix. Double precision is the default throughout;
/// the float instantiation exists for forward/backward passes only.
template <class T>
class MatrixT {
public:
    MatrixT() = default;
    MatrixT(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), data_(rows * cols, T(0)) {}

    MatrixT(std::initializer_list<std::initializer_list<T>> rows) {
        rows_ = rows.size();
        cols_ = rows_ ? rows.begin()->size() : 0;
        data_.reserve(rows_ * cols_);
        for (const auto& r : rows) {
            if (r.size() != cols_)
                throw std::invalid_argument("MatrixT: ragged initializer");
            data_.insert(data_.end(), r.begin(), r.end());
        }
    }

    static MatrixT identity(std::size_t n) {
        MatrixT m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = T(1);
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool square() const { return rows_ == cols_; }

    T& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    T operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    MatrixT& operator+=(const MatrixT& o) {
        check_same_shape(o, "operator+=");
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }
    MatrixT& operator-=(const MatrixT& o) {
        check_same_shape(o, "operator-=");
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
        return *this;
    }
    MatrixT& operator*=(T s) {
        for (auto& x : data_) x *= s;
        return *this;
    }

    friend MatrixT operator+(MatrixT a, const MatrixT& b) { return a += b; }
    friend MatrixT operator-(MatrixT a, const MatrixT& b) { return a -= b; }
    friend MatrixT operator*(MatrixT a, T s) { return a *= s; }
    friend MatrixT operator*(T s, MatrixT a) { return a *= s; }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    bool all_finite() const {
        for (T x : data_)
            if (!std::isfinite(x)) return false;
        return true;
    }

private:
    void check_same_shape(const MatrixT& o, const char* what) const {
        if (rows_ != o.rows_ || cols_ != o.cols_)
            throw std::invalid_argument(std::string(what) + ": shape mismatch");
    }

    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<T> data_;
};

using Matrix = MatrixT<double>;
using Matrix32 = MatrixT<float>;

namespace detail {

// c += a * b on raw row-major buffers; ikj order so the inner loop streams
// rows of b and c (vectorizes cleanly).
template <class T>
void gemm_accumulate(const T* a, const T* b, T* c,
                     std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const T* arow = a + i * k;
        T* crow = c + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const T aip = arow[p];
            if (aip == T(0)) continue;
            const T* brow = b + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
        }
    }
}

}  // namespace detail

template <class T>
MatrixT<T> matmul(const MatrixT<T>& a, const MatrixT<T>& b) {
    if (a.cols() != b.rows())
        throw std::invalid_argument("matmul: inner dimensions disagree (" +
                                    std::to_string(a.cols()) + " vs " +
                                    std::to_string(b.rows()) + ")");
    MatrixT<T> c(a.rows(), b.cols());
    detail::gemm_accumulate(a.data(), b.data(), c.data(), a.rows(), a.cols(), b.cols());
    return c;
}

template <class T>
MatrixT<T> transpose(const MatrixT<T>& a) {
    MatrixT<T> t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    return t;
}

/// a * b^T
template <class T>
MatrixT<T> matmul_abt(const MatrixT<T>& a, const MatrixT<T>& b) {
    if (a.cols() != b.cols())
        throw std::invalid_argument("matmul_abt: inner dimensions disagree");
    return matmul(a, transpose(b));
}

/// a^T * b
template <class T>
MatrixT<T> matmul_atb(const MatrixT<T>& a, const MatrixT<T>& b) {
    if (a.rows() != b.rows())
        throw std::invalid_argument("matmul_atb: inner dimensions disagree");
    MatrixT<T> c(a.cols(), b.cols());
    const std::size_t m = a.cols(), k = a.rows(), n = b.cols();
    for (std::size_t p = 0; p < k; ++p) {
        const T* arow = a.data() + p * m;
        const T* brow = b.data() + p * n;
        for (std::size_t i = 0; i < m; ++i) {
            const T api = arow[i];
            if (api == T(0)) continue;
            T* crow = c.data() + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += api * brow[j];
        }
    }
    return c;
}

template <class T>
T frobenius_norm(const MatrixT<T>& a) {
    T s = 0;
    const T* p = a.data();
    for (std::size_t i = 0; i < a.size(); ++i) s += p[i] * p[i];
    return std::sqrt(s);
}

/// (a + a^T) / 2
template <class T>
MatrixT<T> sym(const MatrixT<T>& a) {
    if (!a.square()) throw std::invalid_argument("sym: matrix must be square");
    const std::size_t n = a.rows();
    MatrixT<T> s(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        s(i, i) = a(i, i);
        for (std::size_t j = i + 1; j < n; ++j) {
            const T v = (a(i, j) + a(j, i)) / T(2);
            s(i, j) = v;
            s(j, i) = v;
        }
    }
    return s;
}

/// Square matrix with A = -A^T enforced exactly: the strictly-upper triangle
/// is computed once and mirrored with a sign flip, so A(j,i) == -A(i,j)
/// bitwise and the diagonal is exactly zero.
class SkewMatrix {
public:
    explicit SkewMatrix(const Matrix& a) {
        if (!a.square()) throw std::invalid_argument("SkewMatrix: matrix must be square");
        const std::size_t n = a.rows();
        m_ = Matrix(n, n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) {
                const double v = (a(i, j) - a(j, i)) / 2.0;
                m_(i, j) = v;
                m_(j, i) = -v;
            }
    }

    const Matrix& matrix() const { return m_; }
    std::size_t dim() const { return m_.rows(); }

private:
    Matrix m_;
};

/// (a - a^T) / 2 as an exactly skew-symmetric matrix
inline SkewMatrix skew(const Matrix& a) { return SkewMatrix(a); }

/// Largest |symmetric part| entry; zero for exact skew-symmetry.
inline double max_symmetric_part(const Matrix& a) {
    if (!a.square()) throw std::invalid_argument("max_symmetric_part: matrix must be square");
    double worst = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = i; j < a.cols(); ++j)
            worst = std::max(worst, std::abs((a(i, j) + a(j, i)) / 2.0));
    return worst;
}

}  // namespace lipnext
