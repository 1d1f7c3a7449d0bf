#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace lipnext {

/// H x W x C feature map, channel fastest. The (h*W + w) flattening makes a
/// feature map interchangeable with an (H*W) x C row-major matrix, which is
/// how the block applies its channel mixers.
template <class T>
class TensorT {
public:
    TensorT() = default;
    TensorT(std::size_t h, std::size_t w, std::size_t c)
        : h_(h), w_(w), c_(c), data_(h * w * c, T(0)) {}

    std::size_t height() const { return h_; }
    std::size_t width() const { return w_; }
    std::size_t channels() const { return c_; }
    std::size_t size() const { return data_.size(); }

    T& operator()(std::size_t h, std::size_t w, std::size_t c) {
        return data_[(h * w_ + w) * c_ + c];
    }
    T operator()(std::size_t h, std::size_t w, std::size_t c) const {
        return data_[(h * w_ + w) * c_ + c];
    }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    TensorT& operator+=(const TensorT& o) {
        check_same_shape(o, "operator+=");
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }
    TensorT& operator-=(const TensorT& o) {
        check_same_shape(o, "operator-=");
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
        return *this;
    }
    TensorT& operator*=(T s) {
        for (auto& x : data_) x *= s;
        return *this;
    }
    friend TensorT operator-(TensorT a, const TensorT& b) { return a -= b; }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

private:
    void check_same_shape(const TensorT& o, const char* what) const {
        if (h_ != o.h_ || w_ != o.w_ || c_ != o.c_)
            throw std::invalid_argument(std::string(what) + ": shape mismatch");
    }

    std::size_t h_ = 0;
    std::size_t w_ = 0;
    std::size_t c_ = 0;
    std::vector<T> data_;
};

using Tensor = TensorT<double>;
using Tensor32 = TensorT<float>;

template <class T>
T l2_norm(const TensorT<T>& t) {
    T s = 0;
    const T* p = t.data();
    for (std::size_t i = 0; i < t.size(); ++i) s += p[i] * p[i];
    return std::sqrt(s);
}

template <class T>
T l2_distance(const TensorT<T>& a, const TensorT<T>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("l2_distance: shape mismatch");
    T s = 0;
    const T* pa = a.data();
    const T* pb = b.data();
    for (std::size_t i = 0; i < a.size(); ++i) {
        const T d = pa[i] - pb[i];
        s += d * d;
    }
    return std::sqrt(s);
}

}  // namespace lipnext
