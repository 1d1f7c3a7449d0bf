#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "lipnext/dataset.hpp"
#include "lipnext/matrix.hpp"
#include "lipnext/rng.hpp"

namespace testutil {

/// Reference product, written as the textbook triple loop on purpose: the
/// judge for the fast kernels must not share their loop structure.
inline lipnext::Matrix naive_matmul(const lipnext::Matrix& a, const lipnext::Matrix& b) {
    lipnext::Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double s = 0;
            for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
            c(i, j) = s;
        }
    return c;
}

inline double max_abs_diff(const lipnext::Matrix& a, const lipnext::Matrix& b) {
    double worst = 0;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j)
            worst = std::max(worst, std::abs(a(i, j) - b(i, j)));
    return worst;
}

/// Ten-class procedural image set: each class is a fixed smooth template,
/// samples add small pixel noise. Linearly well-separated, so a few epochs
/// must reach high accuracy -- a fast, self-contained stand-in for file-based
/// data in trainer tests.
inline lipnext::Dataset synthetic_dataset(std::size_t n, std::size_t h, std::size_t w,
                                          std::uint64_t seed, double noise = 12.0) {
    lipnext::Rng rng(seed);
    const std::size_t classes = 10;
    std::vector<std::vector<double>> templates(classes, std::vector<double>(h * w));
    for (std::size_t k = 0; k < classes; ++k)
        for (std::size_t i = 0; i < h; ++i)
            for (std::size_t j = 0; j < w; ++j) {
                const double fx = 6.28318530717958647692 * static_cast<double>(i) / h;
                const double fy = 6.28318530717958647692 * static_cast<double>(j) / w;
                const double kk = static_cast<double>(k);
                templates[k][i * w + j] =
                    128.0 + 90.0 * std::sin(fx * (1.0 + kk * 0.35) + kk) *
                                std::cos(fy * (1.0 + kk * 0.2) - 0.7 * kk);
            }

    lipnext::Dataset ds;
    ds.h = h;
    ds.w = w;
    ds.c = 1;
    ds.pixels.reserve(n * h * w);
    ds.labels.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t label = i % classes;
        ds.labels.push_back(static_cast<std::uint8_t>(label));
        for (double t : templates[label]) {
            double v = t + noise * rng.gaussian();
            v = std::min(255.0, std::max(0.0, v));
            ds.pixels.push_back(static_cast<std::uint8_t>(v + 0.5));
        }
    }
    return ds;
}

}  // namespace testutil
