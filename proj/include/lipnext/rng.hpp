#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "matrix.hpp"

namespace lipnext {

/// Deterministic random source. All randomness in the library flows through
/// explicitly seeded instances of this class; there is no global state, so a
/// fixed seed reproduces every draw bit-for-bit across runs and platforms.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0, 1). 53-bit resolution, independent of
    /// std::uniform_real_distribution (whose output is implementation-defined).
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    /// Uniform integer on [0, n). Rejection-free modulo is fine here: n is
    /// tiny relative to 2^64 everywhere we use it, and determinism matters
    /// more than the ~n/2^64 bias.
    std::uint64_t uniform_index(std::uint64_t n) { return engine_() % n; }

    /// Standard normal via Box-Muller. Hand-rolled because
    /// std::normal_distribution's algorithm is implementation-defined and we
    /// need cross-platform reproducibility.
    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 6.28318530717958647692 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    Matrix gaussian_matrix(std::size_t rows, std::size_t cols, double stddev = 1.0) {
        Matrix m(rows, cols);
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < cols; ++j) m(i, j) = stddev * gaussian();
        return m;
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

/// Stable per-stream seed derivation (splitmix64 step), so independent
/// components (init, shuffling, eval noise) never share a stream.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace lipnext
