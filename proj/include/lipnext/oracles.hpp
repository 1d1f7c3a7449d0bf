#pragma once

#include <cmath>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "layers.hpp"
#include "matrix.hpp"
#include "matrix_exp.hpp"
#include "optim.hpp"
#include "orthogonal.hpp"
#include "rng.hpp"
#include "svd.hpp"

namespace lipnext {

/// Independent checkers used to validate the fast paths. Everything here is
/// written the slow, obvious way on purpose -- these are the referees, so they
/// must not share code (or mistakes) with the implementations they judge.

/// The circular cross-correlation out(i,j) = sum_{u,v} K(u,v) x(i+u, j+v)
/// (indices mod H, W) as an explicit (H*W) x (H*W) operator on single-channel
/// maps.
inline Matrix circular_conv_matrix(const Matrix& kernel, std::size_t h, std::size_t w) {
    Matrix a(h * w, h * w);
    for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j)
            for (std::size_t u = 0; u < kernel.rows(); ++u)
                for (std::size_t v = 0; v < kernel.cols(); ++v)
                    a(i * w + j, ((i + u) % h) * w + (j + v) % w) += kernel(u, v);
    return a;
}

/// Same map applied directly to an H x W input, for cross-checking the
/// operator matrix.
inline Matrix circular_conv_direct(const Matrix& kernel, const Matrix& x) {
    const std::size_t h = x.rows(), w = x.cols();
    Matrix out(h, w);
    for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j) {
            double s = 0;
            for (std::size_t u = 0; u < kernel.rows(); ++u)
                for (std::size_t v = 0; v < kernel.cols(); ++v)
                    s += kernel(u, v) * x((i + u) % h, (j + v) % w);
            out(i, j) = s;
        }
    return out;
}

/// DFT magnitudes |K_hat(p, q)| of the kernel on the H x W frequency grid.
/// A circular convolution is diagonalized by the DFT, so these are exactly
/// the singular values of circular_conv_matrix -- an independent route to
/// the same spectrum.
inline Matrix kernel_dft_magnitudes(const Matrix& kernel, std::size_t h, std::size_t w) {
    Matrix mags(h, w);
    const double tau = 6.28318530717958647692;
    for (std::size_t p = 0; p < h; ++p)
        for (std::size_t q = 0; q < w; ++q) {
            double re = 0, im = 0;
            for (std::size_t u = 0; u < kernel.rows(); ++u)
                for (std::size_t v = 0; v < kernel.cols(); ++v) {
                    const double phase = tau * (static_cast<double>(p * u) / h +
                                                static_cast<double>(q * v) / w);
                    re += kernel(u, v) * std::cos(phase);
                    im += kernel(u, v) * std::sin(phase);
                }
            mags(p, q) = std::sqrt(re * re + im * im);
        }
    return mags;
}

struct IsometryVerdict {
    bool isometry = false;
    double sigma_min = 0.0;
    double sigma_max = 0.0;
};

/// An operator is an isometry iff every singular value equals 1.
inline IsometryVerdict isometry_check(const Matrix& a, double tol = 1e-9) {
    SvdResult r = svd(a);
    IsometryVerdict v;
    v.sigma_max = r.s.front();
    v.sigma_min = r.s.back();
    v.isometry = (v.sigma_max <= 1.0 + tol) && (v.sigma_min >= 1.0 - tol);
    return v;
}

/// Materialize any linear map as a matrix by probing with basis vectors.
inline Matrix operator_matrix(const std::function<std::vector<double>(const std::vector<double>&)>& fn,
                              std::size_t dim_in) {
    std::vector<double> e(dim_in, 0.0);
    e[0] = 1.0;
    std::vector<double> col0 = fn(e);
    Matrix a(col0.size(), dim_in);
    for (std::size_t i = 0; i < col0.size(); ++i) a(i, 0) = col0[i];
    for (std::size_t j = 1; j < dim_in; ++j) {
        e[j - 1] = 0.0;
        e[j] = 1.0;
        const std::vector<double> col = fn(e);
        for (std::size_t i = 0; i < col.size(); ++i) a(i, j) = col[i];
    }
    return a;
}

struct EnumerationResult {
    std::size_t tested = 0;
    std::size_t isometries = 0;
    std::size_t dft_agreements = 0;  // kernels where SVD and DFT spectra match
};

/// Exhaustive check over every one-hot +/-1 kernel of size k x k on an
/// H x W grid: each such convolution is a (sign-flipped) translation, so all
/// must come out as exact isometries, with the DFT magnitudes confirming the
/// spectrum. Generic kernels are expected to fail this; see
/// random_kernels_non_isometric.
inline EnumerationResult theorem1_enumerate(std::size_t k, std::size_t h, std::size_t w,
                                            double tol = 1e-9) {
    EnumerationResult res;
    for (std::size_t a = 0; a < k; ++a)
        for (std::size_t b = 0; b < k; ++b)
            for (int sign : {+1, -1}) {
                Matrix kernel(k, k);
                kernel(a, b) = sign;
                ++res.tested;

                const Matrix conv = circular_conv_matrix(kernel, h, w);
                if (isometry_check(conv, tol).isometry) ++res.isometries;

                const Matrix mags = kernel_dft_magnitudes(kernel, h, w);
                SvdResult sv = svd(conv);
                std::vector<double> dft(mags.data(), mags.data() + mags.size());
                std::sort(dft.begin(), dft.end(), std::greater<double>());
                bool agree = true;
                for (std::size_t i = 0; i < sv.s.size(); ++i)
                    if (std::abs(sv.s[i] - dft[i]) > tol) agree = false;
                if (agree) ++res.dft_agreements;
            }
    return res;
}

/// Control group: dense random kernels should essentially never be isometries.
/// Returns how many of `count` random k x k kernels failed the check (all of
/// them, with probability 1).
inline std::size_t random_kernels_non_isometric(std::size_t k, std::size_t h, std::size_t w,
                                                std::size_t count, Rng& rng) {
    std::size_t failed = 0;
    for (std::size_t i = 0; i < count; ++i) {
        const Matrix kernel = rng.gaussian_matrix(k, k);
        if (!isometry_check(circular_conv_matrix(kernel, h, w)).isometry) ++failed;
    }
    return failed;
}

/// Central finite differences, the reference for every analytic gradient.
inline std::vector<double> finite_diff_grad(
    const std::function<double(const std::vector<double>&)>& f, std::vector<double> x,
    double step = 1e-5) {
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = x[i];
        x[i] = orig + step;
        const double fp = f(x);
        x[i] = orig - step;
        const double fm = f(x);
        x[i] = orig;
        g[i] = (fp - fm) / (2.0 * step);
    }
    return g;
}

inline double max_rel_error(const std::vector<double>& got, const std::vector<double>& want) {
    double num = 0, den = 0;
    for (std::size_t i = 0; i < got.size(); ++i) {
        num = std::max(num, std::abs(got[i] - want[i]));
        den = std::max(den, std::abs(want[i]));
    }
    return num / std::max(den, 1e-12);
}

/// Self-contained oracle suite for the CLI: each named check prints one
/// PASS/FAIL line. Returns true when everything passed.
inline bool verify_all(std::ostream& os, std::uint64_t seed = 7) {
    bool all = true;
    auto report = [&](const std::string& name, bool ok, const std::string& detail = "") {
        os << (ok ? "PASS  " : "FAIL  ") << name;
        if (!ok && !detail.empty()) os << "  (" << detail << ")";
        os << '\n';
        all = all && ok;
    };
    Rng rng(seed);

    {  // translations are isometries: every one-hot kernel, k up to 3, 4x4 grid
        bool ok = true;
        for (std::size_t k = 1; k <= 3; ++k) {
            const EnumerationResult r = theorem1_enumerate(k, 4, 4);
            ok = ok && r.isometries == r.tested && r.dft_agreements == r.tested;
        }
        report("one_hot_kernels_isometric", ok);
        const std::size_t failed = random_kernels_non_isometric(3, 4, 4, 8, rng);
        report("random_kernels_rejected", failed == 8,
               std::to_string(8 - failed) + " random kernels passed unexpectedly");
    }

    {  // spatial shift operator is orthogonal (circular) / non-expanding (zero)
        const std::size_t h = 4, w = 4, c = 8;
        ShiftSpec spec;
        spec.alpha = 1.0 / 8.0;
        auto apply = [&](ShiftPadding pad) {
            spec.padding = pad;
            return operator_matrix(
                [&](const std::vector<double>& v) {
                    Matrix x(h * w, c);
                    std::copy(v.begin(), v.end(), x.data());
                    Matrix s = shift_2d(x, h, w, spec);
                    return std::vector<double>(s.data(), s.data() + s.size());
                },
                h * w * c);
        };
        const IsometryVerdict circ = isometry_check(apply(ShiftPadding::circular));
        report("shift_circular_isometric", circ.isometry);
        const IsometryVerdict zero = isometry_check(apply(ShiftPadding::zero));
        report("shift_zero_nonexpanding", zero.sigma_max <= 1.0 + 1e-9);
    }

    {  // minmax is beta_abs in a rotated basis
        bool ok = true;
        for (std::size_t d : {1u, 4u}) {
            Matrix r(2 * d, 2 * d);
            const double inv = 1.0 / std::sqrt(2.0);
            for (std::size_t i = 0; i < d; ++i) {
                r(i, i) = inv;
                r(i, d + i) = -inv;
                r(d + i, i) = inv;
                r(d + i, d + i) = inv;
            }
            for (int trial = 0; trial < 64 && ok; ++trial) {
                std::vector<double> x(2 * d);
                for (auto& v : x) v = rng.gaussian();
                std::vector<double> rx(2 * d, 0.0);
                for (std::size_t i = 0; i < 2 * d; ++i)
                    for (std::size_t j = 0; j < 2 * d; ++j) rx[i] += r(i, j) * x[j];
                const std::vector<double> act = beta_abs(rx, 0.5);
                std::vector<double> back(2 * d, 0.0);
                for (std::size_t i = 0; i < 2 * d; ++i)
                    for (std::size_t j = 0; j < 2 * d; ++j) back[i] += r(j, i) * act[j];
                const std::vector<double> mm = minmax(x);
                for (std::size_t i = 0; i < 2 * d; ++i)
                    if (std::abs(back[i] - mm[i]) > 1e-12) ok = false;
            }
        }
        report("minmax_equals_rotated_abs", ok);
    }

    {  // truncated exponential stays within its per-branch error budget
        bool ok = true;
        double worst = 0.0;
        for (double target : {0.03, 0.15, 0.6, 1.5}) {
            for (int trial = 0; trial < 16; ++trial) {
                SkewMatrix a(rng.gaussian_matrix(16, 16));
                Matrix s = a.matrix();
                s *= target / frobenius_norm(s);
                const SkewMatrix scaled(s);
                const double err =
                    frobenius_norm(fast_exp(scaled) - matrix_exp(scaled.matrix()));
                const double bound = fast_exp_remainder_bound(frobenius_norm(scaled.matrix()));
                if (bound > 0 && err > bound) ok = false;
                worst = std::max(worst, bound > 0 ? err / bound : err);
            }
        }
        report("fast_exp_within_remainder_bound", ok,
               "worst error/bound ratio " + std::to_string(worst));
    }

    {  // optimizer keeps iterates on the manifold; retraction lands exactly
        const std::size_t d = 16;
        OrthogonalParam x = OrthogonalParam::random(d, rng);
        ManifoldAdamState st = ManifoldAdamState::stabilized(x.value);
        AdamHyper hp;
        hp.lr = 5e-3;
        const Matrix target = random_orthogonal(d, rng);
        for (int step = 0; step < 200; ++step) {
            const Matrix grad = x.value - target;  // d/dX of 0.5 ||X - T||^2
            manifold_adam_step(x, grad, st, hp);
        }
        const double pre = x.drift();
        epoch_retraction(x, st);
        const double post = x.drift();
        report("manifold_drift_bounded", pre < kDriftTolLoose && post < 1e-10,
               "pre " + std::to_string(pre) + " post " + std::to_string(post));
    }

    {  // analytic block gradient against central differences
        const std::size_t h = 3, w = 3, c = 4;
        ShiftSpec shift;
        shift.alpha = 0.25;
        ActivationSpec act;
        BlockParams params;
        params.r = random_orthogonal(c, rng);
        params.m = random_orthogonal(c, rng);
        params.b.assign(c, 0.0);
        params.pos.assign(h * w, 0.0);
        for (auto& v : params.b) v = 0.1 * rng.gaussian();
        for (auto& v : params.pos) v = 0.1 * rng.gaussian();
        Matrix x = rng.gaussian_matrix(h * w, c);
        Matrix probe = rng.gaussian_matrix(h * w, c);

        auto loss_at = [&](const std::vector<double>& flat) {
            Matrix xx(h * w, c);
            std::copy(flat.begin(), flat.end(), xx.data());
            Matrix z = block_forward(xx, h, w, params, shift, act);
            double s = 0;
            for (std::size_t i = 0; i < z.size(); ++i) s += z.data()[i] * probe.data()[i];
            return s;
        };
        BlockCache cache;
        Matrix z = block_forward(x, h, w, params, shift, act, &cache);
        BlockGrads grads;
        grads.r = Matrix(c, c);
        grads.m = Matrix(c, c);
        grads.b.assign(c, 0.0);
        grads.pos.assign(h * w, 0.0);
        Matrix gx = block_backward(probe, cache, params, shift, act, grads);

        const std::vector<double> point(x.data(), x.data() + x.size());
        const std::vector<double> fd = finite_diff_grad(loss_at, point);
        const double rel = max_rel_error(std::vector<double>(gx.data(), gx.data() + gx.size()), fd);
        report("block_gradient_matches_finite_diff", rel < 1e-6,
               "max rel err " + std::to_string(rel));
    }

    {  // patchify is a permutation; pooling never expands
        Matrix x = rng.gaussian_matrix(6 * 6, 3);
        const Matrix p = patchify(x, 6, 6, 2);
        const bool iso = std::abs(frobenius_norm(p) - frobenius_norm(x)) < 1e-12;
        report("patchify_isometric", iso);
        Matrix y = rng.gaussian_matrix(5 * 5, 4);
        const auto pa = l2_spatial_pool(x);
        const auto pb = l2_spatial_pool(y);
        double norm_a = 0;
        for (double v : pa) norm_a += v * v;
        report("l2_pool_nonexpanding", std::sqrt(norm_a) <= frobenius_norm(x) + 1e-12);
        (void)pb;
    }

    return all;
}

}  // namespace lipnext
