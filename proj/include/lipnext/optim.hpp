#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "matrix.hpp"
#include "matrix_exp.hpp"
#include "orthogonal.hpp"

namespace lipnext {

/// Projection of an ambient gradient onto the tangent space at x:
/// grad = g - x * sym(x^T g).
inline Matrix riemannian_grad(const Matrix& x, const Matrix& g) {
    if (x.rows() != g.rows() || x.cols() != g.cols())
        throw std::invalid_argument("riemannian_grad: shape mismatch");
    return g - matmul(x, sym(matmul_atb(x, g)));
}

enum class ExpBranch { order2, order3, order4, exact };

inline ExpBranch fast_exp_branch(double frob_norm) {
    if (frob_norm < 0.05) return ExpBranch::order2;
    if (frob_norm < 0.25) return ExpBranch::order3;
    if (frob_norm < 1.0) return ExpBranch::order4;
    return ExpBranch::exact;
}

/// Guaranteed ceiling on ||fast_exp(A) - exp(A)||_F for the branch chosen at
/// this norm: first omitted Taylor term over the factorial, with a geometric
/// correction for the tail (term ratio is at most norm/(order+2)).
inline double fast_exp_remainder_bound(double frob_norm) {
    switch (fast_exp_branch(frob_norm)) {
        case ExpBranch::order2:
            return std::pow(frob_norm, 3) / 6.0 / (1.0 - frob_norm / 4.0);
        case ExpBranch::order3:
            return std::pow(frob_norm, 4) / 24.0 / (1.0 - frob_norm / 5.0);
        case ExpBranch::order4:
            return std::pow(frob_norm, 5) / 120.0 / (1.0 - frob_norm / 6.0);
        case ExpBranch::exact:
            return 0.0;
    }
    return 0.0;
}

/// Truncated exponential with norm-adaptive order. The optimizer's step
/// matrices are tiny in norm almost always, so two or three Taylor terms give
/// error far below the drift budget; the exact path only triggers on
/// pathological steps.
inline Matrix fast_exp(const SkewMatrix& a) {
    const Matrix& s = a.matrix();
    const double norm = frobenius_norm(s);
    const ExpBranch branch = fast_exp_branch(norm);
    if (branch == ExpBranch::exact) return matrix_exp(s);

    const std::size_t n = s.rows();
    Matrix result = Matrix::identity(n);
    result += s;
    Matrix power = matmul(s, s);
    result += power * 0.5;
    if (branch == ExpBranch::order2) return result;
    power = matmul(power, s);
    result += power * (1.0 / 6.0);
    if (branch == ExpBranch::order3) return result;
    power = matmul(power, s);
    result += power * (1.0 / 24.0);
    return result;
}

/// Overload for raw matrices; rejects input whose symmetric part is beyond
/// rounding noise, since the truncation analysis only holds for skew input.
inline Matrix fast_exp(const Matrix& a) {
    if (max_symmetric_part(a) > 1e-12 * (1.0 + frobenius_norm(a)))
        throw std::invalid_argument("fast_exp: input is not skew-symmetric");
    return fast_exp(SkewMatrix(a));
}

struct AdamHyper {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::size_t lookahead_k = 5;
};

struct OptimizerMode {
    enum class Denominator { sqrt_v, literal_v };
    Denominator denominator = Denominator::sqrt_v;
    bool bias_correction = true;
    bool lookahead = true;
    bool retraction = true;

    /// Moment-only manifold Adam: no slow weights, no periodic projection.
    static OptimizerMode plain_adam() {
        return OptimizerMode{Denominator::sqrt_v, true, false, false};
    }
    static OptimizerMode stabilized() { return OptimizerMode{}; }
};

/// Per-parameter optimizer state for one orthogonal matrix. Moments live in
/// the ambient space; the lookahead buffer accumulates the (skew) step
/// exponents between slow updates, so the slow step replays half the fast
/// trajectory in a single exponential.
struct ManifoldAdamState {
    Matrix m;       // first moment of the Riemannian gradient
    Matrix v;       // second moment, elementwise
    Matrix buffer;  // accumulated skew exponents since the last slow step
    Matrix x_slow;  // slow weights (lookahead anchor)
    std::int64_t t = 0;

    /// v starts at zero: classic Adam moments.
    static ManifoldAdamState plain(const Matrix& x0) {
        ManifoldAdamState s;
        const std::size_t d = x0.rows();
        s.m = Matrix(d, d);
        s.v = Matrix(d, d);
        s.buffer = Matrix(d, d);
        s.x_slow = x0;
        return s;
    }

    /// v starts at the constant 1/d, which keeps the very first steps at the
    /// same scale as the steady state instead of 1/eps times larger.
    static ManifoldAdamState stabilized(const Matrix& x0) {
        ManifoldAdamState s = plain(x0);
        s.v.fill(1.0 / static_cast<double>(x0.rows()));
        return s;
    }
};

/// One optimizer step on an orthogonal parameter. Handles both variants:
/// mode.lookahead/retraction off with zero-initialized v gives the plain
/// manifold Adam; the defaults give the stabilized optimizer. Returns the
/// skew exponent actually applied to x (before any slow-weight reset), which
/// tests use to check trajectories in closed form.
inline Matrix manifold_adam_step(OrthogonalParam& x, const Matrix& euclid_grad,
                                 ManifoldAdamState& st, const AdamHyper& hp,
                                 const OptimizerMode& mode = OptimizerMode::stabilized()) {
    const std::size_t d = x.dim();
    if (euclid_grad.rows() != d || euclid_grad.cols() != d)
        throw std::invalid_argument("manifold_adam_step: gradient shape mismatch");

    st.t += 1;
    const Matrix rgrad = riemannian_grad(x.value, euclid_grad);

    double* mp = st.m.data();
    double* vp = st.v.data();
    const double* gp = rgrad.data();
    for (std::size_t i = 0; i < d * d; ++i) {
        mp[i] = hp.beta1 * mp[i] + (1.0 - hp.beta1) * gp[i];
        vp[i] = hp.beta2 * vp[i] + (1.0 - hp.beta2) * gp[i] * gp[i];
    }

    Matrix dir(d, d);
    double* dp = dir.data();
    if (mode.denominator == OptimizerMode::Denominator::sqrt_v) {
        double mc = 1.0, vc = 1.0;
        if (mode.bias_correction) {
            mc = 1.0 - std::pow(hp.beta1, static_cast<double>(st.t));
            vc = 1.0 - std::pow(hp.beta2, static_cast<double>(st.t));
        }
        for (std::size_t i = 0; i < d * d; ++i)
            dp[i] = (mp[i] / mc) / (std::sqrt(vp[i] / vc) + hp.eps);
    } else {
        for (std::size_t i = 0; i < d * d; ++i) dp[i] = mp[i] / vp[i];
    }

    // Re-skew after the elementwise division: x^T dir is not skew even when
    // the moments started from tangent gradients, and a non-skew exponent
    // would walk off the manifold at first order.
    SkewMatrix delta(matmul_atb(x.value, dir) * (-hp.lr));
    x.value = matmul(x.value, fast_exp(delta));

    if (mode.lookahead) {
        st.buffer += delta.matrix();
        if (st.t % static_cast<std::int64_t>(hp.lookahead_k) == 0) {
            st.x_slow = matmul(st.x_slow, fast_exp(SkewMatrix(st.buffer * 0.5)));
            x.value = st.x_slow;
            st.buffer.fill(0.0);
        }
    }
    return delta.matrix();
}

/// End-of-epoch polar retraction: snap x (and the lookahead anchor) back to
/// the manifold exactly. Moments and the lookahead buffer are left alone;
/// they live in spaces that the projection barely perturbs.
inline void epoch_retraction(OrthogonalParam& x, ManifoldAdamState& st,
                             const OptimizerMode& mode = OptimizerMode::stabilized()) {
    if (!mode.retraction) return;
    x.retract();
    st.x_slow = x.value;
}

/// Standard Adam for unconstrained parameters (biases, position embeddings,
/// the classifier head).
struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::int64_t t = 0;

    explicit AdamState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

inline void adam_step(double* w, const double* g, std::size_t n, AdamState& st,
                      const AdamHyper& hp) {
    if (st.m.size() != n)
        throw std::invalid_argument("adam_step: state size mismatch");
    st.t += 1;
    const double mc = 1.0 - std::pow(hp.beta1, static_cast<double>(st.t));
    const double vc = 1.0 - std::pow(hp.beta2, static_cast<double>(st.t));
    for (std::size_t i = 0; i < n; ++i) {
        st.m[i] = hp.beta1 * st.m[i] + (1.0 - hp.beta1) * g[i];
        st.v[i] = hp.beta2 * st.v[i] + (1.0 - hp.beta2) * g[i] * g[i];
        w[i] -= hp.lr * (st.m[i] / mc) / (std::sqrt(st.v[i] / vc) + hp.eps);
    }
}

}  // namespace lipnext
