#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "lipnext/matrix_exp.hpp"
#include "lipnext/optim.hpp"
#include "lipnext/orthogonal.hpp"
#include "lipnext/rng.hpp"
#include "test_util.hpp"

using namespace lipnext;
using testutil::max_abs_diff;

TEST_CASE("riemannian gradient projects onto the tangent space", "[optim]") {
    Rng rng(31);
    const Matrix x = random_orthogonal(10, rng);
    const Matrix g = rng.gaussian_matrix(10, 10);
    const Matrix rg = riemannian_grad(x, g);

    // tangency at x: sym(x^T rg) = 0
    REQUIRE(frobenius_norm(sym(matmul_atb(x, rg))) < 1e-13);

    // at the identity, symmetric gradients vanish, skew ones pass through
    const Matrix id = Matrix::identity(6);
    const Matrix s = sym(rng.gaussian_matrix(6, 6));
    REQUIRE(frobenius_norm(riemannian_grad(id, s)) < 1e-14);
    const Matrix k = skew(rng.gaussian_matrix(6, 6)).matrix();
    REQUIRE(max_abs_diff(riemannian_grad(id, k), k) < 1e-15);
}

TEST_CASE("fast_exp branch thresholds", "[optim]") {
    REQUIRE(fast_exp_branch(0.049) == ExpBranch::order2);
    REQUIRE(fast_exp_branch(0.05) == ExpBranch::order3);
    REQUIRE(fast_exp_branch(0.249) == ExpBranch::order3);
    REQUIRE(fast_exp_branch(0.25) == ExpBranch::order4);
    REQUIRE(fast_exp_branch(0.999) == ExpBranch::order4);
    REQUIRE(fast_exp_branch(1.0) == ExpBranch::exact);
    REQUIRE(fast_exp_remainder_bound(1.0) == 0.0);
}

TEST_CASE("fast_exp stays within its truncation budget on every branch", "[optim]") {
    Rng rng(32);
    for (double target : {0.03, 0.12, 0.6}) {
        for (int trial = 0; trial < 25; ++trial) {
            Matrix raw = skew(rng.gaussian_matrix(12, 12)).matrix();
            raw *= target / frobenius_norm(raw);
            const SkewMatrix a(raw);
            const double norm = frobenius_norm(a.matrix());
            const double err = frobenius_norm(fast_exp(a) - matrix_exp(a.matrix()));
            REQUIRE(err <= fast_exp_remainder_bound(norm));
        }
    }
    // the exact branch delegates outright
    Matrix big = skew(rng.gaussian_matrix(8, 8)).matrix();
    big *= 2.5 / frobenius_norm(big);
    REQUIRE(max_abs_diff(fast_exp(SkewMatrix(big)), matrix_exp(big)) == 0.0);
}

TEST_CASE("fast_exp keeps exponentials near-orthogonal", "[optim]") {
    Rng rng(33);
    Matrix raw = skew(rng.gaussian_matrix(16, 16)).matrix();
    raw *= 0.02 / frobenius_norm(raw);
    REQUIRE(orthogonality_drift(fast_exp(SkewMatrix(raw))) < 1e-7);
}

TEST_CASE("fast_exp matrix overload rejects non-skew input", "[optim]") {
    REQUIRE_THROWS_AS(fast_exp(Matrix{{0.0, 1.0}, {0.99, 0.0}}), std::invalid_argument);
    REQUIRE_NOTHROW(fast_exp(Matrix{{0.0, 0.3}, {-0.3, 0.0}}));
}

TEST_CASE("single manifold Adam step, frozen reference", "[optim]") {
    // d=2, X0 = I, gradient [[0, .5], [-.5, 0]], lr=.1: the whole step has a
    // closed form (reference values from an independent implementation).
    OrthogonalParam x(Matrix::identity(2));
    ManifoldAdamState st = ManifoldAdamState::plain(x.value);
    AdamHyper hp;
    hp.lr = 0.1;
    const Matrix g{{0.0, 0.5}, {-0.5, 0.0}};
    const Matrix delta = manifold_adam_step(x, g, st, hp, OptimizerMode::plain_adam());

    REQUIRE(st.m(0, 1) == (1.0 - hp.beta1) * 0.5);
    REQUIRE(st.v(0, 1) == (1.0 - hp.beta2) * 0.25);
    REQUIRE(std::abs(delta(0, 1) - -9.9999998000000034e-02) < 1e-15);
    REQUIRE(delta(1, 0) == -delta(0, 1));

    // ||delta|| ~ 0.141 lands on the third-order branch; its truncation of
    // the rotation has closed-form entries.
    const Matrix want{{9.9500000020000001e-01, -9.9833331343333373e-02},
                      {9.9833331343333373e-02, 9.9500000020000001e-01}};
    REQUIRE(max_abs_diff(x.value, want) < 1e-12);
}

TEST_CASE("lookahead replays half the fast trajectory", "[optim]") {
    Rng rng(34);
    const std::size_t d = 8;
    const Matrix x0 = random_orthogonal(d, rng);

    Matrix s0 = skew(rng.gaussian_matrix(d, d)).matrix();
    s0 *= 1.0 / frobenius_norm(s0);

    // beta1=0, beta2=1 freeze the moments: m = grad, v = 1/d, so feeding
    // grad_t = X_{t-1} S0 makes every step exponent the same skew delta.
    AdamHyper hp;
    hp.lr = 1e-3;
    hp.beta1 = 0.0;
    hp.beta2 = 1.0;
    hp.lookahead_k = 3;
    OptimizerMode mode;
    mode.denominator = OptimizerMode::Denominator::literal_v;
    mode.bias_correction = false;

    OrthogonalParam x(x0);
    ManifoldAdamState st = ManifoldAdamState::stabilized(x0);

    const Matrix delta_expect = s0 * (-hp.lr * static_cast<double>(d));
    const Matrix f = fast_exp(SkewMatrix(delta_expect));

    Matrix expect_fast = x0;
    for (std::size_t t = 1; t < hp.lookahead_k; ++t) {
        manifold_adam_step(x, matmul(x.value, s0), st, hp, mode);
        expect_fast = matmul(expect_fast, f);
        REQUIRE(max_abs_diff(x.value, expect_fast) < 1e-6);
        REQUIRE(frobenius_norm(st.buffer) > 0.0);
    }

    // K-th step: slow weights advance by half the accumulated exponent and
    // the fast weights reset onto them.
    manifold_adam_step(x, matmul(x.value, s0), st, hp, mode);
    const Matrix expect_slow =
        matmul(x0, fast_exp(SkewMatrix(delta_expect * (0.5 * hp.lookahead_k))));
    REQUIRE(max_abs_diff(x.value, expect_slow) < 1e-6);
    REQUIRE(max_abs_diff(x.value, st.x_slow) == 0.0);
    REQUIRE(frobenius_norm(st.buffer) == 0.0);
    REQUIRE(st.t == 3);

    // next cycle accumulates again and resets at t = 2K
    for (int i = 0; i < 3; ++i) manifold_adam_step(x, matmul(x.value, s0), st, hp, mode);
    REQUIRE(st.t == 6);
    REQUIRE(frobenius_norm(st.buffer) == 0.0);
    REQUIRE(max_abs_diff(x.value, st.x_slow) == 0.0);
}

TEST_CASE("plain Adam frozen trajectory", "[optim]") {
    double w = 1.0;
    AdamState st(1);
    AdamHyper hp;
    hp.lr = 0.01;
    double g = 0.3;
    adam_step(&w, &g, 1, st, hp);
    REQUIRE(std::abs(w - 9.9000000033333335e-01) < 1e-15);
    g = -0.2;
    adam_step(&w, &g, 1, st, hp);
    REQUIRE(std::abs(w - 9.8855479509285971e-01) < 1e-15);
}

TEST_CASE("stabilized second moment starts at 1/d", "[optim]") {
    const Matrix x0 = Matrix::identity(4);
    const ManifoldAdamState st = ManifoldAdamState::stabilized(x0);
    REQUIRE(st.v(0, 0) == 0.25);
    REQUIRE(st.v(3, 2) == 0.25);
    REQUIRE(frobenius_norm(ManifoldAdamState::plain(x0).v) == 0.0);
}

TEST_CASE("epoch retraction snaps back to the manifold, moments untouched", "[optim]") {
    Rng rng(35);
    const std::size_t d = 12;
    OrthogonalParam x = OrthogonalParam::random(d, rng);
    ManifoldAdamState st = ManifoldAdamState::stabilized(x.value);
    AdamHyper hp;
    hp.lr = 1e-2;

    for (int i = 0; i < 60; ++i) manifold_adam_step(x, rng.gaussian_matrix(d, d), st, hp);
    const double pre = x.drift();
    REQUIRE(pre > 0.0);
    REQUIRE(pre < kDriftTolLoose);

    const Matrix m_before = st.m, v_before = st.v, b_before = st.buffer;
    epoch_retraction(x, st);
    REQUIRE(x.drift() < 1e-12);
    REQUIRE(max_abs_diff(x.value, st.x_slow) == 0.0);
    REQUIRE(max_abs_diff(st.m, m_before) == 0.0);
    REQUIRE(max_abs_diff(st.v, v_before) == 0.0);
    REQUIRE(max_abs_diff(st.buffer, b_before) == 0.0);

    // with retraction disabled the call is a no-op
    OrthogonalParam y(x.value * 1.0001);
    const Matrix y_before = y.value;
    OptimizerMode off;
    off.retraction = false;
    epoch_retraction(y, st, off);
    REQUIRE(max_abs_diff(y.value, y_before) == 0.0);
}

TEST_CASE("the optimizer descends on a Procrustes objective", "[optim]") {
    Rng rng(36);
    const std::size_t d = 16;
    OrthogonalParam x = OrthogonalParam::random(d, rng);
    // exp(skew) steps cannot change the determinant sign, so place the target
    // in the start's connected component or the optimum is unreachable
    const Matrix target = matmul(x.value, matrix_exp(SkewMatrix(rng.gaussian_matrix(d, d)).matrix()));
    ManifoldAdamState st = ManifoldAdamState::stabilized(x.value);
    AdamHyper hp;
    hp.lr = 1e-2;

    auto objective = [&] {
        const Matrix diff = x.value - target;
        return 0.5 * frobenius_norm(diff) * frobenius_norm(diff);
    };
    const double before = objective();
    for (int i = 0; i < 800; ++i) manifold_adam_step(x, x.value - target, st, hp);
    epoch_retraction(x, st);
    REQUIRE(objective() < 0.1 * before);
    REQUIRE(x.drift() < 1e-12);
}
