#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "lipnext/oracles.hpp"
#include "test_util.hpp"

using namespace lipnext;

TEST_CASE("conv operator matrix agrees with direct application", "[oracles]") {
    Rng rng(31);
    const Matrix kernel = rng.gaussian_matrix(3, 3);
    const Matrix x = rng.gaussian_matrix(4, 5);

    const Matrix direct = circular_conv_direct(kernel, x);
    const Matrix op = circular_conv_matrix(kernel, 4, 5);
    Matrix flat(20, 1);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 5; ++j) flat(i * 5 + j, 0) = x(i, j);
    const Matrix via_op = matmul(op, flat);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 5; ++j)
            REQUIRE(via_op(i * 5 + j, 0) == Catch::Approx(direct(i, j)).margin(1e-13));
}

TEST_CASE("dft magnitudes match the conv spectrum", "[oracles]") {
    // 1x2 kernel [0.75, 0.25] on a 1x4 grid: frequencies 0.75 + 0.25 e^{i tau q/4}
    Matrix kernel(1, 2);
    kernel(0, 0) = 0.75;
    kernel(0, 1) = 0.25;
    const double mid = std::sqrt(0.625);  // |0.75 +/- 0.25i|
    std::vector<double> expect{1.0, mid, mid, 0.5};

    const Matrix mags = kernel_dft_magnitudes(kernel, 1, 4);
    std::vector<double> got(mags.data(), mags.data() + mags.size());
    std::sort(got.begin(), got.end(), std::greater<double>());
    for (std::size_t i = 0; i < 4; ++i) REQUIRE(got[i] == Catch::Approx(expect[i]).margin(1e-12));

    const SvdResult sv = svd(circular_conv_matrix(kernel, 1, 4));
    for (std::size_t i = 0; i < 4; ++i) REQUIRE(sv.s[i] == Catch::Approx(expect[i]).margin(1e-12));

    // shifted identity kernel: flat spectrum, exact isometry
    Matrix hot(2, 2);
    hot(1, 0) = -1.0;
    const IsometryVerdict v = isometry_check(circular_conv_matrix(hot, 3, 3));
    REQUIRE(v.isometry);
    REQUIRE(v.sigma_max == Catch::Approx(1.0).margin(1e-12));
    REQUIRE(v.sigma_min == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("one-hot kernel enumeration counts", "[oracles]") {
    for (std::size_t k = 1; k <= 3; ++k) {
        const EnumerationResult r = theorem1_enumerate(k, 4, 4);
        REQUIRE(r.tested == 2 * k * k);
        REQUIRE(r.isometries == r.tested);
        REQUIRE(r.dft_agreements == r.tested);
    }
    Rng rng(33);
    REQUIRE(random_kernels_non_isometric(3, 4, 4, 8, rng) == 8);
}

TEST_CASE("operator_matrix reconstructs a linear map", "[oracles]") {
    Rng rng(34);
    const Matrix a = rng.gaussian_matrix(3, 2);
    const Matrix probed = operator_matrix(
        [&](const std::vector<double>& v) {
            std::vector<double> out(3, 0.0);
            for (std::size_t i = 0; i < 3; ++i)
                for (std::size_t j = 0; j < 2; ++j) out[i] += a(i, j) * v[j];
            return out;
        },
        2);
    REQUIRE(testutil::max_abs_diff(probed, a) == 0.0);
}

TEST_CASE("isometry check reports extreme singular values", "[oracles]") {
    REQUIRE(isometry_check(Matrix::identity(5)).isometry);
    Matrix stretched = Matrix::identity(3);
    stretched(0, 0) = 2.0;
    const IsometryVerdict v = isometry_check(stretched);
    REQUIRE_FALSE(v.isometry);
    REQUIRE(v.sigma_max == Catch::Approx(2.0).margin(1e-12));
    REQUIRE(v.sigma_min == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("central differences track analytic gradients", "[oracles]") {
    auto f = [](const std::vector<double>& x) {
        return std::sin(x[0]) * x[1] * x[1] + x[2];
    };
    const std::vector<double> x{0.3, -1.2, 0.7};
    const std::vector<double> want{std::cos(0.3) * 1.44, 2.0 * std::sin(0.3) * -1.2, 1.0};
    const std::vector<double> fd = finite_diff_grad(f, x);
    REQUIRE(max_rel_error(fd, want) < 1e-9);

    REQUIRE(max_rel_error({1e-15, 0.0}, {0.0, 0.0}) < 1e-2);  // floored denominator
}

TEST_CASE("verify_all passes every named check", "[oracles]") {
    std::ostringstream os;
    REQUIRE(verify_all(os));
    const std::string out = os.str();
    std::size_t pass = 0, pos = 0;
    while ((pos = out.find("PASS", pos)) != std::string::npos) {
        ++pass;
        pos += 4;
    }
    REQUIRE(pass == 10);
    REQUIRE(out.find("FAIL") == std::string::npos);
    for (const char* name : {"one_hot_kernels_isometric", "minmax_equals_rotated_abs",
                             "fast_exp_within_remainder_bound", "manifold_drift_bounded",
                             "block_gradient_matches_finite_diff"})
        REQUIRE(out.find(name) != std::string::npos);
}
