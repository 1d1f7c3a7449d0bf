#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "lipnext/certify.hpp"
#include "lipnext/loss.hpp"
#include "lipnext/model.hpp"
#include "lipnext/oracles.hpp"
#include "lipnext/rng.hpp"
#include "test_util.hpp"

using namespace lipnext;

TEST_CASE("pair matrix holds row-difference norms", "[certify]") {
    const Matrix v{{1.0, 0.0}, {0.0, 1.0}, {1.0, 1.0}};
    const Matrix p = pair_lipschitz(v);
    REQUIRE(p(0, 0) == 0.0);
    REQUIRE(std::abs(p(0, 1) - std::sqrt(2.0)) < 1e-15);
    REQUIRE(p(0, 2) == 1.0);
    REQUIRE(p(1, 2) == 1.0);
    REQUIRE(p(2, 1) == p(1, 2));
}

TEST_CASE("certified radius is the tightest margin ratio", "[certify]") {
    const Matrix pl{{0.0, std::sqrt(2.0), 1.0}, {std::sqrt(2.0), 0.0, 1.0}, {1.0, 1.0, 0.0}};
    const CertRecord r = certify_example({3.0, 1.0, 0.5}, 0, pl, 2.0);
    REQUIRE(r.predicted == 0);
    REQUIRE(r.correct);
    // competitors: (3-1)/(2*sqrt2) vs (3-0.5)/(2*1); the first is tighter
    REQUIRE(std::abs(r.radius - 2.0 / (2.0 * std::sqrt(2.0))) < 1e-15);

    // mispredicted examples still get a radius for what was predicted
    const CertRecord wrong = certify_example({3.0, 1.0, 0.5}, 1, pl, 2.0);
    REQUIRE_FALSE(wrong.correct);
    REQUIRE(wrong.radius == r.radius);
}

TEST_CASE("top-logit ties certify nothing", "[certify]") {
    const Matrix pl{{0.0, 1.0}, {1.0, 0.0}};
    const CertRecord r = certify_example({2.0, 2.0}, 0, pl, 1.0);
    REQUIRE(r.radius == 0.0);
}

TEST_CASE("identical head rows cannot flip and are skipped", "[certify]") {
    // classes 0 and 1 share a head row: their margin is constant
    const Matrix pl{{0.0, 0.0, 2.0}, {0.0, 0.0, 2.0}, {2.0, 2.0, 0.0}};
    const CertRecord r = certify_example({3.0, 1.0, 2.0}, 0, pl, 1.0);
    REQUIRE(std::abs(r.radius - (3.0 - 2.0) / 2.0) < 1e-15);
}

TEST_CASE("certified robust accuracy counts correct-and-certified", "[certify]") {
    std::vector<CertRecord> recs(4);
    recs[0] = {0, true, 0.5};
    recs[1] = {1, true, 0.1};
    recs[2] = {2, false, 9.0};  // certified but wrong: never counts
    recs[3] = {3, true, 0.0};
    REQUIRE(clean_accuracy(recs) == 0.75);
    REQUIRE(evaluate_cra(recs, 0.0) == 0.75);
    REQUIRE(evaluate_cra(recs, 0.05) == 0.5);
    REQUIRE(evaluate_cra(recs, 0.3) == 0.25);
    REQUIRE(evaluate_cra(recs, 1.0) == 0.0);

    // monotone non-increasing in the radius
    double prev = 1.0;
    for (double eps : {0.0, 0.01, 0.1, 0.2, 0.6, 2.0}) {
        const double cra = evaluate_cra(recs, eps);
        REQUIRE(cra <= prev);
        prev = cra;
    }
}

TEST_CASE("cra csv layout", "[certify]") {
    std::vector<CertRecord> recs(2);
    recs[0] = {0, true, 0.5};
    recs[1] = {1, false, 0.0};
    std::ostringstream os;
    write_cra_csv(os, {0.0, 0.25}, recs);
    REQUIRE(os.str() == "epsilon,clean_acc,cra,n_examples\n0,0.5,0.5,2\n0.25,0.5,0.5,2\n");
}

TEST_CASE("margin loss reference value and gradient", "[loss]") {
    const Matrix pl{{0.0, 2.0, 1.5}, {2.0, 0.0, 1.0}, {1.5, 1.0, 0.0}};
    const MarginLossResult r = margin_loss({1.2, -0.3, 0.4}, 0, 0.1, pl);
    // adjusted logits (1.2, -0.1, 0.55); frozen reference from an independent
    // softmax implementation
    REQUIRE(std::abs(r.loss - 5.8476965708256290e-01) < 1e-15);
    REQUIRE(std::abs(r.grad_logits[0] - (5.5723420198226215e-01 - 1.0)) < 1e-15);
    REQUIRE(std::abs(r.grad_logits[1] - 1.5186403620610303e-01) < 1e-15);
    REQUIRE(std::abs(r.grad_logits[2] - 2.9090176181163491e-01) < 1e-15);

    // gradient rows sum to zero and push the true logit up
    double s = 0;
    for (double g : r.grad_logits) s += g;
    REQUIRE(std::abs(s) < 1e-15);
    REQUIRE(r.grad_logits[0] < 0.0);
}

TEST_CASE("zero margin radius reduces to plain cross entropy", "[loss]") {
    const Matrix pl{{0.0, 3.0}, {3.0, 0.0}};
    const Matrix zero(2, 2);
    const MarginLossResult a = margin_loss({0.7, -0.2}, 1, 0.0, pl);
    const MarginLossResult b = margin_loss({0.7, -0.2}, 1, 5.0, zero);
    REQUIRE(a.loss == b.loss);
    REQUIRE(a.grad_logits == b.grad_logits);
}

TEST_CASE("margin loss gradient matches finite differences", "[loss]") {
    Rng rng(61);
    const Matrix pl{{0.0, 0.8, 1.1}, {0.8, 0.0, 0.6}, {1.1, 0.6, 0.0}};
    for (std::size_t label = 0; label < 3; ++label) {
        std::vector<double> logits{rng.gaussian(), rng.gaussian(), rng.gaussian()};
        const MarginLossResult r = margin_loss(logits, label, 0.25, pl);
        const std::vector<double> fd = finite_diff_grad(
            [&](const std::vector<double>& l) { return margin_loss(l, label, 0.25, pl).loss; },
            logits);
        REQUIRE(max_rel_error(r.grad_logits, fd) < 1e-8);
    }
}

TEST_CASE("larger margin radius raises the loss", "[loss]") {
    const Matrix pl{{0.0, 1.0}, {1.0, 0.0}};
    double prev = -1.0;
    for (double eps : {0.0, 0.1, 0.5, 1.0}) {
        const double loss = margin_loss({1.0, 0.0}, 0, eps, pl).loss;
        REQUIRE(loss > prev);
        prev = loss;
    }
}

TEST_CASE("empirical expansion never exceeds the certified bound", "[certify]") {
    ModelSpec spec;
    spec.input_h = 4;
    spec.input_w = 4;
    spec.input_c = 1;
    spec.patch = 2;
    spec.channels = 8;
    spec.depth = 2;
    spec.shift.alpha = 0.125;
    LipNextModel model(spec);
    Rng rng(62);
    model.init(rng);

    const double bound = model.backbone_lipschitz_bound();
    REQUIRE(std::abs(bound - 1.0) < 1e-10);

    std::vector<Tensor> a, b;
    for (int i = 0; i < 50; ++i) {
        Tensor ta(4, 4, 1), tb(4, 4, 1);
        for (std::size_t k = 0; k < ta.size(); ++k) {
            ta.data()[k] = rng.uniform();
            tb.data()[k] = rng.uniform();
        }
        a.push_back(ta);
        b.push_back(tb);
    }
    const double empirical = empirical_lipschitz_lower_bound(model, a, b);
    REQUIRE(empirical > 0.0);
    REQUIRE(empirical <= bound + 1e-9);
}
