#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "matrix.hpp"

namespace lipnext {

/// Certified-margin cross entropy: every wrong logit is handicapped by
/// eps * pair_lip[y][j] (the loss the attacker could add within an eps-ball),
/// then ordinary softmax cross entropy on the adjusted logits. pair_lip is a
/// constant during differentiation -- the returned gradient is with respect
/// to the logits only.
struct MarginLossResult {
    double loss = 0.0;
    std::vector<double> grad_logits;
};

inline MarginLossResult margin_loss(const std::vector<double>& logits, std::size_t label,
                                    double eps, const Matrix& pair_lip) {
    const std::size_t k = logits.size();
    if (label >= k) throw std::invalid_argument("margin_loss: label out of range");
    if (pair_lip.rows() != k || pair_lip.cols() != k)
        throw std::invalid_argument("margin_loss: pair matrix shape mismatch");

    std::vector<double> g(k);
    for (std::size_t j = 0; j < k; ++j)
        g[j] = logits[j] + (j == label ? 0.0 : eps * pair_lip(label, j));

    double gmax = g[0];
    for (double v : g) gmax = std::max(gmax, v);
    double sum = 0.0;
    std::vector<double> p(k);
    for (std::size_t j = 0; j < k; ++j) {
        p[j] = std::exp(g[j] - gmax);
        sum += p[j];
    }
    for (auto& v : p) v /= sum;

    MarginLossResult r;
    r.loss = std::log(sum) + gmax - g[label];
    r.grad_logits = std::move(p);
    r.grad_logits[label] -= 1.0;
    return r;
}

}  // namespace lipnext
