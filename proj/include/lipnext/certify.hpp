#pragma once

#include <cmath>
#include <limits>
#include <ostream>
#include <vector>

#include "matrix.hpp"
#include "model.hpp"
#include "tensor.hpp"

namespace lipnext {

/// pair(i, j) = ||V_i - V_j||_2: the Lipschitz constant of the logit margin
/// (f_i - f_j) with respect to the backbone features.
inline Matrix pair_lipschitz(const Matrix& v) {
    const std::size_t k = v.rows();
    Matrix pairs(k, k);
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = i + 1; j < k; ++j) {
            double s = 0;
            for (std::size_t c = 0; c < v.cols(); ++c) {
                const double d = v(i, c) - v(j, c);
                s += d * d;
            }
            const double n = std::sqrt(s);
            pairs(i, j) = n;
            pairs(j, i) = n;
        }
    return pairs;
}

struct CertRecord {
    std::size_t predicted = 0;
    bool correct = false;
    double radius = 0.0;  // input-space L2 radius within which the prediction is provably stable
};

/// Certified radius from one logit vector: the margin to each competitor
/// divided by how fast that margin can close per unit of input movement.
/// A tie at the top certifies nothing (radius 0); a competitor with an
/// identical head row can never catch up and is skipped.
inline CertRecord certify_example(const std::vector<double>& logits, std::size_t label,
                                  const Matrix& pair_lip, double backbone_bound) {
    CertRecord rec;
    std::size_t pred = 0;
    for (std::size_t j = 1; j < logits.size(); ++j)
        if (logits[j] > logits[pred]) pred = j;
    rec.predicted = pred;
    rec.correct = (pred == label);

    double radius = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < logits.size(); ++j) {
        if (j == pred) continue;
        const double margin = logits[pred] - logits[j];
        if (margin <= 0.0) {
            radius = 0.0;
            break;
        }
        const double lip = backbone_bound * pair_lip(pred, j);
        if (lip == 0.0) continue;
        radius = std::min(radius, margin / lip);
    }
    rec.radius = std::isinf(radius) ? std::numeric_limits<double>::max() : radius;
    return rec;
}

/// Certified robust accuracy: fraction which is both correct and certified at
/// radius >= eps.
inline double evaluate_cra(const std::vector<CertRecord>& records, double eps) {
    if (records.empty()) return 0.0;
    std::size_t hits = 0;
    for (const auto& r : records)
        if (r.correct && r.radius >= eps) ++hits;
    return static_cast<double>(hits) / static_cast<double>(records.size());
}

inline double clean_accuracy(const std::vector<CertRecord>& records) {
    if (records.empty()) return 0.0;
    std::size_t hits = 0;
    for (const auto& r : records)
        if (r.correct) ++hits;
    return static_cast<double>(hits) / static_cast<double>(records.size());
}

inline void write_cra_csv(std::ostream& os, const std::vector<double>& eps_list,
                          const std::vector<CertRecord>& records) {
    os << "epsilon,clean_acc,cra,n_examples\n";
    const double clean = clean_accuracy(records);
    for (double eps : eps_list)
        os << eps << ',' << clean << ',' << evaluate_cra(records, eps) << ','
           << records.size() << '\n';
}

/// Largest observed backbone expansion ratio over input pairs; any valid
/// upper bound must dominate this.
inline double empirical_lipschitz_lower_bound(const LipNextModel& model,
                                              const std::vector<Tensor>& a,
                                              const std::vector<Tensor>& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const std::vector<double> za = model.backbone(a[i]);
        const std::vector<double> zb = model.backbone(b[i]);
        double dz = 0, dx = 0;
        for (std::size_t j = 0; j < za.size(); ++j) {
            const double d = za[j] - zb[j];
            dz += d * d;
        }
        const double* pa = a[i].data();
        const double* pb = b[i].data();
        for (std::size_t j = 0; j < a[i].size(); ++j) {
            const double d = pa[j] - pb[j];
            dx += d * d;
        }
        if (dx > 0) worst = std::max(worst, std::sqrt(dz) / std::sqrt(dx));
    }
    return worst;
}

}  // namespace lipnext
