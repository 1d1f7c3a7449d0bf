#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <numeric>
#include <ostream>
#include <thread>
#include <vector>

#include "certify.hpp"
#include "config.hpp"
#include "dataset.hpp"
#include "loss.hpp"
#include "model.hpp"
#include "optim.hpp"
#include "rng.hpp"

namespace lipnext {

/// Margin radius used by the loss at a given epoch: linear warmup from 0 to
/// 1.5x the target certification radius across the first fifth of training,
/// flat afterwards. Stepped per epoch.
inline double margin_schedule(std::size_t epoch, std::size_t total_epochs, double eps_target) {
    const double peak = 1.5 * eps_target;
    std::size_t warm = total_epochs / 5;
    if (warm == 0) warm = 1;
    if (epoch >= warm) return peak;
    return peak * static_cast<double>(epoch) / static_cast<double>(warm);
}

namespace detail {

/// Run fn(chunk_index, begin, end) over [0, n) split into `threads` contiguous
/// chunks. Chunk boundaries depend only on (n, threads), and callers reduce
/// per-chunk results in chunk order, so results are reproducible for a fixed
/// thread count -- and bit-identical runs need only threads=1.
inline void parallel_chunks(std::size_t n, std::size_t threads,
                            const std::function<void(std::size_t, std::size_t, std::size_t)>& fn) {
    if (threads <= 1 || n <= 1) {
        fn(0, 0, n);
        return;
    }
    const std::size_t t = std::min(threads, n);
    std::vector<std::thread> workers;
    workers.reserve(t);
    const std::size_t base = n / t, rem = n % t;
    std::size_t begin = 0;
    for (std::size_t i = 0; i < t; ++i) {
        const std::size_t end = begin + base + (i < rem ? 1 : 0);
        workers.emplace_back(fn, i, begin, end);
        begin = end;
    }
    for (auto& w : workers) w.join();
}

}  // namespace detail

struct EpochMetrics {
    std::size_t epoch = 0;
    double loss = 0.0;
    double train_acc = 0.0;
    double drift_max = 0.0;
    double seconds = 0.0;
};

inline void write_metrics_csv(std::ostream& os, const std::vector<EpochMetrics>& rows) {
    os << "epoch,loss,train_acc,drift,seconds\n";
    for (const auto& r : rows)
        os << r.epoch << ',' << r.loss << ',' << r.train_acc << ',' << r.drift_max << ','
           << r.seconds << '\n';
}

/// One pass over the training set: per batch, average example gradients
/// (examples fan out over threads in fixed chunks, partial sums reduced in
/// chunk order), then one optimizer step per parameter. The margin radius
/// eps_margin is fixed for the whole epoch.
inline EpochMetrics train_epoch(LipNextModel& model, ModelOptimizerState& opt,
                                const Dataset& data, const TrainConfig& cfg, double eps_margin,
                                Rng& shuffle_rng, std::size_t epoch_index) {
    const auto t0 = std::chrono::steady_clock::now();
    const OptimizerMode mode = cfg.optimizer_mode();
    const AdamHyper hp = cfg.adam_hyper();

    std::size_t n = data.size();
    if (cfg.limit_train && cfg.limit_train < n) n = cfg.limit_train;

    // Fisher-Yates with our own rng: std::shuffle's draw pattern is
    // implementation-defined and would break cross-platform determinism.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t(0));
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = shuffle_rng.uniform_index(i);
        std::swap(order[i - 1], order[j]);
    }

    const std::size_t threads = cfg.threads ? cfg.threads : 1;
    double loss_sum = 0.0;
    std::size_t correct = 0;

    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
        const std::size_t bsz = std::min(cfg.batch_size, n - start);
        const Matrix pair_lip = pair_lipschitz(model.head_v);

        std::vector<ModelGrads> partial;
        std::vector<double> partial_loss(std::min(threads, bsz), 0.0);
        std::vector<std::size_t> partial_correct(partial_loss.size(), 0);
        for (std::size_t i = 0; i < partial_loss.size(); ++i) partial.emplace_back(model);

        detail::parallel_chunks(bsz, threads, [&](std::size_t ci, std::size_t b, std::size_t e) {
            for (std::size_t k = b; k < e; ++k) {
                const std::size_t idx = order[start + k];
                ForwardCache cache;
                const std::vector<double> logits = model.forward(data.image(idx), &cache);
                const std::size_t label = data.labels[idx];
                const MarginLossResult ml = margin_loss(logits, label, eps_margin, pair_lip);
                partial_loss[ci] += ml.loss;
                std::size_t am = 0;
                for (std::size_t j = 1; j < logits.size(); ++j)
                    if (logits[j] > logits[am]) am = j;
                if (am == label) ++partial_correct[ci];
                model.backward(ml.grad_logits, cache, partial[ci]);
            }
        });

        ModelGrads grads = std::move(partial[0]);
        for (std::size_t i = 1; i < partial.size(); ++i) grads.add(partial[i]);
        grads.scale(1.0 / static_cast<double>(bsz));
        for (std::size_t i = 0; i < partial_loss.size(); ++i) {
            loss_sum += partial_loss[i];
            correct += partial_correct[i];
        }

        for (std::size_t l = 0; l < model.blocks.size(); ++l) {
            OrthogonalParam r(model.blocks[l].r);
            manifold_adam_step(r, grads.blocks[l].r, opt.r[l], hp, mode);
            model.blocks[l].r = std::move(r.value);

            OrthogonalParam m(model.blocks[l].m);
            manifold_adam_step(m, grads.blocks[l].m, opt.m[l], hp, mode);
            model.blocks[l].m = std::move(m.value);

            adam_step(model.blocks[l].b.data(), grads.blocks[l].b.data(),
                      model.blocks[l].b.size(), opt.b[l], hp);
            if (model.spec.use_pos)
                adam_step(model.blocks[l].pos.data(), grads.blocks[l].pos.data(),
                          model.blocks[l].pos.size(), opt.pos[l], hp);
        }
        adam_step(model.head_v.data(), grads.head_v.data(), model.head_v.size(), opt.head_v, hp);
        adam_step(model.head_c.data(), grads.head_c.data(), model.head_c.size(), opt.head_c, hp);
    }

    // End-of-epoch retraction snaps every mixer back onto the manifold.
    if (mode.retraction) {
        for (std::size_t l = 0; l < model.blocks.size(); ++l) {
            OrthogonalParam r(model.blocks[l].r);
            epoch_retraction(r, opt.r[l], mode);
            model.blocks[l].r = std::move(r.value);
            OrthogonalParam m(model.blocks[l].m);
            epoch_retraction(m, opt.m[l], mode);
            model.blocks[l].m = std::move(m.value);
        }
    }

    EpochMetrics em;
    em.epoch = epoch_index;
    em.loss = loss_sum / static_cast<double>(n);
    em.train_acc = static_cast<double>(correct) / static_cast<double>(n);
    em.drift_max = model.max_drift();
    em.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return em;
}

inline std::vector<EpochMetrics> fit(
    LipNextModel& model, ModelOptimizerState& opt, const Dataset& train, const TrainConfig& cfg,
    const std::function<void(const EpochMetrics&)>& on_epoch = {}) {
    Rng shuffle_rng(derive_seed(cfg.seed, 1));
    std::vector<EpochMetrics> metrics;
    for (std::size_t e = 0; e < cfg.epochs; ++e) {
        const double eps = margin_schedule(e, cfg.epochs, cfg.eps_train);
        EpochMetrics em = train_epoch(model, opt, train, cfg, eps, shuffle_rng, e);
        metrics.push_back(em);
        if (on_epoch) on_epoch(em);
    }
    return metrics;
}

struct EvalResult {
    double accuracy = 0.0;
    double backbone_bound = 1.0;
    std::vector<CertRecord> records;
};

/// Forward-only pass over a test set, producing per-example certification
/// records. Chunked the same deterministic way as training.
inline EvalResult evaluate(const LipNextModel& model, const Dataset& data, std::size_t limit,
                           std::size_t threads) {
    EvalResult res;
    std::size_t n = data.size();
    if (limit && limit < n) n = limit;
    res.records.resize(n);
    res.backbone_bound = model.backbone_lipschitz_bound();
    const Matrix pair_lip = pair_lipschitz(model.head_v);

    detail::parallel_chunks(n, threads ? threads : 1,
                            [&](std::size_t, std::size_t b, std::size_t e) {
                                for (std::size_t i = b; i < e; ++i) {
                                    const std::vector<double> logits = model.forward(data.image(i));
                                    res.records[i] = certify_example(logits, data.labels[i],
                                                                     pair_lip, res.backbone_bound);
                                }
                            });

    std::size_t correct = 0;
    for (const auto& r : res.records)
        if (r.correct) ++correct;
    res.accuracy = n ? static_cast<double>(correct) / static_cast<double>(n) : 0.0;
    return res;
}

}  // namespace lipnext
