#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "layers.hpp"
#include "matrix.hpp"
#include "optim.hpp"
#include "orthogonal.hpp"
#include "rng.hpp"
#include "svd.hpp"
#include "tensor.hpp"

namespace lipnext {

/// Architecture description; everything needed to rebuild the parameter
/// shapes (and thus to validate a checkpoint against a config).
struct ModelSpec {
    std::size_t input_h = 28;
    std::size_t input_w = 28;
    std::size_t input_c = 1;
    std::size_t patch = 2;        // space-to-depth factor
    std::size_t channels = 64;    // width after the lift
    std::size_t depth = 4;        // number of blocks
    std::size_t num_classes = 10;
    ShiftSpec shift;
    ActivationSpec activation;
    bool use_pos = true;

    std::size_t grid_h() const { return input_h / patch; }
    std::size_t grid_w() const { return input_w / patch; }
    std::size_t patch_channels() const { return patch * patch * input_c; }

    void validate() const {
        if (patch == 0 || input_h % patch != 0 || input_w % patch != 0)
            throw std::invalid_argument("ModelSpec: input dims not divisible by patch");
        if (channels < patch_channels())
            throw std::invalid_argument("ModelSpec: channels below patch channels, lift cannot shrink");
        if (depth == 0) throw std::invalid_argument("ModelSpec: depth must be positive");
        if (num_classes < 2) throw std::invalid_argument("ModelSpec: need at least two classes");
        if (4 * shift.group_channels(channels) > channels)
            throw std::invalid_argument("ModelSpec: alpha too large for channel count");
        if (activation.kind == ActivationKind::minmax && channels % 2 != 0)
            throw std::invalid_argument("ModelSpec: minmax needs even channels");
    }

    bool operator==(const ModelSpec& o) const {
        return input_h == o.input_h && input_w == o.input_w && input_c == o.input_c &&
               patch == o.patch && channels == o.channels && depth == o.depth &&
               num_classes == o.num_classes && shift.alpha == o.shift.alpha &&
               shift.padding == o.shift.padding && activation.kind == o.activation.kind &&
               activation.beta == o.activation.beta && use_pos == o.use_pos;
    }
};

struct ForwardCache {
    Matrix lifted;                  // input to the first block
    std::vector<BlockCache> blocks;
    Matrix features;                // output of the last block (pool input)
    std::vector<double> pooled;
    std::vector<double> logits;
};

struct ModelGrads;

/// patchify -> channel_lift -> depth x block -> l2 pool -> affine head.
/// The backbone (everything before the head) is 1-Lipschitz as long as the
/// mixers stay orthogonal; the head is unconstrained and handled separately
/// during certification.
class LipNextModel {
public:
    ModelSpec spec;
    std::vector<BlockParams> blocks;
    Matrix head_v;
    std::vector<double> head_c;

    LipNextModel() = default;

    explicit LipNextModel(const ModelSpec& s) : spec(s) {
        spec.validate();
        const std::size_t c = spec.channels;
        const std::size_t hw = spec.grid_h() * spec.grid_w();
        blocks.resize(spec.depth);
        for (auto& b : blocks) {
            b.r = Matrix(c, c);
            b.m = Matrix(c, c);
            b.b.assign(c, 0.0);
            b.pos.assign(hw, 0.0);
        }
        head_v = Matrix(spec.num_classes, c);
        head_c.assign(spec.num_classes, 0.0);
    }

    /// Orthogonal mixers from Haar, zero biases and position embeddings,
    /// head ~ N(0, 1/C).
    void init(Rng& rng) {
        const std::size_t c = spec.channels;
        for (auto& b : blocks) {
            b.r = random_orthogonal(c, rng);
            b.m = random_orthogonal(c, rng);
        }
        const double std_v = 1.0 / std::sqrt(static_cast<double>(c));
        head_v = rng.gaussian_matrix(spec.num_classes, c, std_v);
    }

    std::vector<double> forward(const Tensor& image, ForwardCache* cache = nullptr) const {
        if (image.height() != spec.input_h || image.width() != spec.input_w ||
            image.channels() != spec.input_c)
            throw std::invalid_argument("forward: image shape mismatch");

        Matrix x(image.height() * image.width(), image.channels());
        std::copy(image.data(), image.data() + image.size(), x.data());

        Matrix feat = channel_lift(patchify(x, spec.input_h, spec.input_w, spec.patch),
                                   spec.channels);
        if (cache) {
            cache->lifted = feat;
            cache->blocks.resize(spec.depth);
        }
        const std::size_t gh = spec.grid_h(), gw = spec.grid_w();
        for (std::size_t l = 0; l < spec.depth; ++l)
            feat = block_forward(feat, gh, gw, blocks[l], spec.shift, spec.activation,
                                 cache ? &cache->blocks[l] : nullptr);

        std::vector<double> pooled = l2_spatial_pool(feat);
        std::vector<double> logits = head_forward(pooled, head_v, head_c);
        if (cache) {
            cache->features = std::move(feat);
            cache->pooled = pooled;
            cache->logits = logits;
        }
        return logits;
    }

    /// Backbone features only (pool output); what the certified radius
    /// measures distances in.
    std::vector<double> backbone(const Tensor& image) const {
        ForwardCache cache;
        forward(image, &cache);
        return cache.pooled;
    }

    Matrix backward(const std::vector<double>& grad_logits, const ForwardCache& cache,
                    ModelGrads& grads) const;

    /// Certified upper bound on the backbone's Lipschitz constant, computed
    /// from the weights as they are: product over blocks of
    /// sigma_max(M R^T) * sigma_max(R). Exactly orthogonal mixers give 1;
    /// drift inflates the bound (and shrinks radii) rather than cheating.
    double backbone_lipschitz_bound() const {
        double bound = 1.0;
        for (const auto& b : blocks)
            bound *= spectral_norm(matmul_abt(b.m, b.r)) * spectral_norm(b.r);
        return bound;
    }

    double max_drift() const {
        double worst = 0.0;
        for (const auto& b : blocks) {
            worst = std::max(worst, orthogonality_drift(b.r));
            worst = std::max(worst, orthogonality_drift(b.m));
        }
        return worst;
    }
};

struct ModelGrads {
    std::vector<BlockGrads> blocks;
    Matrix head_v;
    std::vector<double> head_c;

    ModelGrads() = default;

    explicit ModelGrads(const LipNextModel& model) {
        const std::size_t c = model.spec.channels;
        const std::size_t hw = model.spec.grid_h() * model.spec.grid_w();
        blocks.resize(model.spec.depth);
        for (auto& g : blocks) {
            g.r = Matrix(c, c);
            g.m = Matrix(c, c);
            g.b.assign(c, 0.0);
            g.pos.assign(hw, 0.0);
        }
        head_v = Matrix(model.spec.num_classes, c);
        head_c.assign(model.spec.num_classes, 0.0);
    }

    void add(const ModelGrads& o) {
        for (std::size_t l = 0; l < blocks.size(); ++l) {
            blocks[l].r += o.blocks[l].r;
            blocks[l].m += o.blocks[l].m;
            for (std::size_t i = 0; i < blocks[l].b.size(); ++i) blocks[l].b[i] += o.blocks[l].b[i];
            for (std::size_t i = 0; i < blocks[l].pos.size(); ++i)
                blocks[l].pos[i] += o.blocks[l].pos[i];
        }
        head_v += o.head_v;
        for (std::size_t i = 0; i < head_c.size(); ++i) head_c[i] += o.head_c[i];
    }

    void scale(double s) {
        for (auto& g : blocks) {
            g.r *= s;
            g.m *= s;
            for (auto& x : g.b) x *= s;
            for (auto& x : g.pos) x *= s;
        }
        head_v *= s;
        for (auto& x : head_c) x *= s;
    }
};

/// Full optimizer state for a model: manifold Adam per orthogonal mixer,
/// plain Adam for everything else. Shapes mirror ModelGrads.
struct ModelOptimizerState {
    std::vector<ManifoldAdamState> r;
    std::vector<ManifoldAdamState> m;
    std::vector<AdamState> b;
    std::vector<AdamState> pos;
    AdamState head_v;
    AdamState head_c;

    ModelOptimizerState() = default;

    /// stabilized=true seeds the manifold second moments at 1/d.
    ModelOptimizerState(const LipNextModel& model, bool stabilized) {
        for (const auto& blk : model.blocks) {
            r.push_back(stabilized ? ManifoldAdamState::stabilized(blk.r)
                                   : ManifoldAdamState::plain(blk.r));
            m.push_back(stabilized ? ManifoldAdamState::stabilized(blk.m)
                                   : ManifoldAdamState::plain(blk.m));
            b.emplace_back(blk.b.size());
            pos.emplace_back(blk.pos.size());
        }
        head_v = AdamState(model.head_v.size());
        head_c = AdamState(model.head_c.size());
    }
};

/// Reverse pass for one example; parameter gradients accumulate into `grads`.
/// Returns the gradient with respect to the input image, flattened to an
/// (H*W) x C_in matrix (used for empirical Lipschitz probes).
inline Matrix LipNextModel::backward(const std::vector<double>& grad_logits,
                                     const ForwardCache& cache, ModelGrads& grads) const {
    std::vector<double> grad_z =
        head_backward(grad_logits, cache.pooled, head_v, grads.head_v, grads.head_c);
    Matrix g = l2_spatial_pool_backward(grad_z, cache.features, cache.pooled);
    for (std::size_t l = spec.depth; l-- > 0;)
        g = block_backward(g, cache.blocks[l], blocks[l], spec.shift, spec.activation,
                           grads.blocks[l]);
    g = channel_lift_backward(g, spec.patch_channels());
    return patchify_backward(g, spec.input_h, spec.input_w, spec.patch, spec.input_c);
}

}  // namespace lipnext
