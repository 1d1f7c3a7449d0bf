#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "matrix.hpp"
#include "tensor.hpp"

namespace lipnext {

enum class ShiftPadding { circular, zero };

/// Spatial shift: alpha controls the fraction of channels per shifted group.
/// Both paddings keep the operator norm at 1 -- circular shifts are
/// permutations, zero-padded shifts are partial isometries.
struct ShiftSpec {
    double alpha = 1.0 / 16.0;
    ShiftPadding padding = ShiftPadding::circular;

    std::size_t group_channels(std::size_t c) const {
        return static_cast<std::size_t>(alpha * static_cast<double>(c));
    }
};

enum class ActivationKind { beta_abs, minmax };

struct ActivationSpec {
    ActivationKind kind = ActivationKind::beta_abs;
    double beta = 0.75;

    std::size_t abs_channels(std::size_t c) const {
        return static_cast<std::size_t>(beta * static_cast<double>(c));
    }
};

namespace detail {

// Roll rows of the flattened (H*W) x C map along one spatial axis for one
// channel band. shift=+1 reads from the previous index (out[i] = in[i-1]),
// shift=-1 from the next. Zero padding drops the wrapped entry instead.
inline void roll_band(const Matrix& in, Matrix& out, std::size_t h, std::size_t w,
                      std::size_t c0, std::size_t c1, int axis, int shift,
                      ShiftPadding padding) {
    for (std::size_t i = 0; i < h; ++i) {
        for (std::size_t j = 0; j < w; ++j) {
            long src_i = static_cast<long>(i);
            long src_j = static_cast<long>(j);
            bool wrapped = false;
            if (axis == 0) {
                src_i -= shift;
                if (src_i < 0) {
                    src_i += static_cast<long>(h);
                    wrapped = true;
                } else if (src_i >= static_cast<long>(h)) {
                    src_i -= static_cast<long>(h);
                    wrapped = true;
                }
            } else {
                src_j -= shift;
                if (src_j < 0) {
                    src_j += static_cast<long>(w);
                    wrapped = true;
                } else if (src_j >= static_cast<long>(w)) {
                    src_j -= static_cast<long>(w);
                    wrapped = true;
                }
            }
            const std::size_t dst = i * w + j;
            if (wrapped && padding == ShiftPadding::zero) {
                for (std::size_t c = c0; c < c1; ++c) out(dst, c) = 0.0;
            } else {
                const std::size_t src =
                    static_cast<std::size_t>(src_i) * w + static_cast<std::size_t>(src_j);
                for (std::size_t c = c0; c < c1; ++c) out(dst, c) = in(src, c);
            }
        }
    }
}

}  // namespace detail

/// 2D spatial shift on an (H*W) x C map. Channel layout: the first C - 4g
/// channels pass through, then four bands of g channels roll by +1/-1 along
/// each spatial axis (g = floor(alpha * C)).
inline Matrix shift_2d(const Matrix& x, std::size_t h, std::size_t w, const ShiftSpec& spec) {
    if (x.rows() != h * w) throw std::invalid_argument("shift_2d: rows != H*W");
    const std::size_t c = x.cols();
    const std::size_t g = spec.group_channels(c);
    if (4 * g > c) throw std::invalid_argument("shift_2d: 4*floor(alpha*C) exceeds C");

    Matrix out = x;  // identity band copied wholesale
    const std::size_t base = c - 4 * g;
    detail::roll_band(x, out, h, w, base, base + g, 0, +1, spec.padding);
    detail::roll_band(x, out, h, w, base + g, base + 2 * g, 0, -1, spec.padding);
    detail::roll_band(x, out, h, w, base + 2 * g, base + 3 * g, 1, +1, spec.padding);
    detail::roll_band(x, out, h, w, base + 3 * g, base + 4 * g, 1, -1, spec.padding);
    return out;
}

/// Adjoint of shift_2d: every band rolls the opposite way (for circular
/// padding this is the inverse permutation; for zero padding, the transpose
/// of the partial isometry, which is the opposite zero-padded shift).
inline Matrix shift_2d_adjoint(const Matrix& g_out, std::size_t h, std::size_t w,
                               const ShiftSpec& spec) {
    Matrix out = g_out;
    const std::size_t c = g_out.cols();
    const std::size_t gch = spec.group_channels(c);
    if (4 * gch > c) throw std::invalid_argument("shift_2d_adjoint: 4*floor(alpha*C) exceeds C");
    const std::size_t base = c - 4 * gch;
    detail::roll_band(g_out, out, h, w, base, base + gch, 0, -1, spec.padding);
    detail::roll_band(g_out, out, h, w, base + gch, base + 2 * gch, 0, +1, spec.padding);
    detail::roll_band(g_out, out, h, w, base + 2 * gch, base + 3 * gch, 1, -1, spec.padding);
    detail::roll_band(g_out, out, h, w, base + 3 * gch, base + 4 * gch, 1, +1, spec.padding);
    return out;
}

/// Tensor convenience wrappers (the flattened layout matches exactly).
inline Tensor shift_2d(const Tensor& x, const ShiftSpec& spec) {
    Matrix m(x.height() * x.width(), x.channels());
    std::copy(x.data(), x.data() + x.size(), m.data());
    Matrix s = shift_2d(m, x.height(), x.width(), spec);
    Tensor out(x.height(), x.width(), x.channels());
    std::copy(s.data(), s.data() + s.size(), out.data());
    return out;
}

/// 1D spatial shift on a d x n sequence (d channels, n positions): the first
/// g = floor(alpha*d) channel rows roll right by one position, the next g
/// roll left, the rest pass through.
inline Matrix shift_1d(const Matrix& x, const ShiftSpec& spec) {
    const std::size_t d = x.rows(), n = x.cols();
    const std::size_t g = spec.group_channels(d);
    if (2 * g > d) throw std::invalid_argument("shift_1d: 2*floor(alpha*d) exceeds d");
    Matrix out = x;
    for (std::size_t r = 0; r < 2 * g; ++r) {
        const int shift = r < g ? +1 : -1;
        for (std::size_t j = 0; j < n; ++j) {
            long src = static_cast<long>(j) - shift;
            bool wrapped = false;
            if (src < 0) {
                src += static_cast<long>(n);
                wrapped = true;
            } else if (src >= static_cast<long>(n)) {
                src -= static_cast<long>(n);
                wrapped = true;
            }
            out(r, j) = (wrapped && spec.padding == ShiftPadding::zero)
                            ? 0.0
                            : x(r, static_cast<std::size_t>(src));
        }
    }
    return out;
}

/// Gradient-preserving activations. Both preserve the norm of each position's
/// channel vector exactly, so they cost nothing against the Lipschitz budget.
/// beta_abs: |.| on the first floor(beta*C) channels, identity on the rest.
/// minmax: sorts each channel pair (x[i], x[i+C/2]) into (max, min).
inline Matrix activation_forward(const Matrix& pre, const ActivationSpec& spec) {
    const std::size_t rows = pre.rows(), c = pre.cols();
    Matrix out = pre;
    if (spec.kind == ActivationKind::beta_abs) {
        const std::size_t nabs = spec.abs_channels(c);
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < nabs; ++j) out(i, j) = std::abs(pre(i, j));
    } else {
        if (c % 2 != 0) throw std::invalid_argument("minmax: channel count must be even");
        const std::size_t half = c / 2;
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < half; ++j) {
                const double a = pre(i, j), b = pre(i, j + half);
                out(i, j) = a >= b ? a : b;
                out(i, j + half) = a >= b ? b : a;
            }
    }
    return out;
}

/// Chain rule through the activation given the pre-activation values.
/// Subgradient convention at kinks: sign(0) = +1 for abs, and an exact tie in
/// a minmax pair routes max to the first element. Both choices are fixed so
/// backward passes are deterministic.
inline Matrix activation_backward(const Matrix& grad_out, const Matrix& pre,
                                  const ActivationSpec& spec) {
    const std::size_t rows = pre.rows(), c = pre.cols();
    Matrix g = grad_out;
    if (spec.kind == ActivationKind::beta_abs) {
        const std::size_t nabs = spec.abs_channels(c);
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < nabs; ++j)
                if (pre(i, j) < 0.0) g(i, j) = -g(i, j);
    } else {
        const std::size_t half = c / 2;
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < half; ++j)
                if (pre(i, j) < pre(i, j + half)) {
                    const double tmp = g(i, j);
                    g(i, j) = g(i, j + half);
                    g(i, j + half) = tmp;
                }
    }
    return g;
}

inline std::vector<double> beta_abs(const std::vector<double>& x, double beta) {
    Matrix m(1, x.size());
    std::copy(x.begin(), x.end(), m.data());
    ActivationSpec spec{ActivationKind::beta_abs, beta};
    Matrix out = activation_forward(m, spec);
    return std::vector<double>(out.data(), out.data() + out.size());
}

inline std::vector<double> minmax(const std::vector<double>& x) {
    Matrix m(1, x.size());
    std::copy(x.begin(), x.end(), m.data());
    ActivationSpec spec{ActivationKind::minmax, 0.0};
    Matrix out = activation_forward(m, spec);
    return std::vector<double>(out.data(), out.data() + out.size());
}

/// One block: z = act(M R^T S(R (x + pos)) + b). R and M are orthogonal
/// channel mixers, S the spatial shift, pos an H x W position embedding
/// broadcast over channels. Every factor is norm-nonexpanding, so the block
/// is 1-Lipschitz in x by construction.
struct BlockParams {
    Matrix r;                 // d x d orthogonal
    Matrix m;                 // d x d orthogonal
    std::vector<double> b;    // d bias
    std::vector<double> pos;  // H*W position embedding
};

struct BlockGrads {
    Matrix r;
    Matrix m;
    std::vector<double> b;
    std::vector<double> pos;
};

struct BlockCache {
    Matrix x1;      // (HW) x C, input plus broadcast position embedding
    Matrix s_out;   // shifted R-rotated features
    Matrix preact;  // M R^T s_out + b, before the activation
    Matrix w2;      // merged M R^T
    std::size_t h = 0, w = 0;
};

inline Matrix block_forward(const Matrix& x, std::size_t h, std::size_t w,
                            const BlockParams& params, const ShiftSpec& shift,
                            const ActivationSpec& act, BlockCache* cache = nullptr) {
    const std::size_t hw = h * w, c = x.cols();
    if (x.rows() != hw) throw std::invalid_argument("block_forward: rows != H*W");
    if (params.r.rows() != c || params.m.rows() != c)
        throw std::invalid_argument("block_forward: mixer dimension != channels");
    if (params.pos.size() != hw) throw std::invalid_argument("block_forward: pos size != H*W");
    if (params.b.size() != c) throw std::invalid_argument("block_forward: bias size != channels");

    Matrix x1 = x;
    for (std::size_t i = 0; i < hw; ++i) {
        const double pi = params.pos[i];
        for (std::size_t j = 0; j < c; ++j) x1(i, j) += pi;
    }

    // Row vectors: v -> R v per position is x1 * R^T.
    Matrix xr = matmul_abt(x1, params.r);
    Matrix s_out = shift_2d(xr, h, w, shift);

    Matrix w2 = matmul_abt(params.m, params.r);  // merged M R^T
    Matrix preact = matmul_abt(s_out, w2);
    for (std::size_t i = 0; i < hw; ++i)
        for (std::size_t j = 0; j < c; ++j) preact(i, j) += params.b[j];

    Matrix z = activation_forward(preact, act);
    if (cache) {
        cache->x1 = std::move(x1);
        cache->s_out = std::move(s_out);
        cache->preact = std::move(preact);
        cache->w2 = std::move(w2);
        cache->h = h;
        cache->w = w;
    }
    return z;
}

/// Manual reverse pass. Returns grad_x; parameter gradients are accumulated
/// into `grads` (callers zero them per batch).
inline Matrix block_backward(const Matrix& grad_z, const BlockCache& cache,
                             const BlockParams& params, const ShiftSpec& shift,
                             const ActivationSpec& act, BlockGrads& grads) {
    const std::size_t hw = cache.x1.rows(), c = cache.x1.cols();
    if (grad_z.rows() != hw || grad_z.cols() != c)
        throw std::invalid_argument("block_backward: grad shape mismatch");

    Matrix gp = activation_backward(grad_z, cache.preact, act);

    for (std::size_t i = 0; i < hw; ++i)
        for (std::size_t j = 0; j < c; ++j) grads.b[j] += gp(i, j);

    Matrix grad_w2 = matmul_atb(gp, cache.s_out);
    Matrix gs = matmul(gp, cache.w2);
    Matrix gxr = shift_2d_adjoint(gs, cache.h, cache.w, shift);

    grads.r += matmul_atb(gxr, cache.x1);       // through x1 * R^T
    grads.r += matmul_atb(grad_w2, params.m);   // through W2 = M R^T
    grads.m += matmul(grad_w2, params.r);

    Matrix gx = matmul(gxr, params.r);
    for (std::size_t i = 0; i < hw; ++i) {
        double s = 0;
        for (std::size_t j = 0; j < c; ++j) s += gx(i, j);
        grads.pos[i] += s;
    }
    return gx;
}

/// Per-channel L2 over all spatial positions: a 1-Lipschitz map from
/// (H*W) x C down to C.
inline std::vector<double> l2_spatial_pool(const Matrix& x) {
    std::vector<double> out(x.cols(), 0.0);
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < x.cols(); ++j) out[j] += x(i, j) * x(i, j);
    for (auto& v : out) v = std::sqrt(v);
    return out;
}

/// Gradient of the pool; at the non-differentiable origin of a channel the
/// subgradient 0 is used.
inline Matrix l2_spatial_pool_backward(const std::vector<double>& grad_out, const Matrix& x,
                                       const std::vector<double>& pooled) {
    Matrix g(x.rows(), x.cols());
    for (std::size_t j = 0; j < x.cols(); ++j) {
        if (pooled[j] == 0.0) continue;
        const double f = grad_out[j] / pooled[j];
        for (std::size_t i = 0; i < x.rows(); ++i) g(i, j) = f * x(i, j);
    }
    return g;
}

/// Space-to-depth: q x q pixel blocks become channel groups. A permutation of
/// the entries, hence an exact isometry.
inline Matrix patchify(const Matrix& x, std::size_t h, std::size_t w, std::size_t q) {
    const std::size_t c = x.cols();
    if (h % q != 0 || w % q != 0)
        throw std::invalid_argument("patchify: spatial dims must be divisible by q");
    const std::size_t ho = h / q, wo = w / q;
    Matrix out(ho * wo, q * q * c);
    for (std::size_t i = 0; i < ho; ++i)
        for (std::size_t j = 0; j < wo; ++j)
            for (std::size_t di = 0; di < q; ++di)
                for (std::size_t dj = 0; dj < q; ++dj)
                    for (std::size_t ch = 0; ch < c; ++ch)
                        out(i * wo + j, (di * q + dj) * c + ch) =
                            x((i * q + di) * w + (j * q + dj), ch);
    return out;
}

inline Matrix patchify_backward(const Matrix& grad_out, std::size_t h, std::size_t w,
                                std::size_t q, std::size_t c) {
    const std::size_t ho = h / q, wo = w / q;
    Matrix g(h * w, c);
    for (std::size_t i = 0; i < ho; ++i)
        for (std::size_t j = 0; j < wo; ++j)
            for (std::size_t di = 0; di < q; ++di)
                for (std::size_t dj = 0; dj < q; ++dj)
                    for (std::size_t ch = 0; ch < c; ++ch)
                        g((i * q + di) * w + (j * q + dj), ch) =
                            grad_out(i * wo + j, (di * q + dj) * c + ch);
    return g;
}

/// Pad with zero channels up to c_out: an isometric embedding.
inline Matrix channel_lift(const Matrix& x, std::size_t c_out) {
    if (c_out < x.cols()) throw std::invalid_argument("channel_lift: cannot shrink channels");
    Matrix out(x.rows(), c_out);
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) = x(i, j);
    return out;
}

inline Matrix channel_lift_backward(const Matrix& grad_out, std::size_t c_in) {
    Matrix g(grad_out.rows(), c_in);
    for (std::size_t i = 0; i < grad_out.rows(); ++i)
        for (std::size_t j = 0; j < c_in; ++j) g(i, j) = grad_out(i, j);
    return g;
}

/// Unconstrained affine head: logits = V z + c.
inline std::vector<double> head_forward(const std::vector<double>& z, const Matrix& v,
                                        const std::vector<double>& c_bias) {
    if (v.cols() != z.size() || v.rows() != c_bias.size())
        throw std::invalid_argument("head_forward: shape mismatch");
    std::vector<double> logits(v.rows());
    for (std::size_t i = 0; i < v.rows(); ++i) {
        double s = c_bias[i];
        for (std::size_t j = 0; j < v.cols(); ++j) s += v(i, j) * z[j];
        logits[i] = s;
    }
    return logits;
}

inline std::vector<double> head_backward(const std::vector<double>& grad_logits,
                                         const std::vector<double>& z, const Matrix& v,
                                         Matrix& grad_v, std::vector<double>& grad_c) {
    std::vector<double> grad_z(v.cols(), 0.0);
    for (std::size_t i = 0; i < v.rows(); ++i) {
        grad_c[i] += grad_logits[i];
        for (std::size_t j = 0; j < v.cols(); ++j) {
            grad_v(i, j) += grad_logits[i] * z[j];
            grad_z[j] += grad_logits[i] * v(i, j);
        }
    }
    return grad_z;
}

}  // namespace lipnext
