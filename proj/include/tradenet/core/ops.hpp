#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "tradenet/core/error.hpp"
#include "tradenet/core/rng.hpp"
#include "tradenet/core/tensor.hpp"

namespace tradenet {

enum class Mode { train, eval };

struct Stride2 {
    std::size_t rows = 1;
    std::size_t cols = 1;
};

struct Window2 {
    std::size_t rows = 2;
    std::size_t cols = 2;
};

inline std::size_t conv_out_dim(std::size_t in, std::size_t kernel, std::size_t stride) {
    return (in - kernel) / stride + 1;
}

// ---------------------------------------------------------------------------
// Raw kernels. Single sample, caller-owned buffers. The tensor-level API below
// and the network layers both go through these.
// ---------------------------------------------------------------------------
namespace kernels {

struct ConvDims {
    std::size_t in_ch, in_h, in_w;
    std::size_t out_ch, k_h, k_w;
    std::size_t s_h, s_w;
    std::size_t out_h() const { return conv_out_dim(in_h, k_h, s_h); }
    std::size_t out_w() const { return conv_out_dim(in_w, k_w, s_w); }
};

/// Valid cross-correlation. Every output element is accumulated from zero in
/// input-channel, kernel-row, kernel-column ascending order and the bias is
/// added last, so results are bitwise reproducible against a naive loop.
inline void conv2d_forward(const ConvDims& d, const double* in, const double* w, const double* b,
                           double* out) {
    const std::size_t oh = d.out_h(), ow = d.out_w(), plane = oh * ow;
    for (std::size_t oc = 0; oc < d.out_ch; ++oc) {
        double* acc = out + oc * plane;
        std::fill(acc, acc + plane, 0.0);
        for (std::size_t c = 0; c < d.in_ch; ++c) {
            const double* x = in + c * d.in_h * d.in_w;
            const double* wk = w + ((oc * d.in_ch + c) * d.k_h) * d.k_w;
            for (std::size_t kr = 0; kr < d.k_h; ++kr) {
                for (std::size_t kc = 0; kc < d.k_w; ++kc) {
                    const double wv = wk[kr * d.k_w + kc];
                    for (std::size_t oy = 0; oy < oh; ++oy) {
                        const double* xr = x + (oy * d.s_h + kr) * d.in_w + kc;
                        double* ar = acc + oy * ow;
                        for (std::size_t ox = 0; ox < ow; ++ox) ar[ox] += wv * xr[ox * d.s_w];
                    }
                }
            }
        }
        const double bias = b[oc];
        for (std::size_t p = 0; p < plane; ++p) acc[p] += bias;
    }
}

/// Accumulates (+=) into grad_in / grad_w / grad_b. grad_in may be null.
inline void conv2d_backward(const ConvDims& d, const double* grad_out, const double* in,
                            const double* w, double* grad_in, double* grad_w, double* grad_b) {
    const std::size_t oh = d.out_h(), ow = d.out_w(), plane = oh * ow;
    for (std::size_t oc = 0; oc < d.out_ch; ++oc) {
        const double* g = grad_out + oc * plane;
        double gb = 0.0;
        for (std::size_t p = 0; p < plane; ++p) gb += g[p];
        grad_b[oc] += gb;
        for (std::size_t c = 0; c < d.in_ch; ++c) {
            const double* x = in + c * d.in_h * d.in_w;
            const double* wk = w + ((oc * d.in_ch + c) * d.k_h) * d.k_w;
            double* gwk = grad_w + ((oc * d.in_ch + c) * d.k_h) * d.k_w;
            double* gx = grad_in ? grad_in + c * d.in_h * d.in_w : nullptr;
            for (std::size_t kr = 0; kr < d.k_h; ++kr) {
                for (std::size_t kc = 0; kc < d.k_w; ++kc) {
                    const double wv = wk[kr * d.k_w + kc];
                    double gw = 0.0;
                    for (std::size_t oy = 0; oy < oh; ++oy) {
                        const double* xr = x + (oy * d.s_h + kr) * d.in_w + kc;
                        const double* gr = g + oy * ow;
                        for (std::size_t ox = 0; ox < ow; ++ox) gw += gr[ox] * xr[ox * d.s_w];
                        if (gx) {
                            double* gxr = gx + (oy * d.s_h + kr) * d.in_w + kc;
                            for (std::size_t ox = 0; ox < ow; ++ox) gxr[ox * d.s_w] += wv * gr[ox];
                        }
                    }
                    gwk[kr * d.k_w + kc] += gw;
                }
            }
        }
    }
}

/// y[n] = W x[n] + b for a batch of n rows. Accumulation runs over the
/// feature index ascending, bias added last. Four samples and two outputs are
/// register-blocked; the per-element operation order is unchanged by it.
inline void dense_forward(std::size_t n, std::size_t in_f, std::size_t out_f, const double* x,
                          const double* w, const double* b, double* y) {
    if (n < 4) {
        for (std::size_t i = 0; i < n; ++i) {
            const double* xi = x + i * in_f;
            std::size_t o = 0;
            for (; o + 4 <= out_f; o += 4) {
                const double* w0 = w + o * in_f;
                const double* w1 = w0 + in_f;
                const double* w2 = w1 + in_f;
                const double* w3 = w2 + in_f;
                double c0 = 0, c1 = 0, c2 = 0, c3 = 0;
                for (std::size_t f = 0; f < in_f; ++f) {
                    c0 += w0[f] * xi[f];
                    c1 += w1[f] * xi[f];
                    c2 += w2[f] * xi[f];
                    c3 += w3[f] * xi[f];
                }
                y[i * out_f + o] = c0 + b[o];
                y[i * out_f + o + 1] = c1 + b[o + 1];
                y[i * out_f + o + 2] = c2 + b[o + 2];
                y[i * out_f + o + 3] = c3 + b[o + 3];
            }
            for (; o < out_f; ++o) {
                const double* wa = w + o * in_f;
                double acc = 0;
                for (std::size_t f = 0; f < in_f; ++f) acc += wa[f] * xi[f];
                y[i * out_f + o] = acc + b[o];
            }
        }
        return;
    }
    // Batched path: accumulate whole output rows against the transposed
    // weights so the inner loop runs over independent outputs. Each output
    // still sums its features in ascending order.
    thread_local std::vector<double> wt, acc;
    wt.resize(in_f * out_f);
    for (std::size_t o = 0; o < out_f; ++o) {
        for (std::size_t f = 0; f < in_f; ++f) wt[f * out_f + o] = w[o * in_f + f];
    }
    acc.resize(4 * out_f);
    double* a0 = acc.data();
    double* a1 = a0 + out_f;
    double* a2 = a1 + out_f;
    double* a3 = a2 + out_f;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const double* x0 = x + i * in_f;
        const double* x1 = x0 + in_f;
        const double* x2 = x1 + in_f;
        const double* x3 = x2 + in_f;
        std::fill(acc.begin(), acc.end(), 0.0);
        for (std::size_t f = 0; f < in_f; ++f) {
            const double* wr = wt.data() + f * out_f;
            const double v0 = x0[f], v1 = x1[f], v2 = x2[f], v3 = x3[f];
            for (std::size_t o = 0; o < out_f; ++o) {
                a0[o] += wr[o] * v0;
                a1[o] += wr[o] * v1;
                a2[o] += wr[o] * v2;
                a3[o] += wr[o] * v3;
            }
        }
        for (std::size_t o = 0; o < out_f; ++o) {
            y[i * out_f + o] = a0[o] + b[o];
            y[(i + 1) * out_f + o] = a1[o] + b[o];
            y[(i + 2) * out_f + o] = a2[o] + b[o];
            y[(i + 3) * out_f + o] = a3[o] + b[o];
        }
    }
    for (; i < n; ++i) {
        const double* xi = x + i * in_f;
        std::fill(a0, a0 + out_f, 0.0);
        for (std::size_t f = 0; f < in_f; ++f) {
            const double* wr = wt.data() + f * out_f;
            const double v = xi[f];
            for (std::size_t o = 0; o < out_f; ++o) a0[o] += wr[o] * v;
        }
        for (std::size_t o = 0; o < out_f; ++o) y[i * out_f + o] = a0[o] + b[o];
    }
}

/// Accumulates (+=). grad_x may be null when the input gradient is unused.
/// Weight gradients add the samples in ascending order.
inline void dense_backward(std::size_t n, std::size_t in_f, std::size_t out_f, const double* grad_y,
                           const double* x, const double* w, double* grad_x, double* grad_w,
                           double* grad_b) {
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t o = 0; o < out_f; ++o) grad_b[o] += grad_y[i * out_f + o];
    }
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const double* x0 = x + i * in_f;
        const double* x1 = x0 + in_f;
        const double* x2 = x1 + in_f;
        const double* x3 = x2 + in_f;
        for (std::size_t o = 0; o < out_f; ++o) {
            const double g0 = grad_y[i * out_f + o], g1 = grad_y[(i + 1) * out_f + o];
            const double g2 = grad_y[(i + 2) * out_f + o], g3 = grad_y[(i + 3) * out_f + o];
            if (g0 == 0.0 && g1 == 0.0 && g2 == 0.0 && g3 == 0.0) continue;
            double* gw = grad_w + o * in_f;
            for (std::size_t f = 0; f < in_f; ++f) {
                double t = gw[f];
                t += g0 * x0[f];
                t += g1 * x1[f];
                t += g2 * x2[f];
                t += g3 * x3[f];
                gw[f] = t;
            }
        }
    }
    for (; i < n; ++i) {
        const double* xi = x + i * in_f;
        for (std::size_t o = 0; o < out_f; ++o) {
            const double g = grad_y[i * out_f + o];
            if (g == 0.0) continue;
            double* gw = grad_w + o * in_f;
            for (std::size_t f = 0; f < in_f; ++f) gw[f] += g * xi[f];
        }
    }
    if (!grad_x) return;
    for (std::size_t s = 0; s < n; ++s) {
        double* gxi = grad_x + s * in_f;
        for (std::size_t o = 0; o < out_f; ++o) {
            const double g = grad_y[s * out_f + o];
            if (g == 0.0) continue;
            const double* wo = w + o * in_f;
            for (std::size_t f = 0; f < in_f; ++f) gxi[f] += g * wo[f];
        }
    }
}

}  // namespace kernels

// ---------------------------------------------------------------------------
// Convolution
// ---------------------------------------------------------------------------

inline kernels::ConvDims conv_dims(const Shape& input, const Shape& weights, Stride2 stride) {
    if (input.size() != 3 || weights.size() != 4) {
        fail(ErrorKind::shape, "conv2d expects input [C,H,W] and kernels [O,C,kh,kw], got input " +
                                   shape_str(input) + " and kernels " + shape_str(weights));
    }
    if (input[0] != weights[1]) {
        fail(ErrorKind::shape, "conv2d channel mismatch: input " + shape_str(input) + " vs kernels " +
                                   shape_str(weights));
    }
    if (input[1] < weights[2] || input[2] < weights[3]) {
        fail(ErrorKind::shape, "conv2d kernel " + shape_str(weights) + " larger than input " +
                                   shape_str(input));
    }
    if (stride.rows == 0 || stride.cols == 0) fail(ErrorKind::value, "conv2d stride must be positive");
    return {input[0], input[1], input[2], weights[0], weights[2], weights[3], stride.rows, stride.cols};
}

inline Tensor conv2d_forward(const Tensor& input, const Tensor& kernels, const Tensor& bias, Stride2 stride) {
    const auto d = conv_dims(input.shape(), kernels.shape(), stride);
    if (bias.size() != d.out_ch) {
        fail(ErrorKind::shape, "conv2d bias " + shape_str(bias.shape()) + " does not match kernels " +
                                   shape_str(kernels.shape()));
    }
    Tensor out({d.out_ch, d.out_h(), d.out_w()});
    kernels::conv2d_forward(d, input.data().data(), kernels.data().data(), bias.data().data(),
                            out.data().data());
    return out;
}

struct ConvGrads {
    Tensor input;
    Tensor kernels;
    Tensor bias;
};

inline ConvGrads conv2d_backward(const Tensor& grad_out, const Tensor& saved_input, const Tensor& kernels,
                                 Stride2 stride) {
    const auto d = conv_dims(saved_input.shape(), kernels.shape(), stride);
    const Shape expected{d.out_ch, d.out_h(), d.out_w()};
    if (grad_out.shape() != expected) {
        fail(ErrorKind::shape, "conv2d_backward grad_out " + shape_str(grad_out.shape()) +
                                   " does not match forward output " + shape_str(expected));
    }
    ConvGrads g{Tensor(saved_input.shape()), Tensor(kernels.shape()), Tensor({d.out_ch})};
    kernels::conv2d_backward(d, grad_out.data().data(), saved_input.data().data(), kernels.data().data(),
                             g.input.data().data(), g.kernels.data().data(), g.bias.data().data());
    return g;
}

// ---------------------------------------------------------------------------
// ReLU (subgradient 0 at 0)
// ---------------------------------------------------------------------------

inline Tensor relu(const Tensor& x) {
    Tensor y = x;
    for (double& v : y.data()) v = v > 0.0 ? v : 0.0;
    return y;
}

inline Tensor relu_backward(const Tensor& grad_out, const Tensor& saved_input) {
    if (grad_out.shape() != saved_input.shape()) {
        fail(ErrorKind::shape, "relu_backward shape mismatch " + shape_str(grad_out.shape()) + " vs " +
                                   shape_str(saved_input.shape()));
    }
    Tensor g(grad_out.shape());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = saved_input[i] > 0.0 ? grad_out[i] : 0.0;
    return g;
}

// ---------------------------------------------------------------------------
// Dense
// ---------------------------------------------------------------------------

inline Tensor dense_forward(const Tensor& x, const Tensor& weights, const Tensor& bias) {
    if (weights.rank() != 2 || x.size() != weights.dim(1) || bias.size() != weights.dim(0)) {
        fail(ErrorKind::shape, "dense dimension mismatch: x " + shape_str(x.shape()) + ", weights " +
                                   shape_str(weights.shape()) + ", bias " + shape_str(bias.shape()));
    }
    Tensor y({weights.dim(0)});
    kernels::dense_forward(1, weights.dim(1), weights.dim(0), x.data().data(), weights.data().data(),
                           bias.data().data(), y.data().data());
    return y;
}

struct DenseGrads {
    Tensor input;
    Tensor weights;
    Tensor bias;
};

inline DenseGrads dense_backward(const Tensor& grad_out, const Tensor& saved_input, const Tensor& weights) {
    if (weights.rank() != 2 || grad_out.size() != weights.dim(0) || saved_input.size() != weights.dim(1)) {
        fail(ErrorKind::shape, "dense_backward dimension mismatch: grad_out " + shape_str(grad_out.shape()) +
                                   ", weights " + shape_str(weights.shape()));
    }
    DenseGrads g{Tensor(saved_input.shape()), Tensor(weights.shape()), Tensor({weights.dim(0)})};
    kernels::dense_backward(1, weights.dim(1), weights.dim(0), grad_out.data().data(),
                            saved_input.data().data(), weights.data().data(), g.input.data().data(),
                            g.weights.data().data(), g.bias.data().data());
    return g;
}

// ---------------------------------------------------------------------------
// Batch normalization over [N, C, ...]: statistics per channel across the
// batch and all trailing (spatial) dimensions.
// ---------------------------------------------------------------------------

struct RunningStats {
    std::vector<double> mean;
    std::vector<double> var;
    bool initialized = false;

    static RunningStats identity(std::size_t channels) {
        return {std::vector<double>(channels, 0.0), std::vector<double>(channels, 1.0), true};
    }
};

struct BatchNormCache {
    Mode mode = Mode::eval;
    std::vector<double> normalized;  // x_hat, same layout as the input
    std::vector<double> inv_std;     // per channel
    Shape shape;
};

constexpr double kBatchNormMomentum = 0.1;
constexpr double kBatchNormEps = 1e-5;

inline void batchnorm_layout(const Shape& shape, std::size_t& n, std::size_t& c, std::size_t& s) {
    if (shape.size() < 2) fail(ErrorKind::shape, "batchnorm expects [N,C,...], got " + shape_str(shape));
    n = shape[0];
    c = shape[1];
    s = 1;
    for (std::size_t i = 2; i < shape.size(); ++i) s *= shape[i];
}

inline Tensor batchnorm_forward(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps, Mode mode,
                                RunningStats& stats, BatchNormCache* cache = nullptr,
                                double momentum = kBatchNormMomentum) {
    std::size_t n, c, s;
    batchnorm_layout(x.shape(), n, c, s);
    if (gamma.size() != c || beta.size() != c) {
        fail(ErrorKind::shape, "batchnorm gamma/beta size does not match channels of " + shape_str(x.shape()));
    }
    Tensor y(x.shape());
    std::vector<double> inv_std(c);
    const std::size_t count = n * s;
    if (mode == Mode::train) {
        if (count < 2) {
            fail(ErrorKind::shape, "batchnorm train mode needs at least 2 values per channel, got shape " +
                                       shape_str(x.shape()));
        }
        if (!stats.initialized) stats = RunningStats::identity(c);
        for (std::size_t ch = 0; ch < c; ++ch) {
            double sum = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double* p = x.data().data() + (i * c + ch) * s;
                for (std::size_t k = 0; k < s; ++k) sum += p[k];
            }
            const double mean = sum / static_cast<double>(count);
            double sq = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double* p = x.data().data() + (i * c + ch) * s;
                for (std::size_t k = 0; k < s; ++k) sq += (p[k] - mean) * (p[k] - mean);
            }
            const double var = sq / static_cast<double>(count);
            inv_std[ch] = 1.0 / std::sqrt(var + eps);
            for (std::size_t i = 0; i < n; ++i) {
                const std::size_t off = (i * c + ch) * s;
                for (std::size_t k = 0; k < s; ++k) {
                    y[off + k] = (x[off + k] - mean) * inv_std[ch];
                }
            }
            const double unbiased = sq / static_cast<double>(count - 1);
            stats.mean[ch] = (1.0 - momentum) * stats.mean[ch] + momentum * mean;
            stats.var[ch] = (1.0 - momentum) * stats.var[ch] + momentum * unbiased;
        }
    } else {
        if (!stats.initialized) {
            fail(ErrorKind::state, "batchnorm eval mode used before running statistics were set");
        }
        if (stats.mean.size() != c) fail(ErrorKind::shape, "batchnorm running statistics channel mismatch");
        for (std::size_t ch = 0; ch < c; ++ch) {
            inv_std[ch] = 1.0 / std::sqrt(stats.var[ch] + eps);
            for (std::size_t i = 0; i < n; ++i) {
                const std::size_t off = (i * c + ch) * s;
                for (std::size_t k = 0; k < s; ++k) y[off + k] = (x[off + k] - stats.mean[ch]) * inv_std[ch];
            }
        }
    }
    if (cache) {
        cache->mode = mode;
        cache->normalized = y.values();
        cache->inv_std = inv_std;
        cache->shape = x.shape();
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t ch = 0; ch < c; ++ch) {
            const std::size_t off = (i * c + ch) * s;
            for (std::size_t k = 0; k < s; ++k) y[off + k] = gamma[ch] * y[off + k] + beta[ch];
        }
    }
    return y;
}

struct BatchNormGrads {
    Tensor input;
    Tensor gamma;
    Tensor beta;
};

inline BatchNormGrads batchnorm_backward(const Tensor& grad_out, const Tensor& gamma, const BatchNormCache& cache) {
    if (grad_out.shape() != cache.shape) {
        fail(ErrorKind::shape, "batchnorm_backward grad_out " + shape_str(grad_out.shape()) +
                                   " does not match forward input " + shape_str(cache.shape));
    }
    std::size_t n, c, s;
    batchnorm_layout(cache.shape, n, c, s);
    BatchNormGrads g{Tensor(cache.shape), Tensor({c}), Tensor({c})};
    const double count = static_cast<double>(n * s);
    for (std::size_t ch = 0; ch < c; ++ch) {
        double sum_g = 0.0, sum_gx = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t off = (i * c + ch) * s;
            for (std::size_t k = 0; k < s; ++k) {
                sum_g += grad_out[off + k];
                sum_gx += grad_out[off + k] * cache.normalized[off + k];
            }
        }
        g.beta[ch] = sum_g;
        g.gamma[ch] = sum_gx;
        const double scale = gamma[ch] * cache.inv_std[ch];
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t off = (i * c + ch) * s;
            for (std::size_t k = 0; k < s; ++k) {
                if (cache.mode == Mode::train) {
                    g.input[off + k] = scale * (grad_out[off + k] - sum_g / count -
                                                cache.normalized[off + k] * sum_gx / count);
                } else {
                    g.input[off + k] = scale * grad_out[off + k];
                }
            }
        }
    }
    return g;
}

// ---------------------------------------------------------------------------
// Max pooling over [C,H,W]; trailing rows/columns that do not fill a window
// are dropped. Ties go to the first element in row-major window order.
// ---------------------------------------------------------------------------

struct PoolResult {
    Tensor output;
    std::vector<std::size_t> argmax;  // flat input index per output element
};

inline PoolResult maxpool2d(const Tensor& x, Window2 window = {}, Stride2 stride = {2, 2}) {
    if (x.rank() != 3) fail(ErrorKind::shape, "maxpool2d expects [C,H,W], got " + shape_str(x.shape()));
    const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
    if (h < window.rows || w < window.cols) {
        fail(ErrorKind::shape, "maxpool2d window larger than input " + shape_str(x.shape()));
    }
    const std::size_t oh = conv_out_dim(h, window.rows, stride.rows);
    const std::size_t ow = conv_out_dim(w, window.cols, stride.cols);
    PoolResult r{Tensor({c, oh, ow}), std::vector<std::size_t>(c * oh * ow)};
    for (std::size_t ch = 0; ch < c; ++ch) {
        for (std::size_t oy = 0; oy < oh; ++oy) {
            for (std::size_t ox = 0; ox < ow; ++ox) {
                std::size_t best = (ch * h + oy * stride.rows) * w + ox * stride.cols;
                for (std::size_t ky = 0; ky < window.rows; ++ky) {
                    for (std::size_t kx = 0; kx < window.cols; ++kx) {
                        const std::size_t idx = (ch * h + oy * stride.rows + ky) * w + ox * stride.cols + kx;
                        if (x[idx] > x[best]) best = idx;
                    }
                }
                const std::size_t o = (ch * oh + oy) * ow + ox;
                r.output[o] = x[best];
                r.argmax[o] = best;
            }
        }
    }
    return r;
}

inline Tensor maxpool2d_backward(const Tensor& grad_out, const std::vector<std::size_t>& argmax,
                                 const Shape& input_shape) {
    if (grad_out.size() != argmax.size()) fail(ErrorKind::shape, "maxpool2d_backward size mismatch");
    Tensor g(input_shape);
    for (std::size_t o = 0; o < argmax.size(); ++o) g[argmax[o]] += grad_out[o];
    return g;
}

// ---------------------------------------------------------------------------
// Inverted dropout. The mask stores 0 or 1/(1-p) per element.
// ---------------------------------------------------------------------------

constexpr double kDefaultDropout = 0.1;

struct DropoutResult {
    Tensor output;
    std::vector<double> mask;
};

inline std::vector<double> dropout_mask(std::size_t n, double p, Rng& rng) {
    if (!(p >= 0.0 && p < 1.0)) fail(ErrorKind::value, "dropout probability must be in [0,1), got " + std::to_string(p));
    std::vector<double> mask(n, 1.0);
    if (p == 0.0) return mask;
    const double keep = 1.0 / (1.0 - p);
    for (double& m : mask) m = rng.uniform() < p ? 0.0 : keep;
    return mask;
}

inline DropoutResult dropout(const Tensor& x, double p, Mode mode, Rng& rng) {
    if (!(p >= 0.0 && p < 1.0)) fail(ErrorKind::value, "dropout probability must be in [0,1), got " + std::to_string(p));
    if (mode == Mode::eval || p == 0.0) return {x, std::vector<double>(x.size(), 1.0)};
    DropoutResult r{x, dropout_mask(x.size(), p, rng)};
    for (std::size_t i = 0; i < x.size(); ++i) r.output[i] *= r.mask[i];
    return r;
}

inline Tensor dropout_backward(const Tensor& grad_out, const std::vector<double>& mask) {
    if (grad_out.size() != mask.size()) fail(ErrorKind::shape, "dropout_backward mask size mismatch");
    Tensor g = grad_out;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] *= mask[i];
    return g;
}

// ---------------------------------------------------------------------------
// Column-wise standardization of an [H,W] matrix: (x - mean) / (std + eps)
// with population std per column.
// ---------------------------------------------------------------------------

constexpr double kColumnNormEps = 1e-8;

struct ColumnNormCache {
    std::vector<double> mean;
    std::vector<double> std;
    double eps = kColumnNormEps;
};

namespace kernels {

inline void column_normalize(std::size_t h, std::size_t w, const double* x, double eps, double* y,
                             double* mean_out, double* std_out) {
    for (std::size_t j = 0; j < w; ++j) {
        double sum = 0.0;
        for (std::size_t i = 0; i < h; ++i) sum += x[i * w + j];
        const double mean = sum / static_cast<double>(h);
        double sq = 0.0;
        for (std::size_t i = 0; i < h; ++i) {
            const double d = x[i * w + j] - mean;
            sq += d * d;
        }
        const double sd = std::sqrt(sq / static_cast<double>(h));
        const double denom = sd + eps;
        for (std::size_t i = 0; i < h; ++i) y[i * w + j] = (x[i * w + j] - mean) / denom;
        mean_out[j] = mean;
        std_out[j] = sd;
    }
}

inline void column_normalize_backward(std::size_t h, std::size_t w, const double* grad_y, const double* x,
                                      const double* mean, const double* sd, double eps, double* grad_x) {
    const double hn = static_cast<double>(h);
    for (std::size_t j = 0; j < w; ++j) {
        const double denom = sd[j] + eps;
        double sum_g = 0.0, sum_gc = 0.0;
        for (std::size_t i = 0; i < h; ++i) {
            sum_g += grad_y[i * w + j];
            sum_gc += grad_y[i * w + j] * (x[i * w + j] - mean[j]);
        }
        const double g_mean = sum_g / hn;
        // d std / d x_i = (x_i - mean) / (h * std); zero for a constant column.
        const double coupling = sd[j] > 0.0 ? sum_gc / (denom * denom * hn * sd[j]) : 0.0;
        for (std::size_t i = 0; i < h; ++i) {
            const double centered = x[i * w + j] - mean[j];
            grad_x[i * w + j] = (grad_y[i * w + j] - g_mean) / denom - centered * coupling;
        }
    }
}

}  // namespace kernels

inline Tensor column_normalize(const Tensor& x, double eps = kColumnNormEps, ColumnNormCache* cache = nullptr) {
    if (x.rank() != 2) fail(ErrorKind::shape, "column_normalize expects [H,W], got " + shape_str(x.shape()));
    const std::size_t h = x.dim(0), w = x.dim(1);
    Tensor y(x.shape());
    std::vector<double> mean(w), sd(w);
    kernels::column_normalize(h, w, x.data().data(), eps, y.data().data(), mean.data(), sd.data());
    if (cache) *cache = {std::move(mean), std::move(sd), eps};
    return y;
}

inline Tensor column_normalize_backward(const Tensor& grad_out, const Tensor& saved_input,
                                        const ColumnNormCache& cache) {
    if (grad_out.shape() != saved_input.shape() || saved_input.rank() != 2) {
        fail(ErrorKind::shape, "column_normalize_backward shape mismatch");
    }
    Tensor g(saved_input.shape());
    kernels::column_normalize_backward(saved_input.dim(0), saved_input.dim(1), grad_out.data().data(),
                                       saved_input.data().data(), cache.mean.data(), cache.std.data(),
                                       cache.eps, g.data().data());
    return g;
}

}  // namespace tradenet
