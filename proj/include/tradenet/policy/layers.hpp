#pragma once

#include <string>
#include <variant>
#include <vector>

#include "tradenet/core/ops.hpp"
#include "tradenet/core/rng.hpp"
#include "tradenet/core/tensor.hpp"

// Batched network layers. Every layer maps [N, ...] to [N, ...], keeps what
// its backward pass needs from the last forward call, and accumulates
// parameter gradients into the parameter tensors' grad buffers.

namespace tradenet::policy {

inline Shape with_batch(std::size_t n, const Shape& sample) {
    Shape s{n};
    s.insert(s.end(), sample.begin(), sample.end());
    return s;
}

inline Shape sample_shape(const Tensor& t) { return Shape(t.shape().begin() + 1, t.shape().end()); }

struct ColumnNormLayer {
    double eps = kColumnNormEps;
    Tensor input;
    std::vector<double> mean, std;

    Shape output_shape(const Shape& in) const { return in; }

    Tensor forward(const Tensor& x, Mode, Rng&) {
        if (x.rank() < 3) fail(ErrorKind::shape, "column norm layer expects [N,...,H,W], got " + shape_str(x.shape()));
        const std::size_t h = x.dim(x.rank() - 2), w = x.dim(x.rank() - 1), n = x.size() / (h * w);
        input = x;
        mean.assign(n * w, 0.0);
        std.assign(n * w, 0.0);
        Tensor y(x.shape());
        for (std::size_t i = 0; i < n; ++i) {
            kernels::column_normalize(h, w, x.data().data() + i * h * w, eps, y.data().data() + i * h * w,
                                      mean.data() + i * w, std.data() + i * w);
        }
        return y;
    }

    Tensor backward(const Tensor& g, bool need_input_grad) {
        if (!need_input_grad) return {};
        const std::size_t h = input.dim(input.rank() - 2), w = input.dim(input.rank() - 1);
        const std::size_t n = input.size() / (h * w);
        Tensor gx(input.shape());
        for (std::size_t i = 0; i < n; ++i) {
            kernels::column_normalize_backward(h, w, g.data().data() + i * h * w, input.data().data() + i * h * w,
                                               mean.data() + i * w, std.data() + i * w, eps,
                                               gx.data().data() + i * h * w);
        }
        return gx;
    }

    void collect(std::vector<NamedTensor>&, const std::string&) {}
};

struct ConvLayer {
    Tensor weight;  // [O, C, kh, kw]
    Tensor bias;    // [O]
    Stride2 stride;
    Tensor input;

    kernels::ConvDims dims(const Shape& in) const { return conv_dims(in, weight.shape(), stride); }

    Shape output_shape(const Shape& in) const {
        const auto d = dims(in);
        return {d.out_ch, d.out_h(), d.out_w()};
    }

    Tensor forward(const Tensor& x, Mode, Rng&) {
        const auto d = dims(sample_shape(x));
        const std::size_t n = x.dim(0), in_sz = d.in_ch * d.in_h * d.in_w;
        const std::size_t out_sz = d.out_ch * d.out_h() * d.out_w();
        input = x;
        Tensor y({n, d.out_ch, d.out_h(), d.out_w()});
        for (std::size_t i = 0; i < n; ++i) {
            kernels::conv2d_forward(d, x.data().data() + i * in_sz, weight.data().data(), bias.data().data(),
                                    y.data().data() + i * out_sz);
        }
        return y;
    }

    Tensor backward(const Tensor& g, bool need_input_grad) {
        const auto d = dims(sample_shape(input));
        const std::size_t n = input.dim(0), in_sz = d.in_ch * d.in_h * d.in_w;
        const std::size_t out_sz = d.out_ch * d.out_h() * d.out_w();
        Tensor gx = need_input_grad ? Tensor(input.shape()) : Tensor();
        auto gw = weight.grad();
        auto gb = bias.grad();
        for (std::size_t i = 0; i < n; ++i) {
            kernels::conv2d_backward(d, g.data().data() + i * out_sz, input.data().data() + i * in_sz,
                                     weight.data().data(), need_input_grad ? gx.data().data() + i * in_sz : nullptr,
                                     gw.data(), gb.data());
        }
        return gx;
    }

    void collect(std::vector<NamedTensor>& out, const std::string& prefix) {
        out.push_back({prefix + ".weight", &weight});
        out.push_back({prefix + ".bias", &bias});
    }
};

struct BatchNormLayer {
    Tensor gamma;
    Tensor beta;
    RunningStats stats;
    double eps = kBatchNormEps;
    BatchNormCache cache;

    Shape output_shape(const Shape& in) const { return in; }

    Tensor forward(const Tensor& x, Mode mode, Rng&) {
        return batchnorm_forward(x, gamma, beta, eps, mode, stats, &cache);
    }

    Tensor backward(const Tensor& g, bool) {
        auto grads = batchnorm_backward(g, gamma, cache);
        auto gg = gamma.grad();
        auto gbt = beta.grad();
        for (std::size_t c = 0; c < gg.size(); ++c) {
            gg[c] += grads.gamma[c];
            gbt[c] += grads.beta[c];
        }
        return std::move(grads.input);
    }

    void collect(std::vector<NamedTensor>& out, const std::string& prefix) {
        out.push_back({prefix + ".gamma", &gamma});
        out.push_back({prefix + ".beta", &beta});
    }
};

struct ReluLayer {
    Tensor input;

    Shape output_shape(const Shape& in) const { return in; }

    Tensor forward(const Tensor& x, Mode, Rng&) {
        input = x;
        return relu(x);
    }

    Tensor backward(const Tensor& g, bool) { return relu_backward(g, input); }

    void collect(std::vector<NamedTensor>&, const std::string&) {}
};

struct MaxPoolLayer {
    Window2 window;
    Stride2 stride{2, 2};
    Shape input_shape;
    std::vector<std::size_t> argmax;  // flat index into the batched input

    Shape output_shape(const Shape& in) const {
        if (in.size() != 3 || in[1] < window.rows || in[2] < window.cols) {
            fail(ErrorKind::shape, "maxpool window larger than input " + shape_str(in));
        }
        return {in[0], conv_out_dim(in[1], window.rows, stride.rows), conv_out_dim(in[2], window.cols, stride.cols)};
    }

    Tensor forward(const Tensor& x, Mode, Rng&) {
        const Shape in = sample_shape(x);
        const Shape out = output_shape(in);
        const std::size_t n = x.dim(0), in_sz = shape_numel(in), out_sz = shape_numel(out);
        input_shape = x.shape();
        argmax.assign(n * out_sz, 0);
        Tensor y(with_batch(n, out));
        for (std::size_t i = 0; i < n; ++i) {
            Tensor sample(in, std::vector<double>(x.data().begin() + i * in_sz, x.data().begin() + (i + 1) * in_sz));
            auto r = maxpool2d(sample, window, stride);
            std::copy(r.output.data().begin(), r.output.data().end(), y.data().begin() + i * out_sz);
            for (std::size_t k = 0; k < out_sz; ++k) argmax[i * out_sz + k] = i * in_sz + r.argmax[k];
        }
        return y;
    }

    Tensor backward(const Tensor& g, bool) { return maxpool2d_backward(g, argmax, input_shape); }

    void collect(std::vector<NamedTensor>&, const std::string&) {}
};

struct DropoutLayer {
    double p = kDefaultDropout;
    std::vector<double> mask;

    Shape output_shape(const Shape& in) const { return in; }

    Tensor forward(const Tensor& x, Mode mode, Rng& rng) {
        auto r = dropout(x, p, mode, rng);
        mask = std::move(r.mask);
        return std::move(r.output);
    }

    Tensor backward(const Tensor& g, bool) { return dropout_backward(g, mask); }

    void collect(std::vector<NamedTensor>&, const std::string&) {}
};

struct FlattenLayer {
    Shape input_shape;

    Shape output_shape(const Shape& in) const { return {shape_numel(in)}; }

    Tensor forward(const Tensor& x, Mode, Rng&) {
        input_shape = x.shape();
        return x.reshaped({x.dim(0), x.size() / x.dim(0)});
    }

    Tensor backward(const Tensor& g, bool) { return g.reshaped(input_shape); }

    void collect(std::vector<NamedTensor>&, const std::string&) {}
};

struct DenseLayer {
    Tensor weight;  // [O, F]
    Tensor bias;    // [O]
    Tensor input;

    Shape output_shape(const Shape& in) const {
        if (in.size() != 1 || in[0] != weight.dim(1)) {
            fail(ErrorKind::shape, "dense layer expects [" + std::to_string(weight.dim(1)) + "], got " + shape_str(in));
        }
        return {weight.dim(0)};
    }

    Tensor forward(const Tensor& x, Mode, Rng&) {
        output_shape(sample_shape(x));
        input = x;
        const std::size_t n = x.dim(0);
        Tensor y({n, weight.dim(0)});
        kernels::dense_forward(n, weight.dim(1), weight.dim(0), x.data().data(), weight.data().data(),
                               bias.data().data(), y.data().data());
        return y;
    }

    Tensor backward(const Tensor& g, bool need_input_grad) {
        const std::size_t n = input.dim(0);
        Tensor gx = need_input_grad ? Tensor(input.shape()) : Tensor();
        kernels::dense_backward(n, weight.dim(1), weight.dim(0), g.data().data(), input.data().data(),
                                weight.data().data(), need_input_grad ? gx.data().data() : nullptr,
                                weight.grad().data(), bias.grad().data());
        return gx;
    }

    void collect(std::vector<NamedTensor>& out, const std::string& prefix) {
        out.push_back({prefix + ".weight", &weight});
        out.push_back({prefix + ".bias", &bias});
    }
};

using Layer = std::variant<ColumnNormLayer, ConvLayer, BatchNormLayer, ReluLayer, MaxPoolLayer, DropoutLayer,
                           FlattenLayer, DenseLayer>;

inline std::string layer_kind(const Layer& layer) {
    static const char* names[] = {"column_norm", "conv", "batch_norm", "relu", "maxpool", "dropout", "flatten", "dense"};
    return names[layer.index()];
}

}  // namespace tradenet::policy
