#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>
#include <variant>
#include <vector>

#include "tradenet/core/checkpoint.hpp"
#include "tradenet/core/gaussian.hpp"
#include "tradenet/core/ops.hpp"
#include "tradenet/core/rng.hpp"
#include "tradenet/core/tensor.hpp"
#include "tradenet/policy/arch.hpp"
#include "tradenet/policy/layers.hpp"

namespace tradenet::policy {

struct LayerShape {
    std::string name;
    Shape output;  // per sample
};

struct ActResult {
    std::vector<double> action;  // clipped to [-1, 1]
    std::vector<double> sample;  // unclipped Gaussian draw
    double log_prob;             // of the unclipped draw
    double value;
};

struct ActionEvaluation {
    std::vector<double> log_probs;
    std::vector<double> entropies;
    std::vector<double> values;
};

constexpr double kActorGain = 0.01;
constexpr double kCriticGain = 1.0;
constexpr double kHiddenGain = 1.4142135623730951;

namespace detail {

/// Rows (or columns, whichever are fewer) orthonormal, scaled by gain. Signs
/// are fixed by the diagonal of R so the result depends only on the draws.
inline void orthogonal_init(Tensor& w, double gain, Rng& rng) {
    const auto rows = static_cast<Eigen::Index>(w.dim(0)), cols = static_cast<Eigen::Index>(w.dim(1));
    const bool tall = rows >= cols;
    const Eigen::Index m = tall ? rows : cols, n = tall ? cols : rows;
    Eigen::MatrixXd a(m, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = 0; i < m; ++i) a(i, j) = rng.normal();
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(m, n);
    const Eigen::MatrixXd r = qr.matrixQR();
    for (Eigen::Index j = 0; j < n; ++j) {
        if (r(j, j) < 0) q.col(j) *= -1.0;
    }
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) {
            w.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = gain * (tall ? q(i, j) : q(j, i));
        }
    }
}

inline void fan_in_uniform(Tensor& t, std::size_t fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double& v : t.data()) v = rng.uniform(-bound, bound);
}

inline DenseLayer make_dense(std::size_t in, std::size_t out, double gain, Rng& rng) {
    DenseLayer d{Tensor({out, in}), Tensor({out}), {}};
    orthogonal_init(d.weight, gain, rng);
    return d;
}

}  // namespace detail

/// Shared-trunk Gaussian actor-critic over a [window, features] observation.
/// forward() maps [N, window, features] (or a single [window, features]) to
/// the action means [N, D] and state values [N]; the log standard deviations
/// are one learnable vector shared by all states.
class PolicyNet {
public:
    struct Output {
        Tensor mean;   // [N, D]
        Tensor value;  // [N]
    };

    static PolicyNet build(const ArchSpec& spec, std::size_t window, std::size_t features, std::size_t action_dim,
                           std::uint64_t seed) {
        spec.validate();
        if (window == 0 || features == 0 || action_dim == 0) {
            fail(ErrorKind::arch, "observation and action dimensions must be positive");
        }
        PolicyNet net;
        net.spec_ = spec;
        net.window_ = window;
        net.features_ = features;
        net.action_dim_ = action_dim;
        net.dropout_rng_ = Rng(seed).split(3);
        Rng init = Rng(seed).split(1);
        net.build_trunk(init);
        net.actor_ = detail::make_dense(net.feature_dim_, action_dim, kActorGain, init);
        net.critic_ = detail::make_dense(net.feature_dim_, 1, kCriticGain, init);
        net.log_std_ = Tensor({action_dim}, 0.0);
        return net;
    }

    const ArchSpec& spec() const { return spec_; }
    std::size_t window() const { return window_; }
    std::size_t features() const { return features_; }
    std::size_t action_dim() const { return action_dim_; }
    std::size_t feature_dim() const { return feature_dim_; }
    const std::vector<LayerShape>& layer_shapes() const { return shapes_; }
    Tensor& log_std() { return log_std_; }
    const Tensor& log_std() const { return log_std_; }
    DenseLayer& actor_head() { return actor_; }
    DenseLayer& critic_head() { return critic_; }

    std::vector<NamedTensor> parameters() {
        std::vector<NamedTensor> out;
        for (std::size_t i = 0; i < trunk_.size(); ++i) {
            std::visit([&](auto& l) { l.collect(out, "trunk." + std::to_string(i)); }, trunk_[i]);
        }
        actor_.collect(out, "actor");
        critic_.collect(out, "critic");
        out.push_back({"log_std", &log_std_});
        return out;
    }

    std::size_t parameter_count() {
        std::size_t n = 0;
        for (const auto& p : parameters()) n += p.tensor->size();
        return n;
    }

    /// Closed-form parameter count of an architecture for a given
    /// observation/action size (weights + biases of every conv and dense,
    /// gamma/beta of every batch norm, and the D log-std entries).
    static std::size_t expected_parameter_count(const ArchSpec& spec, std::size_t window, std::size_t features,
                                                std::size_t action_dim) {
        std::size_t n = 0, width = 0;
        if (spec.kind == ArchKind::mlp) {
            std::size_t in = window * features;
            for (auto h : spec.hidden) {
                n += in * h + h;
                in = h;
            }
            width = in;
        } else {
            const auto shapes = plan(spec, window, features);
            std::size_t channels = 1, conv_i = 0;
            for (const auto& s : shapes) {
                if (s.name.rfind("conv", 0) == 0) {
                    const auto k = planned_kernel(spec, shapes, conv_i);
                    n += s.output[0] * channels * k.first * k.second + s.output[0];
                    channels = s.output[0];
                    ++conv_i;
                } else if (s.name.rfind("bn", 0) == 0) {
                    n += 2 * s.output[0];
                }
            }
            const std::size_t flat = shape_numel(shapes[flatten_index(shapes)].output);
            n += flat * spec.dense_width + spec.dense_width;
            width = spec.dense_width;
        }
        return n + width * action_dim + action_dim + width + 1 + action_dim;
    }

    /// Per-layer output shapes (without batch) for this spec and observation
    /// size. Throws ErrorKind::arch naming the first layer that cannot fit.
    static std::vector<LayerShape> plan(const ArchSpec& spec, std::size_t window, std::size_t features) {
        PolicyNet probe;
        probe.spec_ = spec;
        probe.window_ = window;
        probe.features_ = features;
        probe.action_dim_ = 1;
        Rng none(0);
        probe.build_trunk(none, /*allocate=*/false);
        return probe.shapes_;
    }

    void zero_grad() {
        for (auto& p : parameters()) p.tensor->zero_grad();
    }

    Output forward(const Tensor& obs, Mode mode) {
        Tensor x = as_batch(obs);
        if (!x.all_finite()) fail(ErrorKind::numeric, "policy forward: observation contains non-finite values");
        const std::size_t n = x.dim(0);
        if (spec_.kind != ArchKind::mlp) x = x.reshaped({n, 1, window_, features_});
        for (auto& layer : trunk_) {
            x = std::visit([&](auto& l) { return l.forward(x, mode, dropout_rng_); }, layer);
        }
        Rng unused(0);
        Tensor mean = actor_.forward(x, mode, unused);
        Tensor value = critic_.forward(x, mode, unused).reshaped({n});
        return {std::move(mean), std::move(value)};
    }

    /// Accumulates parameter gradients for upstream gradients of the last
    /// forward call's outputs. Log-std gradients are added by the caller.
    void backward(const Tensor& d_mean, const Tensor& d_value) {
        const std::size_t n = d_mean.dim(0);
        Tensor g = actor_.backward(d_mean, true);
        Tensor gc = critic_.backward(d_value.reshaped({n, 1}), true);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += gc[i];
        for (std::size_t k = trunk_.size(); k-- > 0;) {
            const bool need_input = k > first_param_layer_;
            g = std::visit([&](auto& l) { return l.backward(g, need_input); }, trunk_[k]);
            if (!need_input) break;
        }
    }

    ActResult act(const Tensor& obs, Rng& rng) {
        auto out = forward(obs, Mode::eval);
        const auto d = action_dim_;
        std::span<const double> mean(out.mean.data().data(), d);
        auto g = gaussian_head(mean, log_std_.data(), rng);
        ActResult r{g.sample, g.sample, g.log_prob, out.value[0]};
        for (double& a : r.action) a = std::clamp(a, -1.0, 1.0);
        return r;
    }

    /// Clipped mean action (no sampling).
    std::vector<double> act_deterministic(const Tensor& obs) {
        auto out = forward(obs, Mode::eval);
        std::vector<double> a(out.mean.data().begin(), out.mean.data().begin() + action_dim_);
        for (double& v : a) v = std::clamp(v, -1.0, 1.0);
        return a;
    }

    ActionEvaluation evaluate_actions(const Tensor& obs_batch, const Tensor& actions, Mode mode) {
        Tensor obs = as_batch(obs_batch);
        const std::size_t n = obs.dim(0);
        if (actions.size() != n * action_dim_) {
            fail(ErrorKind::shape, "evaluate_actions: " + std::to_string(n) + " observations but actions " +
                                       shape_str(actions.shape()));
        }
        auto out = forward(obs, mode);
        ActionEvaluation ev{std::vector<double>(n), std::vector<double>(n, gaussian_entropy(log_std_.data())),
                            std::vector<double>(out.value.data().begin(), out.value.data().end())};
        for (std::size_t i = 0; i < n; ++i) {
            ev.log_probs[i] = gaussian_log_prob(out.mean.data().subspan(i * action_dim_, action_dim_), log_std_.data(),
                                                actions.data().subspan(i * action_dim_, action_dim_));
        }
        return ev;
    }

    Checkpoint to_checkpoint() {
        Checkpoint c;
        c.meta = spec_.to_map();
        c.meta["net.window"] = std::to_string(window_);
        c.meta["net.features"] = std::to_string(features_);
        c.meta["net.action_dim"] = std::to_string(action_dim_);
        for (const auto& p : parameters()) c.tensors.emplace_back(p.name, Tensor(p.tensor->shape(), p.tensor->values()));
        for (std::size_t i = 0; i < trunk_.size(); ++i) {
            if (auto* bn = std::get_if<BatchNormLayer>(&trunk_[i])) {
                const auto c_n = bn->gamma.size();
                const auto stats = bn->stats.initialized ? bn->stats : RunningStats::identity(c_n);
                c.tensors.emplace_back("trunk." + std::to_string(i) + ".running_mean", Tensor({c_n}, stats.mean));
                c.tensors.emplace_back("trunk." + std::to_string(i) + ".running_var", Tensor({c_n}, stats.var));
            }
        }
        return c;
    }

    static PolicyNet from_checkpoint(const Checkpoint& c) {
        const ArchSpec spec = ArchSpec::from_map(c.meta);
        auto dim = [&](const char* k) { return text::to_int<std::size_t>(c.get(k), k); };
        PolicyNet net = build(spec, dim("net.window"), dim("net.features"), dim("net.action_dim"), 0);
        for (auto& p : net.parameters()) {
            const Tensor& t = c.tensor(p.name);
            if (t.shape() != p.tensor->shape()) {
                fail(ErrorKind::shape, "checkpoint tensor '" + p.name + "' has shape " + shape_str(t.shape()) +
                                           ", network expects " + shape_str(p.tensor->shape()));
            }
            std::copy(t.data().begin(), t.data().end(), p.tensor->data().begin());
        }
        for (std::size_t i = 0; i < net.trunk_.size(); ++i) {
            if (auto* bn = std::get_if<BatchNormLayer>(&net.trunk_[i])) {
                const auto prefix = "trunk." + std::to_string(i);
                bn->stats.mean = c.tensor(prefix + ".running_mean").values();
                bn->stats.var = c.tensor(prefix + ".running_var").values();
                bn->stats.initialized = true;
            }
        }
        return net;
    }

private:
    Tensor as_batch(const Tensor& obs) const {
        if (obs.rank() == 2 && obs.dim(0) == window_ && obs.dim(1) == features_) {
            return obs.reshaped({1, window_, features_});
        }
        if (obs.rank() == 3 && obs.dim(1) == window_ && obs.dim(2) == features_) return obs;
        fail(ErrorKind::shape, "policy expects observations [" + std::to_string(window_) + "," +
                                   std::to_string(features_) + "] (optionally batched), got " + shape_str(obs.shape()));
    }

    static std::size_t flatten_index(const std::vector<LayerShape>& shapes) {
        for (std::size_t i = 0; i < shapes.size(); ++i) {
            if (shapes[i].name == "flatten") return i;
        }
        return shapes.size() - 1;
    }

    /// Effective kernel of conv layer `conv_i`, reconstructed from the plan.
    static std::pair<std::size_t, std::size_t> planned_kernel(const ArchSpec& spec, const std::vector<LayerShape>& shapes,
                                                              std::size_t conv_i) {
        std::size_t seen = 0;
        Shape in;
        for (const auto& s : shapes) {
            if (s.name.rfind("conv", 0) == 0) {
                if (seen == conv_i) {
                    const auto& c = spec.convs[conv_i];
                    if (conv_i == 0) return {c.kernel, c.kernel};
                    return {std::min(c.kernel, in[1]), std::min(c.kernel, in[2])};
                }
                ++seen;
            }
            in = s.output;
        }
        return {0, 0};
    }

    void push(Layer layer, const std::string& name, Shape& shape) {
        shape = std::visit([&](const auto& l) { return l.output_shape(shape); }, layer);
        shapes_.push_back({name, shape});
        trunk_.push_back(std::move(layer));
    }

    void build_trunk(Rng& rng, bool allocate = true) {
        trunk_.clear();
        shapes_.clear();
        const bool is_cnn = spec_.kind != ArchKind::mlp;
        Shape shape = is_cnn ? Shape{1, window_, features_} : Shape{window_, features_};
        if (spec_.use_input_norm) push(ColumnNormLayer{}, "colnorm", shape);
        if (!is_cnn) {
            push(FlattenLayer{}, "flatten", shape);
            for (std::size_t i = 0; i < spec_.hidden.size(); ++i) {
                const auto w = spec_.hidden[i];
                DenseLayer d = allocate ? detail::make_dense(shape[0], w, kHiddenGain, rng)
                                        : DenseLayer{Tensor({w, shape[0]}), Tensor({w}), {}};
                push(std::move(d), "dense" + std::to_string(i + 1), shape);
                push(ReluLayer{}, "relu" + std::to_string(i + 1), shape);
            }
        } else {
            const bool grcnn = spec_.kind == ArchKind::grcnn;
            for (std::size_t i = 0; i < spec_.convs.size(); ++i) {
                const auto& c = spec_.convs[i];
                const auto tag = std::to_string(i + 1);
                std::size_t kh = c.kernel, kw = c.kernel;
                if (i > 0) {
                    kh = std::min(kh, shape[1]);
                    kw = std::min(kw, shape[2]);
                }
                if (shape[1] < kh || shape[2] < kw) {
                    fail(ErrorKind::arch, "layer conv" + tag + " (" + std::to_string(c.filters) + " filters, kernel " +
                                              std::to_string(c.kernel) + "x" + std::to_string(c.kernel) + ", stride " +
                                              std::to_string(c.stride) + ") does not fit its input " + shape_str(shape) +
                                              "; observation [" + std::to_string(window_) + "," +
                                              std::to_string(features_) + "] is too small");
                }
                ConvLayer conv{Tensor({c.filters, shape[0], kh, kw}), Tensor({c.filters}), {c.stride, c.stride}, {}};
                if (allocate) {
                    const std::size_t fan_in = shape[0] * kh * kw;
                    detail::fan_in_uniform(conv.weight, fan_in, rng);
                    detail::fan_in_uniform(conv.bias, fan_in, rng);
                }
                push(std::move(conv), "conv" + tag, shape);
                if (grcnn) {
                    push(BatchNormLayer{Tensor({c.filters}, 1.0), Tensor({c.filters}, 0.0),
                                        RunningStats::identity(c.filters), kBatchNormEps, {}},
                         "bn" + tag, shape);
                }
                push(ReluLayer{}, "relu" + tag, shape);
                if (grcnn && i == 0) {
                    MaxPoolLayer pool;
                    if (shape[1] < 2 || shape[2] < 2) {
                        fail(ErrorKind::arch, "layer pool1 (2x2) does not fit its input " + shape_str(shape) +
                                                  "; observation [" + std::to_string(window_) + "," +
                                                  std::to_string(features_) + "] is too small");
                    }
                    push(std::move(pool), "pool1", shape);
                }
                if (!grcnn) push(DropoutLayer{spec_.dropout_p, {}}, "dropout" + tag, shape);
            }
            push(FlattenLayer{}, "flatten", shape);
            DenseLayer d = allocate ? detail::make_dense(shape[0], spec_.dense_width, kHiddenGain, rng)
                                    : DenseLayer{Tensor({spec_.dense_width, shape[0]}), Tensor({spec_.dense_width}), {}};
            push(std::move(d), "dense1", shape);
            push(ReluLayer{}, "relu_dense", shape);
        }
        feature_dim_ = shape[0];
        first_param_layer_ = 0;
        for (std::size_t i = 0; i < trunk_.size(); ++i) {
            if (std::holds_alternative<ConvLayer>(trunk_[i]) || std::holds_alternative<DenseLayer>(trunk_[i])) {
                first_param_layer_ = i;
                break;
            }
        }
    }

    ArchSpec spec_;
    std::size_t window_ = 0, features_ = 0, action_dim_ = 0, feature_dim_ = 0;
    std::size_t first_param_layer_ = 0;
    std::vector<Layer> trunk_;
    std::vector<LayerShape> shapes_;
    DenseLayer actor_;
    DenseLayer critic_;
    Tensor log_std_;
    Rng dropout_rng_{0};
};

}  // namespace tradenet::policy
