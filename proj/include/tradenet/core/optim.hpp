#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "tradenet/core/error.hpp"
#include "tradenet/core/tensor.hpp"

namespace tradenet {

// Both optimizers minimize: parameters move against the stored gradient.

namespace detail {
inline void require_finite_grads(std::span<const NamedTensor> params) {
    for (const auto& p : params) {
        for (double g : p.tensor->grad()) {
            if (!std::isfinite(g)) fail(ErrorKind::numeric, "non-finite gradient in parameter '" + p.name + "'");
        }
    }
}
}  // namespace detail

inline void sgd_step(std::span<const NamedTensor> params, double learning_rate) {
    detail::require_finite_grads(params);
    for (const auto& p : params) {
        auto g = p.tensor->grad();
        auto v = p.tensor->data();
        for (std::size_t i = 0; i < v.size(); ++i) v[i] -= learning_rate * g[i];
    }
}

struct AdamState {
    std::uint64_t step = 0;
    double learning_rate = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::vector<std::vector<double>> first_moment;
    std::vector<std::vector<double>> second_moment;
};

/// One bias-corrected Adam update. Moment buffers are allocated on the first
/// call and must keep matching the parameter shapes afterwards.
inline void adam_step(std::span<const NamedTensor> params, AdamState& state) {
    if (state.learning_rate < 0.0) fail(ErrorKind::value, "adam learning rate must be non-negative");
    detail::require_finite_grads(params);
    if (state.first_moment.empty()) {
        for (const auto& p : params) {
            state.first_moment.emplace_back(p.tensor->size(), 0.0);
            state.second_moment.emplace_back(p.tensor->size(), 0.0);
        }
    }
    if (state.first_moment.size() != params.size()) {
        fail(ErrorKind::shape, "adam state holds " + std::to_string(state.first_moment.size()) +
                                   " moment buffers for " + std::to_string(params.size()) + " parameters");
    }
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(state.beta1, t);
    const double c2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto v = params[k].tensor->data();
        auto g = params[k].tensor->grad();
        auto& m1 = state.first_moment[k];
        auto& m2 = state.second_moment[k];
        if (m1.size() != v.size()) {
            fail(ErrorKind::shape, "adam moment buffer size mismatch for '" + params[k].name + "'");
        }
        for (std::size_t i = 0; i < v.size(); ++i) {
            m1[i] = state.beta1 * m1[i] + (1.0 - state.beta1) * g[i];
            m2[i] = state.beta2 * m2[i] + (1.0 - state.beta2) * g[i] * g[i];
            const double m_hat = m1[i] / c1;
            const double v_hat = m2[i] / c2;
            v[i] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
        }
    }
}

inline double global_grad_norm(std::span<const NamedTensor> params) {
    double sq = 0.0;
    for (const auto& p : params) {
        for (double g : p.tensor->grad()) sq += g * g;
    }
    return std::sqrt(sq);
}

/// Rescales all gradients so their joint L2 norm is at most max_norm.
/// Returns the norm before clipping.
inline double clip_grad_norm(std::span<const NamedTensor> params, double max_norm) {
    const double norm = global_grad_norm(params);
    if (norm > max_norm && norm > 0.0) {
        const double scale = max_norm / (norm + 1e-12);
        for (const auto& p : params) {
            for (double& g : p.tensor->grad()) g *= scale;
        }
    }
    return norm;
}

}  // namespace tradenet
