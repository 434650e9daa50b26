#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "tradenet/core/error.hpp"
#include "tradenet/core/gaussian.hpp"
#include "tradenet/core/tensor.hpp"
#include "tradenet/policy/policy_net.hpp"

namespace tradenet::ppo {

/// min(r * A, clip(r, 1 - eps, 1 + eps) * A)
inline double clipped_surrogate(double ratio, double advantage, double clip_eps) {
    const double unclipped = ratio * advantage;
    const double clipped = std::clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps) * advantage;
    return std::min(unclipped, clipped);
}

/// Subtracts the mean and divides by (sample std + 1e-8). Left alone for a
/// single element.
inline void normalize_advantages(std::vector<double>& adv) {
    const std::size_t n = adv.size();
    if (n < 2) return;
    const double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / static_cast<double>(n);
    double ss = 0.0;
    for (double a : adv) ss += (a - mean) * (a - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    for (double& a : adv) a = (a - mean) / (sd + 1e-8);
}

struct Minibatch {
    Tensor observations;  // [B, window, F]
    Tensor actions;       // [B, D]
    std::vector<double> old_log_probs;
    std::vector<double> advantages;
    std::vector<double> returns;

    std::size_t size() const { return old_log_probs.size(); }
};

struct LossTerms {
    double loss = 0;
    double policy_loss = 0;
    double value_loss = 0;
    double entropy = 0;
    double clip_fraction = 0;
    double approx_kl = 0;
};

namespace detail {

inline void require_finite(double v, const char* term) {
    if (!std::isfinite(v)) fail(ErrorKind::numeric, std::string("ppo loss: non-finite ") + term);
}

}  // namespace detail

/// loss = -mean(min(r A, clip(r) A)) + vf_coef * mean((V - R)^2) - ent_coef * entropy
/// with r = exp(log_prob_new - log_prob_old). With `backward` set, parameter
/// gradients of the loss are accumulated into the network (including
/// log_std). approx_kl is mean((r - 1) - log r).
inline LossTerms ppo_loss(policy::PolicyNet& net, const Minibatch& mb, double clip_eps, double vf_coef,
                          double ent_coef, Mode mode = Mode::train, bool backward = false) {
    const std::size_t b = mb.size();
    if (b == 0) fail(ErrorKind::value, "ppo_loss: empty minibatch");
    if (mb.advantages.size() != b || mb.returns.size() != b) fail(ErrorKind::shape, "ppo_loss: ragged minibatch");
    const std::size_t d = net.action_dim();
    auto out = net.forward(mb.observations, mode);
    const auto log_std = net.log_std().data();
    const double inv_b = 1.0 / static_cast<double>(b);

    LossTerms t;
    t.entropy = gaussian_entropy(log_std);
    Tensor d_mean({b, d});
    Tensor d_value({b});
    std::vector<double> d_log_std(d, 0.0), g_mean(d), g_log_std(d);
    for (std::size_t i = 0; i < b; ++i) {
        const auto mean_i = out.mean.data().subspan(i * d, d);
        const auto act_i = mb.actions.data().subspan(i * d, d);
        const double logp = gaussian_log_prob(mean_i, log_std, act_i);
        const double ratio = std::exp(logp - mb.old_log_probs[i]);
        const double adv = mb.advantages[i];
        const double unclipped = ratio * adv;
        const double clipped = std::clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps) * adv;
        t.policy_loss -= std::min(unclipped, clipped) * inv_b;
        if (std::abs(ratio - 1.0) > clip_eps) t.clip_fraction += inv_b;
        t.approx_kl += ((ratio - 1.0) - (logp - mb.old_log_probs[i])) * inv_b;
        const double err = out.value[i] - mb.returns[i];
        t.value_loss += err * err * inv_b;
        if (!backward) continue;
        // d(-min)/d logp: the unclipped branch is active on ties and whenever
        // the ratio lies inside the clip range; the clipped branch is flat.
        const double d_logp = unclipped <= clipped ? -adv * ratio * inv_b : 0.0;
        gaussian_log_prob_grad(mean_i, log_std, act_i, g_mean, g_log_std);
        for (std::size_t j = 0; j < d; ++j) {
            d_mean[i * d + j] = d_logp * g_mean[j];
            d_log_std[j] += d_logp * g_log_std[j];
        }
        d_value[i] = vf_coef * 2.0 * err * inv_b;
    }
    t.loss = t.policy_loss + vf_coef * t.value_loss - ent_coef * t.entropy;
    detail::require_finite(t.policy_loss, "policy_loss");
    detail::require_finite(t.value_loss, "value_loss");
    detail::require_finite(t.entropy, "entropy");
    detail::require_finite(t.loss, "loss");
    if (backward) {
        net.backward(d_mean, d_value);
        auto g = net.log_std().grad();
        for (std::size_t j = 0; j < d; ++j) g[j] += d_log_std[j] - ent_coef;
    }
    return t;
}

}  // namespace tradenet::ppo
