#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "tradenet/core/error.hpp"
#include "tradenet/core/rng.hpp"
#include "tradenet/core/tensor.hpp"
#include "tradenet/env/trading_env.hpp"
#include "tradenet/policy/policy_net.hpp"

namespace tradenet::ppo {

struct RolloutBuffer {
    Tensor observations;  // [n, window, F]
    Tensor actions;       // [n, D], unclipped samples
    std::vector<double> log_probs;
    std::vector<double> rewards;
    std::vector<double> values;
    std::vector<bool> dones;  // episode ended with this step
    double bootstrap_value = 0;
    std::vector<double> advantages;
    std::vector<double> returns;
    /// Undiscounted returns of episodes that finished inside this rollout.
    std::vector<double> episode_returns;

    std::size_t size() const { return rewards.size(); }
    bool has_advantages() const { return advantages.size() == size() && returns.size() == size(); }
};

/// Carries the unfinished episode between consecutive rollouts.
struct EpisodeTracker {
    double running_return = 0;
    std::size_t running_length = 0;
};

/// Runs the policy for exactly n_steps transitions. The environment is reset
/// (at day 0) whenever it has not been started or an episode ends.
inline RolloutBuffer collect_rollout(env::TradingEnv& env, policy::PolicyNet& net, std::size_t n_steps, Rng& rng,
                                     EpisodeTracker* tracker = nullptr) {
    if (n_steps == 0) fail(ErrorKind::value, "collect_rollout: n_steps must be positive");
    if (env.action_dim() != net.action_dim()) {
        fail(ErrorKind::shape, "collect_rollout: environment trades " + std::to_string(env.action_dim()) +
                                   " assets but the policy emits " + std::to_string(net.action_dim()) + " actions");
    }
    const auto obs_shape = env.observation_shape();
    if (obs_shape[0] != net.window() || obs_shape[1] != net.features()) {
        fail(ErrorKind::shape, "collect_rollout: observation " + shape_str(obs_shape) + " does not match the policy");
    }
    EpisodeTracker local;
    EpisodeTracker& ep = tracker ? *tracker : local;
    const std::size_t d = net.action_dim(), obs_size = obs_shape[0] * obs_shape[1];
    RolloutBuffer buf;
    buf.observations = Tensor({n_steps, obs_shape[0], obs_shape[1]});
    buf.actions = Tensor({n_steps, d});
    buf.log_probs.reserve(n_steps);
    buf.rewards.reserve(n_steps);
    buf.values.reserve(n_steps);
    buf.dones.reserve(n_steps);

    Tensor obs = (env.state().holdings.empty() || env.state().done) ? env.reset() : env.observe();
    if (env.state().done) fail(ErrorKind::data, "collect_rollout: frame too short for a single step");
    for (std::size_t t = 0; t < n_steps; ++t) {
        std::copy(obs.data().begin(), obs.data().end(), buf.observations.data().begin() + t * obs_size);
        const auto a = net.act(obs, rng);
        env::StepResult r;
        try {
            r = env.step(a.action);
        } catch (const Error& e) {
            fail(e.kind(), "rollout step " + std::to_string(t) + ": " + e.what());
        }
        std::copy(a.sample.begin(), a.sample.end(), buf.actions.data().begin() + t * d);
        buf.log_probs.push_back(a.log_prob);
        buf.values.push_back(a.value);
        buf.rewards.push_back(r.reward);
        buf.dones.push_back(r.done);
        ep.running_return += r.reward;
        ++ep.running_length;
        if (r.done) {
            buf.episode_returns.push_back(ep.running_return);
            ep = {};
            obs = env.reset();
        } else {
            obs = std::move(r.observation);
        }
    }
    buf.bootstrap_value = net.forward(obs, Mode::eval).value[0];
    return buf;
}

/// Backward recursion
///   delta_t = r_t + gamma * V_{t+1} * (1 - done_t) - V_t
///   A_t     = delta_t + gamma * lambda * (1 - done_t) * A_{t+1}
/// with V_n the bootstrap value; returns = A + V.
inline void compute_gae(RolloutBuffer& buf, double gamma, double lambda) {
    const std::size_t n = buf.size();
    if (buf.values.size() != n || buf.dones.size() != n) fail(ErrorKind::shape, "compute_gae: ragged buffer");
    buf.advantages.assign(n, 0.0);
    buf.returns.assign(n, 0.0);
    double next_adv = 0.0;
    for (std::size_t k = n; k-- > 0;) {
        const double next_value = k + 1 < n ? buf.values[k + 1] : buf.bootstrap_value;
        const double live = buf.dones[k] ? 0.0 : 1.0;
        const double delta = buf.rewards[k] + gamma * next_value * live - buf.values[k];
        next_adv = delta + gamma * lambda * live * next_adv;
        buf.advantages[k] = next_adv;
        buf.returns[k] = next_adv + buf.values[k];
    }
}

}  // namespace tradenet::ppo
