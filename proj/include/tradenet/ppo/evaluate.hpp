#pragma once

#include <algorithm>
#include <vector>

#include "tradenet/core/rng.hpp"
#include "tradenet/env/trading_env.hpp"
#include "tradenet/policy/policy_net.hpp"

namespace tradenet::ppo {

struct EpisodeTrace {
    std::vector<double> rewards;           // scaled, one per step
    std::vector<double> cumulative;        // prefix sums of rewards
    std::vector<double> portfolio_values;  // v_0 .. v_T
    std::vector<Date> dates;               // date reached after each step

    double total() const { return cumulative.empty() ? 0.0 : cumulative.back(); }
};

/// Largest peak-to-trough fall of the value series, as a fraction of the peak.
inline double max_drawdown(const std::vector<double>& values) {
    double peak = 0.0, worst = 0.0;
    for (double v : values) {
        peak = std::max(peak, v);
        if (peak > 0) worst = std::max(worst, (peak - v) / peak);
    }
    return worst;
}

/// Plays one episode from day 0 to the end of the frame, asking `policy` for
/// each action.
template <class Policy>
EpisodeTrace run_episode(env::TradingEnv& env, Policy&& policy) {
    EpisodeTrace tr;
    Tensor obs = env.reset();
    tr.portfolio_values.push_back(env.portfolio_value());
    double sum = 0.0;
    while (!env.state().done) {
        const std::vector<double> action = policy(obs);
        auto r = env.step(action);
        sum += r.reward;
        tr.rewards.push_back(r.reward);
        tr.cumulative.push_back(sum);
        tr.portfolio_values.push_back(r.info.portfolio_value);
        tr.dates.push_back(env.frame().dates[env.state().day]);
        obs = std::move(r.observation);
    }
    return tr;
}

/// Clipped action mean, no sampling.
inline EpisodeTrace run_deterministic(env::TradingEnv& env, policy::PolicyNet& net) {
    return run_episode(env, [&](const Tensor& obs) { return net.act_deterministic(obs); });
}

/// Independent uniform actions in [-1, 1]^D.
inline EpisodeTrace run_uniform_random(env::TradingEnv& env, Rng& rng) {
    return run_episode(env, [&](const Tensor&) {
        std::vector<double> a(env.action_dim());
        for (double& v : a) v = rng.uniform(-1.0, 1.0);
        return a;
    });
}

}  // namespace tradenet::ppo
