#pragma once

#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "tradenet/core/optim.hpp"
#include "tradenet/core/text.hpp"
#include "tradenet/ppo/config.hpp"
#include "tradenet/ppo/loss.hpp"
#include "tradenet/ppo/rollout.hpp"

namespace tradenet::ppo {

struct UpdateStats {
    double policy_loss = 0;
    double value_loss = 0;
    double entropy = 0;
    double clip_fraction = 0;
    double approx_kl = 0;
    double grad_norm = 0;  // before clipping
    std::size_t minibatches = 0;
};

/// Splits [0, n) into consecutive chunks of `size`; a trailing chunk of one
/// element joins the previous chunk so batch statistics stay defined.
inline std::vector<std::pair<std::size_t, std::size_t>> minibatch_ranges(std::size_t n, std::size_t size) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t lo = 0; lo < n; lo += size) out.emplace_back(lo, std::min(n, lo + size));
    if (out.size() > 1 && out.back().second - out.back().first == 1) {
        out[out.size() - 2].second = out.back().second;
        out.pop_back();
    }
    return out;
}

inline Minibatch gather(const RolloutBuffer& buf, std::span<const std::size_t> idx) {
    const std::size_t b = idx.size();
    const auto& os = buf.observations.shape();
    const std::size_t obs_size = os[1] * os[2], d = buf.actions.dim(1);
    Minibatch mb{Tensor({b, os[1], os[2]}), Tensor({b, d}), {}, {}, {}};
    for (std::size_t k = 0; k < b; ++k) {
        const std::size_t i = idx[k];
        std::copy_n(buf.observations.data().begin() + i * obs_size, obs_size,
                    mb.observations.data().begin() + k * obs_size);
        std::copy_n(buf.actions.data().begin() + i * d, d, mb.actions.data().begin() + k * d);
        mb.old_log_probs.push_back(buf.log_probs[i]);
        mb.advantages.push_back(buf.advantages[i]);
        mb.returns.push_back(buf.returns[i]);
    }
    normalize_advantages(mb.advantages);
    return mb;
}

/// n_epochs passes over freshly shuffled minibatches, one clipped Adam step
/// per minibatch. Returns means over all minibatches.
inline UpdateStats train_update(policy::PolicyNet& net, const RolloutBuffer& buf, const PpoConfig& cfg,
                                AdamState& adam, Rng& rng) {
    if (!buf.has_advantages()) fail(ErrorKind::state, "train_update: buffer has no advantages (run compute_gae)");
    adam.learning_rate = cfg.learning_rate;
    std::vector<std::size_t> order(buf.size());
    UpdateStats s;
    auto params = net.parameters();
    for (std::size_t epoch = 0; epoch < cfg.n_epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        rng.shuffle(std::span<std::size_t>(order));
        for (const auto& [lo, hi] : minibatch_ranges(order.size(), cfg.minibatch_size)) {
            const auto mb = gather(buf, std::span<const std::size_t>(order).subspan(lo, hi - lo));
            net.zero_grad();
            LossTerms t;
            try {
                t = ppo_loss(net, mb, cfg.clip_eps, cfg.vf_coef, cfg.ent_coef, Mode::train, true);
            } catch (const Error& e) {
                fail(e.kind(), "train_update epoch " + std::to_string(epoch) + " minibatch " +
                                   std::to_string(s.minibatches) + ": " + e.what());
            }
            s.grad_norm += clip_grad_norm(params, cfg.max_grad_norm);
            adam_step(params, adam);
            s.policy_loss += t.policy_loss;
            s.value_loss += t.value_loss;
            s.entropy += t.entropy;
            s.clip_fraction += t.clip_fraction;
            s.approx_kl += t.approx_kl;
            ++s.minibatches;
        }
    }
    const double k = static_cast<double>(s.minibatches);
    for (double* v : {&s.policy_loss, &s.value_loss, &s.entropy, &s.clip_fraction, &s.approx_kl, &s.grad_norm}) *v /= k;
    for (const auto& p : params) {
        if (!p.tensor->all_finite()) fail(ErrorKind::numeric, "train_update left parameter '" + p.name + "' non-finite");
    }
    return s;
}

struct LogRow {
    std::size_t timestep = 0;
    /// Mean undiscounted return of episodes finished during the iteration's
    /// rollout; when none finished, the return accumulated so far by the
    /// episode in progress.
    double mean_episode_return = 0;
    double policy_loss = 0;
    double value_loss = 0;
    double clip_fraction = 0;
    double entropy = 0;
};

inline const char* kLogHeader = "timestep,mean_episode_return,policy_loss,value_loss,clip_fraction,entropy";

inline std::string log_row_csv(const LogRow& r) {
    std::ostringstream os;
    os << r.timestep << ',' << text::format_double(r.mean_episode_return) << ',' << text::format_double(r.policy_loss)
       << ',' << text::format_double(r.value_loss) << ',' << text::format_double(r.clip_fraction) << ','
       << text::format_double(r.entropy);
    return os.str();
}

struct LearnHooks {
    /// Called after every iteration with its log row (the CLI writes and
    /// flushes the log file here).
    std::function<void(const LogRow&)> on_row;
    /// Called every `checkpoint_interval` iterations (0 disables) with the
    /// 1-based iteration number.
    std::function<void(std::size_t, policy::PolicyNet&)> on_checkpoint;
    std::size_t checkpoint_interval = 0;
};

/// Streams derived from cfg.seed: 1 rollout sampling, 2 minibatch shuffling.
inline std::vector<LogRow> learn(env::TradingEnv& env, policy::PolicyNet& net, const PpoConfig& cfg,
                                 const LearnHooks& hooks = {}) {
    cfg.validate();
    const Rng root(cfg.seed);
    Rng rollout_rng = root.split(1);
    Rng shuffle_rng = root.split(2);
    AdamState adam;
    adam.learning_rate = cfg.learning_rate;
    EpisodeTracker tracker;
    std::vector<LogRow> log;
    std::size_t steps = 0;
    env.reset();
    for (std::size_t it = 1; it <= cfg.iterations(); ++it) {
        auto buf = collect_rollout(env, net, cfg.n_steps, rollout_rng, &tracker);
        compute_gae(buf, cfg.gamma, cfg.gae_lambda);
        const auto stats = train_update(net, buf, cfg, adam, shuffle_rng);
        steps += buf.size();
        LogRow row{steps, tracker.running_return, stats.policy_loss, stats.value_loss, stats.clip_fraction,
                   stats.entropy};
        if (!buf.episode_returns.empty()) {
            row.mean_episode_return = std::accumulate(buf.episode_returns.begin(), buf.episode_returns.end(), 0.0) /
                                      static_cast<double>(buf.episode_returns.size());
        }
        log.push_back(row);
        if (hooks.on_row) hooks.on_row(row);
        if (hooks.on_checkpoint && hooks.checkpoint_interval > 0 && it % hooks.checkpoint_interval == 0) {
            hooks.on_checkpoint(it, net);
        }
    }
    return log;
}

}  // namespace tradenet::ppo
