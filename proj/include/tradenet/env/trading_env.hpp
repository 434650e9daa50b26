#pragma once

#include <cmath>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <vector>

#include "tradenet/core/error.hpp"
#include "tradenet/core/tensor.hpp"
#include "tradenet/data/frame.hpp"

namespace tradenet::env {

struct EnvConfig {
    long hmax = 1000;
    double initial_balance = 1e6;
    double cost_rate = 0.0;
    double reward_scale = 1e-4;
    std::size_t window = data::kDefaultWindow;

    void validate() const {
        if (hmax < 1) fail(ErrorKind::config, "env.hmax must be >= 1");
        if (!(initial_balance > 0)) fail(ErrorKind::config, "env.initial_balance must be positive");
        if (!(cost_rate >= 0 && cost_rate < 1)) fail(ErrorKind::config, "env.cost_rate must be in [0,1)");
        if (window < 1) fail(ErrorKind::config, "env.window must be >= 1");
        if (!std::isfinite(reward_scale)) fail(ErrorKind::config, "env.reward_scale must be finite");
    }
};

struct AccountSnapshot {
    double balance;
    std::vector<long> holdings;
};

struct EnvState {
    std::size_t start_day = 0;
    std::size_t day = 0;
    double balance = 0;
    std::vector<long> holdings;
    /// history[k] is the account at day start_day + k, after the trades that
    /// led into that day.
    std::vector<AccountSnapshot> history;
    /// Portfolio value at `day`, before that day's trades.
    double value = 0;
    bool done = false;
};

struct StepInfo {
    double raw_reward = 0;
    double portfolio_value = 0;
    int trades = 0;
    double costs = 0;
};

struct StepResult {
    Tensor observation;
    double reward;
    bool done;
    StepInfo info;
};

/// Share-trading MDP over a feature frame. Each step executes the requested
/// trades at the current day's closes (sells first, then buys in ticker
/// order), advances one day, and rewards reward_scale * (v_{t+1} - v_t).
/// The episode ends on the frame's last day.
class TradingEnv {
public:
    TradingEnv(std::shared_ptr<const data::FeatureFrame> frame, EnvConfig cfg)
        : frame_(std::move(frame)), cfg_(cfg) {
        if (!frame_ || frame_->rows() == 0) fail(ErrorKind::value, "TradingEnv: empty frame");
        cfg_.validate();
    }

    const data::FeatureFrame& frame() const { return *frame_; }
    const EnvConfig& config() const { return cfg_; }
    const EnvState& state() const { return state_; }
    std::size_t action_dim() const { return frame_->tickers.size(); }
    Shape observation_shape() const { return {cfg_.window, frame_->cols()}; }

    /// The seed is accepted for interface symmetry; replayed market data has
    /// no stochastic transitions.
    Tensor reset(std::size_t start_day = 0, std::uint64_t seed = 0) {
        (void)seed;
        if (start_day >= frame_->rows()) {
            fail(ErrorKind::value, "reset: start_day " + std::to_string(start_day) + " outside frame of " +
                                       std::to_string(frame_->rows()) + " days");
        }
        state_ = EnvState{};
        state_.start_day = start_day;
        state_.day = start_day;
        state_.balance = cfg_.initial_balance;
        state_.holdings.assign(action_dim(), 0);
        state_.history.push_back({state_.balance, state_.holdings});
        state_.value = portfolio_value();
        state_.done = start_day + 1 >= frame_->rows();
        return observe();
    }

    double portfolio_value() const { return value_at(state_.day); }

    StepResult step(std::span<const double> action) {
        if (state_.holdings.empty()) fail(ErrorKind::state, "step called before reset");
        if (state_.done) fail(ErrorKind::state, "step called on a finished episode");
        if (action.size() != action_dim()) {
            fail(ErrorKind::shape, "step: action has " + std::to_string(action.size()) + " entries, expected " +
                                       std::to_string(action_dim()));
        }
        for (double a : action) {
            if (std::isnan(a)) fail(ErrorKind::value, "step: action contains NaN");
        }
        const std::size_t t = state_.day;
        const std::size_t d = action_dim();
        std::vector<long> shares(d);
        for (std::size_t j = 0; j < d; ++j) {
            const double a = std::clamp(action[j], -1.0, 1.0);
            shares[j] = static_cast<long>(std::round(a * static_cast<double>(cfg_.hmax)));
        }
        StepInfo info;
        for (std::size_t j = 0; j < d; ++j) {
            if (shares[j] >= 0) continue;
            const long n = std::min(-shares[j], state_.holdings[j]);
            if (n == 0) continue;
            const double notional = static_cast<double>(n) * frame_->price(t, j);
            state_.balance += notional * (1.0 - cfg_.cost_rate);
            state_.holdings[j] -= n;
            info.costs += notional * cfg_.cost_rate;
            ++info.trades;
        }
        for (std::size_t j = 0; j < d; ++j) {
            if (shares[j] <= 0) continue;
            const double unit = frame_->price(t, j) * (1.0 + cfg_.cost_rate);
            long n = std::min(shares[j], static_cast<long>(std::floor(state_.balance / unit)));
            while (n > 0 && static_cast<double>(n) * unit > state_.balance) --n;
            if (n <= 0) continue;
            const double notional = static_cast<double>(n) * frame_->price(t, j);
            state_.balance -= static_cast<double>(n) * unit;
            if (state_.balance < 0) state_.balance = 0;  // sub-ulp rounding only
            state_.holdings[j] += n;
            info.costs += notional * cfg_.cost_rate;
            ++info.trades;
        }
        state_.day = t + 1;
        state_.history.push_back({state_.balance, state_.holdings});
        const double next_value = portfolio_value();
        info.raw_reward = next_value - state_.value;
        info.portfolio_value = next_value;
        state_.value = next_value;
        state_.done = state_.day + 1 >= frame_->rows();
        return {observe(), cfg_.reward_scale * info.raw_reward, state_.done, info};
    }

    /// Window of frame rows ending at the current day with the balance
    /// (relative to initial_balance) and holdings columns replaced by the
    /// account history. Rows before the episode start show the initial
    /// account.
    Tensor observe() const {
        auto view = data::window_at(*frame_, state_.day, cfg_.window);
        Tensor& m = view.matrix;
        const std::size_t cols = frame_->cols();
        for (std::size_t r = 0; r < cfg_.window; ++r) {
            const std::size_t back = cfg_.window - 1 - r;
            const std::size_t src = state_.day >= back ? state_.day - back : 0;
            double balance = 1.0;
            const std::vector<long>* holdings = nullptr;
            if (src >= state_.start_day && src - state_.start_day < state_.history.size()) {
                const auto& snap = state_.history[src - state_.start_day];
                balance = snap.balance / cfg_.initial_balance;
                holdings = &snap.holdings;
            }
            m[r * cols] = balance;
            for (std::size_t j = 0; j < action_dim(); ++j) {
                m[r * cols + frame_->holdings_col(j)] = holdings ? static_cast<double>((*holdings)[j]) : 0.0;
            }
        }
        return std::move(view.matrix);
    }

private:
    double value_at(std::size_t day) const {
        double v = state_.balance;
        for (std::size_t j = 0; j < state_.holdings.size(); ++j) {
            v += static_cast<double>(state_.holdings[j]) * frame_->price(day, j);
        }
        return v;
    }

    std::shared_ptr<const data::FeatureFrame> frame_;
    EnvConfig cfg_;
    EnvState state_;
};

inline double episode_return(std::span<const double> rewards) {
    return std::accumulate(rewards.begin(), rewards.end(), 0.0);
}

}  // namespace tradenet::env
