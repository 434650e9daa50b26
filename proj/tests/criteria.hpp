#pragma once

// Property and oracle sweeps shared by the unit tests and the acceptance
// binary.

#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

#include "oracles.hpp"
#include "tradenet/data/bars.hpp"
#include "tradenet/data/frame.hpp"
#include "tradenet/env/trading_env.hpp"
#include "tradenet/indicators/indicators.hpp"
#include "tradenet/policy/policy_net.hpp"
#include "tradenet/ppo/rollout.hpp"

namespace criteria {

using namespace tradenet;

struct Ohlc {
    std::vector<double> open, high, low, close;
};

/// Random walk with consistent high/low; `flat_from` freezes the series to
/// exercise zero-movement branches.
inline Ohlc random_bars(Rng& rng, std::size_t n, std::size_t flat_from = SIZE_MAX) {
    Ohlc b;
    double p = rng.uniform(10, 200);
    for (std::size_t t = 0; t < n; ++t) {
        const bool flat = t >= flat_from;
        const double open = flat ? p : p * std::exp(0.01 * rng.normal());
        const double close = flat ? p : p * std::exp(0.02 * rng.normal());
        const double hi = flat ? p : std::max(open, close) * (1 + 0.01 * std::abs(rng.normal()));
        const double lo = flat ? p : std::min(open, close) * (1 - 0.01 * std::abs(rng.normal()));
        b.open.push_back(open);
        b.high.push_back(hi);
        b.low.push_back(lo);
        b.close.push_back(close);
        p = close;
    }
    return b;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return a.size() == b.size() ? m : INFINITY;
}

struct IndicatorReport {
    double worst = 0;         // largest absolute deviation from the oracles
    const char* worst_name = "";
    bool bounds_ok = true;    // RSI and DX inside [0, 100]
};

/// One 100-bar series per seed, compared indicator by indicator.
inline void indicator_case(std::uint64_t seed, IndicatorReport& rep) {
    Rng rng(seed);
    const std::size_t n = 100;
    const auto b = random_bars(rng, n, seed % 5 == 0 ? 60 : SIZE_MAX);
    indicators::IndicatorConfig cfg;
    cfg.rsi_period = 2 + static_cast<int>(rng.below(40));
    cfg.cci_period = 2 + static_cast<int>(rng.below(40));
    cfg.dx_period = 2 + static_cast<int>(rng.below(40));
    cfg.macd_fast = 2 + static_cast<int>(rng.below(15));
    cfg.macd_slow = cfg.macd_fast + 1 + static_cast<int>(rng.below(20));
    cfg.macd_signal = 2 + static_cast<int>(rng.below(12));
    cfg.boll_period = 2 + static_cast<int>(rng.below(30));
    cfg.boll_k = rng.uniform(1, 3);
    const int sma_n = 2 + static_cast<int>(rng.below(70));

    auto track = [&](const char* name, double d) {
        if (d > rep.worst) {
            rep.worst = d;
            rep.worst_name = name;
        }
    };
    track("sma", max_abs_diff(indicators::sma(b.close, sma_n), oracle::sma(b.close, sma_n)));
    track("ema", max_abs_diff(indicators::ema(b.close, cfg.macd_fast), oracle::ema(b.close, cfg.macd_fast)));

    const auto fast = oracle::ema(b.close, cfg.macd_fast), slow = oracle::ema(b.close, cfg.macd_slow);
    std::vector<double> macd(n);
    for (std::size_t t = 0; t < n; ++t) macd[t] = fast[t] - slow[t];
    track("macd", max_abs_diff(indicators::macd(b.close, cfg), macd));
    track("macd_signal", max_abs_diff(indicators::macd_signal(b.close, cfg), oracle::ema(macd, cfg.macd_signal)));

    const auto mid = oracle::sma(b.close, cfg.boll_period);
    std::vector<double> ub(n), lb(n);
    for (std::size_t t = 0; t < n; ++t) {
        const std::size_t lo = t + 1 >= static_cast<std::size_t>(cfg.boll_period) ? t + 1 - cfg.boll_period : 0;
        const double sd = oracle::population_sd(b.close, lo, t);
        ub[t] = mid[t] + cfg.boll_k * sd;
        lb[t] = mid[t] - cfg.boll_k * sd;
    }
    const auto bands = indicators::bollinger(b.close, cfg);
    track("boll_ub", max_abs_diff(bands.upper, ub));
    track("boll_lb", max_abs_diff(bands.lower, lb));

    const auto rsi = indicators::rsi(b.close, cfg.rsi_period);
    track("rsi", max_abs_diff(rsi, oracle::rsi(b.close, cfg.rsi_period)));
    track("cci", max_abs_diff(indicators::cci(b.high, b.low, b.close, cfg.cci_period),
                              oracle::cci(b.high, b.low, b.close, cfg.cci_period)));
    const auto dx = indicators::dx(b.high, b.low, b.close, cfg.dx_period);
    track("dx", max_abs_diff(dx, oracle::dx(b.high, b.low, b.close, cfg.dx_period)));
    for (std::size_t t = 0; t < n; ++t) {
        if (!(rsi[t] >= 0 && rsi[t] <= 100 && dx[t] >= 0 && dx[t] <= 100)) rep.bounds_ok = false;
    }

    // Turbulence over 2-4 correlated return series.
    const std::size_t k = 2 + rng.below(3);
    const int lookback = static_cast<int>(k) + 3 + static_cast<int>(rng.below(30));
    std::vector<std::vector<double>> returns(n, std::vector<double>(k));
    indicators::ReturnsPanel panel{n, k, std::vector<double>(n * k)};
    for (std::size_t t = 0; t < n; ++t) {
        const double common = rng.normal();
        for (std::size_t j = 0; j < k; ++j) {
            returns[t][j] = 0.01 * (0.6 * common + rng.normal());
            panel.values[t * k + j] = returns[t][j];
        }
    }
    track("turbulence", max_abs_diff(indicators::turbulence(panel, lookback),
                                     oracle::turbulence(returns, lookback, indicators::kTurbulenceRidge)));
}

/// Extreme series for the bound checks only: spikes, gaps, flat runs.
inline bool indicator_bounds_fuzz(std::uint64_t seed) {
    Rng rng(seed);
    const std::size_t n = 20 + rng.below(200);
    Ohlc b;
    double p = 50;
    for (std::size_t t = 0; t < n; ++t) {
        const int mode = static_cast<int>(rng.below(4));
        if (mode == 0) p *= std::exp(rng.uniform(-2, 2));
        if (mode == 1) p *= std::exp(1e-9 * rng.normal());
        const double hi = p * (1 + (mode == 3 ? 0.0 : rng.uniform(0, 0.5)));
        const double lo = p / (1 + (mode == 3 ? 0.0 : rng.uniform(0, 0.5)));
        b.open.push_back(p);
        b.close.push_back(p);
        b.high.push_back(hi);
        b.low.push_back(lo);
    }
    const int period = 2 + static_cast<int>(rng.below(40));
    for (double v : indicators::rsi(b.close, period)) {
        if (!(v >= 0 && v <= 100)) return false;
    }
    for (double v : indicators::dx(b.high, b.low, b.close, period)) {
        if (!(v >= 0 && v <= 100)) return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// Environment

inline std::shared_ptr<const data::FeatureFrame> small_market(std::uint64_t seed, std::size_t tickers,
                                                             std::size_t days) {
    data::SynthConfig sc;
    sc.n_tickers = tickers;
    sc.n_days = days;
    sc.seed = seed;
    sc.volatility = 0.02;
    data::FrameConfig fc;
    fc.indicators.turbulence_lookback = 20;
    return std::make_shared<data::FeatureFrame>(data::build_feature_frame(data::synth_market(sc), std::nullopt, fc));
}

struct EnvReport {
    std::size_t sequences = 0;
    bool nonnegative = true;      // balance >= 0 and holdings >= 0 at every step
    double worst_telescoping = 0; // |sum rewards - scale (v_T - v_0)|
};

/// Fuzzes one action sequence against a random market and account size.
inline void env_sequence(std::uint64_t seed, EnvReport& rep) {
    Rng rng(seed);
    const std::size_t tickers = 1 + rng.below(4), days = 20 + rng.below(60);
    const auto frame = small_market(seed, tickers, days);
    env::EnvConfig cfg;
    cfg.window = 1 + rng.below(10);
    cfg.hmax = 1 + static_cast<long>(rng.below(3000));
    cfg.initial_balance = std::pow(10.0, rng.uniform(2, 7));
    env::TradingEnv e(frame, cfg);
    e.reset(rng.below(days / 2));
    const double v0 = e.portfolio_value();
    double sum = 0;
    std::vector<double> a(tickers);
    bool done = e.state().done;
    while (!done) {
        const int style = static_cast<int>(rng.below(4));
        for (auto& x : a) {
            if (style == 0) x = rng.uniform(-1, 1);
            if (style == 1) x = rng.uniform(-5, 5);            // clipped
            if (style == 2) x = rng.below(2) ? 1.0 : -1.0;     // saturating
            if (style == 3) x = 1e-4 * rng.normal();           // rounds to no trade
        }
        const auto r = e.step(a);
        sum += r.reward;
        done = r.done;
        const auto& st = e.state();
        if (st.balance < 0) rep.nonnegative = false;
        for (long h : st.holdings) {
            if (h < 0) rep.nonnegative = false;
        }
    }
    const double telescoped = cfg.reward_scale * (e.portfolio_value() - v0);
    rep.worst_telescoping = std::max(rep.worst_telescoping, std::abs(sum - telescoped));
    ++rep.sequences;
}

// ---------------------------------------------------------------------------
// GAE

inline double gae_case(std::uint64_t seed) {
    Rng rng(seed);
    const std::size_t n = 50;
    ppo::RolloutBuffer buf;
    for (std::size_t t = 0; t < n; ++t) {
        buf.rewards.push_back(rng.normal());
        buf.values.push_back(rng.normal());
        buf.dones.push_back(rng.uniform() < 0.1);
    }
    buf.bootstrap_value = rng.normal();
    const double gamma = rng.uniform(0.8, 1.0), lambda = rng.uniform(0.0, 1.0);
    ppo::compute_gae(buf, gamma, lambda);
    const auto ref = oracle::gae_double_loop(buf.rewards, buf.values, buf.dones, buf.bootstrap_value, gamma, lambda);
    double worst = max_abs_diff(buf.advantages, ref);
    for (std::size_t t = 0; t < n; ++t) worst = std::max(worst, std::abs(buf.returns[t] - (ref[t] + buf.values[t])));
    return worst;
}

// ---------------------------------------------------------------------------
// Architecture shapes at window 90. Every extent below follows from
// floor((in - k) / s) + 1 with the first conv fixed at 8x8/4, the 2x2/2
// pool, and later kernels clamped to the incoming extent.

struct ShapeCase {
    policy::ArchKind kind;
    std::size_t features;
    std::vector<std::pair<std::string, Shape>> expected;  // subset of layers, in order
};

inline std::vector<ShapeCase> shape_cases() {
    using policy::ArchKind;
    return {
        {ArchKind::grcnn, 35,
         {{"conv1", {32, 21, 7}}, {"pool1", {32, 10, 3}}, {"conv2", {64, 4, 1}}, {"conv3", {128, 2, 1}},
          {"conv4", {256, 1, 1}}, {"flatten", {256}}, {"dense1", {512}}}},
        {ArchKind::grcnn, 291,
         {{"conv1", {32, 21, 71}}, {"pool1", {32, 10, 35}}, {"conv2", {64, 4, 16}}, {"conv3", {128, 2, 14}},
          {"conv4", {256, 1, 12}}, {"flatten", {3072}}, {"dense1", {512}}}},
        {ArchKind::grcnn, 494,
         {{"conv1", {32, 21, 122}}, {"pool1", {32, 10, 61}}, {"conv2", {64, 4, 29}}, {"conv3", {128, 2, 27}},
          {"conv4", {256, 1, 25}}, {"flatten", {6400}}, {"dense1", {512}}}},
        {ArchKind::cnn_v1, 35, {{"conv1", {32, 21, 7}}, {"conv2", {64, 9, 2}}, {"flatten", {1152}}, {"dense1", {512}}}},
        {ArchKind::cnn_v1, 291,
         {{"conv1", {32, 21, 71}}, {"conv2", {64, 9, 34}}, {"flatten", {19584}}, {"dense1", {512}}}},
        {ArchKind::cnn_v1, 494,
         {{"conv1", {32, 21, 122}}, {"conv2", {64, 9, 60}}, {"flatten", {34560}}, {"dense1", {512}}}},
        {ArchKind::mlp, 35, {{"flatten", {3150}}, {"dense1", {64}}, {"dense2", {64}}}},
        {ArchKind::mlp, 291, {{"flatten", {26190}}, {"dense1", {64}}, {"dense2", {64}}}},
        {ArchKind::mlp, 494, {{"flatten", {44460}}, {"dense1", {64}}, {"dense2", {64}}}},
    };
}

/// Empty string when the planned shapes match; otherwise the first mismatch.
inline std::string check_plan(const ShapeCase& c, std::size_t window = 90) {
    const auto plan = policy::PolicyNet::plan(policy::ArchSpec::defaults(c.kind), window, c.features);
    std::size_t k = 0;
    for (const auto& [name, shape] : c.expected) {
        while (k < plan.size() && plan[k].name != name) ++k;
        if (k == plan.size()) return "layer " + name + " missing";
        if (plan[k].output != shape) {
            return name + " is " + shape_str(plan[k].output) + ", expected " + shape_str(shape);
        }
    }
    return "";
}

}  // namespace criteria
