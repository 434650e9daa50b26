#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "tradenet/core/error.hpp"
#include "tradenet/data/date.hpp"

// Technical indicators over daily bars. Every function is causal (output t
// only reads inputs <= t) and never emits NaN: windows shorter than the
// period during warm-up use the statistics of the available prefix.

namespace tradenet::indicators {

using Series = std::vector<double>;

struct IndicatorConfig {
    int rsi_period = 30;
    int cci_period = 30;
    int dx_period = 30;
    std::vector<int> sma_periods{30, 60};
    int macd_fast = 12;
    int macd_slow = 26;
    int macd_signal = 9;
    int boll_period = 20;
    double boll_k = 2.0;
    int turbulence_lookback = 252;

    void validate() const {
        auto check = [](int p, const char* name) {
            if (p < 2) fail(ErrorKind::config, std::string("indicator period ") + name + " must be >= 2");
        };
        check(rsi_period, "rsi_period");
        check(cci_period, "cci_period");
        check(dx_period, "dx_period");
        for (int p : sma_periods) check(p, "sma_periods");
        check(macd_fast, "macd_fast");
        check(macd_slow, "macd_slow");
        check(macd_signal, "macd_signal");
        check(boll_period, "boll_period");
        check(turbulence_lookback, "turbulence_lookback");
        if (boll_k < 0) fail(ErrorKind::config, "boll_k must be non-negative");
    }
};

namespace detail {

inline void require_nonempty(std::span<const double> x, const char* op) {
    if (x.empty()) fail(ErrorKind::value, std::string(op) + ": empty input series");
}

inline void require_same_length(std::span<const double> a, std::span<const double> b, std::span<const double> c,
                                const char* op) {
    if (a.size() != b.size() || a.size() != c.size()) {
        fail(ErrorKind::shape, std::string(op) + ": high/low/close lengths differ");
    }
}

/// Wilder smoothing of x[1..]: for t <= n the mean of x[1..t], afterwards
/// avg_t = (avg_{t-1} * (n - 1) + x_t) / n. Index 0 is left at 0.
inline Series wilder(std::span<const double> x, int n) {
    Series out(x.size(), 0.0);
    double sum = 0.0;
    for (std::size_t t = 1; t < x.size(); ++t) {
        if (t <= static_cast<std::size_t>(n)) {
            sum += x[t];
            out[t] = sum / static_cast<double>(t);
        } else {
            out[t] = (out[t - 1] * (n - 1) + x[t]) / n;
        }
    }
    return out;
}

/// Window [t-n+1, t] clipped to the series start.
inline std::size_t window_start(std::size_t t, int n) {
    return t + 1 >= static_cast<std::size_t>(n) ? t + 1 - n : 0;
}

}  // namespace detail

inline Series sma(std::span<const double> close, int n) {
    detail::require_nonempty(close, "sma");
    if (n < 1) fail(ErrorKind::value, "sma: period must be >= 1");
    Series out(close.size());
    for (std::size_t t = 0; t < close.size(); ++t) {
        const std::size_t s = detail::window_start(t, n);
        double sum = 0.0;
        for (std::size_t k = s; k <= t; ++k) sum += close[k];
        out[t] = sum / static_cast<double>(t - s + 1);
    }
    return out;
}

inline Series ema(std::span<const double> close, int n) {
    detail::require_nonempty(close, "ema");
    if (n < 1) fail(ErrorKind::value, "ema: period must be >= 1");
    const double alpha = 2.0 / (n + 1.0);
    Series out(close.size());
    out[0] = close[0];
    for (std::size_t t = 1; t < close.size(); ++t) out[t] = alpha * close[t] + (1.0 - alpha) * out[t - 1];
    return out;
}

inline Series macd(std::span<const double> close, const IndicatorConfig& cfg = {}) {
    detail::require_nonempty(close, "macd");
    const Series fast = ema(close, cfg.macd_fast);
    const Series slow = ema(close, cfg.macd_slow);
    Series out(close.size());
    for (std::size_t t = 0; t < close.size(); ++t) out[t] = fast[t] - slow[t];
    return out;
}

/// EMA of the MACD line.
inline Series macd_signal(std::span<const double> close, const IndicatorConfig& cfg = {}) {
    return ema(macd(close, cfg), cfg.macd_signal);
}

struct Bands {
    Series upper;
    Series lower;
};

inline Bands bollinger(std::span<const double> close, const IndicatorConfig& cfg = {}) {
    detail::require_nonempty(close, "bollinger");
    const Series mid = sma(close, cfg.boll_period);
    Bands b{Series(close.size()), Series(close.size())};
    for (std::size_t t = 0; t < close.size(); ++t) {
        const std::size_t s = detail::window_start(t, cfg.boll_period);
        double sq = 0.0;
        for (std::size_t k = s; k <= t; ++k) sq += (close[k] - mid[t]) * (close[k] - mid[t]);
        const double sd = std::sqrt(sq / static_cast<double>(t - s + 1));
        b.upper[t] = mid[t] + cfg.boll_k * sd;
        b.lower[t] = mid[t] - cfg.boll_k * sd;
    }
    return b;
}

/// Wilder RSI in [0, 100]. No movement at all (0/0) maps to 50.
inline Series rsi(std::span<const double> close, int n = 30) {
    detail::require_nonempty(close, "rsi");
    Series gain(close.size(), 0.0), loss(close.size(), 0.0);
    for (std::size_t t = 1; t < close.size(); ++t) {
        const double d = close[t] - close[t - 1];
        gain[t] = d > 0 ? d : 0.0;
        loss[t] = d < 0 ? -d : 0.0;
    }
    const Series avg_gain = detail::wilder(gain, n);
    const Series avg_loss = detail::wilder(loss, n);
    Series out(close.size());
    for (std::size_t t = 0; t < close.size(); ++t) {
        const double g = avg_gain[t], l = avg_loss[t];
        if (g == 0.0 && l == 0.0) {
            out[t] = 50.0;
        } else if (l == 0.0) {
            out[t] = 100.0;
        } else {
            out[t] = 100.0 - 100.0 / (1.0 + g / l);
        }
    }
    return out;
}

/// Commodity Channel Index with the 0.015 Lambert constant. A window with no
/// mean absolute deviation maps to 0.
inline Series cci(std::span<const double> high, std::span<const double> low, std::span<const double> close,
                  int n = 30) {
    detail::require_nonempty(close, "cci");
    detail::require_same_length(high, low, close, "cci");
    Series tp(close.size());
    for (std::size_t t = 0; t < close.size(); ++t) tp[t] = (high[t] + low[t] + close[t]) / 3.0;
    const Series mean = sma(tp, n);
    Series out(close.size());
    for (std::size_t t = 0; t < close.size(); ++t) {
        const std::size_t s = detail::window_start(t, n);
        double dev = 0.0;
        for (std::size_t k = s; k <= t; ++k) dev += std::abs(tp[k] - mean[t]);
        const double mad = dev / static_cast<double>(t - s + 1);
        // Rounding in the window mean of a constant series leaves ~1 ulp of
        // spurious deviation; treat that as zero.
        if (mad <= 1e-12 * std::max(1.0, std::abs(mean[t]))) {
            out[t] = 0.0;
        } else {
            out[t] = (tp[t] - mean[t]) / (0.015 * mad);
        }
    }
    return out;
}

/// Directional movement index DX in [0, 100] from Wilder-smoothed +DM, -DM
/// and true range. 0/0 maps to 0.
inline Series dx(std::span<const double> high, std::span<const double> low, std::span<const double> close,
                 int n = 30) {
    detail::require_nonempty(close, "dx");
    detail::require_same_length(high, low, close, "dx");
    const std::size_t len = close.size();
    Series plus_dm(len, 0.0), minus_dm(len, 0.0), tr(len, 0.0);
    for (std::size_t t = 1; t < len; ++t) {
        const double up = high[t] - high[t - 1];
        const double down = low[t - 1] - low[t];
        plus_dm[t] = (up > down && up > 0) ? up : 0.0;
        minus_dm[t] = (down > up && down > 0) ? down : 0.0;
        tr[t] = std::max({high[t] - low[t], std::abs(high[t] - close[t - 1]), std::abs(low[t] - close[t - 1])});
    }
    const Series sp = detail::wilder(plus_dm, n);
    const Series sm = detail::wilder(minus_dm, n);
    const Series st = detail::wilder(tr, n);
    Series out(len, 0.0);
    for (std::size_t t = 1; t < len; ++t) {
        if (st[t] <= 0.0) continue;
        const double pdi = 100.0 * sp[t] / st[t];
        const double mdi = 100.0 * sm[t] / st[t];
        const double denom = pdi + mdi;
        // Ratio first: fl(|a-b|) <= fl(a+b) keeps the result inside [0, 100].
        out[t] = denom > 0.0 ? 100.0 * (std::abs(pdi - mdi) / denom) : 0.0;
    }
    return out;
}

/// Row-major [dates x tickers] matrix of daily returns.
struct ReturnsPanel {
    std::size_t dates = 0;
    std::size_t tickers = 0;
    std::vector<double> values;

    double at(std::size_t t, std::size_t j) const { return values[t * tickers + j]; }
};

inline constexpr double kTurbulenceRidge = 1e-8;

/// Mahalanobis distance of each day's return vector from the mean and
/// covariance of the preceding `lookback` days:
///   d_t = (r_t - mu)^T S^+ (r_t - mu)
/// where S^+ inverts the eigen-decomposition of the (unbiased) covariance as
/// 1 / (lambda + ridge) on eigenvalues above 1e-10 * lambda_max and drops
/// the rest. Days before a full lookback window are 0.
inline Series turbulence(const ReturnsPanel& panel, int lookback) {
    if (panel.tickers < 2) fail(ErrorKind::value, "turbulence needs at least 2 tickers");
    if (lookback < 2) fail(ErrorKind::value, "turbulence lookback must be >= 2");
    if (panel.values.size() != panel.dates * panel.tickers) fail(ErrorKind::shape, "turbulence panel size mismatch");
    const std::size_t k = panel.tickers;
    const std::size_t lb = static_cast<std::size_t>(lookback);
    Series out(panel.dates, 0.0);
    Eigen::MatrixXd window(lb, k);
    for (std::size_t t = lb; t < panel.dates; ++t) {
        for (std::size_t i = 0; i < lb; ++i) {
            for (std::size_t j = 0; j < k; ++j) window(i, j) = panel.at(t - lb + i, j);
        }
        const Eigen::RowVectorXd mu = window.colwise().mean();
        const Eigen::MatrixXd centered = window.rowwise() - mu;
        const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(lb - 1);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
        const Eigen::VectorXd& lambda = eig.eigenvalues();
        const double lmax = lambda.maxCoeff();
        if (!(lmax > 0.0)) continue;
        Eigen::VectorXd dev(k);
        for (std::size_t j = 0; j < k; ++j) dev(j) = panel.at(t, j) - mu(j);
        const Eigen::VectorXd proj = eig.eigenvectors().transpose() * dev;
        double d = 0.0;
        for (Eigen::Index i = 0; i < lambda.size(); ++i) {
            if (lambda(i) > 1e-10 * lmax) d += proj(i) * proj(i) / (lambda(i) + kTurbulenceRidge);
        }
        out[t] = d;
    }
    return out;
}

inline int day_of_week(const Date& date) { return date.weekday(); }

}  // namespace tradenet::indicators
