#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "tradenet/core/error.hpp"
#include "tradenet/core/tensor.hpp"
#include "tradenet/data/bars.hpp"
#include "tradenet/indicators/indicators.hpp"

namespace tradenet::data {

/// Per-ticker market features in block order.
inline const std::vector<std::string>& market_features() {
    static const std::vector<std::string> names{
        "open", "high", "low",   "close", "volume",       "day",          "macd", "boll_ub",
        "boll_lb", "rsi_30", "cci_30", "dx_30", "close_30_sma", "close_60_sma", "vix",  "turbulence"};
    return names;
}

inline constexpr const char* kBalanceColumn = "balance";
inline constexpr const char* kHoldingsFeature = "holdings";

struct FrameConfig {
    indicators::IndicatorConfig indicators;
    double volume_scale = 1e6;
    /// Subset of market_features(); kept in canonical order regardless of the
    /// order given here. Empty means all 16.
    std::vector<std::string> features;
    bool require_vix = false;

    std::vector<std::string> resolved_features() const {
        if (features.empty()) return market_features();
        std::vector<std::string> out;
        for (const auto& f : market_features()) {
            if (std::find(features.begin(), features.end(), f) != features.end()) out.push_back(f);
        }
        for (const auto& f : features) {
            if (std::find(market_features().begin(), market_features().end(), f) == market_features().end()) {
                fail(ErrorKind::config, "unknown feature '" + f + "'");
            }
        }
        return out;
    }
};

/// Date-aligned feature matrix. Column 0 is the account balance; every ticker
/// then owns one contiguous block of its market features followed by its
/// holdings column. Balance and holdings hold their initial values (1 and 0);
/// the environment overwrites them inside observations.
struct FeatureFrame {
    std::vector<Date> dates;
    std::vector<std::string> tickers;
    std::vector<std::string> block_features;  // market features, without holdings
    std::vector<std::string> columns;
    std::vector<double> values;  // rows x columns, row-major
    std::vector<double> prices;  // rows x tickers, unscaled closes for accounting

    std::size_t rows() const { return dates.size(); }
    std::size_t cols() const { return columns.size(); }
    std::size_t block_width() const { return block_features.size() + 1; }
    std::size_t block_start(std::size_t ticker) const { return 1 + ticker * block_width(); }
    std::size_t holdings_col(std::size_t ticker) const { return block_start(ticker) + block_features.size(); }

    double at(std::size_t r, std::size_t c) const { return values[r * cols() + c]; }
    double price(std::size_t r, std::size_t ticker) const { return prices[r * tickers.size() + ticker]; }

    std::size_t column_index(const std::string& name) const {
        auto it = std::find(columns.begin(), columns.end(), name);
        if (it == columns.end()) fail(ErrorKind::data, "frame has no column '" + name + "'");
        return static_cast<std::size_t>(it - columns.begin());
    }

    /// Rows [begin, end).
    FeatureFrame slice(std::size_t begin, std::size_t end) const {
        if (begin >= end || end > rows()) fail(ErrorKind::value, "frame slice out of range");
        FeatureFrame f;
        f.tickers = tickers;
        f.block_features = block_features;
        f.columns = columns;
        f.dates.assign(dates.begin() + begin, dates.begin() + end);
        f.values.assign(values.begin() + begin * cols(), values.begin() + end * cols());
        f.prices.assign(prices.begin() + begin * tickers.size(), prices.begin() + end * tickers.size());
        return f;
    }

    friend bool operator==(const FeatureFrame&, const FeatureFrame&) = default;
};

inline std::vector<std::string> frame_columns(const std::vector<std::string>& tickers,
                                              const std::vector<std::string>& block_features) {
    std::vector<std::string> cols{kBalanceColumn};
    for (const auto& t : tickers) {
        for (const auto& f : block_features) cols.push_back(t + "_" + f);
        cols.push_back(t + "_" + kHoldingsFeature);
    }
    return cols;
}

/// Series must already share one calendar (see align_calendar). The VIX
/// series, when given, must contain every frame date; it is replicated into
/// each ticker block. Without one the vix column is 0 unless require_vix.
inline FeatureFrame build_feature_frame(const std::vector<BarSeries>& series, const std::optional<ValueSeries>& vix,
                                        const FrameConfig& cfg = {}) {
    if (series.empty()) fail(ErrorKind::value, "build_feature_frame: no series");
    cfg.indicators.validate();
    if (!(cfg.volume_scale > 0)) fail(ErrorKind::config, "volume_scale must be positive");
    for (const auto& s : series) {
        try {
            s.validate();
        } catch (const Error& e) {
            fail(e.kind(), std::string("build_feature_frame: ") + e.what());
        }
        if (s.dates != series[0].dates) {
            fail(ErrorKind::data, "build_feature_frame: calendars of " + series[0].ticker + " and " + s.ticker +
                                      " are not aligned");
        }
    }
    if (cfg.require_vix && !vix) fail(ErrorKind::data, "build_feature_frame: vix series required but missing");

    FeatureFrame f;
    f.dates = series[0].dates;
    for (const auto& s : series) f.tickers.push_back(s.ticker);
    f.block_features = cfg.resolved_features();
    f.columns = frame_columns(f.tickers, f.block_features);
    const std::size_t rows = f.rows(), cols = f.cols(), nt = series.size();

    std::vector<double> vix_col(rows, 0.0);
    if (vix) {
        std::size_t k = 0;
        for (std::size_t r = 0; r < rows; ++r) {
            while (k < vix->dates.size() && vix->dates[k] < f.dates[r]) ++k;
            if (k == vix->dates.size() || vix->dates[k] != f.dates[r]) {
                fail(ErrorKind::data, "vix series has no value for " + f.dates[r].str());
            }
            vix_col[r] = vix->values[k];
        }
    }

    indicators::ReturnsPanel panel{rows, nt, std::vector<double>(rows * nt, 0.0)};
    for (std::size_t j = 0; j < nt; ++j) {
        for (std::size_t r = 1; r < rows; ++r) {
            panel.values[r * nt + j] = series[j].close[r] / series[j].close[r - 1] - 1.0;
        }
    }
    std::vector<double> turb(rows, 0.0);
    if (nt >= 2) turb = indicators::turbulence(panel, cfg.indicators.turbulence_lookback);

    std::vector<double> day(rows);
    for (std::size_t r = 0; r < rows; ++r) day[r] = indicators::day_of_week(f.dates[r]);

    f.values.assign(rows * cols, 0.0);
    f.prices.assign(rows * nt, 0.0);
    for (std::size_t r = 0; r < rows; ++r) f.values[r * cols] = 1.0;

    const auto& ic = cfg.indicators;
    for (std::size_t j = 0; j < nt; ++j) {
        const auto& s = series[j];
        std::vector<double> volume(rows);
        for (std::size_t r = 0; r < rows; ++r) volume[r] = s.volume[r] / cfg.volume_scale;
        const auto bands = indicators::bollinger(s.close, ic);
        const int sma_a = ic.sma_periods.size() > 0 ? ic.sma_periods[0] : 30;
        const int sma_b = ic.sma_periods.size() > 1 ? ic.sma_periods[1] : 60;
        auto column = [&](const std::string& name) -> std::vector<double> {
            if (name == "open") return s.open;
            if (name == "high") return s.high;
            if (name == "low") return s.low;
            if (name == "close") return s.close;
            if (name == "volume") return volume;
            if (name == "day") return day;
            if (name == "macd") return indicators::macd(s.close, ic);
            if (name == "boll_ub") return bands.upper;
            if (name == "boll_lb") return bands.lower;
            if (name == "rsi_30") return indicators::rsi(s.close, ic.rsi_period);
            if (name == "cci_30") return indicators::cci(s.high, s.low, s.close, ic.cci_period);
            if (name == "dx_30") return indicators::dx(s.high, s.low, s.close, ic.dx_period);
            if (name == "close_30_sma") return indicators::sma(s.close, sma_a);
            if (name == "close_60_sma") return indicators::sma(s.close, sma_b);
            if (name == "vix") return vix_col;
            if (name == "turbulence") return turb;
            fail(ErrorKind::config, "unknown feature '" + name + "'");
        };
        const std::size_t start = f.block_start(j);
        for (std::size_t k = 0; k < f.block_features.size(); ++k) {
            const auto col = column(f.block_features[k]);
            for (std::size_t r = 0; r < rows; ++r) f.values[r * cols + start + k] = col[r];
        }
        for (std::size_t r = 0; r < rows; ++r) f.prices[r * nt + j] = s.close[r];
    }
    for (double v : f.values) {
        if (!std::isfinite(v)) fail(ErrorKind::numeric, "build_feature_frame produced a non-finite cell");
    }
    return f;
}

struct SplitSpec {
    Date train_start, train_end, eval_start, eval_end;
};

/// Closed date intervals: a row belongs to train iff train_start <= date <=
/// train_end, likewise for eval.
inline std::pair<FeatureFrame, FeatureFrame> split(const FeatureFrame& frame, const SplitSpec& spec) {
    if (frame.rows() == 0) fail(ErrorKind::value, "split: empty frame");
    if (!(spec.train_start <= spec.train_end) || !(spec.eval_start <= spec.eval_end)) {
        fail(ErrorKind::config, "split: interval start after end");
    }
    if (!(spec.train_end < spec.eval_start)) fail(ErrorKind::config, "split: train_end must precede eval_start");
    const Date first = frame.dates.front(), last = frame.dates.back();
    if (spec.train_start < first || spec.eval_end > last) {
        fail(ErrorKind::config, "split: dates outside the frame range " + first.str() + ".." + last.str());
    }
    auto range = [&](Date a, Date b) {
        const auto lo = std::lower_bound(frame.dates.begin(), frame.dates.end(), a) - frame.dates.begin();
        const auto hi = std::upper_bound(frame.dates.begin(), frame.dates.end(), b) - frame.dates.begin();
        return std::pair<std::size_t, std::size_t>(static_cast<std::size_t>(lo), static_cast<std::size_t>(hi));
    };
    const auto [tl, th] = range(spec.train_start, spec.train_end);
    const auto [el, eh] = range(spec.eval_start, spec.eval_end);
    if (tl >= th) fail(ErrorKind::config, "split: train interval contains no trading days");
    if (el >= eh) fail(ErrorKind::config, "split: eval interval contains no trading days");
    return {frame.slice(tl, th), frame.slice(el, eh)};
}

inline constexpr std::size_t kDefaultWindow = 90;

struct WindowView {
    Tensor matrix;  // [window, F]
    Date end_date;
};

/// Row `window-1` is frame row t; earlier rows walk back one trading day
/// each, repeating row 0 where the history runs out.
inline WindowView window_at(const FeatureFrame& frame, std::size_t t, std::size_t window = kDefaultWindow) {
    if (frame.rows() == 0) fail(ErrorKind::value, "window_at: empty frame");
    if (t >= frame.rows()) fail(ErrorKind::value, "window_at: day " + std::to_string(t) + " outside frame");
    if (window == 0) fail(ErrorKind::value, "window_at: window must be positive");
    const std::size_t cols = frame.cols();
    WindowView v{Tensor({window, cols}), frame.dates[t]};
    for (std::size_t r = 0; r < window; ++r) {
        const std::size_t back = window - 1 - r;
        const std::size_t src = t >= back ? t - back : 0;
        std::copy_n(frame.values.begin() + src * cols, cols, v.matrix.data().begin() + r * cols);
    }
    return v;
}

/// Delimited export: `date`, every frame column, then one `price:<ticker>`
/// column per ticker carrying the unscaled close used for accounting.
inline std::string frame_to_csv(const FeatureFrame& f) {
    std::ostringstream os;
    os << "date";
    for (const auto& c : f.columns) os << ',' << c;
    for (const auto& t : f.tickers) os << ",price:" << t;
    os << '\n';
    for (std::size_t r = 0; r < f.rows(); ++r) {
        os << f.dates[r].str();
        for (std::size_t c = 0; c < f.cols(); ++c) os << ',' << text::format_double(f.at(r, c));
        for (std::size_t j = 0; j < f.tickers.size(); ++j) os << ',' << text::format_double(f.price(r, j));
        os << '\n';
    }
    return os.str();
}

inline void write_frame(const std::filesystem::path& path, const FeatureFrame& f) {
    detail::write_text(path, frame_to_csv(f));
}

inline FeatureFrame load_frame(const std::filesystem::path& path) {
    const auto lines = detail::read_lines(path);
    if (lines.empty()) fail(ErrorKind::data, path.string() + ": empty frame file");
    const auto header = text::split(text::trim(lines[0]), ',');
    if (header.size() < 2 || header[0] != "date" || header[1] != kBalanceColumn) {
        fail(ErrorKind::data, path.string() + ": frame header must start with date,balance");
    }
    FeatureFrame f;
    for (std::size_t i = 1; i < header.size(); ++i) {
        const std::string name(header[i]);
        if (name.rfind("price:", 0) == 0) {
            f.tickers.push_back(name.substr(6));
        } else {
            if (!f.tickers.empty()) fail(ErrorKind::data, path.string() + ": feature column after price columns");
            f.columns.push_back(name);
        }
    }
    if (f.tickers.empty()) fail(ErrorKind::data, path.string() + ": no price columns");
    const std::size_t width = (f.columns.size() - 1) / f.tickers.size();
    if (width < 1 || 1 + width * f.tickers.size() != f.columns.size()) {
        fail(ErrorKind::data, path.string() + ": column count inconsistent with ticker blocks");
    }
    const std::string prefix = f.tickers[0] + "_";
    for (std::size_t k = 0; k + 1 < width; ++k) {
        const auto& c = f.columns[1 + k];
        if (c.rfind(prefix, 0) != 0) fail(ErrorKind::data, path.string() + ": unexpected column '" + c + "'");
        f.block_features.push_back(c.substr(prefix.size()));
    }
    if (frame_columns(f.tickers, f.block_features) != f.columns) {
        fail(ErrorKind::data, path.string() + ": column layout is not ticker-blocked");
    }
    for (std::size_t r = 1; r < lines.size(); ++r) {
        const auto fields = text::split(text::trim(lines[r]), ',');
        const auto row = path.string() + " row " + std::to_string(r);
        if (fields.size() != header.size()) fail(ErrorKind::parse, row + ": wrong field count");
        f.dates.push_back(Date::parse(fields[0]));
        for (std::size_t i = 1; i <= f.columns.size(); ++i) f.values.push_back(text::to_double(fields[i], "frame cell"));
        for (std::size_t i = f.columns.size() + 1; i < fields.size(); ++i) {
            f.prices.push_back(text::to_double(fields[i], "price"));
        }
    }
    return f;
}

}  // namespace tradenet::data
