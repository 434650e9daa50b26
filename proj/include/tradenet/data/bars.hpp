#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "tradenet/core/error.hpp"
#include "tradenet/core/rng.hpp"
#include "tradenet/core/text.hpp"
#include "tradenet/data/date.hpp"

namespace tradenet::data {

/// Tickers in the order the feature blocks are laid out. The reference table
/// lists 30 names (DOW included) while the text speaks of 29 companies.
inline const std::vector<std::string>& dow_tickers() {
    static const std::vector<std::string> tickers{
        "AAPL", "CSCO", "IBM", "INTC", "MSFT", "CRM", "V",   "GS",  "JPM", "AXP", "TRV", "AMGN", "JNJ", "MRK", "UNH",
        "WMT",  "PG",   "KO",  "WBA",  "HD",   "MCD", "NKE", "DIS", "MMM", "BA",  "CAT", "HON",  "CVX", "VZ",  "DOW"};
    return tickers;
}

struct BarSeries {
    std::string ticker;
    std::vector<Date> dates;
    std::vector<double> open, high, low, close, volume;

    std::size_t size() const { return dates.size(); }

    /// Throws with the offending (1-based data) row on any violated invariant.
    void validate() const {
        const std::size_t n = dates.size();
        if (open.size() != n || high.size() != n || low.size() != n || close.size() != n || volume.size() != n) {
            fail(ErrorKind::data, ticker + ": bar columns have different lengths");
        }
        for (std::size_t i = 0; i < n; ++i) {
            const auto row = ticker + " row " + std::to_string(i + 1);
            if (i > 0 && !(dates[i - 1] < dates[i])) fail(ErrorKind::data, row + ": dates not strictly increasing");
            if (!(open[i] > 0 && high[i] > 0 && low[i] > 0 && close[i] > 0) || !std::isfinite(high[i])) {
                fail(ErrorKind::data, row + ": prices must be positive and finite");
            }
            if (!(volume[i] >= 0) || !std::isfinite(volume[i])) fail(ErrorKind::data, row + ": volume must be non-negative");
            if (high[i] < low[i]) fail(ErrorKind::data, row + ": high < low");
            if (open[i] < low[i] || open[i] > high[i] || close[i] < low[i] || close[i] > high[i]) {
                fail(ErrorKind::data, row + ": open/close outside [low, high]");
            }
        }
    }
};

/// A dated scalar series such as the VIX close.
struct ValueSeries {
    std::vector<Date> dates;
    std::vector<double> values;
};

namespace detail {

inline std::vector<std::string> read_lines(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::io, "cannot open " + path.string());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!text::trim(line).empty()) lines.push_back(line);
    }
    return lines;
}

inline std::map<std::string, std::size_t> header_index(const std::string& header) {
    std::map<std::string, std::size_t> idx;
    const auto names = text::split(text::trim(header), ',');
    for (std::size_t i = 0; i < names.size(); ++i) idx[std::string(text::trim(names[i]))] = i;
    return idx;
}

inline void write_text(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::io, "cannot write " + path.string());
    out << content;
    if (!out) fail(ErrorKind::io, "failed writing " + path.string());
}

}  // namespace detail

/// Bar file layout: header `date,open,high,low,close,volume` (columns located
/// by name), then one row per trading day with ISO dates in ascending order.
inline BarSeries load_bars(const std::filesystem::path& path, const std::string& ticker) {
    const auto lines = detail::read_lines(path);
    if (lines.empty()) fail(ErrorKind::data, path.string() + ": empty bar file");
    const auto idx = detail::header_index(lines[0]);
    std::size_t col[6];
    const char* names[6] = {"date", "open", "high", "low", "close", "volume"};
    for (int k = 0; k < 6; ++k) {
        auto it = idx.find(names[k]);
        if (it == idx.end()) fail(ErrorKind::data, path.string() + ": missing column '" + names[k] + "'");
        col[k] = it->second;
    }
    BarSeries s;
    s.ticker = ticker;
    for (std::size_t r = 1; r < lines.size(); ++r) {
        const auto row = path.string() + " row " + std::to_string(r);
        const auto f = text::split(text::trim(lines[r]), ',');
        if (f.size() != idx.size()) fail(ErrorKind::parse, row + ": expected " + std::to_string(idx.size()) + " fields");
        try {
            s.dates.push_back(Date::parse(f[col[0]]));
            s.open.push_back(text::to_double(f[col[1]], "open"));
            s.high.push_back(text::to_double(f[col[2]], "high"));
            s.low.push_back(text::to_double(f[col[3]], "low"));
            s.close.push_back(text::to_double(f[col[4]], "close"));
            s.volume.push_back(text::to_double(f[col[5]], "volume"));
        } catch (const Error& e) {
            fail(ErrorKind::parse, row + ": " + e.what());
        }
    }
    try {
        s.validate();
    } catch (const Error& e) {
        fail(e.kind(), path.string() + ": " + e.what());
    }
    return s;
}

inline std::string bars_to_csv(const BarSeries& s) {
    std::ostringstream os;
    os << "date,open,high,low,close,volume\n";
    for (std::size_t i = 0; i < s.size(); ++i) {
        os << s.dates[i].str() << ',' << text::format_double(s.open[i]) << ',' << text::format_double(s.high[i]) << ','
           << text::format_double(s.low[i]) << ',' << text::format_double(s.close[i]) << ','
           << text::format_double(s.volume[i]) << '\n';
    }
    return os.str();
}

inline void write_bars(const std::filesystem::path& path, const BarSeries& s) {
    detail::write_text(path, bars_to_csv(s));
}

/// VIX-style file: header `date,close`.
inline ValueSeries load_value_series(const std::filesystem::path& path) {
    const auto lines = detail::read_lines(path);
    if (lines.empty()) fail(ErrorKind::data, path.string() + ": empty file");
    const auto idx = detail::header_index(lines[0]);
    if (!idx.contains("date") || !idx.contains("close")) {
        fail(ErrorKind::data, path.string() + ": expected columns 'date' and 'close'");
    }
    ValueSeries v;
    for (std::size_t r = 1; r < lines.size(); ++r) {
        const auto row = path.string() + " row " + std::to_string(r);
        const auto f = text::split(text::trim(lines[r]), ',');
        if (f.size() != idx.size()) fail(ErrorKind::parse, row + ": wrong field count");
        try {
            v.dates.push_back(Date::parse(f[idx.at("date")]));
            v.values.push_back(text::to_double(f[idx.at("close")], "close"));
        } catch (const Error& e) {
            fail(ErrorKind::parse, row + ": " + e.what());
        }
        if (v.dates.size() > 1 && !(v.dates[v.dates.size() - 2] < v.dates.back())) {
            fail(ErrorKind::data, row + ": dates not strictly increasing");
        }
    }
    return v;
}

inline void write_value_series(const std::filesystem::path& path, const ValueSeries& v) {
    std::ostringstream os;
    os << "date,close\n";
    for (std::size_t i = 0; i < v.dates.size(); ++i) os << v.dates[i].str() << ',' << text::format_double(v.values[i]) << '\n';
    detail::write_text(path, os.str());
}

struct SynthConfig {
    std::size_t n_tickers = 2;
    std::size_t n_days = 500;
    std::uint64_t seed = 0;
    double drift = 0.001;       // per-day log drift of the GBM
    double volatility = 0.005;  // per-day
    Date start_date = Date::from_ymd(2015, 5, 5);
    double price_low = 20.0;    // initial close drawn log-uniformly in [low, high]
    double price_high = 80.0;
    double mean_volume = 5e6;
};

/// Weekday calendar (Mon-Fri) starting at `start` (rolled forward off weekends).
inline std::vector<Date> business_days(Date start, std::size_t n) {
    std::vector<Date> out;
    out.reserve(n);
    Date d = start;
    while (out.size() < n) {
        if (d.weekday() < 5) out.push_back(d);
        d = d.plus_days(1);
    }
    return out;
}

/// Geometric-Brownian closes
///   close_t = close_{t-1} * exp(drift - vol^2 / 2 + vol * z_t)
/// with open = previous close perturbed by vol/4 noise, and high/low widening
/// max/min(open, close) by vol/2 * |z|. Ticker j draws from stream j of the
/// seed, so adding tickers never changes existing ones.
inline std::vector<BarSeries> synth_market(const SynthConfig& cfg) {
    if (cfg.n_days < 1) fail(ErrorKind::config, "synth_market: n_days must be >= 1");
    if (cfg.volatility < 0) fail(ErrorKind::config, "synth_market: volatility must be non-negative");
    const auto dates = business_days(cfg.start_date, cfg.n_days);
    const auto& names = dow_tickers();
    const Rng root(cfg.seed);
    std::vector<BarSeries> out;
    for (std::size_t j = 0; j < cfg.n_tickers; ++j) {
        Rng rng = root.split(j);
        BarSeries s;
        s.ticker = j < names.size() ? names[j] : "SYN" + std::to_string(j + 1);
        s.dates = dates;
        const double log_lo = std::log(cfg.price_low), log_hi = std::log(cfg.price_high);
        double prev = std::exp(rng.uniform(log_lo, log_hi));
        const double vol = cfg.volatility;
        for (std::size_t t = 0; t < cfg.n_days; ++t) {
            const double z_close = rng.normal();
            const double z_open = rng.normal();
            const double z_high = rng.normal();
            const double z_low = rng.normal();
            const double z_vol = rng.normal();
            const double close = t == 0 ? prev : prev * std::exp(cfg.drift - 0.5 * vol * vol + vol * z_close);
            const double open = t == 0 ? close : prev * std::exp(0.25 * vol * z_open);
            const double high = std::max(open, close) * (1.0 + 0.5 * vol * std::abs(z_high));
            const double low = std::min(open, close) * (1.0 - 0.5 * vol * std::abs(z_low));
            s.open.push_back(open);
            s.high.push_back(high);
            s.low.push_back(low);
            s.close.push_back(close);
            s.volume.push_back(std::round(cfg.mean_volume * std::exp(0.3 * z_vol - 0.045)));
            prev = close;
        }
        out.push_back(std::move(s));
    }
    return out;
}

/// Mean-reverting log-normal volatility index around 18 on the given dates.
inline ValueSeries synth_vix(const std::vector<Date>& dates, std::uint64_t seed) {
    Rng rng = Rng(seed).split(0x5649580000ULL);
    ValueSeries v{dates, {}};
    double x = std::log(18.0);
    for (std::size_t t = 0; t < dates.size(); ++t) {
        if (t > 0) x += 0.05 * (std::log(18.0) - x) + 0.08 * rng.normal();
        v.values.push_back(std::exp(x));
    }
    return v;
}

/// Restricts every series to the dates all of them share.
inline std::vector<BarSeries> align_calendar(const std::vector<BarSeries>& series) {
    if (series.empty()) fail(ErrorKind::value, "align_calendar: no series given");
    std::vector<Date> common = series[0].dates;
    for (std::size_t k = 1; k < series.size(); ++k) {
        std::vector<Date> next;
        std::set_intersection(common.begin(), common.end(), series[k].dates.begin(), series[k].dates.end(),
                              std::back_inserter(next));
        common = std::move(next);
    }
    if (common.empty()) fail(ErrorKind::data, "align_calendar: the series share no trading dates");
    std::vector<BarSeries> out;
    for (const auto& s : series) {
        BarSeries r;
        r.ticker = s.ticker;
        std::size_t c = 0;
        for (std::size_t i = 0; i < s.size() && c < common.size(); ++i) {
            if (s.dates[i] != common[c]) continue;
            r.dates.push_back(s.dates[i]);
            r.open.push_back(s.open[i]);
            r.high.push_back(s.high[i]);
            r.low.push_back(s.low[i]);
            r.close.push_back(s.close[i]);
            r.volume.push_back(s.volume[i]);
            ++c;
        }
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace tradenet::data
