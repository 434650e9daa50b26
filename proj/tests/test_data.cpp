#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "tradenet/data/bars.hpp"
#include "tradenet/data/frame.hpp"

using namespace tradenet;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("tradenet_test_data_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

void write(const fs::path& p, const std::string& s) { std::ofstream(p) << s; }

ErrorKind kind_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    ADD_FAILURE() << "no error raised";
    return ErrorKind::state;
}

}  // namespace

TEST(Date, ParseFormatAndWeekday) {
    const Date d = Date::parse("2015-05-05");
    EXPECT_EQ(d.str(), "2015-05-05");
    EXPECT_EQ(d.weekday(), 1);  // Tuesday
    EXPECT_EQ(d.plus_days(5).str(), "2015-05-10");
    EXPECT_EQ(kind_of([] { Date::parse("2015-5-05"); }), ErrorKind::parse);
    EXPECT_EQ(kind_of([] { Date::parse("2015-02-30"); }), ErrorKind::value);
}

TEST(Synth, DeterministicWeekdayCalendarAndValidBars) {
    data::SynthConfig cfg;
    cfg.n_tickers = 3;
    cfg.n_days = 120;
    cfg.seed = 9;
    const auto a = data::synth_market(cfg), b = data::synth_market(cfg);
    ASSERT_EQ(a.size(), 3u);
    EXPECT_EQ(a[0].ticker, "AAPL");
    EXPECT_EQ(a[2].ticker, "IBM");
    for (std::size_t j = 0; j < 3; ++j) {
        EXPECT_EQ(a[j].close, b[j].close);
        EXPECT_NO_THROW(a[j].validate());
        EXPECT_EQ(a[j].size(), 120u);
        for (const auto& d : a[j].dates) EXPECT_LT(d.weekday(), 5);
        EXPECT_GE(a[j].close[0], 20.0);
        EXPECT_LE(a[j].close[0], 80.0);
    }
    cfg.seed = 10;
    EXPECT_NE(data::synth_market(cfg)[0].close, a[0].close);
}

TEST(Synth, DriftShowsInLogReturns) {
    data::SynthConfig cfg;
    cfg.n_tickers = 1;
    cfg.n_days = 20000;
    cfg.drift = 0.001;
    cfg.volatility = 0.005;
    const auto s = data::synth_market(cfg)[0];
    const double mean = std::log(s.close.back() / s.close.front()) / (cfg.n_days - 1);
    EXPECT_NEAR(mean, cfg.drift - 0.5 * cfg.volatility * cfg.volatility, 1e-4);
}

TEST(Bars, CsvRoundTripIsExact) {
    data::SynthConfig cfg;
    cfg.n_days = 30;
    const auto s = data::synth_market(cfg)[0];
    const auto dir = scratch("roundtrip");
    data::write_bars(dir / "AAPL.csv", s);
    const auto back = data::load_bars(dir / "AAPL.csv", "AAPL");
    EXPECT_EQ(back.dates, s.dates);
    EXPECT_EQ(back.open, s.open);
    EXPECT_EQ(back.close, s.close);
    EXPECT_EQ(back.volume, s.volume);
}

TEST(Bars, ColumnsFoundByNameAndErrorsNameTheRow) {
    const auto dir = scratch("errors");
    write(dir / "ok.csv", "volume,date,close,low,high,open\n100,2020-01-02,10,9,11,10\n");
    const auto s = data::load_bars(dir / "ok.csv", "X");
    EXPECT_EQ(s.close[0], 10.0);
    EXPECT_EQ(s.volume[0], 100.0);

    write(dir / "missing.csv", "date,open,high,low,close\n2020-01-02,1,1,1,1\n");
    EXPECT_EQ(kind_of([&] { data::load_bars(dir / "missing.csv", "X"); }), ErrorKind::data);

    write(dir / "hl.csv", "date,open,high,low,close,volume\n2020-01-02,10,9,11,10,5\n");
    try {
        data::load_bars(dir / "hl.csv", "X");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::data);
        EXPECT_NE(std::string(e.what()).find("row 1"), std::string::npos) << e.what();
    }

    write(dir / "order.csv",
          "date,open,high,low,close,volume\n2020-01-03,10,11,9,10,5\n2020-01-02,10,11,9,10,5\n");
    EXPECT_EQ(kind_of([&] { data::load_bars(dir / "order.csv", "X"); }), ErrorKind::data);

    write(dir / "num.csv", "date,open,high,low,close,volume\n2020-01-02,abc,11,9,10,5\n");
    EXPECT_EQ(kind_of([&] { data::load_bars(dir / "num.csv", "X"); }), ErrorKind::parse);
    EXPECT_EQ(kind_of([&] { data::load_bars(dir / "absent.csv", "X"); }), ErrorKind::io);
}

TEST(Calendar, AlignKeepsSharedDates) {
    data::SynthConfig cfg;
    cfg.n_days = 10;
    auto s = data::synth_market(cfg);
    auto drop = [](data::BarSeries& b, std::size_t i) {
        b.dates.erase(b.dates.begin() + i);
        b.open.erase(b.open.begin() + i);
        b.high.erase(b.high.begin() + i);
        b.low.erase(b.low.begin() + i);
        b.close.erase(b.close.begin() + i);
        b.volume.erase(b.volume.begin() + i);
    };
    const Date gone0 = s[0].dates[3], gone1 = s[1].dates[7];
    drop(s[0], 3);
    drop(s[1], 7);
    const auto a = data::align_calendar(s);
    EXPECT_EQ(a[0].dates, a[1].dates);
    EXPECT_EQ(a[0].size(), 8u);
    for (const auto& d : a[0].dates) {
        EXPECT_NE(d, gone0);
        EXPECT_NE(d, gone1);
    }
    EXPECT_THROW(data::build_feature_frame(s, std::nullopt), Error);
}

namespace {

data::FeatureFrame sample_frame(std::size_t tickers, std::size_t days, data::FrameConfig fc = {}) {
    data::SynthConfig cfg;
    cfg.n_tickers = tickers;
    cfg.n_days = days;
    cfg.seed = 4;
    const auto bars = data::synth_market(cfg);
    return data::build_feature_frame(bars, data::synth_vix(bars[0].dates, 4), fc);
}

}  // namespace

TEST(Frame, LayoutIsBalanceThenTickerBlocks) {
    const auto f = sample_frame(2, 300);
    ASSERT_EQ(f.cols(), 1u + 2u * 17u);
    EXPECT_EQ(f.columns[0], "balance");
    EXPECT_EQ(f.columns[1], "AAPL_open");
    EXPECT_EQ(f.columns[16], "AAPL_turbulence");
    EXPECT_EQ(f.columns[17], "AAPL_holdings");
    EXPECT_EQ(f.columns[18], "CSCO_open");
    EXPECT_EQ(f.columns.back(), "CSCO_holdings");
    for (std::size_t r = 0; r < f.rows(); ++r) {
        EXPECT_EQ(f.at(r, 0), 1.0);
        EXPECT_EQ(f.at(r, f.holdings_col(1)), 0.0);
        EXPECT_EQ(f.at(r, f.column_index("AAPL_close")), f.price(r, 0));
        EXPECT_EQ(f.at(r, f.column_index("AAPL_vix")), f.at(r, f.column_index("CSCO_vix")));
        EXPECT_EQ(f.at(r, f.column_index("AAPL_day")), f.dates[r].weekday());
    }
    for (double v : f.values) EXPECT_TRUE(std::isfinite(v));
}

TEST(Frame, ThirtyTickerLayoutWidth) {
    data::FrameConfig fc;
    fc.indicators.turbulence_lookback = 20;
    const auto full = sample_frame(30, 60, fc);
    EXPECT_EQ(full.cols(), 511u);
    fc.features = {"close", "volume", "macd", "rsi_30", "cci_30", "dx_30", "close_30_sma", "close_60_sma", "turbulence"};
    const auto slim = sample_frame(29, 60, fc);
    EXPECT_EQ(slim.cols(), 291u);
}

TEST(Frame, SubsetKeepsCanonicalOrderAndRejectsUnknown) {
    data::FrameConfig fc;
    fc.features = {"volume", "close"};
    const auto f = sample_frame(1, 40, fc);
    EXPECT_EQ(f.columns, (std::vector<std::string>{"balance", "AAPL_close", "AAPL_volume", "AAPL_holdings"}));
    fc.features = {"close", "nope"};
    EXPECT_EQ(kind_of([&] { sample_frame(1, 40, fc); }), ErrorKind::config);
}

TEST(Frame, VolumeScaleAndVixRequirement) {
    data::SynthConfig cfg;
    cfg.n_days = 40;
    const auto bars = data::synth_market(cfg);
    data::FrameConfig fc;
    fc.volume_scale = 1.0;
    const auto raw = data::build_feature_frame(bars, std::nullopt, fc);
    EXPECT_EQ(raw.at(5, raw.column_index("AAPL_volume")), bars[0].volume[5]);
    EXPECT_EQ(raw.at(5, raw.column_index("AAPL_vix")), 0.0);
    fc.require_vix = true;
    EXPECT_EQ(kind_of([&] { data::build_feature_frame(bars, std::nullopt, fc); }), ErrorKind::data);
    auto vix = data::synth_vix(bars[0].dates, 1);
    vix.dates.erase(vix.dates.begin() + 10);
    vix.values.erase(vix.values.begin() + 10);
    EXPECT_EQ(kind_of([&] { data::build_feature_frame(bars, vix, fc); }), ErrorKind::data);
}

TEST(Frame, CsvRoundTripIsExact) {
    const auto f = sample_frame(2, 80);
    const auto dir = scratch("frame");
    data::write_frame(dir / "frame.csv", f);
    EXPECT_EQ(data::load_frame(dir / "frame.csv"), f);
}

TEST(Frame, SplitUsesClosedIntervals) {
    const auto f = sample_frame(2, 50);
    const data::SplitSpec s{f.dates[0], f.dates[29], f.dates[30], f.dates[49]};
    const auto [train, eval] = data::split(f, s);
    EXPECT_EQ(train.rows(), 30u);
    EXPECT_EQ(eval.rows(), 20u);
    EXPECT_EQ(eval.dates.front(), f.dates[30]);
    EXPECT_EQ(kind_of([&] { data::split(f, {f.dates[0], f.dates[30], f.dates[30], f.dates[49]}); }),
              ErrorKind::config);
    EXPECT_EQ(kind_of([&] { data::split(f, {f.dates[0].plus_days(-10), f.dates[10], f.dates[20], f.dates[49]}); }),
              ErrorKind::config);
}

TEST(Frame, WindowRepeatsFirstRowDuringWarmup) {
    const auto f = sample_frame(1, 30);
    const auto v = data::window_at(f, 2, 5);
    const std::size_t c = f.cols();
    for (std::size_t r = 0; r < 3; ++r) EXPECT_EQ(v.matrix.at(r, 3), f.at(0, 3));
    EXPECT_EQ(v.matrix.at(3, 3), f.at(1, 3));
    EXPECT_EQ(v.matrix.at(4, c - 2), f.at(2, c - 2));
    EXPECT_EQ(v.end_date, f.dates[2]);
    EXPECT_THROW(data::window_at(f, 30, 5), Error);
}
