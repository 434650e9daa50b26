#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "tradenet/cli/config.hpp"
#include "tradenet/core/checkpoint.hpp"
#include "tradenet/data/bars.hpp"
#include "tradenet/data/frame.hpp"
#include "tradenet/env/trading_env.hpp"
#include "tradenet/policy/policy_net.hpp"
#include "tradenet/ppo/evaluate.hpp"
#include "tradenet/ppo/learn.hpp"

namespace tradenet::cli {

namespace fs = std::filesystem;

inline constexpr const char* kResolvedConfig = "resolved_config.txt";
inline constexpr const char* kTrainingLog = "training_log.csv";
inline constexpr const char* kModelStem = "model";
inline constexpr const char* kEvaluationCsv = "evaluation.csv";
inline constexpr const char* kEvaluationSummary = "evaluation_summary.txt";
inline constexpr const char* kComparisonCsv = "comparison.csv";
inline constexpr const char* kComparisonSummary = "comparison_summary.txt";

inline void write_resolved_config(const RunConfig& cfg) {
    data::detail::write_text(cfg.out_dir() / kResolvedConfig, cfg.dump());
}

/// Reads a `key = value` summary file.
inline std::map<std::string, std::string> read_summary(const fs::path& path) {
    std::map<std::string, std::string> out;
    for (const auto& line : data::detail::read_lines(path)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        out[std::string(text::trim(std::string_view(line).substr(0, eq)))] =
            std::string(text::trim(std::string_view(line).substr(eq + 1)));
    }
    return out;
}

inline std::vector<std::string> market_tickers(const RunConfig& cfg) {
    auto tickers = cfg.list("data.tickers");
    if (!tickers.empty()) return tickers;
    if (cfg.required("data.source") == "synth") {
        const auto n = cfg.integer<std::size_t>("synth.n_tickers");
        for (const auto& s : data::synth_market({n, 1, 0})) tickers.push_back(s.ticker);
        return tickers;
    }
    fail(ErrorKind::config, "data.tickers is required when data.source = files");
}

struct Market {
    std::vector<data::BarSeries> bars;
    std::optional<data::ValueSeries> vix;
};

inline Market load_market(const RunConfig& cfg) {
    Market m;
    const auto& source = cfg.required("data.source");
    if (source == "synth") {
        const auto sc = cfg.synth();
        m.bars = data::synth_market(sc);
        if (cfg.has("data.tickers")) {
            const auto wanted = cfg.list("data.tickers");
            if (wanted.size() != m.bars.size()) {
                fail(ErrorKind::config, "data.tickers lists " + std::to_string(wanted.size()) +
                                            " names but synth.n_tickers is " + std::to_string(m.bars.size()));
            }
            for (std::size_t j = 0; j < wanted.size(); ++j) m.bars[j].ticker = wanted[j];
        }
        if (cfg.boolean("synth.with_vix")) m.vix = data::synth_vix(m.bars[0].dates, sc.seed);
    } else if (source == "files") {
        const fs::path dir = cfg.required("data.dir");
        for (const auto& t : market_tickers(cfg)) {
            const auto path = dir / (t + ".csv");
            if (!fs::exists(path)) fail(ErrorKind::io, "no bar file for ticker " + t + " (" + path.string() + ")");
            try {
                m.bars.push_back(data::load_bars(path, t));
            } catch (const Error& e) {
                fail(e.kind(), "ticker " + t + ": " + e.what());
            }
        }
        m.bars = data::align_calendar(m.bars);
    } else {
        fail(ErrorKind::config, "data.source must be synth or files, got '" + source + "'");
    }
    if (cfg.has("data.vix")) m.vix = data::load_value_series(cfg.str("data.vix"));
    return m;
}

inline data::FeatureFrame build_frame(const RunConfig& cfg) {
    if (cfg.has("data.frame")) return data::load_frame(cfg.str("data.frame"));
    const auto m = load_market(cfg);
    return data::build_feature_frame(m.bars, m.vix, cfg.frame());
}

// ---------------------------------------------------------------------------

struct SynthResult {
    std::vector<fs::path> bar_files;
    std::optional<fs::path> vix_file;
};

/// Writes <out>/bars/<TICKER>.csv per ticker and <out>/bars/vix.csv.
inline SynthResult cmd_synth(const RunConfig& cfg, std::ostream& out) {
    const auto sc = cfg.synth();
    if (sc.n_days < 1) fail(ErrorKind::config, "synth.n_days must be >= 1");
    auto bars = data::synth_market(sc);
    const auto names = cfg.list("data.tickers");
    if (!names.empty()) {
        if (names.size() != bars.size()) fail(ErrorKind::config, "data.tickers must list synth.n_tickers names");
        for (std::size_t j = 0; j < bars.size(); ++j) bars[j].ticker = names[j];
    }
    SynthResult r;
    const auto dir = cfg.out_dir() / "bars";
    for (const auto& s : bars) {
        r.bar_files.push_back(dir / (s.ticker + ".csv"));
        data::write_bars(r.bar_files.back(), s);
    }
    if (cfg.boolean("synth.with_vix")) {
        r.vix_file = dir / "vix.csv";
        data::write_value_series(*r.vix_file, data::synth_vix(bars[0].dates, sc.seed));
    }
    write_resolved_config(cfg);
    out << "tickers " << bars.size() << '\n' << "days " << sc.n_days << '\n' << "dir " << dir.string() << '\n';
    return r;
}

struct FeaturesResult {
    data::FeatureFrame frame;
    fs::path file;
};

inline FeaturesResult cmd_features(const RunConfig& cfg, std::ostream& out) {
    FeaturesResult r{build_frame(cfg), cfg.out_dir() / "frame.csv"};
    data::write_frame(r.file, r.frame);
    write_resolved_config(cfg);
    out << "columns " << r.frame.cols() << '\n'
        << "rows " << r.frame.rows() << '\n'
        << "first_date " << r.frame.dates.front().str() << '\n'
        << "last_date " << r.frame.dates.back().str() << '\n';
    return r;
}

inline Checkpoint model_checkpoint(policy::PolicyNet& net, const data::FeatureFrame& frame) {
    auto c = net.to_checkpoint();
    std::string tickers;
    for (std::size_t j = 0; j < frame.tickers.size(); ++j) tickers += (j ? "," : "") + frame.tickers[j];
    c.meta["frame.tickers"] = tickers;
    c.meta["frame.columns"] = std::to_string(frame.cols());
    return c;
}

struct TrainResult {
    std::vector<ppo::LogRow> log;
    fs::path log_file;
    fs::path model;
};

/// Trains on the split's training interval. The log is appended and flushed
/// after every iteration so it survives an aborted run.
inline TrainResult cmd_train(const RunConfig& cfg, std::ostream& out) {
    const auto pc = cfg.ppo();
    const auto ec = cfg.env();
    const auto spec = cfg.arch();
    const auto checkpoint_interval = cfg.integer<std::size_t>("ppo.checkpoint_interval");
    auto [train, eval] = data::split(build_frame(cfg), cfg.split());
    (void)eval;
    auto frame = std::make_shared<const data::FeatureFrame>(std::move(train));
    if (frame->rows() < 2) fail(ErrorKind::data, "training interval needs at least two trading days");
    env::TradingEnv env(frame, ec);
    auto net = policy::PolicyNet::build(spec, ec.window, frame->cols(), frame->tickers.size(), cfg.seed());

    TrainResult r;
    fs::create_directories(cfg.out_dir());
    write_resolved_config(cfg);
    r.log_file = cfg.out_dir() / kTrainingLog;
    std::ofstream log(r.log_file, std::ios::binary);
    if (!log) fail(ErrorKind::io, "cannot write " + r.log_file.string());
    log << ppo::kLogHeader << '\n' << std::flush;

    ppo::LearnHooks hooks;
    hooks.on_row = [&](const ppo::LogRow& row) {
        log << ppo::log_row_csv(row) << '\n' << std::flush;
        out << "timestep " << row.timestep << " mean_episode_return " << text::format_double(row.mean_episode_return)
            << '\n';
    };
    hooks.checkpoint_interval = checkpoint_interval;
    hooks.on_checkpoint = [&](std::size_t it, policy::PolicyNet& n) {
        fs::create_directories(cfg.out_dir() / "checkpoints");
        save_checkpoint(cfg.out_dir() / "checkpoints" / ("iter_" + std::to_string(it)), model_checkpoint(n, *frame));
    };
    r.log = ppo::learn(env, net, pc, hooks);
    r.model = cfg.out_dir() / kModelStem;
    save_checkpoint(r.model, model_checkpoint(net, *frame));
    out << "model " << r.model.string() << ".manifest\n";
    return r;
}

struct EvaluateResult {
    ppo::EpisodeTrace trace;
    double final_cumulative_reward = 0;
    double max_drawdown = 0;
};

inline EvaluateResult cmd_evaluate(const RunConfig& cfg, std::ostream& out) {
    const auto ec = cfg.env();
    const auto ckpt = load_checkpoint(cfg.required("evaluate.checkpoint"));
    auto net = policy::PolicyNet::from_checkpoint(ckpt);
    auto [train, eval] = data::split(build_frame(cfg), cfg.split());
    (void)train;
    auto frame = std::make_shared<const data::FeatureFrame>(std::move(eval));
    if (frame->rows() < 2) fail(ErrorKind::data, "evaluation interval needs at least two trading days");
    std::string tickers;
    for (std::size_t j = 0; j < frame->tickers.size(); ++j) tickers += (j ? "," : "") + frame->tickers[j];
    const auto it = ckpt.meta.find("frame.tickers");
    if (net.features() != frame->cols() || net.action_dim() != frame->tickers.size() ||
        (it != ckpt.meta.end() && it->second != tickers)) {
        fail(ErrorKind::arch, "checkpoint expects " + std::to_string(net.features()) + " columns for " +
                                  std::to_string(net.action_dim()) + " tickers, evaluation frame has " +
                                  std::to_string(frame->cols()) + " columns for tickers " + tickers);
    }
    if (net.window() != ec.window) {
        fail(ErrorKind::arch, "checkpoint window " + std::to_string(net.window()) + " differs from env.window " +
                                  std::to_string(ec.window));
    }
    env::TradingEnv env(frame, ec);
    EvaluateResult r{ppo::run_deterministic(env, net), 0, 0};
    r.final_cumulative_reward = r.trace.total();
    r.max_drawdown = ppo::max_drawdown(r.trace.portfolio_values);

    std::ostringstream csv;
    csv << "date,reward,cumulative_reward,portfolio_value\n";
    for (std::size_t k = 0; k < r.trace.rewards.size(); ++k) {
        csv << r.trace.dates[k].str() << ',' << text::format_double(r.trace.rewards[k]) << ','
            << text::format_double(r.trace.cumulative[k]) << ',' << text::format_double(r.trace.portfolio_values[k + 1])
            << '\n';
    }
    data::detail::write_text(cfg.out_dir() / kEvaluationCsv, csv.str());
    std::ostringstream summary;
    summary << "arch = " << ckpt.get("arch.kind") << '\n'
            << "checkpoint = " << cfg.str("evaluate.checkpoint") << '\n'
            << "days = " << r.trace.rewards.size() << '\n'
            << "initial_value = " << text::format_double(r.trace.portfolio_values.front()) << '\n'
            << "final_value = " << text::format_double(r.trace.portfolio_values.back()) << '\n'
            << "final_cumulative_reward = " << text::format_double(r.final_cumulative_reward) << '\n'
            << "max_drawdown = " << text::format_double(r.max_drawdown) << '\n';
    data::detail::write_text(cfg.out_dir() / kEvaluationSummary, summary.str());
    write_resolved_config(cfg);
    out << summary.str();
    return r;
}

struct CompareResult {
    std::vector<Date> dates;
    std::vector<std::string> models;               // mlp, cnn_v1, grcnn
    std::vector<std::vector<double>> cumulative;   // per model
    std::vector<double> finals;
    std::string ranking;  // best first; '=' joins exact ties
    bool tied = false;
};

/// Reads evaluation.csv as (dates, cumulative_reward).
inline std::pair<std::vector<Date>, std::vector<double>> read_evaluation(const fs::path& dir) {
    const auto path = dir / kEvaluationCsv;
    const auto lines = data::detail::read_lines(path);
    if (lines.empty()) fail(ErrorKind::data, path.string() + ": empty evaluation file");
    const auto idx = data::detail::header_index(lines[0]);
    if (!idx.count("date") || !idx.count("cumulative_reward")) {
        fail(ErrorKind::data, path.string() + ": expected date and cumulative_reward columns");
    }
    std::pair<std::vector<Date>, std::vector<double>> out;
    for (std::size_t r = 1; r < lines.size(); ++r) {
        if (text::trim(lines[r]).empty()) continue;
        const auto f = text::split(text::trim(lines[r]), ',');
        if (f.size() != idx.size()) fail(ErrorKind::parse, path.string() + " row " + std::to_string(r) + ": wrong field count");
        out.first.push_back(Date::parse(f[idx.at("date")]));
        out.second.push_back(text::to_double(f[idx.at("cumulative_reward")], "cumulative_reward"));
    }
    return out;
}

inline CompareResult cmd_compare(const RunConfig& cfg, std::ostream& out) {
    CompareResult r;
    r.models = {"mlp", "cnn_v1", "grcnn"};
    for (const auto& m : r.models) {
        auto [dates, cum] = read_evaluation(cfg.required("compare." + m));
        if (r.cumulative.empty()) {
            r.dates = dates;
        } else if (dates != r.dates) {
            fail(ErrorKind::data, "evaluation dates of " + m + " do not match those of " + r.models[0]);
        }
        r.finals.push_back(cum.empty() ? 0.0 : cum.back());
        r.cumulative.push_back(std::move(cum));
    }
    std::vector<std::size_t> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return r.finals[a] > r.finals[b]; });
    for (std::size_t k = 0; k < order.size(); ++k) {
        if (k > 0) {
            const bool tie = r.finals[order[k]] == r.finals[order[k - 1]];
            r.tied = r.tied || tie;
            r.ranking += tie ? " = " : " > ";
        }
        r.ranking += r.models[order[k]];
    }

    std::ostringstream csv;
    csv << "date,mlp,cnn_v1,grcnn\n";
    for (std::size_t t = 0; t < r.dates.size(); ++t) {
        csv << r.dates[t].str();
        for (const auto& c : r.cumulative) csv << ',' << text::format_double(c[t]);
        csv << '\n';
    }
    data::detail::write_text(cfg.out_dir() / kComparisonCsv, csv.str());
    std::ostringstream summary;
    for (std::size_t m = 0; m < r.models.size(); ++m) {
        summary << "final." << r.models[m] << " = " << text::format_double(r.finals[m]) << '\n';
    }
    summary << "ranking = " << r.ranking << '\n' << "tied = " << (r.tied ? "true" : "false") << '\n';
    data::detail::write_text(cfg.out_dir() / kComparisonSummary, summary.str());
    write_resolved_config(cfg);
    out << summary.str();
    return r;
}

}  // namespace tradenet::cli
