#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "tradenet/core/error.hpp"
#include "tradenet/core/text.hpp"
#include "tradenet/data/bars.hpp"
#include "tradenet/data/frame.hpp"
#include "tradenet/env/trading_env.hpp"
#include "tradenet/policy/arch.hpp"
#include "tradenet/ppo/config.hpp"

namespace tradenet::cli {

struct KeySpec {
    const char* key;
    const char* default_value;  // "" means unset
    const char* help;
};

/// Every key the config format accepts.
inline const std::vector<KeySpec>& config_keys() {
    static const std::vector<KeySpec> keys{
        {"seed", "0", "seed for synthesis, initialization, sampling and shuffling"},
        {"out_dir", "out", "output directory"},
        {"data.source", "synth", "synth (generated bars) or files (bar CSVs in data.dir)"},
        {"data.dir", "", "directory holding <TICKER>.csv bar files"},
        {"data.tickers", "", "comma-separated ticker subset; synth uses the first synth.n_tickers when empty"},
        {"data.vix", "", "optional VIX CSV (date,close)"},
        {"data.frame", "", "prebuilt frame CSV; overrides data.source for train/evaluate"},
        {"synth.n_tickers", "2", "number of synthetic tickers"},
        {"synth.n_days", "500", "synthetic trading days"},
        {"synth.drift", "0.001", "per-day log drift"},
        {"synth.volatility", "0.005", "per-day volatility"},
        {"synth.start_date", "2015-05-05", "first synthetic date"},
        {"synth.with_vix", "true", "also synthesize a VIX series"},
        {"features.subset", "", "comma-separated market features; empty keeps all 16"},
        {"features.volume_scale", "1000000", "raw volume is divided by this"},
        {"features.require_vix", "false", "fail when no VIX series is available"},
        {"indicators.rsi_period", "30", ""},
        {"indicators.cci_period", "30", ""},
        {"indicators.dx_period", "30", ""},
        {"indicators.sma_periods", "30,60", ""},
        {"indicators.macd_fast", "12", ""},
        {"indicators.macd_slow", "26", ""},
        {"indicators.macd_signal", "9", ""},
        {"indicators.boll_period", "20", ""},
        {"indicators.boll_k", "2", ""},
        {"indicators.turbulence_lookback", "252", ""},
        {"split.train_start", "", "first training date (required for train/evaluate)"},
        {"split.train_end", "", "last training date"},
        {"split.eval_start", "", "first evaluation date"},
        {"split.eval_end", "", "last evaluation date"},
        {"env.hmax", "1000", "max shares traded per asset per step"},
        {"env.initial_balance", "1000000", ""},
        {"env.cost_rate", "0", "proportional transaction cost"},
        {"env.reward_scale", "0.0001", ""},
        {"env.window", "90", "observation rows"},
        {"arch", "mlp", "mlp, cnn_v1 or grcnn"},
        {"arch.convs", "", "override conv stack, e.g. 32x8s4;64x4s2"},
        {"arch.hidden", "", "override mlp hidden widths, e.g. 64,64"},
        {"arch.dense_width", "", "override width of the dense layer after the convs"},
        {"arch.dropout_p", "", "override cnn_v1 dropout probability"},
        {"arch.use_input_norm", "", "override column normalization (always on for grcnn)"},
        {"ppo.gamma", "0.99", ""},
        {"ppo.gae_lambda", "0.95", ""},
        {"ppo.clip_eps", "0.2", ""},
        {"ppo.learning_rate", "0.0003", ""},
        {"ppo.n_steps", "2048", "rollout length per iteration"},
        {"ppo.n_epochs", "10", ""},
        {"ppo.minibatch_size", "64", ""},
        {"ppo.vf_coef", "0.5", ""},
        {"ppo.ent_coef", "0", ""},
        {"ppo.max_grad_norm", "0.5", ""},
        {"ppo.total_timesteps", "100000", ""},
        {"ppo.checkpoint_interval", "0", "write checkpoints/iter_<n> every n iterations (0: final only)"},
        {"evaluate.checkpoint", "", "checkpoint stem or .manifest path"},
        {"compare.mlp", "", "evaluation directory of the mlp run"},
        {"compare.cnn_v1", "", "evaluation directory of the cnn_v1 run"},
        {"compare.grcnn", "", "evaluation directory of the grcnn run"},
    };
    return keys;
}

/// Flat `key = value` document. `#` starts a comment; blank lines are
/// ignored; unknown and repeated keys are errors.
class RunConfig {
public:
    RunConfig() {
        for (const auto& k : config_keys()) values_[k.key] = k.default_value;
    }

    static RunConfig parse(const std::string& textual, const std::string& origin = "config") {
        RunConfig c;
        std::istringstream in(textual);
        std::string line;
        std::map<std::string, std::size_t> seen;
        for (std::size_t no = 1; std::getline(in, line); ++no) {
            const auto hash = line.find('#');
            const auto body = text::trim(std::string_view(line).substr(0, hash));
            if (body.empty()) continue;
            const auto eq = body.find('=');
            const auto where = origin + ":" + std::to_string(no);
            if (eq == std::string_view::npos) fail(ErrorKind::config, where + ": expected key = value");
            const std::string key(text::trim(body.substr(0, eq)));
            if (!c.known(key)) fail(ErrorKind::config, where + ": unknown key '" + key + "'");
            if (seen.count(key)) {
                fail(ErrorKind::config, where + ": key '" + key + "' already set on line " + std::to_string(seen[key]));
            }
            seen[key] = no;
            c.values_[key] = std::string(text::trim(body.substr(eq + 1)));
        }
        return c;
    }

    static RunConfig load(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) fail(ErrorKind::io, "cannot open config " + path.string());
        std::stringstream ss;
        ss << in.rdbuf();
        return parse(ss.str(), path.string());
    }

    bool known(const std::string& key) const { return values_.count(key) > 0; }

    void set(const std::string& key, const std::string& value) {
        if (!known(key)) fail(ErrorKind::config, "unknown key '" + key + "'");
        values_[key] = value;
    }

    const std::string& str(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end()) fail(ErrorKind::config, "unknown key '" + key + "'");
        return it->second;
    }

    bool has(const std::string& key) const { return !str(key).empty(); }

    const std::string& required(const std::string& key) const {
        if (!has(key)) fail(ErrorKind::config, "missing required key '" + key + "'");
        return str(key);
    }

    double real(const std::string& key) const { return text::to_double(required(key), key); }

    template <class Int = long long>
    Int integer(const std::string& key) const {
        return text::to_int<Int>(required(key), key);
    }

    bool boolean(const std::string& key) const { return policy::ArchSpec::parse_bool(required(key)); }

    Date date(const std::string& key) const { return Date::parse(required(key)); }

    std::vector<std::string> list(const std::string& key) const {
        std::vector<std::string> out;
        if (!has(key)) return out;
        for (auto part : text::split(str(key), ',')) {
            const auto t = text::trim(part);
            if (!t.empty()) out.emplace_back(t);
        }
        return out;
    }

    /// Resolved document: every key with its effective value, sorted.
    std::string dump() const {
        std::ostringstream os;
        for (const auto& [k, v] : values_) os << k << " = " << v << '\n';
        return os.str();
    }

    std::uint64_t seed() const { return integer<std::uint64_t>("seed"); }
    std::filesystem::path out_dir() const { return required("out_dir"); }

    data::SynthConfig synth() const {
        data::SynthConfig s;
        s.n_tickers = integer<std::size_t>("synth.n_tickers");
        s.n_days = integer<std::size_t>("synth.n_days");
        s.seed = seed();
        s.drift = real("synth.drift");
        s.volatility = real("synth.volatility");
        s.start_date = date("synth.start_date");
        return s;
    }

    data::FrameConfig frame() const {
        data::FrameConfig f;
        auto& ic = f.indicators;
        ic.rsi_period = integer<int>("indicators.rsi_period");
        ic.cci_period = integer<int>("indicators.cci_period");
        ic.dx_period = integer<int>("indicators.dx_period");
        ic.sma_periods.clear();
        for (const auto& p : list("indicators.sma_periods")) ic.sma_periods.push_back(text::to_int<int>(p, "sma period"));
        ic.macd_fast = integer<int>("indicators.macd_fast");
        ic.macd_slow = integer<int>("indicators.macd_slow");
        ic.macd_signal = integer<int>("indicators.macd_signal");
        ic.boll_period = integer<int>("indicators.boll_period");
        ic.boll_k = real("indicators.boll_k");
        ic.turbulence_lookback = integer<int>("indicators.turbulence_lookback");
        f.volume_scale = real("features.volume_scale");
        f.features = list("features.subset");
        f.require_vix = boolean("features.require_vix");
        return f;
    }

    data::SplitSpec split() const {
        return {date("split.train_start"), date("split.train_end"), date("split.eval_start"), date("split.eval_end")};
    }

    env::EnvConfig env() const {
        env::EnvConfig e;
        e.hmax = integer<long>("env.hmax");
        e.initial_balance = real("env.initial_balance");
        e.cost_rate = real("env.cost_rate");
        e.reward_scale = real("env.reward_scale");
        e.window = integer<std::size_t>("env.window");
        e.validate();
        return e;
    }

    policy::ArchSpec arch() const {
        auto a = policy::ArchSpec::defaults(policy::parse_arch_kind(required("arch")));
        if (has("arch.convs")) a.convs = policy::ArchSpec::parse_convs(str("arch.convs"));
        if (has("arch.hidden")) a.hidden = policy::ArchSpec::parse_widths(str("arch.hidden"));
        if (has("arch.dense_width")) a.dense_width = integer<std::size_t>("arch.dense_width");
        if (has("arch.dropout_p")) a.dropout_p = real("arch.dropout_p");
        if (has("arch.use_input_norm")) a.use_input_norm = boolean("arch.use_input_norm");
        a.validate();
        return a;
    }

    ppo::PpoConfig ppo() const {
        ppo::PpoConfig p;
        p.gamma = real("ppo.gamma");
        p.gae_lambda = real("ppo.gae_lambda");
        p.clip_eps = real("ppo.clip_eps");
        p.learning_rate = real("ppo.learning_rate");
        p.n_steps = integer<std::size_t>("ppo.n_steps");
        p.n_epochs = integer<std::size_t>("ppo.n_epochs");
        p.minibatch_size = integer<std::size_t>("ppo.minibatch_size");
        p.vf_coef = real("ppo.vf_coef");
        p.ent_coef = real("ppo.ent_coef");
        p.max_grad_norm = real("ppo.max_grad_norm");
        p.total_timesteps = integer<std::size_t>("ppo.total_timesteps");
        p.seed = seed();
        p.validate();
        return p;
    }

private:
    std::map<std::string, std::string> values_;
};

}  // namespace tradenet::cli
