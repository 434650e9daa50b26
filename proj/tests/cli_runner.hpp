#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace clirun {

namespace fs = std::filesystem;

struct Result {
    int code = -1;
    std::string out;
    std::string err;
};

inline std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("tradenet_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

/// Runs the built CLI with `args`, capturing both streams.
inline Result run(const std::string& args, const fs::path& work) {
    const auto out = work / "stdout.txt", err = work / "stderr.txt";
    const std::string cmd = std::string("\"") + TRADENET_CLI_PATH + "\" " + args + " >\"" + out.string() + "\" 2>\"" +
                            err.string() + "\"";
    const int status = std::system(cmd.c_str());
    Result r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
}

inline void write_config(const fs::path& p, const std::map<std::string, std::string>& kv) {
    std::ofstream o(p);
    for (const auto& [k, v] : kv) o << k << " = " << v << '\n';
}

/// Small synthetic run: 120 business days from 2015-05-05 (last 2015-10-19).
inline std::map<std::string, std::string> small_run(const std::string& arch, const fs::path& out) {
    std::map<std::string, std::string> kv{
        {"seed", "11"},
        {"out_dir", out.string()},
        {"synth.n_tickers", "2"},
        {"synth.n_days", "120"},
        {"indicators.turbulence_lookback", "20"},
        {"split.train_start", "2015-05-05"},
        {"split.train_end", "2015-08-31"},
        {"split.eval_start", "2015-09-01"},
        {"split.eval_end", "2015-10-19"},
        {"env.window", "30"},
        {"arch", arch},
        {"ppo.n_steps", "64"},
        {"ppo.minibatch_size", "16"},
        {"ppo.n_epochs", "2"},
        {"ppo.total_timesteps", "192"},
    };
    if (arch != "mlp") kv["arch.dense_width"] = "32";
    if (arch == "grcnn") kv["arch.convs"] = "8x8s4;16x3s1";
    if (arch == "cnn_v1") kv["arch.convs"] = "8x8s4;16x4s2";
    return kv;
}

inline std::map<std::string, std::string> read_summary(const fs::path& p) {
    std::map<std::string, std::string> out;
    std::istringstream in(slurp(p));
    std::string line;
    while (std::getline(in, line)) {
        const auto eq = line.find(" = ");
        if (eq != std::string::npos) out[line.substr(0, eq)] = line.substr(eq + 3);
    }
    return out;
}

}  // namespace clirun
