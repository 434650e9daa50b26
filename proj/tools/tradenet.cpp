#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "tradenet/cli/commands.hpp"

namespace {

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::string> checkpoint;
};

tradenet::cli::RunConfig resolve(const Options& o) {
    auto cfg = o.config.empty() ? tradenet::cli::RunConfig{} : tradenet::cli::RunConfig::load(o.config);
    if (o.seed) cfg.set("seed", std::to_string(*o.seed));
    if (o.out) cfg.set("out_dir", *o.out);
    if (o.checkpoint) cfg.set("evaluate.checkpoint", *o.checkpoint);
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"tradenet: indicator features, trading environment, PPO training and model comparison"};
    app.require_subcommand(1);
    Options opt;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", opt.config, "flat key = value config file");
        sub->add_option("--seed", opt.seed, "overrides the config seed");
        sub->add_option("--out", opt.out, "overrides out_dir");
    };
    auto* synth = app.add_subcommand("synth", "write synthetic bar files");
    auto* features = app.add_subcommand("features", "build and export the feature frame");
    auto* train = app.add_subcommand("train", "train a policy with PPO");
    auto* evaluate = app.add_subcommand("evaluate", "run the deterministic policy over the evaluation split");
    auto* compare = app.add_subcommand("compare", "merge mlp / cnn_v1 / grcnn evaluations");
    for (auto* s : {synth, features, train, evaluate, compare}) add_common(s);
    evaluate->add_option("--checkpoint", opt.checkpoint, "overrides evaluate.checkpoint");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error[config]: " << e.what() << '\n';
        return 2;
    }

    try {
        const auto cfg = resolve(opt);
        using namespace tradenet::cli;
        if (synth->parsed()) cmd_synth(cfg, std::cout);
        if (features->parsed()) cmd_features(cfg, std::cout);
        if (train->parsed()) cmd_train(cfg, std::cout);
        if (evaluate->parsed()) cmd_evaluate(cfg, std::cout);
        if (compare->parsed()) cmd_compare(cfg, std::cout);
    } catch (const tradenet::Error& e) {
        std::cerr << "error[" << tradenet::to_string(e.kind()) << "]: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error[internal]: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
