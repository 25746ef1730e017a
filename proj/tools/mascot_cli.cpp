#include <csignal>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mascot/service/commands.hpp"

namespace {

using namespace mascot;

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::string> data_dir;
    std::optional<std::string> host;
    std::optional<int> port;
    std::vector<std::string> sets;
};

// Flags are shorthands for config paths and win over the file.
std::vector<std::string> overrides(const Options& o) {
    auto v = o.sets;
    if (o.seed) v.push_back("seed=" + std::to_string(*o.seed));
    if (o.out) v.push_back("output_dir=" + json(*o.out).dump());
    if (o.data_dir) v.push_back("data_dir=" + json(*o.data_dir).dump());
    if (o.host) v.push_back("service.host=" + json(*o.host).dump());
    if (o.port) v.push_back("service.port=" + std::to_string(*o.port));
    return v;
}

void wait_for_signal(const sigset_t& set) {
    int sig = 0;
    sigwait(&set, &sig);
    std::cerr << "received signal " << sig << ", shutting down\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"mascot: persona ensemble orchestration, training and evaluation"};
    app.require_subcommand(1);
    Options opt;

    const std::vector<std::pair<std::string, std::string>> commands{
        {"sample-prefs", "sample, judge and margin-filter candidate responses into a preference dataset"},
        {"train-rm", "train the pairwise reward model on a preference dataset"},
        {"train-grpo-toy", "train a toy policy with the group-relative objective"},
        {"train-director-toy", "train a toy director over speaker orders"},
        {"run-episode", "run orchestrated episodes over the configured fixtures"},
        {"run-baseline", "run a single-agent prompting baseline over the fixtures"},
        {"evaluate", "benchmark modes with the LLM judge and write the results table"},
        {"simulate-mbti", "run the MBTI user-simulation matrix"},
        {"serve", "serve the REST/SSE session API until SIGINT or SIGTERM"},
    };
    for (const auto& [name, help] : commands) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--config,-c", opt.config, "config file (JSON)")->required();
        sub->add_option("--seed", opt.seed, "master seed (config path: seed)");
        sub->add_option("--out", opt.out, "parent directory for run dirs (config path: output_dir)");
        sub->add_option("--data-dir", opt.data_dir, "data directory (config path: data_dir)");
        sub->add_option("--set", opt.sets, "override a config value: dotted.path=value (value parsed as JSON)");
        if (name == "serve") {
            sub->add_option("--host", opt.host, "listen host (config path: service.host)");
            sub->add_option("--port", opt.port, "listen port, 0 for any (config path: service.port)");
        }
    }

    CLI11_PARSE(app, argc, argv);
    const std::string command = app.get_subcommands().front()->get_name();

    try {
        const auto cfg = app::load_config(opt.config, overrides(opt));
        app::CommandResult r;
        if (command == "sample-prefs") r = app::cmd_sample_prefs(cfg);
        else if (command == "train-rm") r = app::cmd_train_rm(cfg);
        else if (command == "train-grpo-toy") r = app::cmd_train_grpo_toy(cfg);
        else if (command == "train-director-toy") r = app::cmd_train_director_toy(cfg);
        else if (command == "run-episode") r = app::cmd_run_episode(cfg);
        else if (command == "run-baseline") r = app::cmd_run_baseline(cfg);
        else if (command == "evaluate") r = app::cmd_evaluate(cfg);
        else if (command == "simulate-mbti") r = app::cmd_simulate_mbti(cfg);
        else {
            // Block the signals before any worker thread exists so sigwait sees them.
            sigset_t set;
            sigemptyset(&set);
            sigaddset(&set, SIGINT);
            sigaddset(&set, SIGTERM);
            pthread_sigmask(SIG_BLOCK, &set, nullptr);
            r = app::cmd_serve(cfg, [&] { wait_for_signal(set); });
        }
        std::cout << command << ": " << r.message << "\n" << r.run_dir.string() << "\n";
        return r.exit_code;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return app::kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << command << " failed: " << e.what() << "\n";
        return app::kExitFailure;
    }
}
