#pragma once

#include <atomic>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <functional>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "mascot/backend/mock.hpp"
#include "mascot/backend/openai.hpp"
#include "mascot/core/persona_io.hpp"
#include "mascot/eval/benchmark.hpp"
#include "mascot/eval/mbti.hpp"
#include "mascot/orchestrator/mock.hpp"
#include "mascot/preference/dataset.hpp"
#include "mascot/service/config.hpp"
#include "mascot/service/server.hpp"

namespace mascot::app {

// Exit codes: 0 ok, 1 any runtime failure (including partial failures whose
// outputs were still written), 2 invalid configuration.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;

struct Workspace {
    std::map<std::string, PersonaProfile> personas;
    std::map<std::string, AgentRoster> rosters;
    AgentRoster roster;
    std::shared_ptr<const TemplateRegistry> templates;
};

inline Workspace load_workspace(const AppConfig& cfg) {
    Workspace w;
    w.personas = load_persona_library(cfg.data_dir / "personas");
    w.rosters = load_rosters(cfg.data_dir / "rosters", w.personas);
    auto it = w.rosters.find(cfg.roster);
    if (it == w.rosters.end()) {
        std::string known;
        for (const auto& [id, r] : w.rosters) known += (known.empty() ? "" : ", ") + id;
        throw ConfigError("config field 'roster': unknown roster \"" + cfg.roster + "\" (known: " + known + ")");
    }
    w.roster = it->second;
    w.templates = std::make_shared<const TemplateRegistry>(TemplateRegistry::from_directory(cfg.data_dir / "templates"));
    return w;
}

namespace detail {

inline std::shared_ptr<backend::OpenAiClient> client_for(const backend::BackendEndpoint& ep, const std::string& replay,
                                                         const std::string& record) {
    std::shared_ptr<backend::Transport> t;
    if (!replay.empty()) t = std::make_shared<backend::ReplayTransport>(replay);
    else t = std::make_shared<backend::HttpTransport>();
    if (!record.empty()) t = std::make_shared<backend::RecordingTransport>(t, record);
    return std::make_shared<backend::OpenAiClient>(ep, t);
}

inline std::shared_ptr<backend::TextGenerator> make_generator(const GeneratorSpec& g, std::uint64_t seed) {
    if (g.kind == "cycling") return std::make_shared<orch::CyclingDirector>(util::hash_combine(seed, g.mock.seed));
    if (g.kind == "openai")
        return std::make_shared<backend::OpenAiGenerator>(client_for(g.endpoint, g.replay_dir, g.record_dir));
    auto m = g.mock;
    m.seed = util::hash_combine(seed, g.mock.seed);
    return std::make_shared<backend::MockGenerator>(m);
}

inline std::shared_ptr<backend::JudgeModel> make_judge(const JudgeSpec& j, std::uint64_t seed) {
    if (j.kind == "openai")
        return std::make_shared<backend::OpenAiJudge>(client_for(j.endpoint, j.replay_dir, j.record_dir),
                                                      j.max_new_tokens);
    backend::JudgeRule rule;
    if (j.rule == "constant") rule = backend::rules::constant(j.score);
    else if (j.rule == "keyword_overlap") rule = backend::rules::keyword_overlap();
    else if (j.rule == "hashed") rule = backend::rules::hashed(util::hash_combine(seed, j.seed));
    else if (j.rule == "persona_bias") rule = backend::rules::persona_bias(j.score, j.favoured, j.bonus);
    else rule = orch::rules::alternation();
    return std::make_shared<backend::MockJudge>(std::move(rule), "mock-judge/" + j.rule);
}

inline std::shared_ptr<backend::Embedder> make_embedder(const EmbedderSpec& e, std::uint64_t seed) {
    if (e.kind == "openai")
        return std::make_shared<backend::OpenAiEmbedder>(client_for(e.endpoint, e.replay_dir, e.record_dir),
                                                         e.dimension);
    return std::make_shared<backend::MockEmbedder>(e.dimension, util::hash_combine(seed, e.seed));
}

inline std::string stamp() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y%m%d-%H%M%S", &tm);
    return buf;
}

inline void write_json(const fs::path& p, const json& j) { util::write_file(p.string(), j.dump(2) + "\n"); }

inline std::string jsonl(const std::vector<json>& rows) {
    std::string out;
    for (const auto& r : rows) out += r.dump() + "\n";
    return out;
}

} // namespace detail

struct Backends {
    orch::EpisodeBackends episode;
    std::shared_ptr<backend::TextGenerator> user; // MBTI user simulator
};

inline Backends make_backends(const AppConfig& cfg, const Workspace& ws) {
    Backends b;
    auto& gw = b.episode.gw;
    gw.generator = detail::make_generator(cfg.generator, cfg.seed);
    gw.judge = detail::make_judge(cfg.judge, cfg.seed);
    gw.embedder = detail::make_embedder(cfg.embedder, cfg.seed);
    gw.templates = ws.templates;
    gw.max_concurrency = cfg.max_concurrency;
    if (cfg.director) b.episode.director = detail::make_generator(*cfg.director, util::hash_combine(cfg.seed, 0xD1u));
    b.user = cfg.user ? detail::make_generator(*cfg.user, util::hash_combine(cfg.seed, 0x05u)) : gw.generator;
    return b;
}

// <output_dir>/<command>-<UTC stamp>-<config hash prefix>; the effective
// config is written inside. Files never carry timestamps, so reruns with the
// same config and seed produce identical directory contents.
inline fs::path make_run_dir(const AppConfig& cfg, const std::string& command) {
    const auto base = command + "-" + detail::stamp() + "-" + cfg.config_hash().substr(0, 8);
    fs::create_directories(cfg.output_dir);
    fs::path dir = cfg.output_dir / base;
    for (int n = 2; fs::exists(dir); ++n) dir = cfg.output_dir / (base + "-" + std::to_string(n));
    fs::create_directories(dir);
    detail::write_json(dir / "config.json", cfg.document);
    return dir;
}

inline std::vector<ConversationContext> load_contexts(const AppConfig& cfg) {
    auto all = eval::load_fixtures(cfg.fixtures, cfg.fixture_kind);
    if (cfg.max_contexts > 0 && all.size() > static_cast<std::size_t>(cfg.max_contexts))
        all.resize(static_cast<std::size_t>(cfg.max_contexts));
    if (all.empty()) throw LoadError("no contexts in " + cfg.fixtures.string());
    return all;
}

struct CommandResult {
    int exit_code = kExitOk;
    fs::path run_dir;
    std::string message; // one-line summary for stdout
};

// Every subcommand writes status.json last; a run dir without it did not finish.
inline CommandResult finish(const fs::path& dir, const std::string& command, const json& summary, bool ok,
                            std::string message) {
    detail::write_json(dir / "status.json", {{"command", command}, {"ok", ok}, {"summary", summary}});
    return {ok ? kExitOk : kExitFailure, dir, std::move(message)};
}

inline CommandResult cmd_sample_prefs(const AppConfig& cfg) {
    const auto ws = load_workspace(cfg);
    const auto contexts = load_contexts(cfg);
    const auto be = make_backends(cfg, ws);
    const auto dir = make_run_dir(cfg, "sample-prefs");
    auto out = preference::run_pipeline(contexts, ws.roster, cfg.preference, be.episode.gw, dir);
    const auto& s = out.stats;
    json summary{{"cells_total", s.cells_total}, {"cells_failed", s.cells_failed}, {"pairs", s.pairs}};
    return finish(dir, "sample-prefs", summary, s.cells_failed == 0,
                  std::to_string(s.pairs) + " pairs from " + std::to_string(s.cells_total) + " cells (" +
                      std::to_string(s.cells_failed) + " failed)");
}

inline CommandResult cmd_train_rm(const AppConfig& cfg) {
    if (cfg.rm_dataset.empty())
        throw ConfigError("config field 'rm.dataset': required for train-rm (path to a preferences.jsonl)");
    const auto ws = load_workspace(cfg);
    const auto be = make_backends(cfg, ws);
    const auto ds = preference::read_dataset(cfg.rm_dataset);
    if (ds.pairs.empty()) throw LoadError(cfg.rm_dataset.string() + ": dataset holds no pairs");
    const auto dir = make_run_dir(cfg, "train-rm");
    reward::FeatureExtractor fx(*be.episode.gw.embedder);
    auto features = reward::dataset_features(ds.pairs, fx);
    auto res = reward::train_rm(features, cfg.rm);
    reward::save_checkpoint(res.params, fx.embedder_identity(), dir / "checkpoint.json");
    std::string csv = "epoch,train_loss,heldout_accuracy\n";
    for (const auto& e : res.report.epochs)
        csv += std::to_string(e.epoch) + "," + eval::fmt_score(e.train_loss, 8) + "," +
               eval::fmt_score(e.heldout_accuracy, 6) + "\n";
    util::write_file((dir / "curve.csv").string(), csv);
    json summary{{"pairs", ds.pairs.size()},
                 {"train_pairs", res.report.train_pairs},
                 {"heldout_pairs", res.report.heldout_pairs},
                 {"initial_train_loss", res.report.initial_train_loss},
                 {"final_heldout_accuracy", res.report.final_heldout_accuracy()}};
    return finish(dir, "train-rm", summary, true,
                  "held-out accuracy " + eval::fmt_score(res.report.final_heldout_accuracy()));
}

inline CommandResult cmd_train_grpo_toy(const AppConfig& cfg) {
    const auto dir = make_run_dir(cfg, "train-grpo-toy");
    const auto& task = cfg.toy;
    task.validate();
    grpo::ToyTrainResult res;
    try {
        res = grpo::train_toy(grpo::ToyPolicy(task.vocab, task.length), task.reward_fn(), cfg.grpo);
    } catch (const grpo::ToyDivergence& e) {
        detail::write_json(dir / "policy_last_good.json", grpo::toy_policy_json(e.last_good, cfg.config_hash()));
        return finish(dir, "train-grpo-toy", {{"diverged_at", e.iteration}, {"error", e.what()}}, false, e.what());
    }
    util::write_file((dir / "curve.csv").string(), grpo::curve_csv(res.curve));
    detail::write_json(dir / "policy.json", grpo::toy_policy_json(res.policy, cfg.config_hash()));
    const double baseline = task.random_baseline();
    const double final_reward =
        grpo::estimate_mean_reward(res.policy, task.reward_fn(), cfg.toy_eval_samples, util::hash_combine(cfg.seed, 1));
    json summary{{"random_baseline", baseline},
                 {"final_mean_reward", final_reward},
                 {"ratio", final_reward / baseline},
                 {"iterations", res.curve.size()}};
    return finish(dir, "train-grpo-toy", summary, true,
                  "mean reward " + eval::fmt_score(final_reward) + " vs random " + eval::fmt_score(baseline));
}

inline CommandResult cmd_train_director_toy(const AppConfig& cfg) {
    const auto ws = load_workspace(cfg);
    const auto contexts = load_contexts(cfg);
    const auto be = make_backends(cfg, ws);
    const auto dir = make_run_dir(cfg, "train-director-toy");
    auto rep = orch::train_director(contexts.front(), ws.roster, *be.episode.gw.judge, ws.templates.get(),
                                    cfg.director_training);
    util::write_file((dir / "curve.csv").string(), grpo::curve_csv(rep.curve));
    detail::write_json(dir / "policy.json", grpo::toy_policy_json(rep.policy, cfg.config_hash()));
    json summary{{"context_id", contexts.front().id},
                 {"diversity_rate", rep.diversity_rate},
                 {"random_diversity_rate", rep.random_diversity_rate},
                 {"eval_blocks", cfg.director_training.eval_blocks}};
    return finish(dir, "train-director-toy", summary, true,
                  "diversity " + eval::fmt_score(rep.diversity_rate) + " vs random " +
                      eval::fmt_score(rep.random_diversity_rate));
}

inline CommandResult cmd_run_episode(const AppConfig& cfg) {
    const auto ws = load_workspace(cfg);
    const auto contexts = load_contexts(cfg);
    const auto be = make_backends(cfg, ws);
    const auto dir = make_run_dir(cfg, "run-episode");
    std::vector<json> episodes, events;
    int failed = 0;
    for (const auto& ctx : contexts) {
        auto ep_cfg = cfg.episode;
        ep_cfg.seed = util::hash_combine(cfg.seed, util::fnv1a(ctx.id));
        auto res = orch::run_episode(ctx, ws.roster, ep_cfg, be.episode, cfg.user_messages, [&](const json& e) {
            json row = e;
            row["context_id"] = ctx.id;
            events.push_back(std::move(row));
        });
        auto j = orch::episode_json(res);
        j["context_id"] = ctx.id;
        episodes.push_back(std::move(j));
        failed += res.failed ? 1 : 0;
    }
    util::write_file((dir / "episodes.jsonl").string(), detail::jsonl(episodes));
    util::write_file((dir / "events.jsonl").string(), detail::jsonl(events));
    json summary{{"episodes", contexts.size()}, {"failed", failed}};
    return finish(dir, "run-episode", summary, failed == 0,
                  std::to_string(contexts.size()) + " episodes (" + std::to_string(failed) + " failed)");
}

inline CommandResult cmd_run_baseline(const AppConfig& cfg) {
    const auto ws = load_workspace(cfg);
    const auto contexts = load_contexts(cfg);
    const auto be = make_backends(cfg, ws);
    const auto dir = make_run_dir(cfg, "run-baseline");
    std::vector<json> rows;
    int failed = 0;
    for (const auto& ctx : contexts) {
        auto bcfg = cfg.baseline;
        bcfg.seed = util::hash_combine(cfg.seed, util::fnv1a(ctx.id));
        json row{{"context_id", ctx.id}, {"mode", to_string(bcfg.mode)}};
        try {
            row["trajectory"] =
                orch::run_baseline(ctx, ws.roster, bcfg, *be.episode.gw.generator, *ws.templates, cfg.user_messages);
            row["failed"] = false;
        } catch (const EpisodeError& e) {
            row["failed"] = true;
            row["failure"] = e.what();
            ++failed;
        }
        rows.push_back(std::move(row));
    }
    util::write_file((dir / "trajectories.jsonl").string(), detail::jsonl(rows));
    json summary{{"mode", to_string(cfg.baseline.mode)}, {"conversations", contexts.size()}, {"failed", failed}};
    return finish(dir, "run-baseline", summary, failed == 0,
                  std::to_string(contexts.size()) + " " + std::string(to_string(cfg.baseline.mode)) +
                      " conversations (" + std::to_string(failed) + " failed)");
}

inline CommandResult cmd_evaluate(const AppConfig& cfg) {
    const auto ws = load_workspace(cfg);
    const auto contexts = load_contexts(cfg);
    const auto be = make_backends(cfg, ws);
    const auto dir = make_run_dir(cfg, "evaluate");
    eval::BenchmarkConfig bcfg{cfg.episode, cfg.baseline, cfg.criteria_set, cfg.seed};
    auto res = eval::run_benchmark(contexts, cfg.eval_modes, ws.roster, bcfg, be.episode);
    util::write_file((dir / "results.csv").string(), res.csv);
    util::write_file((dir / "results.txt").string(), res.table);
    std::vector<json> convs;
    int excluded = 0;
    for (const auto& c : res.conversations) {
        json j{{"mode", to_string(c.mode)},
               {"context_id", c.context_id},
               {"valence", to_string(c.valence)},
               {"excluded_items", c.excluded_items}};
        if (c.report) j["report"] = *c.report;
        else {
            j["error"] = c.error;
            ++excluded;
        }
        convs.push_back(std::move(j));
    }
    util::write_file((dir / "conversations.jsonl").string(), detail::jsonl(convs));
    json summary{{"conversations", res.conversations.size()},
                 {"excluded", excluded},
                 {"judge_prompt_hash", res.judge_prompt_hash}};
    return finish(dir, "evaluate", summary, excluded == 0,
                  std::to_string(res.rows.size()) + " result rows, " + std::to_string(excluded) +
                      " conversations excluded");
}

inline CommandResult cmd_simulate_mbti(const AppConfig& cfg) {
    const auto ws = load_workspace(cfg);
    auto scenarios = load_contexts(cfg);
    if (scenarios.size() > static_cast<std::size_t>(cfg.mbti_scenarios))
        scenarios.resize(static_cast<std::size_t>(cfg.mbti_scenarios));
    const auto profiles = eval::load_mbti_profiles(cfg.mbti_profiles);
    const auto be = make_backends(cfg, ws);
    const auto dir = make_run_dir(cfg, "simulate-mbti");
    eval::MbtiConfig mcfg;
    mcfg.episode = cfg.episode;
    mcfg.rounds = cfg.mbti_rounds;
    mcfg.criteria_set = cfg.criteria_set;
    mcfg.seed = cfg.seed;
    auto m = eval::simulate_mbti(profiles, scenarios, ws.roster, mcfg, be.episode, *be.user);
    util::write_file((dir / "matrix.csv").string(), m.csv);
    json failures = json::array();
    for (const auto& f : m.failures)
        failures.push_back({{"mbti", f.mbti}, {"scenario_id", f.scenario_id}, {"message", f.message}});
    detail::write_json(dir / "failures.json", failures);
    json summary{{"profiles", m.mbti_codes.size()}, {"personas", m.persona_ids}, {"failures", m.failures.size()}};
    return finish(dir, "simulate-mbti", summary, m.failures.empty(),
                  std::to_string(m.mbti_codes.size()) + "x" + std::to_string(m.persona_ids.size()) + " matrix, " +
                      std::to_string(m.failures.size()) + " failures");
}

inline service::SessionSettings session_settings(const AppConfig& cfg) {
    service::SessionSettings s;
    s.store_dir = cfg.service.store_dir;
    s.episode = cfg.episode;
    s.baseline = cfg.baseline;
    s.delta_words = cfg.service.delta_words;
    if (!cfg.service.scenario.empty()) s.default_scenario = cfg.service.scenario;
    s.seed = cfg.seed;
    return s;
}

inline service::ServerOptions server_options(const AppConfig& cfg) {
    service::ServerOptions o;
    o.host = cfg.service.host;
    o.port = cfg.service.port;
    o.worker_threads = cfg.service.worker_threads;
    if (!cfg.service.auth_token_env.empty()) {
        const char* v = std::getenv(cfg.service.auth_token_env.c_str());
        if (!v || !*v)
            throw ConfigError("config field 'service.auth_token_env': environment variable " +
                              cfg.service.auth_token_env + " is not set");
        o.auth_token = v;
    }
    return o;
}

// Binds, reports the address, then blocks in `wait_for_stop` (the CLI waits
// for SIGINT/SIGTERM there) before shutting down cleanly.
inline CommandResult cmd_serve(const AppConfig& cfg, const std::function<void()>& wait_for_stop) {
    const auto ws = load_workspace(cfg);
    const auto be = make_backends(cfg, ws);
    const auto opts = server_options(cfg);
    const auto dir = make_run_dir(cfg, "serve");
    service::SessionManager mgr(session_settings(cfg), ws.personas, ws.rosters, be.episode);
    service::HttpService http(mgr, opts);
    const int port = http.bind();
    detail::write_json(dir / "server.json", {{"host", opts.host}, {"port", port}, {"store_dir", cfg.service.store_dir}});
    std::cout << "listening on http://" << opts.host << ":" << port << std::endl;
    for (const auto& e : mgr.recovery_errors()) std::cerr << "recovery: " << e << "\n";
    std::thread server([&] { http.run(); });
    wait_for_stop();
    http.stop();
    server.join();
    mgr.shutdown();
    return finish(dir, "serve", {{"sessions", mgr.session_count()}}, true, "stopped");
}

} // namespace mascot::app
