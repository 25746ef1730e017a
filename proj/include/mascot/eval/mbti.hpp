#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mascot/eval/benchmark.hpp"

namespace mascot::eval {

inline constexpr std::array<std::string_view, 16> kMbtiCodes{
    "ISTJ", "ISFJ", "INFJ", "INTJ", "ISTP", "ISFP", "INFP", "INTP",
    "ESTP", "ESFP", "ENFP", "ENTP", "ESTJ", "ESFJ", "ENFJ", "ENTJ"};

inline constexpr const char* kUserSimTemplate = "user_sim.v1";

struct MbtiProfile {
    std::string code;
    std::string description;

    void validate() const {
        if (std::find(kMbtiCodes.begin(), kMbtiCodes.end(), code) == kMbtiCodes.end())
            throw PreconditionError("not an MBTI type: '" + code + "'");
        if (util::trim(description).empty()) throw PreconditionError("MBTI profile " + code + " has no description");
    }
};

// [{"code": "ISTJ", "description": "..."}, ...]
inline std::vector<MbtiProfile> load_mbti_profiles(const std::filesystem::path& path) {
    json j;
    try {
        j = json::parse(util::read_file(path.string()));
    } catch (const json::parse_error& e) {
        throw LoadError(path.string() + ": " + e.what());
    }
    if (!j.is_array()) throw LoadError(path.string() + ": expected a JSON array of profiles");
    std::vector<MbtiProfile> out;
    std::set<std::string> seen;
    for (const auto& e : j) {
        MbtiProfile p{mascot::detail::field<std::string>(e, "code"), mascot::detail::field<std::string>(e, "description")};
        try {
            p.validate();
        } catch (const PreconditionError& err) {
            throw LoadError(path.string() + ": " + err.what());
        }
        if (!seen.insert(p.code).second) throw LoadError(path.string() + ": duplicate MBTI code " + p.code);
        out.push_back(std::move(p));
    }
    return out;
}

struct MbtiConfig {
    orch::EpisodeConfig episode;
    int rounds = 2; // user message then one block, repeated
    backend::GenerationParams user_params{0.7, 128, 1, 0};
    std::string user_template = kUserSimTemplate;
    std::string criteria_set = "agent_specific.v1";
    std::uint64_t seed = 0;

    void validate() const {
        episode.validate();
        if (rounds < 1) throw ConfigError("rounds must be >= 1");
        user_params.validate();
        if (criteria_set_by_id(criteria_set).level != CriteriaLevel::agent_specific)
            throw ConfigError("criteria_set must be agent-specific for per-persona scores");
    }
};

struct MbtiCellFailure {
    std::string mbti;
    std::string scenario_id;
    std::string message;
};

// rows = profiles, columns = roster personas; a cell is the persona's overall
// score averaged over scenarios, absent when the persona was never scored.
struct MbtiMatrix {
    std::vector<std::string> mbti_codes;
    std::vector<std::string> persona_ids;
    std::vector<std::vector<std::optional<double>>> cells;
    std::vector<MbtiCellFailure> failures;
    std::string csv;
};

inline std::string user_sim_message(backend::TextGenerator& user, const TemplateRegistry& templates,
                                    const std::string& template_id, const MbtiProfile& profile,
                                    const Trajectory& history, backend::GenerationParams params) {
    const auto prompt = templates.render(template_id, {{"mbti_code", profile.code},
                                                       {"mbti_description", profile.description},
                                                       {"scenario", history.context.scenario_text},
                                                       {"history", format_history(history.turns)}});
    params.num_samples = 1;
    auto split = split_think(backend::generate(user, prompt, params).front());
    if (util::trim(split.answer).empty()) throw BackendError("user simulator returned an empty message");
    return split.answer;
}

inline std::string matrix_csv(const MbtiMatrix& m) {
    std::string out = "mbti";
    for (const auto& p : m.persona_ids) out += "," + p;
    out += "\n";
    for (std::size_t r = 0; r < m.mbti_codes.size(); ++r) {
        out += m.mbti_codes[r];
        for (const auto& c : m.cells[r]) out += "," + (c ? fmt_score(*c) : std::string());
        out += "\n";
    }
    return out;
}

// Each (profile, scenario) cell is a live-style conversation: the simulated
// user writes a message, the ensemble answers with one block, repeated for
// `rounds`. Agent turns are judged per persona.
inline MbtiMatrix simulate_mbti(const std::vector<MbtiProfile>& profiles,
                                const std::vector<ConversationContext>& scenarios, const AgentRoster& roster,
                                const MbtiConfig& cfg, const orch::EpisodeBackends& be,
                                backend::TextGenerator& user) {
    cfg.validate();
    require(!profiles.empty() && !scenarios.empty(), "simulate_mbti: needs profiles and scenarios");
    for (const auto& p : profiles) p.validate();
    if (!be.gw.judge || !be.gw.templates) throw ConfigError("simulate_mbti needs a judge and templates");
    const auto set = criteria_set_by_id(cfg.criteria_set);

    struct Job {
        std::size_t row;
        const ConversationContext* scenario;
    };
    std::vector<Job> jobs;
    for (std::size_t r = 0; r < profiles.size(); ++r)
        for (const auto& s : scenarios) jobs.push_back({r, &s});

    auto outcomes = backend::parallel_map(jobs, be.gw.max_concurrency, [&](const Job& job) {
        const auto& profile = profiles[job.row];
        const auto seed = util::hash_combine(cfg.seed, util::fnv1a(profile.code + "/" + job.scenario->id));
        auto ecfg = cfg.episode;
        ecfg.score_blocks = false;
        ecfg.seed = seed;
        auto ctx = *job.scenario;
        ctx.source = ContextSource::live_user;
        orch::EpisodeRunner runner(ctx, roster, ecfg, be);
        auto uparams = cfg.user_params;
        for (int round = 0; round < cfg.rounds; ++round) {
            uparams.seed = util::hash_combine(seed, static_cast<std::uint64_t>(round));
            runner.add_user_message(
                user_sim_message(user, *be.gw.templates, cfg.user_template, profile, runner.trajectory(), uparams));
            runner.run_block();
        }
        EvaluateOptions eo{&roster, be.gw.templates.get(), 1};
        return evaluate_trajectory(runner.trajectory(), set, *be.gw.judge, eo);
    });

    MbtiMatrix m;
    for (const auto& p : profiles) m.mbti_codes.push_back(p.code);
    for (const auto& p : roster.personas) m.persona_ids.push_back(p.id);
    std::vector<std::vector<std::vector<double>>> acc(profiles.size(),
                                                      std::vector<std::vector<double>>(roster.size()));
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        const auto& code = profiles[jobs[i].row].code;
        if (!outcomes[i].ok()) {
            m.failures.push_back({code, jobs[i].scenario->id, outcomes[i].error});
            continue;
        }
        const auto& ev = *outcomes[i].value;
        for (std::size_t c = 0; c < roster.size(); ++c) {
            auto it = ev.per_persona.find(roster.personas[c].id);
            if (it != ev.per_persona.end() && !it->second.empty()) acc[jobs[i].row][c].push_back(it->second.overall);
        }
        if (ev.excluded > 0)
            m.failures.push_back({code, jobs[i].scenario->id, std::to_string(ev.excluded) + " judged item(s) excluded"});
    }
    for (auto& row : acc) {
        std::vector<std::optional<double>> line;
        for (auto& xs : row) line.push_back(xs.empty() ? std::nullopt : std::optional<double>(mean_of(xs)));
        m.cells.push_back(std::move(line));
    }
    m.csv = matrix_csv(m);
    return m;
}

} // namespace mascot::eval
