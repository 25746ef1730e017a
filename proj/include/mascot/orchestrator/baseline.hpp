#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mascot/backend/interfaces.hpp"
#include "mascot/core/json.hpp"
#include "mascot/core/prompt.hpp"
#include "mascot/core/tokens.hpp"
#include "mascot/util/hash.hpp"

namespace mascot::orch {

inline constexpr const char* kDefaultCotTrigger = "Let's think step by step.";
inline constexpr const char* kDefaultExemplars =
    "User: I failed my driving test again.\n"
    "Companion: That is really frustrating, especially after all the practice. What happened on the test?\n"
    "User: My team finally shipped the release.\n"
    "Companion: Congratulations, that took real persistence. How are you celebrating?\n";

struct BaselineConfig {
    Mode mode = Mode::zero_shot;
    std::string exemplars = kDefaultExemplars;
    std::string cot_trigger = kDefaultCotTrigger;
    backend::GenerationParams params{0.7, 512, 1, 0};
    RenderOptions render;
    std::uint64_t seed = 0;

    void validate() const {
        if (mode == Mode::mascot) throw ConfigError("baseline mode must not be 'mascot'");
        if (is_cot() && util::trim(cot_trigger).empty()) throw ConfigError("cot_trigger must be non-empty");
        if (is_few_shot() && util::trim(exemplars).empty()) throw ConfigError("exemplars must be non-empty");
        params.validate();
    }
    bool is_cot() const { return mode == Mode::zero_shot_cot || mode == Mode::few_shot_cot; }
    bool is_few_shot() const { return mode == Mode::few_shot || mode == Mode::few_shot_cot; }
};

inline std::string baseline_template(Mode mode) {
    switch (mode) {
    case Mode::zero_shot: return "zero_shot.v1";
    case Mode::zero_shot_cot: return "zero_shot_cot.v1";
    case Mode::few_shot: return "few_shot.v1";
    case Mode::few_shot_cot: return "few_shot_cot.v1";
    default: throw ConfigError("no baseline template for mode " + std::string(to_string(mode)));
    }
}

// Prompt for one baseline turn; `persona` is used by the few-shot modes.
inline std::string baseline_prompt(const TemplateRegistry& templates, const Trajectory& history,
                                   const BaselineConfig& cfg, const PersonaProfile* persona) {
    TemplateVars vars{{"scenario", history.context.scenario_text}, {"history", format_history(history.turns, cfg.render)}};
    if (cfg.is_cot()) vars["cot_trigger"] = cfg.cot_trigger;
    if (cfg.is_few_shot()) {
        require(persona != nullptr, "few-shot baseline needs a persona");
        vars["exemplars"] = cfg.exemplars;
        for (auto& [k, v] : persona_vars(*persona)) vars[k] = v;
    }
    return templates.render(baseline_template(cfg.mode), vars);
}

// One baseline round on top of `traj`: a single assistant answer for the
// zero-shot modes, one turn per roster persona (roster order) for few-shot.
// `on_turn` sees each turn as it is appended.
inline void baseline_round(Trajectory& traj, const AgentRoster& roster, const BaselineConfig& cfg,
                           backend::TextGenerator& generator, const TemplateRegistry& templates,
                           const std::function<void(const Turn&)>& on_turn = {}) {
    auto respond = [&](const std::string& speaker, const PersonaProfile* persona) {
        auto params = cfg.params;
        params.num_samples = 1;
        params.seed = util::hash_combine(cfg.seed, static_cast<std::uint64_t>(traj.next_index()));
        std::string raw;
        try {
            raw = backend::generate(generator, baseline_prompt(templates, traj, cfg, persona), params).front();
        } catch (const Error& e) {
            throw EpisodeError("turn " + std::to_string(traj.next_index()) + " (" + speaker + "): " + e.what());
        }
        auto split = split_think(raw);
        if (split.answer.empty())
            throw EpisodeError("turn " + std::to_string(traj.next_index()) + ": empty baseline response");
        Turn t;
        t.speaker_id = speaker;
        t.reasoning = split.reasoning;
        t.text = split.answer;
        t.token_count_reasoning = split.reasoning ? count_tokens(*split.reasoning) : 0;
        t.token_count_text = count_tokens(t.text);
        const auto& added = traj.append(std::move(t));
        if (on_turn) on_turn(added);
    };
    if (cfg.is_few_shot())
        for (const auto& p : roster.personas) respond(p.id, &p);
    else
        respond(std::string(kAssistantSpeaker), nullptr);
}

// Prompting baselines. The scenario is the opening user message; each later
// user message starts a new round. No directives.
inline Trajectory run_baseline(const ConversationContext& context, const AgentRoster& roster, const BaselineConfig& cfg,
                               backend::TextGenerator& generator, const TemplateRegistry& templates,
                               const std::vector<std::string>& user_messages = {}) {
    cfg.validate();
    Trajectory traj{context, {}, cfg.mode};
    traj.context.validate();
    if (cfg.is_few_shot()) roster.validate(false);
    for (std::size_t round = 0; round <= user_messages.size(); ++round) {
        if (round > 0) {
            Turn u;
            u.speaker_id = kUserSpeaker;
            u.text = user_messages[round - 1];
            u.token_count_text = count_tokens(u.text);
            traj.append(std::move(u));
        }
        baseline_round(traj, roster, cfg, generator, templates);
    }
    traj.validate();
    return traj;
}

} // namespace mascot::orch
