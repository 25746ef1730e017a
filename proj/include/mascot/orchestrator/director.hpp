#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mascot/backend/interfaces.hpp"
#include "mascot/backend/judge.hpp"
#include "mascot/core/json.hpp"
#include "mascot/core/prompt.hpp"

namespace mascot::orch {

inline constexpr const char* kDirectorTemplate = "director.v1";
inline constexpr const char* kFallbackInstruction =
    "Respond to the user's latest message in your own voice, adding something the others have not said.";

// Strict contract: a JSON object with a roster speaker_id and a non-empty
// instruction. Anything else is a ProtocolError.
inline Directive parse_directive(std::string_view raw, const AgentRoster& roster) {
    json j;
    try {
        j = json::parse(backend::strip_code_fence(raw));
    } catch (const json::parse_error&) {
        throw ProtocolError("director reply is not valid JSON");
    }
    if (!j.is_object()) throw ProtocolError("director reply is not a JSON object");
    auto sid = j.find("speaker_id");
    auto ins = j.find("instruction");
    if (sid == j.end() || !sid->is_string()) throw ProtocolError("director reply lacks a string speaker_id");
    if (ins == j.end() || !ins->is_string()) throw ProtocolError("director reply lacks a string instruction");
    Directive d{sid->get<std::string>(), std::string(util::trim(ins->get<std::string>())), 1, false};
    if (!roster.find(d.speaker_id)) throw ProtocolError("director chose unknown speaker '" + d.speaker_id + "'");
    if (d.instruction.empty()) throw ProtocolError("director instruction is empty");
    return d;
}

// Speaker of the most recent agent turn, if any.
inline std::optional<std::string> last_agent_speaker(const std::vector<Turn>& turns) {
    for (auto it = turns.rbegin(); it != turns.rend(); ++it)
        if (it->is_agent()) return it->speaker_id;
    return std::nullopt;
}

// First roster member (in roster order, starting after the last agent speaker)
// that has not spoken since `block_start`; if all have, the next one after the
// last speaker. Never repeats the last agent speaker when |roster| >= 2.
inline std::string round_robin_speaker(const std::vector<Turn>& turns, const AgentRoster& roster,
                                       std::size_t block_start = 0) {
    require(!roster.personas.empty(), "round_robin_speaker: empty roster");
    const auto n = roster.personas.size();
    const auto last = last_agent_speaker(turns);
    std::size_t start = 0;
    if (last) {
        auto idx = roster.index_of(*last);
        start = idx ? (*idx + 1) % n : 0;
    }
    std::vector<bool> used(n, false);
    for (std::size_t i = std::min(block_start, turns.size()); i < turns.size(); ++i)
        if (auto idx = roster.index_of(turns[i].speaker_id)) used[*idx] = true;
    for (std::size_t k = 0; k < n; ++k) {
        const auto i = (start + k) % n;
        if (!used[i] && (!last || roster.personas[i].id != *last || n == 1)) return roster.personas[i].id;
    }
    return roster.personas[start].id;
}

struct DirectorOptions {
    backend::GenerationParams params{0.0, 128, 1, 0};
    std::string template_id = kDirectorTemplate;
    RenderOptions render;
};

struct DirectiveOutcome {
    Directive directive;
    int attempts = 0;
    std::vector<std::string> errors; // one entry per rejected director reply
};

inline std::string render_director_prompt(const TemplateRegistry& templates, const Trajectory& history,
                                          const AgentRoster& roster, const std::string& template_id,
                                          const RenderOptions& render, const std::string& correction) {
    return templates.render(template_id, {{"scenario", history.context.scenario_text},
                                          {"roster", format_roster(roster)},
                                          {"history", format_history(history.turns, render)},
                                          {"correction", correction}});
}

// One director call, one corrective re-ask, then the round-robin fallback.
// Backend failures are not format errors and propagate.
inline DirectiveOutcome propose_directive(const Trajectory& history, const AgentRoster& roster,
                                          backend::TextGenerator& director, const TemplateRegistry& templates,
                                          const DirectorOptions& opts = {}, std::size_t block_start = 0) {
    require(!roster.personas.empty(), "propose_directive: roster must be non-empty");
    DirectiveOutcome out;
    std::string correction;
    for (int attempt = 0; attempt < 2; ++attempt) {
        ++out.attempts;
        auto params = opts.params;
        params.num_samples = 1;
        params.seed = util::hash_combine(opts.params.seed.value_or(0),
                                         static_cast<std::uint64_t>(history.next_index()) * 2 + attempt);
        const auto prompt = render_director_prompt(templates, history, roster, opts.template_id, opts.render, correction);
        const auto raw = backend::generate(director, prompt, params).front();
        try {
            out.directive = parse_directive(raw, roster);
            out.directive.turn_index = history.next_index();
            return out;
        } catch (const ProtocolError& e) {
            out.errors.push_back(e.what());
            correction = "Your previous reply was rejected (" + std::string(e.what()) +
                         "). Reply with the JSON object only, using one of the listed agent ids.";
        }
    }
    out.directive = {round_robin_speaker(history.turns, roster, block_start), kFallbackInstruction,
                     history.next_index(), true};
    return out;
}

} // namespace mascot::orch
