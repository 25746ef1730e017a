#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "mascot/error.hpp"

namespace mascot {

enum class PersonaDomain { emotional_support, workplace };
enum class Valence { positive, negative, neutral, not_applicable };
enum class ContextSource { ed_fixture, qmsum_fixture, live_user, synthetic };
enum class Mode { mascot, zero_shot, zero_shot_cot, few_shot, few_shot_cot };

inline constexpr std::string_view kUserSpeaker = "user";
inline constexpr std::string_view kAssistantSpeaker = "assistant";

struct PersonaProfile {
    std::string id;
    std::string name;
    std::string description;
    std::vector<std::string> traits;
    PersonaDomain domain = PersonaDomain::emotional_support;

    void validate() const {
        if (id.empty()) throw PreconditionError("persona id must be non-empty");
        if (traits.empty()) throw PreconditionError("persona '" + id + "' has no traits");
    }

    friend bool operator==(const PersonaProfile&, const PersonaProfile&) = default;
};

struct AgentRoster {
    std::string id;
    std::vector<PersonaProfile> personas;

    void validate(bool group_mode = true) const {
        std::set<std::string> seen;
        for (const auto& p : personas) {
            p.validate();
            if (!seen.insert(p.id).second)
                throw PreconditionError("duplicate persona id in roster: " + p.id);
        }
        if (group_mode && personas.size() < 2)
            throw PreconditionError("group mode needs at least 2 personas, roster '" + id +
                                    "' has " + std::to_string(personas.size()));
    }

    const PersonaProfile* find(std::string_view persona_id) const {
        auto it = std::find_if(personas.begin(), personas.end(),
                               [&](const PersonaProfile& p) { return p.id == persona_id; });
        return it == personas.end() ? nullptr : &*it;
    }

    std::optional<std::size_t> index_of(std::string_view persona_id) const {
        for (std::size_t i = 0; i < personas.size(); ++i)
            if (personas[i].id == persona_id) return i;
        return std::nullopt;
    }

    std::size_t size() const noexcept { return personas.size(); }

    friend bool operator==(const AgentRoster&, const AgentRoster&) = default;
};

struct ConversationContext {
    std::string id;
    std::string scenario_text;
    Valence valence = Valence::not_applicable;
    ContextSource source = ContextSource::synthetic;
    std::string label; // emotion label (ED) or topic tag (QMSum); may be empty

    void validate() const {
        if (scenario_text.empty())
            throw PreconditionError("context '" + id + "' has empty scenario_text");
    }

    friend bool operator==(const ConversationContext&, const ConversationContext&) = default;
};

struct Directive {
    std::string speaker_id;
    std::string instruction;
    int turn_index = 1;
    bool fallback = false; // true when the director output was unusable

    void validate(const AgentRoster& roster) const {
        if (!roster.find(speaker_id))
            throw PreconditionError("directive names unknown speaker: " + speaker_id);
        if (instruction.empty()) throw PreconditionError("directive instruction is empty");
        if (turn_index < 1) throw PreconditionError("directive turn_index must be >= 1");
    }

    friend bool operator==(const Directive&, const Directive&) = default;
};

struct Turn {
    int index = 1;
    std::string speaker_id;
    std::optional<Directive> directive;
    std::optional<std::string> reasoning;
    std::string text;
    int token_count_reasoning = 0;
    int token_count_text = 0;

    bool is_user() const noexcept { return speaker_id == kUserSpeaker; }
    bool is_agent() const noexcept { return !is_user(); }

    friend bool operator==(const Turn&, const Turn&) = default;
};

struct Trajectory {
    ConversationContext context;
    std::vector<Turn> turns;
    Mode mode = Mode::mascot;

    void validate() const {
        context.validate();
        for (std::size_t i = 0; i < turns.size(); ++i) {
            if (turns[i].index != static_cast<int>(i) + 1)
                throw PreconditionError("trajectory turn indices must be contiguous from 1; "
                                        "position " + std::to_string(i) + " has index " +
                                        std::to_string(turns[i].index));
            if (turns[i].text.empty())
                throw PreconditionError("turn " + std::to_string(turns[i].index) +
                                        " has empty text");
        }
    }

    int next_index() const noexcept { return static_cast<int>(turns.size()) + 1; }

    // Appends and stamps the next contiguous index.
    const Turn& append(Turn turn) {
        turn.index = next_index();
        if (turn.directive) turn.directive->turn_index = turn.index;
        turns.push_back(std::move(turn));
        return turns.back();
    }

    friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

// Validating factory; construction with non-contiguous indices is rejected.
inline Trajectory make_trajectory(ConversationContext context, std::vector<Turn> turns,
                                  Mode mode) {
    Trajectory t{std::move(context), std::move(turns), mode};
    t.validate();
    return t;
}

} // namespace mascot
