#pragma once

#include <array>
#include <string>
#include <string_view>
#include <utility>

#include <json.hpp>

#include "mascot/core/types.hpp"
#include "mascot/error.hpp"

namespace mascot {

using json = nlohmann::json;

namespace detail {

template <typename E, std::size_t N>
std::string_view enum_name(E value, const std::array<std::pair<E, std::string_view>, N>& table) {
    for (const auto& [e, name] : table)
        if (e == value) return name;
    return "?";
}

template <typename E, std::size_t N>
E enum_parse(std::string_view text, const std::array<std::pair<E, std::string_view>, N>& table,
             std::string_view what) {
    for (const auto& [e, name] : table)
        if (name == text) return e;
    throw LoadError("unknown " + std::string(what) + ": '" + std::string(text) + "'");
}

inline constexpr std::array<std::pair<PersonaDomain, std::string_view>, 2> kDomainNames{{
    {PersonaDomain::emotional_support, "emotional_support"},
    {PersonaDomain::workplace, "workplace"},
}};
inline constexpr std::array<std::pair<Valence, std::string_view>, 4> kValenceNames{{
    {Valence::positive, "positive"},
    {Valence::negative, "negative"},
    {Valence::neutral, "neutral"},
    {Valence::not_applicable, "n/a"},
}};
inline constexpr std::array<std::pair<ContextSource, std::string_view>, 4> kSourceNames{{
    {ContextSource::ed_fixture, "ed_fixture"},
    {ContextSource::qmsum_fixture, "qmsum_fixture"},
    {ContextSource::live_user, "live_user"},
    {ContextSource::synthetic, "synthetic"},
}};
inline constexpr std::array<std::pair<Mode, std::string_view>, 5> kModeNames{{
    {Mode::mascot, "mascot"},
    {Mode::zero_shot, "zero_shot"},
    {Mode::zero_shot_cot, "zero_shot_cot"},
    {Mode::few_shot, "few_shot"},
    {Mode::few_shot_cot, "few_shot_cot"},
}};

// Field access that names the missing/mistyped field in the error.
template <typename T>
T field(const json& j, std::string_view key) {
    auto it = j.find(key);
    if (it == j.end()) throw LoadError("missing field '" + std::string(key) + "'");
    try {
        return it->get<T>();
    } catch (const json::exception&) {
        throw LoadError("field '" + std::string(key) + "' has wrong type");
    }
}

template <typename T>
T field_or(const json& j, std::string_view key, T fallback) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return fallback;
    try {
        return it->get<T>();
    } catch (const json::exception&) {
        throw LoadError("field '" + std::string(key) + "' has wrong type");
    }
}

} // namespace detail

inline std::string_view to_string(PersonaDomain d) { return detail::enum_name(d, detail::kDomainNames); }
inline std::string_view to_string(Valence v) { return detail::enum_name(v, detail::kValenceNames); }
inline std::string_view to_string(ContextSource s) { return detail::enum_name(s, detail::kSourceNames); }
inline std::string_view to_string(Mode m) { return detail::enum_name(m, detail::kModeNames); }

inline PersonaDomain parse_domain(std::string_view s) { return detail::enum_parse(s, detail::kDomainNames, "persona domain"); }
inline Valence parse_valence(std::string_view s) { return detail::enum_parse(s, detail::kValenceNames, "valence"); }
inline ContextSource parse_source(std::string_view s) { return detail::enum_parse(s, detail::kSourceNames, "context source"); }
inline Mode parse_mode(std::string_view s) { return detail::enum_parse(s, detail::kModeNames, "mode"); }

inline void to_json(json& j, const PersonaProfile& p) {
    j = json{{"id", p.id},
             {"name", p.name},
             {"description", p.description},
             {"traits", p.traits},
             {"domain", to_string(p.domain)}};
}

inline void from_json(const json& j, PersonaProfile& p) {
    using detail::field;
    p.id = field<std::string>(j, "id");
    p.name = field<std::string>(j, "name");
    p.description = field<std::string>(j, "description");
    p.traits = field<std::vector<std::string>>(j, "traits");
    p.domain = parse_domain(field<std::string>(j, "domain"));
    try {
        p.validate();
    } catch (const PreconditionError& e) {
        throw LoadError(e.what());
    }
}

inline void to_json(json& j, const AgentRoster& r) {
    j = json{{"id", r.id}, {"personas", r.personas}};
}

inline void from_json(const json& j, AgentRoster& r) {
    r.id = detail::field<std::string>(j, "id");
    r.personas = detail::field<std::vector<PersonaProfile>>(j, "personas");
}

inline void to_json(json& j, const ConversationContext& c) {
    j = json{{"id", c.id},
             {"scenario_text", c.scenario_text},
             {"valence", to_string(c.valence)},
             {"source", to_string(c.source)},
             {"label", c.label}};
}

inline void from_json(const json& j, ConversationContext& c) {
    using detail::field;
    c.id = field<std::string>(j, "id");
    c.scenario_text = field<std::string>(j, "scenario_text");
    c.valence = parse_valence(detail::field_or<std::string>(j, "valence", "n/a"));
    c.source = parse_source(detail::field_or<std::string>(j, "source", "synthetic"));
    c.label = detail::field_or<std::string>(j, "label", "");
    if (c.scenario_text.empty()) throw LoadError("context '" + c.id + "' has empty scenario_text");
}

inline void to_json(json& j, const Directive& d) {
    j = json{{"speaker_id", d.speaker_id},
             {"instruction", d.instruction},
             {"turn_index", d.turn_index},
             {"fallback", d.fallback}};
}

inline void from_json(const json& j, Directive& d) {
    d.speaker_id = detail::field<std::string>(j, "speaker_id");
    d.instruction = detail::field<std::string>(j, "instruction");
    d.turn_index = detail::field<int>(j, "turn_index");
    d.fallback = detail::field_or<bool>(j, "fallback", false);
}

inline void to_json(json& j, const Turn& t) {
    j = json{{"index", t.index},
             {"speaker_id", t.speaker_id},
             {"directive", t.directive ? json(*t.directive) : json(nullptr)},
             {"reasoning", t.reasoning ? json(*t.reasoning) : json(nullptr)},
             {"text", t.text},
             {"token_count_reasoning", t.token_count_reasoning},
             {"token_count_text", t.token_count_text}};
}

inline void from_json(const json& j, Turn& t) {
    using detail::field;
    t.index = field<int>(j, "index");
    t.speaker_id = field<std::string>(j, "speaker_id");
    t.directive.reset();
    if (auto it = j.find("directive"); it != j.end() && !it->is_null())
        t.directive = it->get<Directive>();
    t.reasoning.reset();
    if (auto it = j.find("reasoning"); it != j.end() && !it->is_null())
        t.reasoning = it->get<std::string>();
    t.text = field<std::string>(j, "text");
    t.token_count_reasoning = field<int>(j, "token_count_reasoning");
    t.token_count_text = field<int>(j, "token_count_text");
}

inline void to_json(json& j, const Trajectory& t) {
    j = json{{"context", t.context}, {"turns", t.turns}, {"mode", to_string(t.mode)}};
}

inline void from_json(const json& j, Trajectory& t) {
    t.context = detail::field<ConversationContext>(j, "context");
    t.turns = detail::field<std::vector<Turn>>(j, "turns");
    t.mode = parse_mode(detail::field<std::string>(j, "mode"));
    try {
        t.validate();
    } catch (const PreconditionError& e) {
        throw LoadError(e.what());
    }
}

} // namespace mascot
