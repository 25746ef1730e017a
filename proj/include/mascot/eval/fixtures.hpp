#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "mascot/core/json.hpp"
#include "mascot/util/text.hpp"

namespace mascot::eval {

enum class FixtureKind { ed, qmsum };

inline FixtureKind parse_fixture_kind(std::string_view s) {
    if (s == "ed") return FixtureKind::ed;
    if (s == "qmsum") return FixtureKind::qmsum;
    throw ConfigError("fixture kind must be 'ed' or 'qmsum', got '" + std::string(s) + "'");
}

// The 32 Empathetic Dialogues emotion labels grouped by valence.
inline constexpr std::array<std::pair<std::string_view, Valence>, 32> kEmotionValence{{
    {"grateful", Valence::positive},     {"proud", Valence::positive},
    {"excited", Valence::positive},      {"hopeful", Valence::positive},
    {"joyful", Valence::positive},       {"impressed", Valence::positive},
    {"caring", Valence::positive},       {"content", Valence::positive},
    {"confident", Valence::positive},    {"trusting", Valence::positive},
    {"faithful", Valence::positive},     {"angry", Valence::negative},
    {"annoyed", Valence::negative},      {"furious", Valence::negative},
    {"disgusted", Valence::negative},    {"sad", Valence::negative},
    {"lonely", Valence::negative},       {"devastated", Valence::negative},
    {"disappointed", Valence::negative}, {"jealous", Valence::negative},
    {"embarrassed", Valence::negative},  {"ashamed", Valence::negative},
    {"guilty", Valence::negative},       {"afraid", Valence::negative},
    {"terrified", Valence::negative},    {"anxious", Valence::negative},
    {"apprehensive", Valence::negative}, {"surprised", Valence::neutral},
    {"sentimental", Valence::neutral},   {"nostalgic", Valence::neutral},
    {"prepared", Valence::neutral},      {"anticipating", Valence::neutral},
}};

inline constexpr std::array<std::string_view, 3> kQmsumTopics{"academic", "committee", "product"};

inline Valence emotion_valence(std::string_view label) {
    const auto key = util::to_lower(util::trim(label));
    for (const auto& [name, v] : kEmotionValence)
        if (name == key) return v;
    throw LoadError("unknown emotion label '" + std::string(label) + "'");
}

// JSONL, one object per line: {id, scenario_text, emotion_label} for ED or
// {id, scenario_text, topic} for QMSum. Blank lines are skipped.
inline std::vector<ConversationContext> load_fixtures(const std::filesystem::path& path, FixtureKind kind) {
    if (!std::filesystem::exists(path)) throw LoadError("fixture file not found: " + path.string());
    const auto body = util::read_file(path.string());
    std::vector<ConversationContext> out;
    std::size_t pos = 0;
    int line_no = 0;
    while (pos < body.size()) {
        auto nl = body.find('\n', pos);
        const auto line = util::trim(std::string_view(body).substr(pos, nl == std::string::npos ? std::string::npos : nl - pos));
        pos = nl == std::string::npos ? body.size() : nl + 1;
        ++line_no;
        if (line.empty()) continue;
        const auto where = path.string() + ":" + std::to_string(line_no);
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw LoadError(where + ": " + e.what());
        }
        auto str = [&](const char* key) {
            if (!j.contains(key) || !j[key].is_string() || j[key].get<std::string>().empty())
                throw LoadError(where + ": missing or empty string field '" + key + "'");
            return j[key].get<std::string>();
        };
        ConversationContext c;
        c.id = str("id");
        c.scenario_text = str("scenario_text");
        if (kind == FixtureKind::ed) {
            c.source = ContextSource::ed_fixture;
            c.label = str("emotion_label");
            try {
                c.valence = emotion_valence(c.label);
            } catch (const LoadError& e) {
                throw LoadError(where + ": " + e.what());
            }
        } else {
            c.source = ContextSource::qmsum_fixture;
            c.valence = Valence::not_applicable;
            c.label = str("topic");
            if (std::find(kQmsumTopics.begin(), kQmsumTopics.end(), c.label) == kQmsumTopics.end())
                throw LoadError(where + ": unknown topic '" + c.label + "'");
        }
        out.push_back(std::move(c));
    }
    return out;
}

} // namespace mascot::eval
