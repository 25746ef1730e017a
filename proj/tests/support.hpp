#pragma once

#include <filesystem>
#include <map>
#include <random>
#include <string>

#include "mascot/core/persona_io.hpp"
#include "mascot/core/prompt.hpp"

namespace mascot::test {

inline std::filesystem::path data_dir() { return MASCOT_DATA_DIR; }
inline std::filesystem::path fixtures_dir() { return MASCOT_TEST_FIXTURES; }

inline const std::map<std::string, PersonaProfile>& personas() {
    static const auto lib = load_persona_library(data_dir() / "personas");
    return lib;
}

inline AgentRoster roster(const std::string& id) {
    return load_roster(data_dir() / "rosters" / (id + ".json"), personas());
}

inline std::shared_ptr<const TemplateRegistry> templates() {
    static const auto reg =
        std::make_shared<const TemplateRegistry>(TemplateRegistry::from_directory(data_dir() / "templates"));
    return reg;
}

inline ConversationContext context(std::string id, std::string text,
                                   Valence valence = Valence::not_applicable) {
    return {std::move(id), std::move(text), valence, ContextSource::synthetic, ""};
}

// Random printable string, including whitespace and JSON-hostile characters.
inline std::string random_text(std::mt19937_64& rng, int max_len = 40) {
    static const std::string alphabet =
        "abcdefghijklmnopqrstuvwxyz ABCXYZ0123456789 \n\t\"\\{}[]<>:,.-_/";
    std::uniform_int_distribution<int> len(1, max_len);
    std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
    std::string s;
    for (int i = 0, n = len(rng); i < n; ++i) s += alphabet[pick(rng)];
    return s;
}

} // namespace mascot::test
