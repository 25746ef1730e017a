#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mascot/core/json.hpp"
#include "mascot/util/text.hpp"

namespace mascot {

inline PersonaProfile load_persona(const std::filesystem::path& file) {
    try {
        return json::parse(util::read_file(file.string())).get<PersonaProfile>();
    } catch (const json::parse_error& e) {
        throw LoadError(file.string() + ": " + e.what());
    } catch (const LoadError& e) {
        throw LoadError(file.string() + ": " + e.what());
    }
}

// Loads every `*.json` persona file in `dir`, keyed by persona id.
inline std::map<std::string, PersonaProfile> load_persona_library(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir))
        throw ConfigError("persona directory not found: " + dir.string());
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir))
        if (e.path().extension() == ".json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::map<std::string, PersonaProfile> out;
    for (const auto& f : files) {
        auto p = load_persona(f);
        if (!out.emplace(p.id, p).second)
            throw LoadError("duplicate persona id '" + p.id + "' in " + f.string());
    }
    return out;
}

// Roster file: {"id": "...", "personas": ["anchor", "catalyst", ...]}
// referencing persona ids from the library.
inline AgentRoster load_roster(const std::filesystem::path& file,
                               const std::map<std::string, PersonaProfile>& library) {
    json j;
    try {
        j = json::parse(util::read_file(file.string()));
    } catch (const json::parse_error& e) {
        throw LoadError(file.string() + ": " + e.what());
    }
    AgentRoster roster;
    roster.id = detail::field<std::string>(j, "id");
    for (const auto& pid : detail::field<std::vector<std::string>>(j, "personas")) {
        auto it = library.find(pid);
        if (it == library.end())
            throw LoadError(file.string() + ": roster references unknown persona '" + pid + "'");
        roster.personas.push_back(it->second);
    }
    roster.validate(false);
    return roster;
}

inline std::map<std::string, AgentRoster> load_rosters(const std::filesystem::path& dir,
                                                       const std::map<std::string, PersonaProfile>& library) {
    std::map<std::string, AgentRoster> out;
    if (!std::filesystem::is_directory(dir))
        throw ConfigError("roster directory not found: " + dir.string());
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir))
        if (e.path().extension() == ".json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
        auto r = load_roster(f, library);
        out.emplace(r.id, std::move(r));
    }
    return out;
}

} // namespace mascot
