#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "mascot/core/types.hpp"
#include "mascot/error.hpp"
#include "mascot/util/text.hpp"

namespace mascot {

using TemplateVars = std::map<std::string, std::string, std::less<>>;

struct RenderOptions {
    // Keep only the last `history_window` turns; full history when unset.
    std::optional<std::size_t> history_window;
};

// Plain-text templates with `{{name}}` placeholders, keyed by template id
// (the file stem, e.g. `speaker.v1.txt` -> "speaker.v1").
class TemplateRegistry {
public:
    TemplateRegistry() = default;

    static TemplateRegistry from_directory(const std::filesystem::path& dir) {
        TemplateRegistry reg;
        if (!std::filesystem::is_directory(dir))
            throw ConfigError("template directory not found: " + dir.string());
        for (const auto& entry : std::filesystem::directory_iterator(dir)) {
            if (entry.path().extension() != ".txt") continue;
            reg.add(entry.path().stem().string(), util::read_file(entry.path().string()));
        }
        return reg;
    }

    void add(std::string id, std::string body) { templates_[std::move(id)] = std::move(body); }

    bool contains(std::string_view id) const { return templates_.find(id) != templates_.end(); }

    const std::string& get(std::string_view id) const {
        auto it = templates_.find(id);
        if (it == templates_.end())
            throw ConfigError("unknown template id: " + std::string(id));
        return it->second;
    }

    // Substitutes every `{{name}}`; a placeholder without a value is a
    // configuration error so template typos never reach a backend.
    std::string render(std::string_view id, const TemplateVars& vars) const {
        const std::string& body = get(id);
        std::string out;
        out.reserve(body.size() + 256);
        std::size_t pos = 0;
        while (pos < body.size()) {
            auto open = body.find("{{", pos);
            if (open == std::string::npos) {
                out.append(body, pos, std::string::npos);
                break;
            }
            auto close = body.find("}}", open + 2);
            if (close == std::string::npos)
                throw ConfigError("unterminated placeholder in template " + std::string(id));
            out.append(body, pos, open - pos);
            auto name = util::trim(std::string_view(body).substr(open + 2, close - open - 2));
            auto it = vars.find(name);
            if (it == vars.end())
                throw ConfigError("template " + std::string(id) + " references unbound placeholder '" +
                                  std::string(name) + "'");
            out += it->second;
            pos = close + 2;
        }
        return out;
    }

private:
    std::map<std::string, std::string, std::less<>> templates_;
};

inline std::string format_history(const std::vector<Turn>& turns, const RenderOptions& opts = {}) {
    std::size_t start = 0;
    if (opts.history_window && *opts.history_window < turns.size())
        start = turns.size() - *opts.history_window;
    std::string out;
    for (std::size_t i = start; i < turns.size(); ++i) {
        const auto& t = turns[i];
        out += "[" + std::to_string(t.index) + "] " + t.speaker_id + ": " + t.text + "\n";
    }
    if (out.empty()) out = "(no prior turns)\n";
    return out;
}

inline std::string format_roster(const AgentRoster& roster) {
    std::string out;
    for (const auto& p : roster.personas)
        out += "- " + p.id + " (" + p.name + "): " + p.description + " Traits: " +
               util::join(p.traits, ", ") + "\n";
    return out;
}

inline TemplateVars persona_vars(const PersonaProfile& persona) {
    return {{"persona_id", persona.id},
            {"persona_name", persona.name},
            {"persona_description", persona.description},
            {"persona_traits", util::join(persona.traits, ", ")}};
}

// Speaker prompt for one turn: persona, scenario, history and (optionally) the
// director's instruction. Pure function of its inputs.
inline std::string render_prompt(const TemplateRegistry& registry, const Trajectory& history,
                                 const PersonaProfile& persona,
                                 const std::optional<Directive>& directive,
                                 std::string_view template_id, const RenderOptions& opts = {},
                                 TemplateVars extra = {}) {
    TemplateVars vars = persona_vars(persona);
    vars["scenario"] = history.context.scenario_text;
    vars["history"] = format_history(history.turns, opts);
    vars["directive"] = directive ? "Director instruction: " + directive->instruction + "\n" : "";
    for (auto& [k, v] : extra) vars[k] = std::move(v);
    return registry.render(template_id, vars);
}

} // namespace mascot
