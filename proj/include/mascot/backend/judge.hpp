#pragma once

#include <optional>
#include <string>

#include <json.hpp>

#include "mascot/backend/interfaces.hpp"
#include "mascot/core/prompt.hpp"
#include "mascot/util/hash.hpp"

namespace mascot::backend {

inline void to_json(nlohmann::json& j, const JudgeVerdict& v) {
    j = nlohmann::json{{"criterion_scores", v.criterion_scores},
                       {"rationale", v.rationale ? nlohmann::json(*v.rationale) : nlohmann::json(nullptr)}};
}

inline constexpr const char* kJudgeTemplate = "judge.v1";
inline constexpr const char* kCollectiveJudgeTemplate = "judge_collective.v1";

// Strips an optional markdown code fence around the JSON body.
inline std::string strip_code_fence(std::string_view raw) {
    auto t = util::trim(raw);
    if (t.substr(0, 3) == "```") {
        auto nl = t.find('\n');
        auto end = t.rfind("```");
        if (nl != std::string_view::npos && end != std::string_view::npos && end > nl)
            t = util::trim(t.substr(nl + 1, end - nl - 1));
    }
    return std::string(t);
}

// Parses and validates a raw judge reply. Throws JudgeFormatError unless every
// requested criterion has an integer score in [1,5].
inline JudgeVerdict parse_verdict(std::string_view raw, const eval::CriteriaSet& criteria) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(strip_code_fence(raw));
    } catch (const nlohmann::json::parse_error&) {
        throw JudgeFormatError("judge reply is not valid JSON");
    }
    if (!j.is_object() || !j.contains("scores") || !j["scores"].is_object())
        throw JudgeFormatError("judge reply lacks a 'scores' object");
    JudgeVerdict v;
    const auto& scores = j["scores"];
    for (const auto& c : criteria.criteria) {
        auto it = scores.find(c.id);
        if (it == scores.end()) throw JudgeFormatError("judge omitted criterion '" + c.id + "'");
        if (!it->is_number_integer())
            throw JudgeFormatError("judge score for '" + c.id + "' is not an integer");
        const auto s = it->get<long long>();
        if (s < 1 || s > 5)
            throw JudgeFormatError("judge score for '" + c.id + "' out of range [1,5]: " +
                                   std::to_string(s));
        v.criterion_scores[c.id] = static_cast<int>(s);
    }
    if (auto it = j.find("rationale"); it != j.end() && it->is_string()) v.rationale = it->get<std::string>();
    return v;
}

struct JudgeInput {
    std::string response;
    ConversationContext context;
    std::optional<PersonaProfile> persona;
    std::string roster_text; // collective judging only
};

inline std::string render_judge_prompt(const TemplateRegistry& registry, const JudgeInput& in,
                                       const eval::CriteriaSet& criteria, const std::string& correction) {
    TemplateVars vars{{"scenario", in.context.scenario_text},
                      {"response", in.response},
                      {"criteria", criteria.describe()},
                      {"correction", correction}};
    if (criteria.level == eval::CriteriaLevel::collective && !in.persona) {
        vars["roster"] = in.roster_text;
        return registry.render(kCollectiveJudgeTemplate, vars);
    }
    if (in.persona)
        for (auto& [k, v] : persona_vars(*in.persona)) vars[k] = v;
    else
        vars.merge(TemplateVars{{"persona_name", "(none)"}, {"persona_description", "(none)"},
                                {"persona_traits", "(none)"}, {"persona_id", "none"}});
    return registry.render(kJudgeTemplate, vars);
}

// Hash of the judge templates, recorded in reports to detect rubric drift.
inline std::string judge_prompt_hash(const TemplateRegistry* registry) {
    if (!registry) return "none";
    std::string all;
    for (const char* id : {kJudgeTemplate, kCollectiveJudgeTemplate})
        if (registry->contains(id)) all += registry->get(id);
    return util::hash_hex(all + eval::agent_specific_criteria().describe() +
                          eval::collective_criteria().describe());
}

// One judging call with one corrective re-ask. All-or-error: never returns a
// partially populated verdict.
inline JudgeVerdict judge(JudgeModel& model, const TemplateRegistry* registry, const JudgeInput& in,
                          const eval::CriteriaSet& criteria) {
    require(!criteria.criteria.empty(), "judge: criteria set must be non-empty");
    JudgeRequest req;
    req.response = in.response;
    req.scenario = in.context.scenario_text;
    req.persona = in.persona;
    req.criteria = criteria;
    std::string last_error;
    for (int attempt = 0; attempt < 2; ++attempt) {
        req.attempt = attempt;
        req.correction = attempt == 0 ? ""
                                      : "Your previous reply was rejected (" + last_error +
                                            "). Reply again with the JSON object only.";
        req.prompt = registry ? render_judge_prompt(*registry, in, criteria, req.correction) : "";
        try {
            return parse_verdict(model.complete(req), criteria);
        } catch (const JudgeFormatError& e) {
            last_error = e.what();
        }
    }
    throw JudgeFormatError("judge " + model.identity() + " failed after re-ask: " + last_error);
}

} // namespace mascot::backend
