#pragma once

#include <set>
#include <string>
#include <vector>

#include "mascot/error.hpp"

namespace mascot::eval {

enum class CriteriaLevel { agent_specific, collective };

struct Criterion {
    std::string id;
    std::string name;
    std::string rubric;
};

struct CriteriaSet {
    std::string id;
    std::vector<Criterion> criteria;
    CriteriaLevel level = CriteriaLevel::agent_specific;

    void validate() const {
        if (criteria.empty()) throw PreconditionError("criteria set '" + id + "' is empty");
        std::set<std::string> seen;
        for (const auto& c : criteria) {
            if (!seen.insert(c.id).second)
                throw PreconditionError("duplicate criterion id '" + c.id + "' in set " + id);
            if (c.rubric.empty())
                throw PreconditionError("criterion '" + c.id + "' has empty rubric");
        }
    }

    std::vector<std::string> ids() const {
        std::vector<std::string> out;
        for (const auto& c : criteria) out.push_back(c.id);
        return out;
    }

    std::string describe() const {
        std::string out;
        for (const auto& c : criteria) out += "- " + c.id + " (" + c.name + "): " + c.rubric + "\n";
        return out;
    }
};

inline constexpr const char* kRelevanceCoherence = "relevance_coherence";

// Per-response rubric used for preference scoring and per-turn evaluation.
inline CriteriaSet agent_specific_criteria() {
    return {"agent_specific.v1",
            {{"emotional_expressiveness", "Emotional Expressiveness",
              "Is the intensity of emotion in the reply right for this persona and for what the "
              "user just shared?"},
             {"empathetic_support_quality", "Empathetic Support Quality",
              "Does the reply react to the user's feelings, read them correctly, and explore them "
              "with questions tied to the situation?"},
             {"consistency", "Consistency",
              "Does the reply keep the persona's tone, vocabulary, values and behaviour?"},
             {"response_relevance", "Response Relevance",
              "Is the reply logically grounded in the scenario and the preceding turns?"},
             {"social_contribution", "Social Contribution",
              "Does the reply move the conversation forward with perspective, reassurance or "
              "guidance instead of a generic acknowledgement?"}},
            CriteriaLevel::agent_specific};
}

// Whole-conversation rubric for group-level evaluation.
inline CriteriaSet collective_criteria() {
    return {"collective.v1",
            {{"engagement_contribution", "Engagement & Contribution",
              "Do the agents actively push the discussion on with new viewpoints, synthesis or "
              "consensus building?"},
             {"originality_specificity", "Originality & Specificity",
              "Are contributions specific to the conversation and not repeating what other agents "
              "already said?"},
             {"fidelity", "Fidelity",
              "Does each agent keep its assigned role, style and expertise rather than sounding "
              "like a generic assistant?"},
             {kRelevanceCoherence, "Relevance & Coherence",
              "Do turns follow logically from each other and from the conversation goal, with "
              "natural transitions?"}},
            CriteriaLevel::collective};
}

// Single-criterion set used for the coherence term of the group reward.
inline CriteriaSet coherence_criteria() {
    auto all = collective_criteria();
    CriteriaSet out{"coherence.v1", {}, CriteriaLevel::collective};
    for (const auto& c : all.criteria)
        if (c.id == kRelevanceCoherence) out.criteria.push_back(c);
    return out;
}

inline CriteriaSet criteria_set_by_id(const std::string& id) {
    for (auto set : {agent_specific_criteria(), collective_criteria(), coherence_criteria()})
        if (set.id == id) return set;
    throw ConfigError("unknown criteria set id: " + id);
}

} // namespace mascot::eval
