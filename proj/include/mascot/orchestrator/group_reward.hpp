#pragma once

#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "mascot/backend/judge.hpp"
#include "mascot/core/prompt.hpp"

namespace mascot::orch {

// 1 iff no persona speaks twice in a row and at least min(N, roster_size)
// distinct personas speak.
inline int diversity_indicator(const std::vector<std::string>& speakers, std::size_t roster_size) {
    require(!speakers.empty(), "diversity_indicator: empty block");
    for (std::size_t i = 1; i < speakers.size(); ++i)
        if (speakers[i] == speakers[i - 1]) return 0;
    const std::set<std::string> distinct(speakers.begin(), speakers.end());
    return distinct.size() >= std::min(speakers.size(), roster_size) ? 1 : 0;
}

inline int diversity_indicator(const std::vector<Turn>& block, std::size_t roster_size) {
    std::vector<std::string> speakers;
    for (const auto& t : block) {
        require(t.is_agent(), "diversity_indicator: block must hold agent turns only");
        speakers.push_back(t.speaker_id);
    }
    return diversity_indicator(speakers, roster_size);
}

struct GroupRewardConfig {
    double eta = 1.0;

    void validate() const {
        if (!(eta >= 0) || !std::isfinite(eta)) throw ConfigError("eta must be a finite value >= 0");
    }
};

struct GroupRewardBreakdown {
    int coherence_score = 0;  // judge Likert 1..5
    double coherence = 0.0;   // (score - 1) / 4
    int diversity = 0;
    double total = 0.0;

    friend bool operator==(const GroupRewardBreakdown&, const GroupRewardBreakdown&) = default;
};

inline double coherence_from_likert(int score) {
    require(score >= 1 && score <= 5, "coherence score must be in [1,5]");
    return (score - 1) / 4.0;
}

inline GroupRewardBreakdown combine_group_reward(int coherence_score, int diversity, const GroupRewardConfig& cfg) {
    cfg.validate();
    GroupRewardBreakdown b;
    b.coherence_score = coherence_score;
    b.coherence = coherence_from_likert(coherence_score);
    b.diversity = diversity;
    b.total = b.coherence + cfg.eta * diversity;
    return b;
}

// Coherence from the collective relevance/coherence rubric on the block
// transcript, plus eta times the diversity indicator.
inline GroupRewardBreakdown group_reward(const ConversationContext& context, const std::vector<Turn>& block,
                                         const AgentRoster& roster, backend::JudgeModel& judge,
                                         const TemplateRegistry* templates, const GroupRewardConfig& cfg) {
    require(!block.empty(), "group_reward: block must be complete");
    const int diversity = diversity_indicator(block, roster.size());
    const auto criteria = eval::coherence_criteria();
    backend::JudgeInput in{format_history(block), context, std::nullopt, format_roster(roster)};
    const auto verdict = backend::judge(judge, templates, in, criteria);
    return combine_group_reward(verdict.criterion_scores.at(eval::kRelevanceCoherence), diversity, cfg);
}

} // namespace mascot::orch
