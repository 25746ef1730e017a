#pragma once

#include <cmath>
#include <string>
#include <string_view>

#include "mascot/core/tokens.hpp"
#include "mascot/core/types.hpp"
#include "mascot/reward/reward_model.hpp"

namespace mascot::reward {

struct CompositeRewardConfig {
    double lambda = 1.0;
    int min_reasoning_tokens = 448;
    int max_answer_tokens = 64;

    void validate() const {
        if (!(lambda >= 0) || !std::isfinite(lambda)) throw ConfigError("lambda must be a finite value >= 0");
        if (min_reasoning_tokens <= 0) throw ConfigError("min_reasoning_tokens must be > 0");
        if (max_answer_tokens <= 0) throw ConfigError("max_answer_tokens must be > 0");
    }
};

// Binary: one well-formed think segment, reasoning strictly longer than the
// minimum and answer strictly shorter than the maximum. Never throws.
inline double format_reward(std::string_view text, const CompositeRewardConfig& cfg) noexcept {
    try {
        const auto split = split_think(text);
        if (!split.well_formed() || !split.reasoning) return 0.0;
        const auto reasoning = static_cast<long long>(count_tokens(*split.reasoning));
        const auto answer = static_cast<long long>(count_tokens(split.answer));
        return reasoning > cfg.min_reasoning_tokens && answer < cfg.max_answer_tokens ? 1.0 : 0.0;
    } catch (...) {
        return 0.0;
    }
}

struct RewardBreakdown {
    double rm = 0.0;
    double format = 0.0;
    double total = 0.0;
};

// R = r(context, persona, answer) + lambda * format. The learned term sees the
// answer only, matching what the preference data stores; format sees the raw
// response with markup.
class CompositeReward {
public:
    CompositeReward(RewardModelParams params, FeatureExtractor& fx, CompositeRewardConfig cfg)
        : params_(std::move(params)), fx_(fx), cfg_(cfg) {
        cfg_.validate();
        params_.validate();
        if (params_.feature_dim != fx_.dimension())
            throw ShapeError("reward model expects " + std::to_string(params_.feature_dim) +
                             " features, extractor yields " + std::to_string(fx_.dimension()));
    }

    RewardBreakdown breakdown(const ConversationContext& context, const PersonaProfile& persona,
                              std::string_view response) {
        RewardBreakdown b;
        const auto answer = split_think(response).answer;
        b.rm = rm_score(params_, fx_.features(context.scenario_text, persona.description, answer));
        b.format = format_reward(response, cfg_);
        b.total = b.rm + cfg_.lambda * b.format;
        return b;
    }

    double operator()(const ConversationContext& context, const PersonaProfile& persona, std::string_view response) {
        return breakdown(context, persona, response).total;
    }

    const CompositeRewardConfig& config() const noexcept { return cfg_; }
    const RewardModelParams& params() const noexcept { return params_; }

private:
    RewardModelParams params_;
    FeatureExtractor& fx_;
    CompositeRewardConfig cfg_;
};

} // namespace mascot::reward
