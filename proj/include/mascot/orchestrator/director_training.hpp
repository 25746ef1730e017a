#pragma once

#include <map>
#include <string>
#include <vector>

#include "mascot/grpo/trainer.hpp"
#include "mascot/orchestrator/group_reward.hpp"

namespace mascot::orch {

// Toy director: a tabular policy over speaker choices, conditioned on the
// position in the block and the previous speaker, trained with GRPO on the
// group reward of each N-turn block. Turn texts are fixed placeholders, so the
// learning signal is carried by speaker order alone.
struct DirectorTrainingConfig {
    int N = 3;
    GroupRewardConfig reward;
    grpo::GrpoConfig grpo;
    int eval_blocks = 100;
    std::uint64_t eval_seed = 1;

    void validate() const {
        if (N < 1) throw ConfigError("N must be >= 1");
        if (eval_blocks < 1) throw ConfigError("eval_blocks must be >= 1");
        reward.validate();
        grpo.validate();
    }
};

struct DirectorTrainingReport {
    grpo::ToyPolicy policy;
    std::vector<grpo::IterationStats> curve;
    double diversity_rate = 0.0;        // over eval_blocks sampled blocks
    double random_diversity_rate = 0.0; // exact, by enumeration
};

inline std::vector<Turn> placeholder_block(const grpo::Tokens& choice, const AgentRoster& roster) {
    std::vector<Turn> block;
    for (std::size_t k = 0; k < choice.size(); ++k) {
        Turn t;
        t.index = static_cast<int>(k) + 1;
        t.speaker_id = roster.personas.at(static_cast<std::size_t>(choice[k])).id;
        t.text = "(" + t.speaker_id + " speaks)";
        block.push_back(std::move(t));
    }
    return block;
}

// Fraction of all |roster|^N speaker sequences with diversity 1.
inline double enumerate_random_diversity(std::size_t roster_size, int N) {
    require(roster_size >= 1 && N >= 1, "enumerate_random_diversity: empty space");
    std::vector<std::size_t> seq(static_cast<std::size_t>(N), 0);
    std::size_t total = 0, diverse = 0;
    while (true) {
        std::vector<std::string> speakers;
        for (auto s : seq) speakers.push_back(std::to_string(s));
        ++total;
        diverse += static_cast<std::size_t>(diversity_indicator(speakers, roster_size));
        std::size_t k = 0;
        while (k < seq.size() && ++seq[k] == roster_size) seq[k++] = 0;
        if (k == seq.size()) break;
    }
    return static_cast<double>(diverse) / static_cast<double>(total);
}

inline DirectorTrainingReport train_director(const ConversationContext& context, const AgentRoster& roster,
                                             backend::JudgeModel& coherence_judge, const TemplateRegistry* templates,
                                             const DirectorTrainingConfig& cfg) {
    cfg.validate();
    roster.validate(true);
    // The judge is deterministic (temperature 0 / mock), so each sequence is scored once.
    std::map<grpo::Tokens, double> cache;
    grpo::RewardFn reward = [&](const grpo::Tokens& choice) {
        auto it = cache.find(choice);
        if (it != cache.end()) return it->second;
        const double r =
            group_reward(context, placeholder_block(choice, roster), roster, coherence_judge, templates, cfg.reward).total;
        cache.emplace(choice, r);
        return r;
    };
    const int V = static_cast<int>(roster.size());
    auto trained = grpo::train_toy(grpo::ToyPolicy(V, cfg.N), reward, cfg.grpo);

    DirectorTrainingReport rep{std::move(trained.policy), std::move(trained.curve), 0.0,
                               enumerate_random_diversity(roster.size(), cfg.N)};
    std::mt19937_64 rng(cfg.eval_seed);
    int diverse = 0;
    for (int b = 0; b < cfg.eval_blocks; ++b)
        diverse += diversity_indicator(placeholder_block(rep.policy.sample_with(rng, cfg.N), roster), roster.size());
    rep.diversity_rate = static_cast<double>(diverse) / cfg.eval_blocks;
    return rep;
}

} // namespace mascot::orch
