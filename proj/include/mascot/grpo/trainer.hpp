#pragma once

#include <cmath>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mascot/grpo/objective.hpp"
#include "mascot/util/text.hpp"

namespace mascot::grpo {

using RewardFn = std::function<double(const Tokens&)>;

struct IterationStats {
    int iteration = 0;
    double mean_reward = 0.0;
    double clip_fraction = 0.0;
    double mean_kl = 0.0;

    friend bool operator==(const IterationStats&, const IterationStats&) = default;
};

struct ToyTrainResult {
    ToyPolicy policy;
    std::vector<IterationStats> curve;
};

// Thrown when an update goes non-finite; carries the last finite policy.
class ToyDivergence : public DivergenceError {
public:
    ToyDivergence(const std::string& what, ToyPolicy last_good, int iteration)
        : DivergenceError(what), last_good(std::move(last_good)), iteration(iteration) {}
    ToyPolicy last_good;
    int iteration;
};

inline GroupRollout sample_group(const ToyPolicy& old_policy, const RewardFn& reward, int G, std::mt19937_64& rng,
                                 const std::string& prompt = {}) {
    GroupRollout r{prompt, {}};
    for (int g = 0; g < G; ++g) {
        RolloutSequence s;
        s.tokens = old_policy.sample_with(rng, old_policy.length());
        s.logp_old = old_policy.token_logprobs(prompt, s.tokens);
        s.reward = reward(s.tokens);
        r.group.push_back(std::move(s));
    }
    return r;
}

// Seeded loop: snapshot pi_old, sample groups, reward, one ascent step. The
// reference policy defaults to the initial policy.
inline ToyTrainResult train_toy(ToyPolicy init, const RewardFn& reward, const GrpoConfig& cfg,
                                const ToyPolicy* reference = nullptr) {
    cfg.validate();
    const ToyPolicy ref = reference ? *reference : init;
    if (ref.vocab() != init.vocab() || ref.length() != init.length())
        throw ConfigError("reference policy shape differs from the trained policy");
    ToyTrainResult res{std::move(init), {}};
    std::mt19937_64 rng(util::splitmix64(cfg.seed));
    for (int it = 0; it < cfg.iterations; ++it) {
        const ToyPolicy old_policy = res.policy;
        std::vector<GroupRollout> groups;
        double reward_sum = 0;
        for (int k = 0; k < cfg.groups_per_iteration; ++k) {
            groups.push_back(sample_group(old_policy, reward, cfg.G, rng));
            for (const auto& s : groups.back().group) reward_sum += s.reward;
        }
        StepReport step;
        try {
            step = grpo_step(res.policy, groups, ref, cfg);
        } catch (const DivergenceError& e) {
            throw ToyDivergence(std::string(e.what()) + " at iteration " + std::to_string(it), old_policy, it);
        }
        res.curve.push_back({it, reward_sum / (cfg.G * cfg.groups_per_iteration), step.clip_fraction, step.mean_kl});
    }
    return res;
}

// Monte Carlo mean reward of a policy under a fixed seed.
inline double estimate_mean_reward(const ToyPolicy& policy, const RewardFn& reward, int samples, std::uint64_t seed) {
    require(samples > 0, "estimate_mean_reward: samples must be > 0");
    std::mt19937_64 rng(seed);
    double sum = 0;
    for (int i = 0; i < samples; ++i) sum += reward(policy.sample_with(rng, policy.length()));
    return sum / samples;
}

inline std::string curve_csv(const std::vector<IterationStats>& curve) {
    std::ostringstream out;
    out.precision(17);
    out << "iteration,mean_reward,clip_fraction,mean_kl\n";
    for (const auto& s : curve) out << s.iteration << ',' << s.mean_reward << ',' << s.clip_fraction << ',' << s.mean_kl << '\n';
    return out.str();
}

// Persona-token task: reward is the fraction of tokens drawn from a marker
// subset, plus a bonus when the sequence has at least `min_markers` markers and
// at most `max_tail` tokens after the last one (a toy stand-in for the
// long-reasoning/short-answer format rule).
struct PersonaTokenTask {
    int vocab = 16;
    int length = 12;
    int markers = 4; // tokens [0, markers) are persona markers
    int min_markers = 6;
    int max_tail = 3;
    double bonus = 1.0;

    void validate() const {
        if (vocab < 2 || length < 1) throw ConfigError("task vocab must be >= 2 and length >= 1");
        if (markers < 1 || markers >= vocab) throw ConfigError("task markers must be in [1, vocab)");
        if (min_markers < 0 || max_tail < 0 || bonus < 0) throw ConfigError("task thresholds must be >= 0");
    }

    bool is_marker(int tok) const noexcept { return tok >= 0 && tok < markers; }

    double reward(const Tokens& seq) const {
        if (seq.empty()) return 0.0;
        int count = 0, tail = 0;
        for (int t : seq) {
            if (is_marker(t)) {
                ++count;
                tail = 0;
            } else {
                ++tail;
            }
        }
        const bool fmt = count >= min_markers && tail <= max_tail;
        return static_cast<double>(count) / seq.size() + (fmt ? bonus : 0.0);
    }

    RewardFn reward_fn() const {
        return [task = *this](const Tokens& s) { return task.reward(s); };
    }

    // Exact expected reward under the uniform policy, by dynamic programming
    // over (marker count, tokens since last marker).
    double random_baseline() const {
        validate();
        const double p = static_cast<double>(markers) / vocab;
        // dp[c][tail]
        std::vector<std::vector<double>> dp(length + 1, std::vector<double>(length + 1, 0.0));
        dp[0][0] = 1.0;
        for (int pos = 0; pos < length; ++pos) {
            std::vector<std::vector<double>> next(length + 1, std::vector<double>(length + 1, 0.0));
            for (int c = 0; c <= pos; ++c)
                for (int t = 0; t <= pos; ++t) {
                    if (dp[c][t] == 0) continue;
                    next[c + 1][0] += dp[c][t] * p;
                    next[c][t + 1] += dp[c][t] * (1 - p);
                }
            dp = std::move(next);
        }
        double p_bonus = 0;
        for (int c = min_markers; c <= length; ++c)
            for (int t = 0; t <= max_tail; ++t) p_bonus += dp[c][t];
        return p + bonus * p_bonus;
    }
};

} // namespace mascot::grpo
