#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "mascot/error.hpp"
#include "mascot/grpo/toy_policy.hpp"

namespace mascot::grpo {

struct GrpoConfig {
    int G = 8;
    double epsilon = 0.2;
    double beta = 0.04;
    double learning_rate = 20.0; // per-token weights are 1/(G |y|), so steps are large
    int iterations = 200;
    double std_floor = 1e-8;
    int groups_per_iteration = 4;
    std::uint64_t seed = 0;

    void validate() const {
        if (G < 2) throw ConfigError("G must be >= 2");
        if (!(epsilon > 0 && epsilon < 1)) throw ConfigError("epsilon must be in (0,1)");
        if (!(beta >= 0) || !std::isfinite(beta)) throw ConfigError("beta must be >= 0");
        if (!(learning_rate >= 0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be >= 0");
        if (iterations < 0) throw ConfigError("iterations must be >= 0");
        if (!(std_floor > 0)) throw ConfigError("std_floor must be > 0");
        if (groups_per_iteration < 1) throw ConfigError("groups_per_iteration must be >= 1");
    }
};

// (R_g - mean) / max(population std, floor). An all-equal group gives exact zeros.
inline std::vector<double> compute_advantages(const std::vector<double>& rewards, double std_floor = 1e-8) {
    require(rewards.size() >= 2, "compute_advantages: group size must be >= 2");
    for (double r : rewards) require(std::isfinite(r), "compute_advantages: rewards must be finite");
    const double n = static_cast<double>(rewards.size());
    if (std::all_of(rewards.begin(), rewards.end(), [&](double r) { return r == rewards.front(); }))
        return std::vector<double>(rewards.size(), 0.0);
    const double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / n;
    double var = 0;
    for (double r : rewards) var += (r - mean) * (r - mean);
    const double sd = std::max(std::sqrt(var / n), std_floor);
    std::vector<double> out;
    out.reserve(rewards.size());
    for (double r : rewards) out.push_back((r - mean) / sd);
    return out;
}

inline constexpr double kLogRatioClamp = 30.0;

inline double ratio(double logp_new, double logp_old) {
    return std::exp(std::clamp(logp_new - logp_old, -kLogRatioClamp, kLogRatioClamp));
}

// k3 estimator of KL(pi_theta || pi_ref) at one token; >= 0.
inline double kl_term(double logp_theta, double logp_ref) {
    const double d = logp_ref - logp_theta;
    // r - log r - 1 == expm1(d) - d, which keeps precision for small d.
    return std::expm1(d) - d;
}

struct RolloutSequence {
    Tokens tokens;
    std::vector<double> logp_old;
    double reward = 0.0;
};

struct GroupRollout {
    std::string prompt;
    std::vector<RolloutSequence> group;

    void validate() const {
        if (group.size() < 2) throw IntegrityError("rollout group must hold >= 2 sequences");
        for (std::size_t g = 0; g < group.size(); ++g) {
            const auto& s = group[g];
            if (s.tokens.empty()) throw IntegrityError("sequence " + std::to_string(g) + " is empty");
            if (s.logp_old.size() != s.tokens.size())
                throw IntegrityError("sequence " + std::to_string(g) + ": " + std::to_string(s.logp_old.size()) +
                                     " stored log-probs for " + std::to_string(s.tokens.size()) + " tokens");
            if (!std::isfinite(s.reward)) throw IntegrityError("sequence " + std::to_string(g) + ": non-finite reward");
            for (double lp : s.logp_old)
                if (!std::isfinite(lp)) throw IntegrityError("sequence " + std::to_string(g) + ": non-finite log-prob");
        }
    }
};

struct TokenDiagnostics {
    double ratio = 1.0;
    bool clipped = false; // clipped branch strictly binds, so no gradient flows
    double kl = 0.0;
};

struct ObjectiveReport {
    double value = 0.0;
    double clip_fraction = 0.0;
    double mean_kl = 0.0;
    std::vector<std::vector<TokenDiagnostics>> tokens; // [g][t]
};

namespace detail {

inline void check_objective_config(const GrpoConfig& cfg) {
    if (!(cfg.epsilon > 0)) throw ConfigError("epsilon must be > 0");
    if (!(cfg.beta >= 0)) throw ConfigError("beta must be >= 0");
}

inline std::vector<double> recompute(const PolicyHandle& pi, const std::string& prompt, const RolloutSequence& s,
                                     const char* which, std::size_t g) {
    auto lp = pi.token_logprobs(prompt, s.tokens);
    if (lp.size() != s.tokens.size())
        throw IntegrityError(std::string(which) + " returned " + std::to_string(lp.size()) + " log-probs for sequence " +
                             std::to_string(g) + " of length " + std::to_string(s.tokens.size()));
    return lp;
}

// Per-token term and its derivative with respect to log pi_theta.
struct TokenTerm {
    double value;
    double dvalue_dlogp;
    TokenDiagnostics diag;
};

inline TokenTerm token_term(double lp_theta, double lp_old, double lp_ref, double adv, const GrpoConfig& cfg) {
    const double delta = lp_theta - lp_old;
    const double g = ratio(lp_theta, lp_old);
    const double gc = std::clamp(g, 1.0 - cfg.epsilon, 1.0 + cfg.epsilon);
    const double unclipped = g * adv, clipped = gc * adv;
    const bool clip_binds = clipped < unclipped;
    const double kl = kl_term(lp_theta, lp_ref);
    TokenTerm t;
    t.value = std::min(unclipped, clipped) - cfg.beta * kl;
    const bool ratio_saturated = std::abs(delta) > kLogRatioClamp;
    const double dsur = clip_binds || ratio_saturated ? 0.0 : g * adv;
    // d k3 / d logp_theta = 1 - r with r = pi_ref / pi_theta.
    const double dkl = -std::expm1(lp_ref - lp_theta);
    t.dvalue_dlogp = dsur - cfg.beta * dkl;
    t.diag = {g, clip_binds, kl};
    return t;
}

} // namespace detail

// (1/G) sum_g (1/|y_g|) sum_t [min(gamma A, clip(gamma) A) - beta k3], to maximize.
inline ObjectiveReport grpo_objective(const GroupRollout& rollout, const PolicyHandle& policy, const PolicyHandle& ref,
                                      const GrpoConfig& cfg) {
    detail::check_objective_config(cfg);
    rollout.validate();
    std::vector<double> rewards;
    for (const auto& s : rollout.group) rewards.push_back(s.reward);
    const auto adv = compute_advantages(rewards, cfg.std_floor);

    ObjectiveReport rep;
    std::size_t n_tokens = 0, n_clipped = 0;
    double kl_sum = 0;
    for (std::size_t g = 0; g < rollout.group.size(); ++g) {
        const auto& s = rollout.group[g];
        const auto lt = detail::recompute(policy, rollout.prompt, s, "policy", g);
        const auto lr = detail::recompute(ref, rollout.prompt, s, "reference", g);
        double seq = 0;
        auto& diags = rep.tokens.emplace_back();
        for (std::size_t t = 0; t < s.tokens.size(); ++t) {
            auto term = detail::token_term(lt[t], s.logp_old[t], lr[t], adv[g], cfg);
            seq += term.value;
            diags.push_back(term.diag);
            n_clipped += term.diag.clipped;
            kl_sum += term.diag.kl;
            ++n_tokens;
        }
        rep.value += seq / static_cast<double>(s.tokens.size());
    }
    rep.value /= static_cast<double>(rollout.group.size());
    rep.clip_fraction = static_cast<double>(n_clipped) / static_cast<double>(n_tokens);
    rep.mean_kl = kl_sum / static_cast<double>(n_tokens);
    return rep;
}

// Analytic gradient of grpo_objective with respect to the toy policy logits.
// d log softmax(z)_a / d z_j = [j == a] - p_j.
inline std::vector<double> grpo_gradient(const GroupRollout& rollout, const ToyPolicy& policy, const ToyPolicy& ref,
                                         const GrpoConfig& cfg) {
    detail::check_objective_config(cfg);
    rollout.validate();
    std::vector<double> rewards;
    for (const auto& s : rollout.group) rewards.push_back(s.reward);
    const auto adv = compute_advantages(rewards, cfg.std_floor);

    std::vector<double> grad(policy.params().size(), 0.0);
    const double invG = 1.0 / static_cast<double>(rollout.group.size());
    const int V = policy.vocab();
    for (std::size_t g = 0; g < rollout.group.size(); ++g) {
        const auto& s = rollout.group[g];
        const auto lr = detail::recompute(ref, rollout.prompt, s, "reference", g);
        if (s.tokens.size() > static_cast<std::size_t>(policy.length()))
            throw IntegrityError("sequence " + std::to_string(g) + " longer than the policy horizon");
        const double w = invG / static_cast<double>(s.tokens.size());
        int prev = policy.start_token();
        for (std::size_t t = 0; t < s.tokens.size(); ++t) {
            const int pos = static_cast<int>(t), a = s.tokens[t];
            if (a < 0 || a >= V) throw IntegrityError("token out of vocabulary in sequence " + std::to_string(g));
            const auto lp = policy.log_probs(pos, prev);
            const auto term = detail::token_term(lp[a], s.logp_old[t], lr[t], adv[g], cfg);
            const double c = w * term.dvalue_dlogp;
            if (c != 0.0) {
                const auto base = policy.row(pos, prev);
                for (int j = 0; j < V; ++j) grad[base + j] += c * ((j == a ? 1.0 : 0.0) - std::exp(lp[j]));
            }
            prev = a;
        }
    }
    return grad;
}

struct StepReport {
    double objective = 0.0;
    double clip_fraction = 0.0;
    double mean_kl = 0.0;
    double grad_norm = 0.0;
    double update_norm = 0.0;
};

// One gradient-ascent step on the mean objective over the given groups.
inline StepReport grpo_step(ToyPolicy& policy, const std::vector<GroupRollout>& rollouts, const ToyPolicy& ref,
                            const GrpoConfig& cfg) {
    require(!rollouts.empty(), "grpo_step: no rollouts");
    StepReport rep;
    std::vector<double> grad(policy.params().size(), 0.0);
    const double inv = 1.0 / static_cast<double>(rollouts.size());
    for (const auto& r : rollouts) {
        const auto obj = grpo_objective(r, policy, ref, cfg);
        rep.objective += obj.value * inv;
        rep.clip_fraction += obj.clip_fraction * inv;
        rep.mean_kl += obj.mean_kl * inv;
        const auto g = grpo_gradient(r, policy, ref, cfg);
        for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += g[i] * inv;
    }
    double sq = 0;
    for (double x : grad) sq += x * x;
    rep.grad_norm = std::sqrt(sq);
    if (!std::isfinite(rep.grad_norm) || !std::isfinite(rep.objective))
        throw DivergenceError("non-finite GRPO gradient (objective " + std::to_string(rep.objective) + ", mean KL " +
                              std::to_string(rep.mean_kl) + ")");
    auto updated = policy.params();
    for (std::size_t i = 0; i < grad.size(); ++i) {
        updated[i] += cfg.learning_rate * grad[i];
        if (!std::isfinite(updated[i]))
            throw DivergenceError("GRPO update produced a non-finite parameter (grad norm " +
                                  std::to_string(rep.grad_norm) + ")");
    }
    policy.params() = std::move(updated);
    rep.update_norm = cfg.learning_rate * rep.grad_norm;
    return rep;
}

} // namespace mascot::grpo
