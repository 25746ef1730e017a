#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "mascot/core/json.hpp"
#include "mascot/error.hpp"
#include "mascot/util/hash.hpp"

namespace mascot::grpo {

using Tokens = std::vector<int>;

// pi(y | prompt). Token-level access is all the objective needs.
class PolicyHandle {
public:
    virtual ~PolicyHandle() = default;
    virtual Tokens sample(const std::string& prompt, int max_len, std::uint64_t seed) const = 0;
    virtual std::vector<double> token_logprobs(const std::string& prompt, const Tokens& seq) const = 0;
};

// Uniform double in [0,1) from a 64-bit engine, independent of the standard
// library's distribution implementations.
inline double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Tabular autoregressive policy: one logit row per (position, previous token),
// with previous = V standing for "start". The prompt is ignored.
class ToyPolicy final : public PolicyHandle {
public:
    ToyPolicy(int vocab = 16, int length = 12) : V_(vocab), L_(length) {
        if (V_ < 2) throw ConfigError("toy policy vocabulary must be >= 2");
        if (L_ < 1) throw ConfigError("toy policy length must be >= 1");
        logits_.assign(static_cast<std::size_t>(L_) * (V_ + 1) * V_, 0.0);
    }

    int vocab() const noexcept { return V_; }
    int length() const noexcept { return L_; }
    int start_token() const noexcept { return V_; }

    std::vector<double>& params() noexcept { return logits_; }
    const std::vector<double>& params() const noexcept { return logits_; }

    std::size_t row(int pos, int prev) const {
        if (pos < 0 || pos >= L_ || prev < 0 || prev > V_) throw PreconditionError("toy policy state out of range");
        return (static_cast<std::size_t>(pos) * (V_ + 1) + static_cast<std::size_t>(prev)) * V_;
    }

    std::vector<double> log_probs(int pos, int prev) const {
        const auto base = row(pos, prev);
        const double mx = *std::max_element(logits_.begin() + base, logits_.begin() + base + V_);
        double z = 0;
        for (int v = 0; v < V_; ++v) z += std::exp(logits_[base + v] - mx);
        const double lz = mx + std::log(z);
        std::vector<double> out(V_);
        for (int v = 0; v < V_; ++v) out[v] = logits_[base + v] - lz;
        return out;
    }

    std::vector<double> probs(int pos, int prev) const {
        auto lp = log_probs(pos, prev);
        for (auto& x : lp) x = std::exp(x);
        return lp;
    }

    Tokens sample_with(std::mt19937_64& rng, int max_len) const {
        const int n = std::min(max_len, L_);
        Tokens out;
        out.reserve(n);
        int prev = start_token();
        for (int pos = 0; pos < n; ++pos) {
            const auto p = probs(pos, prev);
            double u = unit_uniform(rng), acc = 0;
            int pick = V_ - 1;
            for (int v = 0; v < V_; ++v) {
                acc += p[v];
                if (u < acc) {
                    pick = v;
                    break;
                }
            }
            out.push_back(pick);
            prev = pick;
        }
        return out;
    }

    Tokens sample(const std::string&, int max_len, std::uint64_t seed) const override {
        std::mt19937_64 rng(seed);
        return sample_with(rng, max_len);
    }

    std::vector<double> token_logprobs(const std::string&, const Tokens& seq) const override {
        if (seq.size() > static_cast<std::size_t>(L_)) throw PreconditionError("sequence longer than policy length");
        std::vector<double> out;
        out.reserve(seq.size());
        int prev = start_token();
        for (std::size_t t = 0; t < seq.size(); ++t) {
            if (seq[t] < 0 || seq[t] >= V_) throw PreconditionError("token out of vocabulary");
            out.push_back(log_probs(static_cast<int>(t), prev)[seq[t]]);
            prev = seq[t];
        }
        return out;
    }

    friend bool operator==(const ToyPolicy& a, const ToyPolicy& b) {
        return a.V_ == b.V_ && a.L_ == b.L_ && a.logits_ == b.logits_;
    }

private:
    int V_;
    int L_;
    std::vector<double> logits_;
};

// Exact KL(p || q) between the categorical rows of two policies at one state.
inline double categorical_kl(const ToyPolicy& p, const ToyPolicy& q, int pos, int prev) {
    const auto lp = p.log_probs(pos, prev), lq = q.log_probs(pos, prev);
    double kl = 0;
    for (std::size_t v = 0; v < lp.size(); ++v) kl += std::exp(lp[v]) * (lp[v] - lq[v]);
    return kl;
}

inline json toy_policy_json(const ToyPolicy& p, const std::string& config_hash) {
    return json{{"format", "mascot.toy_policy"}, {"version", 1},      {"config_hash", config_hash},
                {"vocab", p.vocab()},            {"length", p.length()}, {"logits", p.params()}};
}

inline ToyPolicy toy_policy_from_json(const json& j) {
    try {
        if (j.at("format").get<std::string>() != "mascot.toy_policy" || j.at("version").get<int>() != 1)
            throw LoadError("not a version 1 toy policy checkpoint");
        ToyPolicy p(j.at("vocab").get<int>(), j.at("length").get<int>());
        auto logits = j.at("logits").get<std::vector<double>>();
        if (logits.size() != p.params().size()) throw LoadError("toy policy logits have the wrong length");
        p.params() = std::move(logits);
        return p;
    } catch (const json::exception& e) {
        throw LoadError(std::string("toy policy checkpoint: ") + e.what());
    }
}

} // namespace mascot::grpo
