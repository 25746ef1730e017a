#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "mascot/backend/interfaces.hpp"
#include "mascot/util/hash.hpp"
#include "mascot/util/text.hpp"

namespace mascot::backend {

namespace detail {

inline const std::vector<std::string>& default_lexicon() {
    static const std::vector<std::string> words = {
        "that",    "sounds",  "really", "hard",   "and",     "you",      "are",     "not",
        "alone",   "here",    "with",   "what",   "happened", "feel",    "today",   "maybe",
        "we",      "could",   "look",   "at",     "it",      "together", "your",    "effort",
        "matters", "a",       "lot",    "tell",   "me",      "more",     "about",   "how",
        "step",    "next",    "plan",   "moment", "share",   "this",     "news",    "proud",
        "okay",    "to",      "take",   "time",   "listen",  "support",  "think",   "why",
        "notes",   "meeting", "decide", "action", "item",    "gap",      "summary", "owner"};
    return words;
}

inline std::string normalize_token(std::string_view token) {
    std::string out;
    for (char c : token) {
        if (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_')
            out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return out;
}

inline std::string line_after(const std::string& text, std::string_view marker) {
    auto pos = text.find(marker);
    if (pos == std::string::npos) return {};
    pos += marker.size();
    auto end = text.find('\n', pos);
    return std::string(util::trim(std::string_view(text).substr(pos, end - pos)));
}

inline double unit(std::uint64_t& state) {
    state = util::splitmix64(state);
    return static_cast<double>(state >> 11) * 0x1.0p-53;
}

} // namespace detail

struct MockGeneratorConfig {
    std::uint64_t seed = 0;
    int answer_tokens_min = 8;
    int answer_tokens_max = 24;
    int reasoning_tokens_min = 0; // 0/0 disables the think segment
    int reasoning_tokens_max = 0;
    double trait_word_rate = 0.3; // chance of drawing a word from the prompt's "Traits:" line
    std::string echo_marker = "speaker_id: ";
};

// Pure function of (prompt, params, seed). Samples differ by index, so the
// k-th completion for a prompt is stable across runs and batch sizes.
class MockGenerator final : public TextGenerator {
public:
    explicit MockGenerator(MockGeneratorConfig cfg = {}) : cfg_(std::move(cfg)) {}

    std::vector<std::string> complete(const std::string& prompt,
                                      const GenerationParams& params) override {
        std::vector<std::string> traits;
        for (auto& t : util::split_whitespace(detail::line_after(prompt, "Traits: "))) {
            auto w = detail::normalize_token(t);
            if (!w.empty()) traits.push_back(w);
        }
        const std::string echo = cfg_.echo_marker.empty() ? "" : detail::line_after(prompt, cfg_.echo_marker);
        const std::uint64_t base = util::hash_combine(util::fnv1a(prompt),
                                                      util::hash_combine(cfg_.seed, params.seed.value_or(0)));
        std::vector<std::string> out;
        for (int k = 0; k < params.num_samples; ++k)
            out.push_back(sample(util::hash_combine(base, static_cast<std::uint64_t>(k) + 1), traits, echo));
        return out;
    }

    std::string identity() const override { return "mock-generator:" + std::to_string(cfg_.seed); }

private:
    std::string words(std::uint64_t& state, int n, const std::vector<std::string>& traits) const {
        const auto& lex = detail::default_lexicon();
        std::vector<std::string> ws;
        for (int i = 0; i < n; ++i) {
            if (!traits.empty() && detail::unit(state) < cfg_.trait_word_rate)
                ws.push_back(traits[static_cast<std::size_t>(detail::unit(state) * traits.size())]);
            else
                ws.push_back(lex[static_cast<std::size_t>(detail::unit(state) * lex.size())]);
        }
        return util::join(ws, " ");
    }

    int draw_len(std::uint64_t& state, int lo, int hi) const {
        if (hi <= lo) return lo;
        return lo + static_cast<int>(detail::unit(state) * (hi - lo + 1));
    }

    std::string sample(std::uint64_t state, const std::vector<std::string>& traits,
                       const std::string& echo) const {
        std::string text;
        const int r = draw_len(state, cfg_.reasoning_tokens_min, cfg_.reasoning_tokens_max);
        if (r > 0) text += "<think> " + words(state, r, traits) + " </think> ";
        if (!echo.empty()) text += "[" + echo + "] ";
        text += words(state, std::max(1, draw_len(state, cfg_.answer_tokens_min, cfg_.answer_tokens_max)), traits);
        return text;
    }

    MockGeneratorConfig cfg_;
};

// Test double driven by a callback.
class FunctionGenerator final : public TextGenerator {
public:
    using Fn = std::function<std::vector<std::string>(const std::string&, const GenerationParams&)>;
    explicit FunctionGenerator(Fn fn, std::string name = "function-generator")
        : fn_(std::move(fn)), name_(std::move(name)) {}

    std::vector<std::string> complete(const std::string& prompt, const GenerationParams& params) override {
        return fn_(prompt, params);
    }
    std::string identity() const override { return name_; }

private:
    Fn fn_;
    std::string name_;
};

// Feature-hashed bag of words plus a small whole-text component, normalised to
// unit length. Deterministic in (text, seed).
class MockEmbedder final : public Embedder {
public:
    explicit MockEmbedder(std::size_t dimension = 32, std::uint64_t seed = 0)
        : dim_(dimension), seed_(seed) {
        if (dim_ == 0) throw ConfigError("embedding dimension must be > 0");
    }

    std::vector<double> embed(const std::string& text) override {
        require(!text.empty(), "embed: text must be non-empty");
        std::vector<double> v(dim_, 0.0);
        auto add = [&](std::uint64_t h, double weight) {
            std::uint64_t state = util::hash_combine(h, seed_);
            for (auto& x : v) x += weight * (2.0 * detail::unit(state) - 1.0);
        };
        for (const auto& tok : util::split_whitespace(text)) {
            auto w = detail::normalize_token(tok);
            if (!w.empty()) add(util::fnv1a(w), 1.0);
        }
        add(util::fnv1a(text), 0.25);
        double norm = 0;
        for (double x : v) norm += x * x;
        norm = std::sqrt(norm);
        if (norm > 0)
            for (auto& x : v) x /= norm;
        return v;
    }

    std::size_t dimension() const override { return dim_; }
    std::string identity() const override {
        return "mock-embedder:" + std::to_string(dim_) + ":" + std::to_string(seed_);
    }

private:
    std::size_t dim_;
    std::uint64_t seed_;
};

using JudgeRule = std::function<std::map<std::string, int>(const JudgeRequest&)>;

// Formats the rule's scores as the strict-JSON reply an LLM judge would give.
class MockJudge final : public JudgeModel {
public:
    explicit MockJudge(JudgeRule rule, std::string name = "mock-judge")
        : rule_(std::move(rule)), name_(std::move(name)) {}

    std::string complete(const JudgeRequest& request) override {
        nlohmann::json scores = nlohmann::json::object();
        for (const auto& [k, v] : rule_(request)) scores[k] = v;
        return nlohmann::json{{"scores", scores}, {"rationale", "mock"}}.dump();
    }
    std::string identity() const override { return name_; }

private:
    JudgeRule rule_;
    std::string name_;
};

// Returns queued raw replies in order; repeats the last one when exhausted.
class ScriptedJudge final : public JudgeModel {
public:
    explicit ScriptedJudge(std::vector<std::string> replies) : replies_(replies.begin(), replies.end()) {}

    std::string complete(const JudgeRequest&) override {
        std::lock_guard lock(mu_);
        ++calls_;
        if (replies_.size() > 1) {
            auto r = replies_.front();
            replies_.pop_front();
            return r;
        }
        return replies_.empty() ? std::string{} : replies_.front();
    }
    std::string identity() const override { return "scripted-judge"; }
    int calls() const { return calls_; }

private:
    std::mutex mu_;
    std::deque<std::string> replies_;
    int calls_ = 0;
};

namespace rules {

inline std::map<std::string, int> fill(const eval::CriteriaSet& set, int score) {
    std::map<std::string, int> out;
    for (const auto& c : set.criteria) out[c.id] = score;
    return out;
}

inline JudgeRule constant(int score) {
    return [score](const JudgeRequest& r) { return fill(r.criteria, score); };
}

// Number of distinct persona traits appearing as tokens in the response.
inline int trait_overlap(const std::string& response, const PersonaProfile& persona) {
    std::set<std::string> tokens;
    for (const auto& t : util::split_whitespace(response)) tokens.insert(detail::normalize_token(t));
    int n = 0;
    for (const auto& trait : persona.traits)
        for (const auto& part : util::split_whitespace(trait))
            if (tokens.count(detail::normalize_token(part))) {
                ++n;
                break;
            }
    return n;
}

// score = clamp(1 + shared trait keywords, 1, 5) on every criterion.
inline JudgeRule keyword_overlap() {
    return [](const JudgeRequest& r) {
        const int overlap = r.persona ? trait_overlap(r.response, *r.persona) : 2;
        return fill(r.criteria, std::clamp(1 + overlap, 1, 5));
    };
}

// Pseudo-random 1..5 per (response, criterion); spreads aggregates so that
// margin filtering has something to filter.
inline JudgeRule hashed(std::uint64_t seed = 0) {
    return [seed](const JudgeRequest& r) {
        std::map<std::string, int> out;
        for (const auto& c : r.criteria.criteria)
            out[c.id] = 1 + static_cast<int>(util::hash_combine(util::fnv1a(r.response + "\x1f" + c.id), seed) % 5);
        return out;
    };
}

// `base` everywhere, `base + bonus` when judging `favoured_persona`.
inline JudgeRule persona_bias(int base, std::string favoured_persona, int bonus) {
    return [=](const JudgeRequest& r) {
        const bool fav = r.persona && r.persona->id == favoured_persona;
        return fill(r.criteria, std::clamp(base + (fav ? bonus : 0), 1, 5));
    };
}

} // namespace rules

} // namespace mascot::backend
