#pragma once

#include <string>
#include <vector>

#include "mascot/backend/mock.hpp"
#include "mascot/core/json.hpp"

namespace mascot::orch {

namespace detail {

// Agent ids from the "- id (Name): ..." roster lines of a director prompt.
inline std::vector<std::string> roster_ids(const std::string& prompt) {
    std::vector<std::string> ids;
    std::size_t pos = prompt.find("Agents:\n");
    if (pos == std::string::npos) return ids;
    pos += 8;
    while (pos < prompt.size() && prompt.compare(pos, 2, "- ") == 0) {
        auto end = prompt.find(" (", pos + 2);
        auto nl = prompt.find('\n', pos);
        if (end == std::string::npos || end > nl) break;
        ids.push_back(prompt.substr(pos + 2, end - pos - 2));
        if (nl == std::string::npos) break;
        pos = nl + 1;
    }
    return ids;
}

struct HistoryLine {
    std::string speaker;
    std::string text;
};

// Parses "[i] speaker: text" lines.
inline std::vector<HistoryLine> history_lines(const std::string& text) {
    std::vector<HistoryLine> out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        std::string line = text.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
        pos = nl == std::string::npos ? text.size() : nl + 1;
        if (line.empty() || line[0] != '[') continue;
        auto rb = line.find("] ");
        auto colon = line.find(": ", rb == std::string::npos ? 0 : rb);
        if (rb == std::string::npos || colon == std::string::npos) continue;
        out.push_back({line.substr(rb + 2, colon - rb - 2), line.substr(colon + 2)});
    }
    return out;
}

} // namespace detail

// Mock director: cycles through the roster by the number of agent turns so
// far, offset by `seed`. When the latest user message mentions a small win and
// "beacon" is on the roster, Beacon is asked to amplify it.
class CyclingDirector final : public backend::TextGenerator {
public:
    explicit CyclingDirector(std::uint64_t seed = 0) : seed_(seed) {}

    std::vector<std::string> complete(const std::string& prompt, const backend::GenerationParams& params) override {
        const auto ids = detail::roster_ids(prompt);
        std::string speaker = ids.empty() ? "unknown" : ids[0];
        std::string instruction = "Offer your perspective on what the user just shared.";
        std::size_t agent_turns = 0;
        std::string last_user;
        const auto hist = detail::history_lines(prompt.substr(prompt.find("Conversation so far:")));
        for (const auto& h : hist) {
            if (h.speaker == kUserSpeaker) last_user = h.text;
            else agent_turns++;
        }
        if (!ids.empty()) speaker = ids[(agent_turns + seed_) % ids.size()];
        const bool beacon = std::find(ids.begin(), ids.end(), "beacon") != ids.end();
        if (beacon && util::to_lower(last_user).find("small win") != std::string::npos &&
            (hist.empty() || hist.back().speaker == kUserSpeaker)) {
            speaker = "beacon";
            instruction = "Celebrate the small win with them and amplify their pride in it.";
        }
        return std::vector<std::string>(params.num_samples,
                                        json{{"speaker_id", speaker}, {"instruction", instruction}}.dump());
    }

    std::string identity() const override { return "cycling-director:" + std::to_string(seed_); }

private:
    std::uint64_t seed_;
};

namespace rules {

// Coherence judge for director training: 5 when no speaker talks twice in a
// row in the judged transcript, else 1.
inline backend::JudgeRule alternation() {
    return [](const backend::JudgeRequest& r) {
        const auto lines = detail::history_lines(r.response);
        bool repeat = false;
        for (std::size_t i = 1; i < lines.size(); ++i) repeat |= lines[i].speaker == lines[i - 1].speaker;
        return backend::rules::fill(r.criteria, repeat ? 1 : 5);
    };
}

} // namespace rules

} // namespace mascot::orch
