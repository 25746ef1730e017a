#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "mascot/util/text.hpp"

namespace mascot {

inline constexpr std::string_view kThinkOpen = "<think>";
inline constexpr std::string_view kThinkClose = "</think>";

// Whitespace-delimited token count. Backend-agnostic stand-in for a model
// tokenizer; thresholds that use it are configuration values.
inline int count_tokens(std::string_view text) {
    int n = 0;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && util::is_space(text[i])) ++i;
        if (i >= text.size()) break;
        ++n;
        while (i < text.size() && !util::is_space(text[i])) ++i;
    }
    return n;
}

inline std::size_t count_occurrences(std::string_view hay, std::string_view needle) {
    std::size_t n = 0;
    for (auto pos = hay.find(needle); pos != std::string_view::npos;
         pos = hay.find(needle, pos + needle.size()))
        ++n;
    return n;
}

// Result of splitting a raw completion into its reasoning trace and answer.
struct ThinkSplit {
    std::optional<std::string> reasoning; // present iff exactly one well-formed segment
    std::string answer;                   // everything outside the segment, trimmed
    std::size_t open_tags = 0;
    std::size_t close_tags = 0;

    bool well_formed() const noexcept { return reasoning.has_value(); }
};

inline ThinkSplit split_think(std::string_view raw) {
    ThinkSplit out;
    out.open_tags = count_occurrences(raw, kThinkOpen);
    out.close_tags = count_occurrences(raw, kThinkClose);
    if (out.open_tags == 1 && out.close_tags == 1) {
        auto open = raw.find(kThinkOpen);
        auto close = raw.find(kThinkClose);
        if (open < close) {
            auto inner = raw.substr(open + kThinkOpen.size(), close - open - kThinkOpen.size());
            out.reasoning = std::string(util::trim(inner));
            std::string rest(raw.substr(0, open));
            rest += ' ';
            rest += raw.substr(close + kThinkClose.size());
            out.answer = std::string(util::trim(rest));
            return out;
        }
    }
    out.answer = std::string(util::trim(raw));
    return out;
}

} // namespace mascot
