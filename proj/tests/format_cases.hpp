#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mascot/util/text.hpp"
#include "support.hpp"

namespace mascot::test {

struct FormatCase {
    std::string name;
    std::string text;
    double expected = 0;
};

inline std::string words(const char* stem, int n) {
    std::string s;
    for (int i = 1; i <= n; ++i) {
        if (i > 1) s += ' ';
        s += stem + std::to_string(i);
    }
    return s;
}

// Builds the markup for one fixture entry. Token counts are explicit in the
// fixture file, so the expected value can be checked by eye.
inline std::string format_case_text(const std::string& layout, int r, int a) {
    const auto R = words("r", r), A = words("a", a);
    if (layout == "standard") return "<think> " + R + " </think> " + A;
    if (layout == "no_tags") return A;
    if (layout == "two_segments")
        return "<think> " + words("r", r / 2) + " </think> <think> " + words("s", r - r / 2) + " </think> " + A;
    if (layout == "open_only") return "<think> " + R + " " + A;
    if (layout == "close_only") return R + " </think> " + A;
    if (layout == "reversed") return "</think> " + R + " <think> " + A;
    if (layout == "double_open") return "<think> <think> " + R + " </think> " + A;
    if (layout == "split_answer")
        return words("p", a / 2) + " <think> " + R + " </think> " + words("q", a - a / 2);
    if (layout == "glued") return "<think>" + R + "</think>" + A;
    throw std::invalid_argument("unknown format fixture layout: " + layout);
}

inline std::vector<FormatCase> format_cases() {
    const auto j = nlohmann::json::parse(util::read_file((fixtures_dir() / "format_cases.json").string()));
    std::vector<FormatCase> out;
    for (const auto& c : j)
        out.push_back({c.at("name").get<std::string>(),
                       format_case_text(c.at("layout").get<std::string>(), c.at("reasoning").get<int>(),
                                        c.at("answer").get<int>()),
                       c.at("expected").get<double>()});
    return out;
}

} // namespace mascot::test
