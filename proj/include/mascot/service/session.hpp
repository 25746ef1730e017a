#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <ctime>
#include <string>
#include <vector>

#include "mascot/core/json.hpp"

namespace mascot::service {

enum class SessionStatus { open, awaiting_user, generating, closed };

inline constexpr std::array<std::pair<SessionStatus, std::string_view>, 4> kStatusNames{{
    {SessionStatus::open, "open"},
    {SessionStatus::awaiting_user, "awaiting_user"},
    {SessionStatus::generating, "generating"},
    {SessionStatus::closed, "closed"},
}};

inline std::string_view to_string(SessionStatus s) { return mascot::detail::enum_name(s, kStatusNames); }
inline SessionStatus parse_status(std::string_view s) {
    return mascot::detail::enum_parse(s, kStatusNames, "session status");
}

// open -> (awaiting_user <-> generating)* -> closed. A generating session
// cannot be closed until its block ends.
inline bool transition_allowed(SessionStatus from, SessionStatus to) {
    using S = SessionStatus;
    switch (from) {
    case S::open: return to == S::awaiting_user || to == S::closed;
    case S::awaiting_user: return to == S::generating || to == S::closed;
    case S::generating: return to == S::awaiting_user;
    case S::closed: return false;
    }
    return false;
}

inline constexpr std::array<std::string_view, 9> kEventTypes{
    "session_created", "status",         "user_turn",    "directive", "agent_turn_delta",
    "agent_turn_done", "block_reward",   "error",        "session_closed"};

inline std::string utc_now() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

struct SessionState {
    std::string id;
    std::string roster_id;
    AgentRoster roster;
    Mode mode = Mode::mascot;
    SessionStatus status = SessionStatus::open;
    std::string created_at;
    Trajectory trajectory;
    std::vector<json> block_rewards;
    std::vector<json> errors;
    std::uint64_t last_seq = 0;
};

// Applies one logged event. Rejects sequence gaps, illegal transitions and
// turns whose index does not continue the trajectory.
inline void apply_event(SessionState& s, const json& ev) {
    const auto seq = ev.at("seq").get<std::uint64_t>();
    if (seq != s.last_seq + 1)
        throw IntegrityError("session " + s.id + ": event seq " + std::to_string(seq) + " after " +
                             std::to_string(s.last_seq));
    const auto type = ev.at("type").get<std::string>();
    const auto& data = ev.at("data");
    if (type == "session_created") {
        if (seq != 1) throw IntegrityError("session_created must be the first event");
        s.id = data.at("session_id").get<std::string>();
        s.roster_id = data.at("roster_id").get<std::string>();
        s.roster = data.at("roster").get<AgentRoster>();
        s.mode = parse_mode(data.at("mode").get<std::string>());
        s.created_at = data.at("created_at").get<std::string>();
        s.trajectory = Trajectory{data.at("context").get<ConversationContext>(), {}, s.mode};
        s.status = SessionStatus::open;
    } else if (seq == 1) {
        throw IntegrityError("first event must be session_created, got " + type);
    } else if (type == "status" || type == "session_closed") {
        const auto to = type == "session_closed" ? SessionStatus::closed
                                                 : parse_status(data.at("status").get<std::string>());
        if (!transition_allowed(s.status, to))
            throw IntegrityError("session " + s.id + ": illegal transition " + std::string(to_string(s.status)) +
                                 " -> " + std::string(to_string(to)));
        s.status = to;
    } else if (type == "user_turn" || type == "agent_turn_done") {
        auto t = data.at("turn").get<Turn>();
        if (t.index != s.trajectory.next_index())
            throw IntegrityError("session " + s.id + ": turn " + std::to_string(t.index) + " does not follow " +
                                 std::to_string(s.trajectory.turns.size()));
        if (type == "user_turn" && !t.is_user()) throw IntegrityError("user_turn event holds an agent turn");
        s.trajectory.turns.push_back(std::move(t));
    } else if (type == "block_reward") {
        s.block_rewards.push_back(data);
    } else if (type == "error") {
        s.errors.push_back(data);
    } else if (type != "directive" && type != "agent_turn_delta") {
        throw IntegrityError("unknown event type: " + type);
    }
    s.last_seq = seq;
}

inline SessionState fold_events(const std::vector<json>& events) {
    SessionState s;
    for (const auto& e : events) apply_event(s, e);
    return s;
}

inline json snapshot_json(const SessionState& s) {
    return json{{"id", s.id},
                {"roster_id", s.roster_id},
                {"personas", s.roster.personas},
                {"mode", to_string(s.mode)},
                {"status", to_string(s.status)},
                {"created_at", s.created_at},
                {"trajectory", s.trajectory},
                {"block_rewards", s.block_rewards},
                {"errors", s.errors},
                {"last_seq", s.last_seq}};
}

} // namespace mascot::service
