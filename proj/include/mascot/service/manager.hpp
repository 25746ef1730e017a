#pragma once

#include <atomic>
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <thread>

#include "mascot/orchestrator/baseline.hpp"
#include "mascot/orchestrator/episode.hpp"
#include "mascot/service/session.hpp"

namespace mascot::service {

inline constexpr const char* kDefaultScenario =
    "Live group chat with a user. The situation unfolds in the user's messages.";

// Runs posted tasks one at a time on a dedicated thread.
class SerialQueue {
public:
    SerialQueue() : worker_([this](std::stop_token st) { loop(st); }) {}
    ~SerialQueue() {
        worker_.request_stop();
        cv_.notify_all();
    }
    SerialQueue(const SerialQueue&) = delete;
    SerialQueue& operator=(const SerialQueue&) = delete;

    void post(std::function<void()> task) {
        {
            std::lock_guard lock(mu_);
            tasks_.push_back(std::move(task));
        }
        cv_.notify_one();
    }

private:
    void loop(std::stop_token st) {
        while (true) {
            std::function<void()> task;
            {
                std::unique_lock lock(mu_);
                cv_.wait(lock, [&] { return st.stop_requested() || !tasks_.empty(); });
                if (tasks_.empty()) return;
                task = std::move(tasks_.front());
                tasks_.pop_front();
            }
            task();
        }
    }

    std::mutex mu_;
    std::condition_variable cv_;
    std::deque<std::function<void()>> tasks_;
    std::jthread worker_; // last: joins before the members above go away
};

struct SessionSettings {
    std::filesystem::path store_dir = "sessions";
    orch::EpisodeConfig episode;   // max_blocks is ignored; one block per message
    orch::BaselineConfig baseline; // mode comes from the session
    int delta_words = 4;           // words per agent_turn_delta chunk
    std::string default_scenario = kDefaultScenario;
    std::uint64_t seed = 0;
};

// Owns live sessions. Every state change is an event appended to the
// session's JSONL log before it becomes visible; the in-memory state is the
// fold of that log, so a restart rebuilds it by replay.
class SessionManager {
public:
    SessionManager(SessionSettings settings, std::map<std::string, PersonaProfile> personas,
                   std::map<std::string, AgentRoster> rosters, orch::EpisodeBackends backends)
        : cfg_(std::move(settings)), personas_(std::move(personas)), rosters_(std::move(rosters)),
          be_(std::move(backends)) {
        if (cfg_.delta_words < 1) throw ConfigError("delta_words must be >= 1");
        if (!be_.gw.generator || !be_.gw.templates) throw ConfigError("service needs a generator and templates");
        std::filesystem::create_directories(cfg_.store_dir);
        recover();
    }

    ~SessionManager() { shutdown(); }

    // Wakes every waiting stream and drains the generation queues.
    void shutdown() {
        stopping_ = true;
        std::vector<std::shared_ptr<Session>> all;
        {
            std::lock_guard lock(mu_);
            for (auto& [id, s] : sessions_) all.push_back(s);
        }
        for (auto& s : all) {
            std::unique_ptr<SerialQueue> q;
            {
                std::lock_guard lock(s->mu);
                q = std::move(s->queue);
            }
            s->cv.notify_all();
            q.reset(); // joins outside the lock; a running block needs it
        }
    }

    bool stopping() const noexcept { return stopping_; }

    const std::vector<std::string>& recovery_errors() const noexcept { return recovery_errors_; }

    std::vector<Mode> modes() const {
        return {Mode::mascot, Mode::zero_shot, Mode::zero_shot_cot, Mode::few_shot, Mode::few_shot_cot};
    }

    json personas_json() const {
        json personas = json::array(), rosters = json::array(), mode_names = json::array();
        for (const auto& [id, p] : personas_) personas.push_back(p);
        for (const auto& [id, r] : rosters_) {
            json ids = json::array();
            for (const auto& p : r.personas) ids.push_back(p.id);
            rosters.push_back({{"id", id}, {"personas", ids}});
        }
        for (auto m : modes()) mode_names.push_back(to_string(m));
        return {{"personas", personas}, {"rosters", rosters}, {"modes", mode_names}};
    }

    std::size_t session_count() const {
        std::lock_guard lock(mu_);
        return sessions_.size();
    }

    json create_session(const std::string& roster_id, const std::string& mode_name = "mascot",
                        const std::string& scenario = "") {
        auto rit = rosters_.find(roster_id);
        if (rit == rosters_.end()) throw NotFoundError("unknown roster: " + roster_id);
        Mode mode;
        try {
            mode = parse_mode(mode_name);
        } catch (const LoadError& e) {
            throw PreconditionError(e.what());
        }
        rit->second.validate(mode == Mode::mascot);

        auto s = std::make_shared<Session>();
        {
            std::lock_guard lock(mu_);
            do s->id = new_id();
            while (sessions_.count(s->id) || std::filesystem::exists(log_path(s->id)));
            s->log.open(log_path(s->id), std::ios::app);
            if (!s->log) throw Error("io", "cannot open session log " + log_path(s->id).string());
            sessions_.emplace(s->id, s);
        }
        ConversationContext ctx{"session-" + s->id,
                                util::trim(scenario).empty() ? cfg_.default_scenario : std::string(util::trim(scenario)),
                                Valence::not_applicable, ContextSource::live_user, ""};
        std::lock_guard lock(s->mu);
        append(*s, "session_created",
               {{"session_id", s->id},
                {"roster_id", roster_id},
                {"roster", rit->second},
                {"mode", to_string(mode)},
                {"context", ctx},
                {"created_at", utc_now()}});
        append(*s, "status", {{"status", "awaiting_user"}});
        return snapshot_json(s->state);
    }

    json snapshot(const std::string& id) const {
        auto s = find(id);
        std::lock_guard lock(s->mu);
        return snapshot_json(s->state);
    }

    SessionState state(const std::string& id) const {
        auto s = find(id);
        std::lock_guard lock(s->mu);
        return s->state;
    }

    // Appends the user turn and queues one agent block. Conflict unless the
    // session is awaiting_user.
    json post_message(const std::string& id, const std::string& text) {
        auto s = find(id);
        const auto trimmed = std::string(util::trim(text));
        if (trimmed.empty()) throw PreconditionError("message text is empty");
        std::lock_guard lock(s->mu);
        if (stopping_ || !s->queue) throw ConflictError("service is shutting down");
        if (s->state.status != SessionStatus::awaiting_user)
            throw ConflictError("session " + id + " is " + std::string(to_string(s->state.status)));
        append(*s, "status", {{"status", "generating"}});
        Turn t;
        t.speaker_id = kUserSpeaker;
        t.text = trimmed;
        t.token_count_text = count_tokens(trimmed);
        t.index = s->state.trajectory.next_index();
        append(*s, "user_turn", {{"turn", t}});
        const auto accepted = json{{"session_id", id}, {"turn_index", t.index}, {"seq", s->state.last_seq}};
        s->queue->post([this, s] { generate(*s); });
        return accepted;
    }

    json close_session(const std::string& id) {
        auto s = find(id);
        std::lock_guard lock(s->mu);
        if (!transition_allowed(s->state.status, SessionStatus::closed))
            throw ConflictError("session " + id + " cannot be closed while " +
                                std::string(to_string(s->state.status)));
        append(*s, "session_closed", json::object());
        return snapshot_json(s->state);
    }

    // Events with seq > after. Waits up to `wait` for new ones when there are
    // none yet; `finished` is set once the session is closed and drained.
    std::vector<json> events_after(const std::string& id, std::uint64_t after, std::chrono::milliseconds wait,
                                   bool* finished = nullptr) const {
        auto s = find(id);
        std::unique_lock lock(s->mu);
        auto ready = [&] {
            return stopping_ || s->events.size() > after || s->state.status == SessionStatus::closed;
        };
        if (wait.count() > 0) s->cv.wait_for(lock, wait, ready);
        std::vector<json> out;
        for (auto i = static_cast<std::size_t>(after); i < s->events.size(); ++i) out.push_back(s->events[i]);
        if (finished) *finished = stopping_ || s->state.status == SessionStatus::closed;
        return out;
    }

    std::filesystem::path log_path(const std::string& id) const { return cfg_.store_dir / (id + ".jsonl"); }

private:
    struct Session {
        std::string id;
        mutable std::mutex mu;
        mutable std::condition_variable cv;
        SessionState state;
        std::vector<json> events;
        std::ofstream log;
        std::unique_ptr<orch::EpisodeRunner> runner;
        std::unique_ptr<SerialQueue> queue = std::make_unique<SerialQueue>();
    };

    std::shared_ptr<Session> find(const std::string& id) const {
        std::lock_guard lock(mu_);
        auto it = sessions_.find(id);
        if (it == sessions_.end()) throw NotFoundError("unknown session: " + id);
        return it->second;
    }

    static std::string new_id() {
        static thread_local std::mt19937_64 rng(std::random_device{}());
        return util::hex64(rng()).substr(0, 16);
    }

    // Caller holds s.mu. The event is validated by folding it before it is
    // written, so the log never holds an event the fold would reject.
    void append(Session& s, const std::string& type, json data) {
        json ev{{"seq", s.state.last_seq + 1}, {"type", type}, {"at", utc_now()}, {"data", std::move(data)}};
        apply_event(s.state, ev);
        s.log << ev.dump() << '\n';
        s.log.flush();
        s.events.push_back(std::move(ev));
        s.cv.notify_all();
    }

    void emit_locked(Session& s, const std::string& type, json data) {
        std::lock_guard lock(s.mu);
        append(s, type, std::move(data));
    }

    void emit_turn(Session& s, const Turn& turn) {
        const auto words = util::split_whitespace(turn.text);
        const auto step = static_cast<std::size_t>(cfg_.delta_words);
        for (std::size_t i = 0; i < words.size(); i += step) {
            const auto end = std::min(words.size(), i + step);
            std::vector<std::string> chunk(words.begin() + static_cast<std::ptrdiff_t>(i),
                                           words.begin() + static_cast<std::ptrdiff_t>(end));
            emit_locked(s, "agent_turn_delta",
                        {{"turn_index", turn.index},
                         {"speaker_id", turn.speaker_id},
                         {"delta", (i ? " " : "") + util::join(chunk, " ")}});
        }
        emit_locked(s, "agent_turn_done", {{"turn", turn}});
    }

    std::uint64_t session_seed(const Session& s) const { return util::hash_combine(cfg_.seed, util::fnv1a(s.id)); }

    // Runs on the session queue.
    void generate(Session& s) {
        Trajectory traj;
        Mode mode;
        AgentRoster roster;
        {
            std::lock_guard lock(s.mu);
            traj = s.state.trajectory;
            mode = s.state.mode;
            roster = s.state.roster;
        }
        try {
            if (mode == Mode::mascot) {
                if (!s.runner) {
                    auto ecfg = cfg_.episode;
                    ecfg.seed = session_seed(s);
                    s.runner = std::make_unique<orch::EpisodeRunner>(
                        traj.context, roster, ecfg, be_, [this, &s](const json& ev) {
                            const auto type = ev.at("type").get<std::string>();
                            json data = ev;
                            data.erase("type");
                            if (type == "agent_turn_done") emit_turn(s, ev.at("turn").get<Turn>());
                            else emit_locked(s, type, std::move(data));
                        });
                }
                auto blocks = s.runner->blocks();
                s.runner->restore(traj, std::move(blocks));
                s.runner->run_block();
            } else {
                auto bcfg = cfg_.baseline;
                bcfg.mode = mode;
                bcfg.seed = session_seed(s);
                bcfg.validate();
                orch::baseline_round(traj, roster, bcfg, *be_.gw.generator, *be_.gw.templates,
                                     [&](const Turn& t) { emit_turn(s, t); });
            }
        } catch (const EpisodeError& e) {
            // The runner has already logged an error event for mascot blocks.
            if (mode != Mode::mascot) emit_locked(s, "error", {{"turn_index", traj.next_index()}, {"message", e.what()}});
        } catch (const std::exception& e) {
            emit_locked(s, "error", {{"turn_index", traj.next_index()}, {"message", e.what()}});
        }
        emit_locked(s, "status", {{"status", "awaiting_user"}});
    }

    static std::vector<json> read_log(const std::filesystem::path& path, std::string& note) {
        std::ifstream in(path);
        std::vector<json> events;
        std::string line;
        std::vector<std::string> lines;
        while (std::getline(in, line))
            if (!util::trim(line).empty()) lines.push_back(line);
        for (std::size_t i = 0; i < lines.size(); ++i) {
            try {
                events.push_back(json::parse(lines[i]));
            } catch (const json::parse_error&) {
                // A torn final line from a crash mid-write is dropped; anything
                // earlier is corruption.
                if (i + 1 != lines.size()) throw IntegrityError(path.string() + ": corrupt line " + std::to_string(i + 1));
                note = path.string() + ": dropped torn final line";
            }
        }
        return events;
    }

    void recover() {
        std::vector<std::filesystem::path> files;
        for (const auto& e : std::filesystem::directory_iterator(cfg_.store_dir))
            if (e.path().extension() == ".jsonl") files.push_back(e.path());
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            try {
                std::string note;
                auto events = read_log(f, note);
                if (!note.empty()) recovery_errors_.push_back(note);
                auto s = std::make_shared<Session>();
                s->state = fold_events(events);
                s->id = s->state.id;
                if (s->id.empty() || f.stem() != s->id) throw IntegrityError(f.string() + ": session id mismatch");
                s->events = std::move(events);
                if (!note.empty()) {
                    // Rewrite without the torn line so later appends stay parseable.
                    std::string body;
                    for (const auto& ev : s->events) body += ev.dump() + "\n";
                    util::write_file(f.string(), body);
                }
                s->log.open(f, std::ios::app);
                if (s->state.status == SessionStatus::generating) {
                    append(*s, "error", {{"turn_index", s->state.trajectory.next_index()},
                                         {"message", "generation interrupted by a service restart"}});
                    append(*s, "status", {{"status", "awaiting_user"}});
                }
                sessions_.emplace(s->id, s);
            } catch (const std::exception& e) {
                recovery_errors_.push_back(f.string() + ": " + e.what());
            }
        }
    }

    SessionSettings cfg_;
    std::map<std::string, PersonaProfile> personas_;
    std::map<std::string, AgentRoster> rosters_;
    orch::EpisodeBackends be_;
    mutable std::mutex mu_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
    std::vector<std::string> recovery_errors_;
    std::atomic<bool> stopping_{false};
};

} // namespace mascot::service
