#include <catch_amalgamated.hpp>

#include <array>
#include <cstdio>
#include <fstream>
#include <future>
#include <set>
#include <thread>

#include "mascot/backend/mock.hpp"
#include "mascot/orchestrator/mock.hpp"
#include "mascot/service/config.hpp"
#include "mascot/service/server.hpp"
#include "support.hpp"

using namespace mascot;
using namespace mascot::service;
using namespace std::chrono_literals;

namespace {

namespace fs = std::filesystem;

fs::path fresh_dir(const std::string& name) {
    auto p = fs::temp_directory_path() / ("mascot_service_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

orch::EpisodeBackends mock_backends(std::shared_ptr<backend::TextGenerator> gen = nullptr) {
    orch::EpisodeBackends be;
    be.gw.generator = gen ? gen : std::make_shared<backend::MockGenerator>();
    be.gw.judge = std::make_shared<backend::MockJudge>(backend::rules::constant(4));
    be.gw.templates = test::templates();
    be.director = std::make_shared<orch::CyclingDirector>(5);
    return be;
}

std::map<std::string, AgentRoster> rosters() {
    return {{"ed", test::roster("ed")}, {"qmsum", test::roster("qmsum")}};
}

std::unique_ptr<SessionManager> manager(const fs::path& store, orch::EpisodeBackends be = mock_backends()) {
    SessionSettings s;
    s.store_dir = store;
    s.seed = 11;
    return std::make_unique<SessionManager>(s, test::personas(), rosters(), std::move(be));
}

// Blocks until the session has left `generating` (or the timeout passes).
void wait_idle(SessionManager& m, const std::string& id, std::chrono::milliseconds limit = 5000ms) {
    const auto end = std::chrono::steady_clock::now() + limit;
    while (std::chrono::steady_clock::now() < end) {
        if (m.state(id).status != SessionStatus::generating) return;
        std::this_thread::sleep_for(5ms);
    }
    FAIL("session " << id << " still generating");
}

std::vector<std::string> types_of(const std::vector<json>& events, const std::set<std::string>& keep) {
    std::vector<std::string> out;
    for (const auto& e : events)
        if (keep.count(e.at("type").get<std::string>())) out.push_back(e.at("type").get<std::string>());
    return out;
}

json ev(std::uint64_t seq, const std::string& type, json data = json::object()) {
    return {{"seq", seq}, {"type", type}, {"at", "t"}, {"data", std::move(data)}};
}

json created(const std::string& id = "s1") {
    return ev(1, "session_created",
              {{"session_id", id},
               {"roster_id", "ed"},
               {"roster", test::roster("ed")},
               {"mode", "mascot"},
               {"context", test::context("c", "x")},
               {"created_at", "t"}});
}

} // namespace

TEST_CASE("status machine admits exactly the declared edges over all short traces") {
    using S = SessionStatus;
    const std::set<std::pair<S, S>> edges{{S::open, S::awaiting_user},
                                          {S::open, S::closed},
                                          {S::awaiting_user, S::generating},
                                          {S::awaiting_user, S::closed},
                                          {S::generating, S::awaiting_user}};
    const std::array<S, 4> all{S::open, S::awaiting_user, S::generating, S::closed};
    int traces = 0;
    for (int len = 1; len <= 6; ++len) {
        std::vector<int> digits(static_cast<std::size_t>(len), 0);
        while (true) {
            std::vector<json> events{created()};
            bool legal = true;
            S cur = S::open;
            for (std::size_t i = 0; i < digits.size(); ++i) {
                const S to = all[static_cast<std::size_t>(digits[i])];
                legal = legal && edges.count({cur, to}) > 0;
                cur = to;
                const auto seq = static_cast<std::uint64_t>(i + 2);
                events.push_back(to == S::closed ? ev(seq, "session_closed")
                                                 : ev(seq, "status", {{"status", to_string(to)}}));
            }
            if (legal) CHECK_NOTHROW(fold_events(events));
            else CHECK_THROWS_AS(fold_events(events), IntegrityError);
            ++traces;
            std::size_t k = 0;
            while (k < digits.size() && ++digits[k] == 4) digits[k++] = 0;
            if (k == digits.size()) break;
        }
    }
    CHECK(traces == 4 + 16 + 64 + 256 + 1024 + 4096);
    for (S a : all)
        for (S b : all) CHECK(transition_allowed(a, b) == (edges.count({a, b}) > 0));
}

TEST_CASE("event fold rejects gaps, misplaced creation, turn gaps and unknown types") {
    Turn user;
    user.speaker_id = "user";
    user.text = "hi";
    user.index = 1;
    auto base = std::vector<json>{created(), ev(2, "status", {{"status", "awaiting_user"}})};
    CHECK(fold_events(base).status == SessionStatus::awaiting_user);

    auto gap = base;
    gap.push_back(ev(4, "status", {{"status", "generating"}}));
    CHECK_THROWS_AS(fold_events(gap), IntegrityError);

    CHECK_THROWS_AS(fold_events({ev(1, "status", {{"status", "awaiting_user"}})}), IntegrityError);

    auto twice = base;
    twice.push_back(created());
    twice.back()["seq"] = 3;
    CHECK_THROWS_AS(fold_events(twice), IntegrityError);

    auto turn_gap = base;
    user.index = 2;
    turn_gap.push_back(ev(3, "user_turn", {{"turn", user}}));
    CHECK_THROWS_AS(fold_events(turn_gap), IntegrityError);

    auto ok = base;
    user.index = 1;
    ok.push_back(ev(3, "user_turn", {{"turn", user}}));
    const auto st = fold_events(ok);
    CHECK(st.trajectory.turns.size() == 1);
    CHECK(st.last_seq == 3);

    auto unknown = base;
    unknown.push_back(ev(3, "telemetry"));
    CHECK_THROWS_AS(fold_events(unknown), IntegrityError);
}

TEST_CASE("sessions: creation, not-found and distinct ids") {
    auto m = manager(fresh_dir("create"));
    const auto a = m->create_session("ed");
    const auto b = m->create_session("ed");
    CHECK(a.at("status") == "awaiting_user");
    CHECK(a.at("id") != b.at("id"));
    CHECK(fs::exists(m->log_path(a.at("id"))));
    CHECK_THROWS_AS(m->create_session("nope"), NotFoundError);
    CHECK_THROWS_AS(m->create_session("ed", "bogus_mode"), PreconditionError);
    CHECK_THROWS_AS(m->snapshot("missing"), NotFoundError);
    CHECK_THROWS_AS(m->post_message("missing", "hi"), NotFoundError);
    CHECK(m->personas_json().at("rosters").size() == 2);
}

TEST_CASE("a posted message yields one user turn and an N=3 block in order") {
    auto m = manager(fresh_dir("block"));
    const std::string id = m->create_session("ed").at("id");
    const auto accepted = m->post_message(id, "I got a promotion!");
    CHECK(accepted.at("turn_index") == 1);
    wait_idle(*m, id);

    const auto events = m->events_after(id, 0, 0ms);
    for (std::size_t i = 0; i < events.size(); ++i) CHECK(events[i].at("seq") == i + 1);
    const auto core = types_of(events, {"user_turn", "directive", "agent_turn_done"});
    CHECK(core == std::vector<std::string>{"user_turn", "directive", "agent_turn_done", "directive",
                                           "agent_turn_done", "directive", "agent_turn_done"});
    CHECK(types_of(events, {"block_reward"}).size() == 1);
    CHECK(events.back().at("type") == "status");
    CHECK(events.back().at("data").at("status") == "awaiting_user");

    // Deltas of each turn concatenate to the final text (whitespace-normalised).
    std::map<int, std::string> streamed;
    for (const auto& e : events)
        if (e.at("type") == "agent_turn_delta")
            streamed[e.at("data").at("turn_index").get<int>()] += e.at("data").at("delta").get<std::string>();
    const auto st = m->state(id);
    REQUIRE(st.trajectory.turns.size() == 4);
    for (const auto& t : st.trajectory.turns)
        if (t.is_agent()) CHECK(streamed.at(t.index) == util::join(util::split_whitespace(t.text), " "));

    SECTION("resume after event 4 delivers the rest without gaps") {
        const auto rest = m->events_after(id, 4, 0ms);
        REQUIRE(rest.size() == events.size() - 4);
        CHECK(rest.front().at("seq") == 5);
        CHECK(rest.back().at("seq") == events.size());
    }
}

TEST_CASE("messages conflict while generating and after close") {
    std::promise<void> gate;
    auto opened = gate.get_future().share();
    auto inner = std::make_shared<backend::MockGenerator>();
    auto slow = std::make_shared<backend::FunctionGenerator>(
        [opened, inner](const std::string& p, const backend::GenerationParams& g) {
            opened.wait();
            return inner->complete(p, g);
        });
    auto m = manager(fresh_dir("conflict"), mock_backends(slow));
    const std::string id = m->create_session("ed").at("id");
    m->post_message(id, "first");
    CHECK(m->state(id).status == SessionStatus::generating);
    CHECK_THROWS_AS(m->post_message(id, "second"), ConflictError);
    CHECK_THROWS_AS(m->close_session(id), ConflictError);
    gate.set_value();
    wait_idle(*m, id);
    CHECK_NOTHROW(m->post_message(id, "second"));
    wait_idle(*m, id);
    CHECK(m->close_session(id).at("status") == "closed");
    CHECK_THROWS_AS(m->post_message(id, "third"), ConflictError);
    bool finished = false;
    m->events_after(id, 0, 0ms, &finished);
    CHECK(finished);
}

TEST_CASE("a generation failure is logged and the session stays usable") {
    std::atomic<int> calls{0};
    auto inner = std::make_shared<backend::MockGenerator>();
    auto flaky = std::make_shared<backend::FunctionGenerator>(
        [&calls, inner](const std::string& p, const backend::GenerationParams& g) -> std::vector<std::string> {
            if (calls++ == 1) throw BackendError("upstream 503");
            return inner->complete(p, g);
        });
    auto m = manager(fresh_dir("failure"), mock_backends(flaky));
    const std::string id = m->create_session("ed").at("id");
    m->post_message(id, "hello");
    wait_idle(*m, id);
    auto st = m->state(id);
    REQUIRE(st.errors.size() == 1);
    CHECK(st.errors[0].at("message").get<std::string>().find("upstream 503") != std::string::npos);
    CHECK(st.status == SessionStatus::awaiting_user);
    const auto before = st.trajectory.turns.size();
    m->post_message(id, "again");
    wait_idle(*m, id);
    CHECK(m->state(id).trajectory.turns.size() == before + 1 + 3);
}

TEST_CASE("baseline sessions answer without directives") {
    auto m = manager(fresh_dir("baseline"));
    const std::string zs = m->create_session("ed", "zero_shot_cot").at("id");
    const std::string fs_id = m->create_session("ed", "few_shot").at("id");
    m->post_message(zs, "hello");
    m->post_message(fs_id, "hello");
    wait_idle(*m, zs);
    wait_idle(*m, fs_id);

    const auto a = m->state(zs);
    REQUIRE(a.trajectory.turns.size() == 2);
    CHECK(a.trajectory.turns[1].speaker_id == kAssistantSpeaker);
    CHECK(a.mode == Mode::zero_shot_cot);

    // Few-shot answers once per roster persona, in roster order.
    const auto b = m->state(fs_id);
    const auto roster = test::roster("ed");
    REQUIRE(b.trajectory.turns.size() == 1 + roster.size());
    for (std::size_t i = 0; i < roster.size(); ++i) CHECK(b.trajectory.turns[i + 1].speaker_id == roster.personas[i].id);
    for (const auto& id : {zs, fs_id}) CHECK(types_of(m->events_after(id, 0, 0ms), {"directive"}).empty());
}

TEST_CASE("restart replays the store into identical trajectories") {
    const auto store = fresh_dir("replay");
    std::map<std::string, Trajectory> before;
    std::string busy;
    {
        auto m = manager(store);
        for (int i = 0; i < 3; ++i) {
            const std::string id = m->create_session(i == 2 ? "qmsum" : "ed").at("id");
            for (int k = 0; k < i; ++k) {
                m->post_message(id, "message " + std::to_string(k));
                wait_idle(*m, id);
            }
            before[id] = m->state(id).trajectory;
        }
        m->close_session(before.begin()->first);
    }
    auto m = manager(store);
    CHECK(m->recovery_errors().empty());
    CHECK(m->session_count() == 3);
    for (const auto& [id, traj] : before) {
        CHECK(m->state(id).trajectory == traj);
        const auto events = m->events_after(id, 0, 0ms);
        for (std::size_t i = 0; i < events.size(); ++i) CHECK(events[i].at("seq") == i + 1);
    }
    CHECK(m->state(before.begin()->first).status == SessionStatus::closed);

    // Recovered open sessions keep working.
    const auto open_id = std::next(before.begin())->first;
    const auto n = m->state(open_id).trajectory.turns.size();
    m->post_message(open_id, "after restart");
    wait_idle(*m, open_id);
    CHECK(m->state(open_id).trajectory.turns.size() == n + 4);
}

TEST_CASE("restart drops a torn final line and ends interrupted generation") {
    const auto store = fresh_dir("torn");
    std::string id;
    {
        auto m = manager(store);
        id = m->create_session("ed").at("id");
    }
    const auto log = store / (id + ".jsonl");
    {
        std::ofstream out(log, std::ios::app);
        out << ev(3, "status", {{"status", "generating"}}).dump() << "\n" << R"({"seq":4,"type":"us)";
    }
    auto m = manager(store);
    REQUIRE(m->recovery_errors().size() == 1);
    const auto st = m->state(id);
    CHECK(st.status == SessionStatus::awaiting_user);
    REQUIRE(st.errors.size() == 1);
    CHECK(st.errors[0].at("message").get<std::string>().find("interrupted") != std::string::npos);
    // The rewritten log folds cleanly.
    std::vector<json> lines;
    std::ifstream in(log);
    for (std::string line; std::getline(in, line);) lines.push_back(json::parse(line));
    CHECK(fold_events(lines).last_seq == st.last_seq);
}

namespace {

struct LiveServer {
    std::unique_ptr<SessionManager> mgr;
    std::unique_ptr<HttpService> http;
    std::thread thread;
    int port = 0;

    explicit LiveServer(const fs::path& store, std::optional<std::string> token = std::nullopt) {
        mgr = manager(store);
        ServerOptions o;
        o.port = 0;
        o.auth_token = std::move(token);
        o.heartbeat = 500ms;
        http = std::make_unique<HttpService>(*mgr, o);
        port = http->bind();
        thread = std::thread([this] { http->run(); });
        for (int i = 0; i < 200; ++i) {
            httplib::Client c("127.0.0.1", port);
            if (c.Get("/healthz")) break;
            std::this_thread::sleep_for(5ms);
        }
    }
    ~LiveServer() {
        http->stop();
        thread.join();
        mgr->shutdown();
    }
};

struct SseEvent {
    std::uint64_t id = 0;
    std::string type;
    json data;
};

// Complete frames only; a partial trailing frame is ignored.
std::vector<SseEvent> sse_events(const std::string& body) {
    std::vector<SseEvent> out;
    std::size_t pos = 0;
    for (auto end = body.find("\n\n"); end != std::string::npos; pos = end + 2, end = body.find("\n\n", pos)) {
        std::istringstream in(body.substr(pos, end - pos));
        SseEvent e;
        for (std::string line; std::getline(in, line);) {
            if (line.rfind("id: ", 0) == 0) e.id = std::stoull(line.substr(4));
            if (line.rfind("event: ", 0) == 0) e.type = line.substr(7);
            if (line.rfind("data: ", 0) == 0) e.data = json::parse(line.substr(6));
        }
        if (!e.type.empty()) out.push_back(std::move(e));
    }
    return out;
}

// A block is complete once agent turns were seen and the session went back to awaiting_user.
bool block_complete(const std::vector<SseEvent>& events) {
    bool turn = false;
    for (const auto& e : events) {
        turn |= e.type == "agent_turn_done";
        if (turn && e.type == "status" && e.data.at("data").at("status") == "awaiting_user") return true;
    }
    return false;
}

} // namespace

TEST_CASE("HTTP round trip streams a full block over SSE") {
    const auto t0 = std::chrono::steady_clock::now();
    LiveServer srv(fresh_dir("http"));
    httplib::Client c("127.0.0.1", srv.port);
    c.set_read_timeout(5, 0);

    auto health = c.Get("/healthz");
    REQUIRE(health);
    CHECK(health->status == 200);
    auto personas = c.Get("/personas");
    REQUIRE(personas);
    CHECK(json::parse(personas->body).at("personas").size() == test::personas().size());

    auto created = c.Post("/sessions", R"({"roster_id":"ed"})", "application/json");
    REQUIRE(created);
    REQUIRE(created->status == 201);
    const std::string id = json::parse(created->body).at("id");

    // Subscribe first, then post: the stream must deliver the block as it happens.
    std::string body;
    std::thread sub([&] {
        httplib::Client s("127.0.0.1", srv.port);
        s.set_read_timeout(5, 0);
        s.Get("/sessions/" + id + "/events", [&](const char* data, std::size_t n) {
            body.append(data, n);
            return !block_complete(sse_events(body));
        });
    });
    std::this_thread::sleep_for(50ms);
    auto posted = c.Post("/sessions/" + id + "/messages", R"({"text":"I got a promotion!"})", "application/json");
    REQUIRE(posted);
    CHECK(posted->status == 202);
    sub.join();

    const auto events = sse_events(body);
    REQUIRE(block_complete(events));
    for (std::size_t i = 0; i < events.size(); ++i) {
        CHECK(events[i].id == i + 1);
        CHECK(events[i].data.at("seq") == i + 1);
    }
    int directives = 0, turns = 0, users = 0;
    for (const auto& e : events) {
        directives += e.type == "directive";
        turns += e.type == "agent_turn_done";
        users += e.type == "user_turn";
    }
    CHECK(users == 1);
    CHECK(directives == 3);
    CHECK(turns == 3);

    auto snap = c.Get("/sessions/" + id);
    REQUIRE(snap);
    CHECK(json::parse(snap->body).at("trajectory").at("turns").size() == 4);

    httplib::Headers resume{{"Last-Event-ID", "4"}};
    auto tail = c.Get("/sessions/" + id + "/events?follow=0", resume);
    REQUIRE(tail);
    const auto rest = sse_events(tail->body);
    REQUIRE(!rest.empty());
    CHECK(rest.front().id == 5);
    CHECK(rest.size() == events.size() - 4);

    CHECK(c.Get("/sessions/nope")->status == 404);
    CHECK(c.Get("/sessions/nope/events")->status == 404);
    CHECK(c.Post("/sessions", R"({"roster_id":"nope"})", "application/json")->status == 404);
    CHECK(c.Post("/sessions", R"({"mode":"mascot"})", "application/json")->status == 400);
    CHECK(c.Post("/sessions/" + id + "/close", "", "application/json")->status == 200);
    CHECK(c.Post("/sessions/" + id + "/messages", R"({"text":"x"})", "application/json")->status == 409);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    INFO("round trip took " << secs << " s");
    CHECK(secs < 2.0);
}

TEST_CASE("bearer auth guards every route except healthz") {
    LiveServer srv(fresh_dir("auth"), std::string("s3cret"));
    httplib::Client c("127.0.0.1", srv.port);
    CHECK(c.Get("/healthz")->status == 200);
    CHECK(c.Get("/personas")->status == 401);
    CHECK(c.Post("/sessions", R"({"roster_id":"ed"})", "application/json")->status == 401);
    httplib::Headers bad{{"Authorization", "Bearer nope"}};
    CHECK(c.Get("/personas", bad)->status == 401);
    httplib::Headers good{{"Authorization", "Bearer s3cret"}};
    CHECK(c.Get("/personas", good)->status == 200);
    CHECK(c.Post("/sessions", good, R"({"roster_id":"ed"})", "application/json")->status == 201);
}

TEST_CASE("config errors name the offending field") {
    const json good = json::parse(util::read_file(std::string(MASCOT_SOURCE_DIR) + "/configs/mock.json"));
    const fs::path base = std::string(MASCOT_SOURCE_DIR) + "/configs";
    CHECK_NOTHROW(app::parse_config(good, base));

    auto expect = [&](json doc, const std::string& field) {
        try {
            app::parse_config(doc, base);
            FAIL("accepted an invalid config; expected an error naming " << field);
        } catch (const ConfigError& e) {
            CHECK_THAT(e.what(), Catch::Matchers::ContainsSubstring("'" + field + "'"));
        }
    };
    auto d = good;
    d.erase("roster");
    expect(d, "roster");
    d = good;
    d["backends"].erase("judge");
    expect(d, "backends.judge");
    d = good;
    d["episode"]["N"] = 0;
    expect(d, "episode.N");
    d = good;
    d["grpo"]["epsilon"] = 1.5;
    expect(d, "grpo.epsilon");
    d = good;
    d["preference"]["K"] = "eight";
    expect(d, "preference.K");
    d = good;
    d["evaluate"]["modes"] = {"mascot", "telepathy"};
    expect(d, "evaluate.modes");
    d = good;
    d["service"]["port"] = 70000;
    expect(d, "service.port");
    d = good;
    d["episodes"] = json::object();
    expect(d, "episodes");

    // Overrides: JSON when it parses, a string otherwise; flags win over the file.
    auto o = good;
    app::apply_override(o, "episode.N=5");
    app::apply_override(o, "service.host=localhost");
    app::apply_override(o, "new.nested.path=[1,2]");
    CHECK(o["episode"]["N"] == 5);
    CHECK(o["service"]["host"] == "localhost");
    CHECK(o["new"]["nested"]["path"] == json::array({1, 2}));
    CHECK_THROWS_AS(app::apply_override(o, "noequals"), ConfigError);

    const auto a = app::parse_config(good, base);
    auto seeded = good;
    app::apply_override(seeded, "seed=7");
    const auto b = app::parse_config(seeded, base);
    CHECK(a.config_hash() != b.config_hash());
    CHECK(b.episode.seed == 7);
    CHECK(b.grpo.seed == 7);
}

namespace {

struct Proc {
    int code = -1;
    std::string out;
};

Proc run(const std::string& args) {
    const auto cmd = std::string(MASCOT_CLI) + " " + args + " 2>&1";
    Proc p;
    FILE* f = popen(cmd.c_str(), "r");
    REQUIRE(f);
    std::array<char, 4096> buf{};
    while (auto n = std::fread(buf.data(), 1, buf.size(), f)) p.out.append(buf.data(), n);
    const int status = pclose(f);
    p.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return p;
}

std::map<std::string, std::string> dir_contents(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = util::read_file(e.path().string());
    return out;
}

} // namespace

TEST_CASE("CLI: invalid config exits 2 naming the field") {
    const auto dir = fresh_dir("cli_bad");
    std::ofstream(dir / "bad.json") << R"({"backends": {"generator": {"kind": "mock"}, "judge": {"kind": "mock"}}})";
    auto p = run("run-episode --config " + (dir / "bad.json").string());
    CHECK(p.code == 2);
    CHECK_THAT(p.out, Catch::Matchers::ContainsSubstring("'roster'"));

    const std::string cfg = std::string(MASCOT_SOURCE_DIR) + "/configs/mock.json";
    p = run("run-episode --config " + cfg + " --out " + dir.string() + " --set episode.N=-1");
    CHECK(p.code == 2);
    CHECK_THAT(p.out, Catch::Matchers::ContainsSubstring("'episode.N'"));
    CHECK(run("run-episode --config " + (dir / "missing.json").string()).code == 2);
}

TEST_CASE("CLI: run-episode reruns produce identical run directories") {
    const auto dir = fresh_dir("cli_rerun");
    const std::string cfg = std::string(MASCOT_SOURCE_DIR) + "/configs/mock.json";
    auto a = run("run-episode --config " + cfg + " --seed 7 --out " + dir.string() + " --set fixtures.max_contexts=3");
    auto b = run("run-episode --config " + cfg + " --seed 7 --out " + dir.string() + " --set fixtures.max_contexts=3");
    REQUIRE(a.code == 0);
    REQUIRE(b.code == 0);
    std::vector<fs::path> runs;
    for (const auto& e : fs::directory_iterator(dir)) runs.push_back(e.path());
    REQUIRE(runs.size() == 2);
    CHECK(runs[0].filename().string().rfind("run-episode-", 0) == 0);
    const auto ca = dir_contents(runs[0]), cb = dir_contents(runs[1]);
    CHECK(ca.count("episodes.jsonl") == 1);
    CHECK(ca.count("config.json") == 1);
    CHECK(ca == cb);

    auto c = run("run-episode --config " + cfg + " --seed 8 --out " + dir.string() + " --set fixtures.max_contexts=3");
    REQUIRE(c.code == 0);
    fs::path third;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.path() != runs[0] && e.path() != runs[1]) third = e.path();
    CHECK(dir_contents(third).at("episodes.jsonl") != ca.at("episodes.jsonl"));
}
