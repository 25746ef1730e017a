#include <catch_amalgamated.hpp>

#include <random>

#include "mascot/orchestrator/baseline.hpp"
#include "mascot/orchestrator/director_training.hpp"
#include "mascot/orchestrator/episode.hpp"
#include "mascot/orchestrator/mock.hpp"
#include "support.hpp"

using namespace mascot;
using namespace mascot::orch;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;

namespace {

std::shared_ptr<backend::TextGenerator> replies(std::vector<std::string> rs) {
    auto i = std::make_shared<std::size_t>(0);
    return std::make_shared<backend::FunctionGenerator>([rs, i](const std::string&, const backend::GenerationParams&) {
        auto r = rs[std::min(*i, rs.size() - 1)];
        ++*i;
        return std::vector<std::string>{r};
    });
}

Turn user_turn(std::string text) {
    Turn t;
    t.speaker_id = kUserSpeaker;
    t.text = std::move(text);
    return t;
}

Turn agent_turn(std::string id) {
    Turn t;
    t.speaker_id = std::move(id);
    t.text = "...";
    return t;
}

EpisodeBackends mock_backends(int coherence = 4, std::uint64_t seed = 0) {
    EpisodeBackends be;
    backend::MockGeneratorConfig g;
    g.seed = seed;
    g.reasoning_tokens_min = 5;
    g.reasoning_tokens_max = 9;
    be.gw.generator = std::make_shared<backend::MockGenerator>(g);
    be.gw.judge = std::make_shared<backend::MockJudge>(backend::rules::constant(coherence));
    be.gw.templates = test::templates();
    be.director = std::make_shared<CyclingDirector>();
    return be;
}

// Independent checker for the diversity clauses.
int brute_diversity(const std::vector<std::string>& s, std::size_t roster) {
    for (std::size_t i = 0; i + 1 < s.size(); ++i)
        if (s[i] == s[i + 1]) return 0;
    std::vector<std::string> seen;
    for (const auto& x : s)
        if (std::find(seen.begin(), seen.end(), x) == seen.end()) seen.push_back(x);
    return seen.size() >= std::min(s.size(), roster);
}

} // namespace

TEST_CASE("parse_directive enforces the JSON contract") {
    const auto roster = test::roster("ed");
    auto d = parse_directive(R"({"speaker_id":"anchor","instruction":" Validate the feeling. "})", roster);
    CHECK(d.speaker_id == "anchor");
    CHECK(d.instruction == "Validate the feeling.");
    CHECK(parse_directive("```json\n{\"speaker_id\":\"beacon\",\"instruction\":\"x\"}\n```", roster).speaker_id == "beacon");
    for (const char* bad : {"not json", "[1]", R"({"speaker_id":"ghost","instruction":"x"})",
                            R"({"speaker_id":"anchor"})", R"({"speaker_id":"anchor","instruction":""})",
                            R"({"speaker_id":3,"instruction":"x"})"})
        CHECK_THROWS_AS(parse_directive(bad, roster), ProtocolError);
}

TEST_CASE("director picks Beacon to amplify a small win") {
    const auto roster = test::roster("ed");
    Trajectory h{test::context("c", "I have been struggling at work."), {}, Mode::mascot};
    h.append(agent_turn("anchor"));
    h.append(user_turn("Today I had a small win: my manager praised my report."));
    CyclingDirector director;
    auto out = propose_directive(h, roster, director, *test::templates());
    CHECK(out.directive.speaker_id == "beacon");
    CHECK_THAT(out.directive.instruction, ContainsSubstring("amplify"));
    CHECK_FALSE(out.directive.fallback);
    CHECK(out.directive.turn_index == 3);
}

TEST_CASE("director with empty history still yields a valid directive") {
    const auto roster = test::roster("ed");
    Trajectory h{test::context("c", "I lost my dog."), {}, Mode::mascot};
    CyclingDirector director;
    auto out = propose_directive(h, roster, director, *test::templates());
    CHECK_NOTHROW(out.directive.validate(roster));
    CHECK(out.directive.turn_index == 1);
}

TEST_CASE("unknown speaker twice falls back to round robin") {
    const auto roster = test::roster("ed");
    Trajectory h{test::context("c", "x"), {}, Mode::mascot};
    h.append(agent_turn("anchor"));
    auto gen = replies({R"({"speaker_id":"ghost","instruction":"x"})"});
    std::vector<std::string> prompts;
    backend::FunctionGenerator spy([&](const std::string& p, const backend::GenerationParams& params) {
        prompts.push_back(p);
        return gen->complete(p, params);
    });
    auto out = propose_directive(h, roster, spy, *test::templates());
    CHECK(out.directive.fallback);
    CHECK(out.attempts == 2);
    CHECK(out.errors.size() == 2);
    CHECK(out.directive.speaker_id == "catalyst");
    REQUIRE(prompts.size() == 2);
    CHECK_THAT(prompts[1], ContainsSubstring("previous reply was rejected"));

    // Re-ask that succeeds is not a fallback.
    auto fixed = replies({"oops", R"({"speaker_id":"beacon","instruction":"go"})"});
    auto ok = propose_directive(h, roster, *fixed, *test::templates());
    CHECK_FALSE(ok.directive.fallback);
    CHECK(ok.directive.speaker_id == "beacon");
    CHECK(ok.attempts == 2);
}

TEST_CASE("round robin never repeats the last speaker") {
    std::mt19937_64 rng(7);
    for (const auto* id : {"ed", "qmsum"}) {
        const auto roster = test::roster(id);
        for (int trial = 0; trial < 500; ++trial) {
            std::vector<Turn> turns;
            const int n = static_cast<int>(rng() % 8);
            for (int i = 0; i < n; ++i) {
                if (rng() % 4 == 0) turns.push_back(user_turn("hi"));
                else turns.push_back(agent_turn(roster.personas[rng() % roster.size()].id));
            }
            const auto block_start = turns.empty() ? 0 : rng() % (turns.size() + 1);
            const auto pick = round_robin_speaker(turns, roster, block_start);
            REQUIRE(roster.find(pick));
            if (auto last = last_agent_speaker(turns)) REQUIRE(pick != *last);
        }
    }
    // "next unused" within the block
    const auto roster = test::roster("ed");
    CHECK(round_robin_speaker({agent_turn("catalyst"), agent_turn("beacon")}, roster) == "anchor");
    CHECK(round_robin_speaker({agent_turn("beacon"), agent_turn("catalyst")}, roster, 0) == "anchor");
    CHECK(round_robin_speaker({agent_turn("anchor"), agent_turn("beacon")}, roster, 0) == "catalyst");
}

TEST_CASE("speaker_respond") {
    const auto roster = test::roster("ed");
    const auto& anchor = *roster.find("anchor");
    Trajectory h{test::context("c", "My exam went badly."), {}, Mode::mascot};
    Directive d{"anchor", "Acknowledge the disappointment.", 1, false};
    backend::MockGeneratorConfig g;
    g.reasoning_tokens_min = 3;
    g.reasoning_tokens_max = 6;
    backend::MockGenerator gen(g);
    auto t = speaker_respond(h, anchor, d, gen, *test::templates(), {});
    CHECK_THAT(t.text, ContainsSubstring("anchor"));
    REQUIRE(t.reasoning);
    CHECK(t.token_count_reasoning == count_tokens(*t.reasoning));
    CHECK(t.token_count_text == count_tokens(t.text));
    CHECK(t.directive == d);

    CHECK_THROWS_AS(speaker_respond(h, *roster.find("beacon"), d, gen, *test::templates(), {}), PreconditionError);

    backend::FunctionGenerator broken([](const std::string&, const backend::GenerationParams&) -> std::vector<std::string> {
        throw BackendError("connection refused");
    });
    h.append(user_turn("hello"));
    try {
        speaker_respond(h, anchor, d, broken, *test::templates(), {});
        FAIL("expected EpisodeError");
    } catch (const EpisodeError& e) {
        CHECK_THAT(e.what(), ContainsSubstring("turn 2"));
    }
}

TEST_CASE("diversity_indicator examples and brute-force agreement") {
    CHECK(diversity_indicator(std::vector<std::string>{"anchor", "catalyst", "beacon"}, 3) == 1);
    CHECK(diversity_indicator(std::vector<std::string>{"anchor", "anchor", "beacon"}, 3) == 0);
    CHECK(diversity_indicator(std::vector<std::string>{"a", "b", "c", "a"}, 3) == 1);
    CHECK(diversity_indicator(std::vector<std::string>{"a", "b", "a"}, 3) == 0);
    CHECK_THROWS_AS(diversity_indicator(std::vector<std::string>{}, 3), PreconditionError);
    CHECK_THROWS_AS(diversity_indicator(std::vector<Turn>{user_turn("x")}, 3), PreconditionError);

    std::mt19937_64 rng(3);
    for (int i = 0; i < 5000; ++i) {
        const std::size_t roster = 1 + rng() % 5;
        std::vector<std::string> s(1 + rng() % 6);
        for (auto& x : s) x = std::string(1, static_cast<char>('a' + rng() % roster));
        REQUIRE(diversity_indicator(s, roster) == brute_diversity(s, roster));
    }
    CHECK(enumerate_random_diversity(3, 3) == 6.0 / 27);
}

TEST_CASE("group_reward composition") {
    const auto roster = test::roster("ed");
    auto ctx = test::context("c", "x");
    std::vector<Turn> diverse{agent_turn("anchor"), agent_turn("catalyst"), agent_turn("beacon")};
    std::vector<Turn> redundant{agent_turn("anchor"), agent_turn("anchor"), agent_turn("beacon")};
    backend::MockJudge five(backend::rules::constant(5)), three(backend::rules::constant(3));
    auto r = group_reward(ctx, diverse, roster, five, test::templates().get(), {1.0});
    CHECK(r.total == 2.0);
    CHECK(r.coherence == 1.0);
    CHECK(r.diversity == 1);
    CHECK(group_reward(ctx, diverse, roster, five, test::templates().get(), {0.0}).total == 1.0);
    auto red = group_reward(ctx, redundant, roster, three, test::templates().get(), {1.0});
    CHECK(red.total == 0.5);
    CHECK(red.diversity == 0);

    for (int div : {0, 1}) {
        double prev = -1;
        for (int s = 1; s <= 5; ++s) {
            const double v = combine_group_reward(s, div, {1.0}).total;
            CHECK(v > prev);
            prev = v;
        }
    }
    CHECK_THROWS_AS(combine_group_reward(3, 1, {-1.0}), ConfigError);
}

TEST_CASE("run_episode single block") {
    const auto roster = test::roster("ed");
    EpisodeConfig cfg;
    cfg.seed = 11;
    std::vector<json> events;
    auto res = run_episode(test::context("c", "I got rejected from my dream job."), roster, cfg, mock_backends(),
                           {}, [&](const json& e) { events.push_back(e); });
    REQUIRE_FALSE(res.failed);
    REQUIRE(res.trajectory.turns.size() == 3);
    REQUIRE(res.blocks.size() == 1);
    CHECK(res.blocks[0].reward->diversity == 1);
    CHECK(res.blocks[0].reward->total == 0.75 + 1.0);
    for (const auto& t : res.trajectory.turns) {
        REQUIRE(t.directive);
        CHECK(t.directive->speaker_id == t.speaker_id);
        CHECK(t.directive->turn_index == t.index);
        CHECK_THAT(t.text, ContainsSubstring("[" + t.speaker_id + "]"));
    }
    std::vector<std::string> types;
    for (const auto& e : events) types.push_back(e["type"]);
    CHECK(types == std::vector<std::string>{"directive", "agent_turn_done", "directive", "agent_turn_done", "directive",
                                            "agent_turn_done", "block_reward"});
}

TEST_CASE("run_episode interleaves user messages and is deterministic") {
    const auto roster = test::roster("ed");
    EpisodeConfig cfg;
    cfg.max_blocks = 2;
    cfg.seed = 5;
    auto ctx = test::context("c", "My friend moved away.");
    auto a = run_episode(ctx, roster, cfg, mock_backends(), {"Thanks, that helps a bit."});
    REQUIRE(a.trajectory.turns.size() == 7);
    for (int i = 0; i < 7; ++i) CHECK(a.trajectory.turns[i].is_user() == (i == 3));
    CHECK(a.trajectory.turns[3].text == "Thanks, that helps a bit.");
    CHECK(a.blocks.size() == 2);
    CHECK(a.blocks[1].first_turn == 5);

    auto b = run_episode(ctx, roster, cfg, mock_backends(), {"Thanks, that helps a bit."});
    CHECK(a.trajectory == b.trajectory);
    CHECK(episode_json(a).dump() == episode_json(b).dump());

    cfg.seed = 6;
    auto c = run_episode(ctx, roster, cfg, mock_backends(), {"Thanks, that helps a bit."});
    CHECK_FALSE(a.trajectory == c.trajectory);
}

TEST_CASE("run_episode stops on a failing turn with a partial trajectory") {
    const auto roster = test::roster("ed");
    auto be = mock_backends();
    auto calls = std::make_shared<int>(0);
    be.gw.generator = std::make_shared<backend::FunctionGenerator>(
        [calls](const std::string&, const backend::GenerationParams&) -> std::vector<std::string> {
            if (++*calls == 2) throw BackendError("HTTP 503");
            return {"fine words"};
        });
    std::vector<json> events;
    auto res = run_episode(test::context("c", "x"), roster, {}, be, {}, [&](const json& e) { events.push_back(e); });
    CHECK(res.failed);
    CHECK(res.trajectory.turns.size() == 1);
    CHECK(res.failure_turn == 2);
    CHECK_THAT(res.failure, ContainsSubstring("turn 2"));
    CHECK_THAT(res.failure, ContainsSubstring("HTTP 503"));
    CHECK(events.back()["type"] == "error");
    CHECK(episode_json(res)["failed"] == true);
}

TEST_CASE("episode config validation") {
    EpisodeConfig cfg;
    cfg.N = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.N = 3;
    cfg.reward.eta = -1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    auto single = test::roster("ed");
    single.personas.resize(1);
    CHECK_THROWS_AS(EpisodeRunner(test::context("c", "x"), single, {}, mock_backends()), PreconditionError);
}

TEST_CASE("baselines") {
    const auto roster = test::roster("ed");
    auto ctx = test::context("c", "I was passed over for promotion.");
    std::vector<std::string> prompts;
    backend::MockGenerator mock;
    backend::FunctionGenerator spy([&](const std::string& p, const backend::GenerationParams& params) {
        prompts.push_back(p);
        return mock.complete(p, params);
    });

    BaselineConfig zs;
    auto t = run_baseline(ctx, roster, zs, spy, *test::templates(), {"It still stings.", "What should I do?"});
    REQUIRE(t.turns.size() == 5);
    int assistant = 0;
    for (const auto& turn : t.turns) {
        CHECK_FALSE(turn.directive);
        assistant += turn.speaker_id == kAssistantSpeaker;
    }
    CHECK(assistant == 3);
    CHECK(t.mode == Mode::zero_shot);

    prompts.clear();
    BaselineConfig fs;
    fs.mode = Mode::few_shot;
    fs.exemplars = "User: A\nCompanion: B\n";
    auto f = run_baseline(ctx, roster, fs, spy, *test::templates());
    REQUIRE(f.turns.size() == 3);
    CHECK(f.turns[0].speaker_id == "anchor");
    CHECK(f.turns[2].speaker_id == "beacon");
    for (const auto& p : prompts) CHECK_THAT(p, ContainsSubstring("User: A\nCompanion: B\n"));

    prompts.clear();
    BaselineConfig cot;
    cot.mode = Mode::zero_shot_cot;
    cot.cot_trigger = "Reason it through first.";
    run_baseline(ctx, roster, cot, spy, *test::templates());
    REQUIRE(prompts.size() == 1);
    CHECK_THAT(prompts[0], ContainsSubstring("Reason it through first."));

    BaselineConfig bad;
    bad.mode = Mode::mascot;
    CHECK_THROWS_AS(run_baseline(ctx, roster, bad, spy, *test::templates()), ConfigError);
}

TEST_CASE("train_director learns diverse speaker orders") {
    const auto roster = test::roster("ed");
    backend::MockJudge judge(rules::alternation());
    DirectorTrainingConfig cfg;
    cfg.grpo.seed = 3;
    auto rep = train_director(test::context("c", "x"), roster, judge, test::templates().get(), cfg);
    INFO("diversity " << rep.diversity_rate << " random " << rep.random_diversity_rate);
    CHECK(rep.random_diversity_rate == 6.0 / 27);
    CHECK(rep.diversity_rate >= 0.95);

    auto again = train_director(test::context("c", "x"), roster, judge, test::templates().get(), cfg);
    CHECK(again.curve == rep.curve);
}

TEST_CASE("train_director without signal stays put") {
    const auto roster = test::roster("ed");
    backend::MockJudge judge(backend::rules::constant(3));
    DirectorTrainingConfig cfg;
    cfg.reward.eta = 0;
    cfg.grpo.iterations = 30;
    auto rep = train_director(test::context("c", "x"), roster, judge, test::templates().get(), cfg);
    CHECK(rep.policy == grpo::ToyPolicy(3, 3));
    for (const auto& s : rep.curve) CHECK(s.mean_reward == 0.5);
}
