#include <catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "fake_openai.hpp"
#include "mascot/backend/gateway.hpp"
#include "mascot/backend/judge.hpp"
#include "mascot/backend/mock.hpp"
#include "mascot/backend/openai.hpp"
#include "mascot/core/tokens.hpp"
#include "support.hpp"

using namespace mascot;
using namespace mascot::backend;

namespace {

BackendEndpoint local_endpoint(const std::string& url, int retries = 0) {
    BackendEndpoint ep;
    ep.base_url = url;
    ep.model_name = "fake-model";
    ep.timeout = std::chrono::milliseconds(2000);
    ep.max_retries = retries;
    ep.backoff = {std::chrono::milliseconds(1), std::chrono::milliseconds(4)};
    return ep;
}

class CountingTransport final : public Transport {
public:
    explicit CountingTransport(std::shared_ptr<Transport> inner) : inner_(std::move(inner)) {}
    HttpResponse send(const BackendEndpoint& ep, const HttpRequest& req) override {
        ++calls;
        return inner_->send(ep, req);
    }
    int calls = 0;

private:
    std::shared_ptr<Transport> inner_;
};

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    return dot / std::sqrt(na * nb);
}

} // namespace

TEST_CASE("mock generator is deterministic and returns num_samples items", "[backend][mock]") {
    MockGenerator gen;
    GenerationParams p{0.7, 64, 3, 42};
    auto a = generate(gen, "prompt text", p);
    auto b = generate(gen, "prompt text", p);
    REQUIRE(a.size() == 3);
    CHECK(a == b);
    CHECK(std::set<std::string>(a.begin(), a.end()).size() == 3);
    CHECK(generate(gen, "other prompt", p) != a);

    // the k-th sample does not depend on how many were requested
    p.num_samples = 1;
    CHECK(generate(gen, "prompt text", p).front() == a.front());
}

TEST_CASE("mock generator echoes the speaker id and emits think markup", "[backend][mock]") {
    MockGeneratorConfig cfg;
    cfg.reasoning_tokens_min = cfg.reasoning_tokens_max = 10;
    MockGenerator gen(cfg);
    auto out = generate(gen, "header\nspeaker_id: beacon\nTraits: warm, kind\n", {});
    REQUIRE(out.size() == 1);
    CHECK(out[0].find("[beacon]") != std::string::npos);
    auto split = split_think(out[0]);
    REQUIRE(split.well_formed());
    CHECK(count_tokens(*split.reasoning) == 10);
}

TEST_CASE("generate rejects short lists and invalid params", "[backend]") {
    FunctionGenerator short_list([](const std::string&, const GenerationParams&) {
        return std::vector<std::string>{"only one"};
    });
    CHECK_THROWS_AS(generate(short_list, "p", {0.5, 10, 2, {}}), ProtocolError);
    MockGenerator gen;
    CHECK_THROWS_AS(generate(gen, "p", {0.5, 10, 0, {}}), PreconditionError);
    CHECK_THROWS_AS(generate(gen, "p", {NAN, 10, 1, {}}), PreconditionError);
    CHECK_THROWS_AS(generate(gen, "p", {0.5, 0, 1, {}}), PreconditionError);
}

TEST_CASE("recorded fixture is replayed verbatim", "[backend][replay]") {
    BackendEndpoint ep;
    ep.base_url = "https://api.openai.com/v1";
    ep.model_name = "gpt-4o-mini";
    auto client = std::make_shared<OpenAiClient>(
        ep, std::make_shared<ReplayTransport>(test::fixtures_dir() / "openai_replay"));
    OpenAiGenerator gen(client);
    auto out = generate(gen, "Say hello to the group.", {0.0, 32, 1, 7});
    REQUIRE(out.size() == 1);
    CHECK(out[0] == "Hello everyone! It's lovely to be here with you all.");

    CHECK_THROWS_AS(generate(gen, "A prompt nobody recorded.", {0.0, 32, 1, 7}), BackendError);
}

TEST_CASE("recording transport output replays identically", "[backend][replay]") {
    test::FakeOpenAi server;
    auto dir = std::filesystem::temp_directory_path() / "mascot_record_test";
    std::filesystem::remove_all(dir);
    auto ep = local_endpoint(server.base_url());
    {
        OpenAiGenerator live(std::make_shared<OpenAiClient>(
            ep, std::make_shared<RecordingTransport>(std::make_shared<HttpTransport>(), dir)));
        CHECK(generate(live, "record me", {0.2, 16, 1, 3}).front() == "echo: record me");
    }
    OpenAiGenerator replay(std::make_shared<OpenAiClient>(ep, std::make_shared<ReplayTransport>(dir)));
    CHECK(generate(replay, "record me", {0.2, 16, 1, 3}).front() == "echo: record me");
    std::filesystem::remove_all(dir);
}

TEST_CASE("unreachable endpoint fails after max_retries + 1 attempts", "[backend][retry]") {
    auto counting = std::make_shared<CountingTransport>(std::make_shared<HttpTransport>());
    auto ep = local_endpoint("http://127.0.0.1:1/v1", 2);
    std::vector<std::chrono::milliseconds> sleeps;
    OpenAiClient client(ep, counting, [&](std::chrono::milliseconds d) { sleeps.push_back(d); });
    OpenAiGenerator gen(std::shared_ptr<OpenAiClient>(&client, [](OpenAiClient*) {}));
    CHECK_THROWS_AS(generate(gen, "hello", {}), BackendError);
    CHECK(counting->calls == 3);
    CHECK(sleeps.size() == 2);
}

TEST_CASE("backoff grows exponentially with bounded jitter and a cap", "[backend][retry]") {
    BackoffPolicy policy; // 250 ms base, 8 s cap
    for (int attempt = 0; attempt < 8; ++attempt) {
        const double nominal = std::min(250.0 * std::pow(2.0, attempt), 8000.0);
        for (std::uint64_t seed : {1ULL, 2ULL, 99ULL}) {
            auto d = backoff_delay(policy, attempt, seed).count();
            CHECK(d >= nominal / 2 - 1);
            CHECK(d <= nominal);
        }
    }
    CHECK(backoff_delay(policy, 3, 7) == backoff_delay(policy, 3, 7));
}

TEST_CASE("HTTP client retries transient errors and tops up capped n", "[backend][http]") {
    test::FakeOpenAi server; // always returns a single choice
    auto ep = local_endpoint(server.base_url(), 3);
    auto client = std::make_shared<OpenAiClient>(ep, std::make_shared<HttpTransport>(),
                                                 [](std::chrono::milliseconds) {});
    OpenAiGenerator gen(client);

    server.fail_next(2);
    auto out = generate(gen, "hi there", {0.3, 20, 3, 5});
    CHECK(out == std::vector<std::string>(3, "echo: hi there"));
    auto reqs = server.requests();
    REQUIRE(reqs.size() == 5); // 2 failed + 3 single-choice rounds
    CHECK(reqs.back()["model"] == "fake-model");
    CHECK(reqs.back()["n"] == 1);
    CHECK(reqs[2]["n"] == 3);
    CHECK(reqs[2]["max_tokens"] == 20);

    OpenAiEmbedder emb(client, 4);
    CHECK(embed(emb, "abc") == std::vector<double>{3, 4, 5, 6});
    OpenAiEmbedder wrong_dim(client, 8);
    CHECK_THROWS_AS(embed(wrong_dim, "abc"), ProtocolError);
}

TEST_CASE("HTTP client maps protocol failures", "[backend][http]") {
    SECTION("2xx with a non-JSON body") {
        httplib::Server srv;
        srv.Post("/v1/chat/completions", [](const httplib::Request&, httplib::Response& res) {
            res.set_content("<html>oops</html>", "text/html");
        });
        int port = srv.bind_to_any_port("127.0.0.1");
        std::thread t([&] { srv.listen_after_bind(); });
        srv.wait_until_ready();
        OpenAiGenerator gen(std::make_shared<OpenAiClient>(
            local_endpoint("http://127.0.0.1:" + std::to_string(port) + "/v1"),
            std::make_shared<HttpTransport>()));
        CHECK_THROWS_AS(generate(gen, "x", {}), ProtocolError);
        srv.stop();
        t.join();
    }
    SECTION("client error status is not retried") {
        httplib::Server srv;
        int hits = 0;
        srv.Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
            ++hits;
            res.status = 400;
            res.set_content("{\"error\":\"bad\"}", "application/json");
        });
        int port = srv.bind_to_any_port("127.0.0.1");
        std::thread t([&] { srv.listen_after_bind(); });
        srv.wait_until_ready();
        OpenAiGenerator gen(std::make_shared<OpenAiClient>(
            local_endpoint("http://127.0.0.1:" + std::to_string(port) + "/v1", 3),
            std::make_shared<HttpTransport>()));
        CHECK_THROWS_AS(generate(gen, "x", {}), BackendError);
        CHECK(hits == 1);
        srv.stop();
        t.join();
    }
}

TEST_CASE("per-endpoint concurrency limit is enforced", "[backend][http][concurrency]") {
    test::FakeOpenAi server;
    server.delay(30);
    auto ep = local_endpoint(server.base_url());
    ep.max_concurrency = 2;
    auto client = std::make_shared<OpenAiClient>(ep, std::make_shared<HttpTransport>());
    OpenAiGenerator gen(client);
    std::vector<int> jobs(6);
    auto results = parallel_map(jobs, 6, [&](const int&) { return generate(gen, "p", {}).front(); });
    for (const auto& r : results) CHECK(r.ok());
    CHECK(server.peak_concurrency() <= 2);
}

TEST_CASE("endpoint validation", "[backend]") {
    CHECK_THROWS_AS(local_endpoint("ftp://x").validate(), ConfigError);
    CHECK_THROWS_AS(local_endpoint("http://:80").validate(), ConfigError);
    CHECK_THROWS_AS(local_endpoint("http://host:99999").validate(), ConfigError);
    auto ep = local_endpoint("https://api.example.com/v1/");
    CHECK_NOTHROW(ep.validate());
    auto url = parse_url(ep.base_url);
    CHECK(url.port == 443);
    CHECK(url.path_prefix == "/v1");
    ep.timeout = std::chrono::milliseconds(0);
    CHECK_THROWS_AS(ep.validate(), ConfigError);
}

TEST_CASE("keyword-overlap mock judge scores trait-dense responses high", "[backend][judge]") {
    const auto& anchor = test::personas().at("anchor");
    MockJudge model(rules::keyword_overlap());
    JudgeInput dense{"I'm validating this, staying patient and reflective, emotionally-attuned and "
                     "non-judgmental with you.",
                     test::context("c", "s"), anchor, ""};
    // overlap = 5 traits -> clamp(1 + 5, 1, 5) = 5
    auto v = judge(model, test::templates().get(), dense, eval::agent_specific_criteria());
    CHECK(v.criterion_scores.at("consistency") == 5);
    CHECK(v.criterion_scores.size() == 5);

    JudgeInput sparse{"I am being patient with you.", test::context("c", "s"), anchor, ""};
    // overlap = 1 ("patient") -> 2
    CHECK(judge(model, nullptr, sparse, eval::agent_specific_criteria()).criterion_scores.at("consistency") == 2);
}

TEST_CASE("judge enforces the strict verdict contract", "[backend][judge]") {
    const auto crit = eval::agent_specific_criteria();
    JudgeInput in{"resp", test::context("c", "s"), test::personas().at("anchor"), ""};
    const std::string full =
        R"({"scores":{"emotional_expressiveness":4,"empathetic_support_quality":4,"consistency":5,"response_relevance":3,"social_contribution":4}})";

    SECTION("out-of-range score") {
        ScriptedJudge j({R"({"scores":{"emotional_expressiveness":6,"empathetic_support_quality":4,"consistency":5,"response_relevance":3,"social_contribution":4}})"});
        CHECK_THROWS_AS(judge(j, nullptr, in, crit), JudgeFormatError);
        CHECK(j.calls() == 2);
    }
    SECTION("missing criterion") {
        ScriptedJudge j({R"({"scores":{"emotional_expressiveness":4,"empathetic_support_quality":4,"consistency":5,"response_relevance":3}})"});
        CHECK_THROWS_AS(judge(j, nullptr, in, crit), JudgeFormatError);
    }
    SECTION("non-integer score") {
        ScriptedJudge j({R"({"scores":{"emotional_expressiveness":4.5,"empathetic_support_quality":4,"consistency":5,"response_relevance":3,"social_contribution":4}})"});
        CHECK_THROWS_AS(judge(j, nullptr, in, crit), JudgeFormatError);
    }
    SECTION("one corrective re-ask recovers from malformed JSON") {
        ScriptedJudge j({"Sure! Here are my scores: consistency 5", full});
        auto v = judge(j, test::templates().get(), in, crit);
        CHECK(j.calls() == 2);
        CHECK(v.criterion_scores.at("consistency") == 5);
        CHECK(v.criterion_scores.at("response_relevance") == 3);
    }
    SECTION("code fences are tolerated") {
        ScriptedJudge j({"```json\n" + full + "\n```"});
        CHECK(judge(j, nullptr, in, crit).criterion_scores.size() == 5);
    }
    SECTION("empty criteria set is a precondition error") {
        ScriptedJudge j({full});
        CHECK_THROWS_AS(judge(j, nullptr, in, eval::CriteriaSet{"empty", {}, {}}), PreconditionError);
    }
}

TEST_CASE("LLM judge sends a temperature-0 prompt listing every criterion", "[backend][judge][http]") {
    const std::string reply =
        R"({"scores":{"emotional_expressiveness":2,"empathetic_support_quality":3,"consistency":4,"response_relevance":5,"social_contribution":1},"rationale":"ok"})";
    test::FakeOpenAi server([&](const nlohmann::json&) {
        nlohmann::json out;
        out["choices"] = {{{"index", 0}, {"message", {{"role", "assistant"}, {"content", reply}}}}};
        return out;
    });
    OpenAiJudge model(std::make_shared<OpenAiClient>(local_endpoint(server.base_url()),
                                                     std::make_shared<HttpTransport>()));
    JudgeInput in{"I hear you.", test::context("c", "My dog died."), test::personas().at("anchor"), ""};
    auto v = judge(model, test::templates().get(), in, eval::agent_specific_criteria());
    CHECK(v.criterion_scores.at("response_relevance") == 5);
    CHECK(v.rationale == "ok");
    auto req = server.requests().at(0);
    CHECK(req["temperature"] == 0.0);
    const auto prompt = req["messages"][0]["content"].get<std::string>();
    for (const auto& id : eval::agent_specific_criteria().ids()) CHECK(prompt.find(id) != std::string::npos);
    CHECK(prompt.find("My dog died.") != std::string::npos);

    OpenAiJudge no_prompt(std::make_shared<OpenAiClient>(local_endpoint(server.base_url()),
                                                         std::make_shared<HttpTransport>()));
    CHECK_THROWS_AS(judge(no_prompt, nullptr, in, eval::agent_specific_criteria()), ConfigError);
}

TEST_CASE("mock embedder contract", "[backend][embed]") {
    MockEmbedder emb(32, 1);
    CHECK_THROWS_AS(embed(emb, ""), PreconditionError);
    auto a = embed(emb, "the quick brown fox");
    CHECK(a.size() == 32);
    CHECK(a == embed(emb, "the quick brown fox"));
    auto b = embed(emb, "a completely different sentence");
    CHECK(cosine(a, b) < 1.0);
    // word order changes only the small whole-text component
    auto c = embed(emb, "fox brown quick the");
    CHECK(cosine(a, c) < 1.0);
    CHECK(cosine(a, c) > cosine(a, b));
}

TEST_CASE("parallel_map keeps order and captures errors", "[backend][gateway]") {
    std::vector<int> xs{1, 2, 3, 4, 5, 6, 7};
    auto out = parallel_map(xs, 3, [](const int& x) {
        if (x == 4) throw BackendError("boom");
        return x * x;
    });
    REQUIRE(out.size() == xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (xs[i] == 4) {
            CHECK_FALSE(out[i].ok());
            CHECK(out[i].error == "boom");
        } else {
            CHECK(*out[i].value == xs[i] * xs[i]);
        }
    }
}
