#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mascot/eval/fixtures.hpp"
#include "mascot/grpo/trainer.hpp"
#include "mascot/orchestrator/baseline.hpp"
#include "mascot/orchestrator/director_training.hpp"
#include "mascot/orchestrator/episode.hpp"
#include "mascot/preference/pipeline.hpp"
#include "mascot/reward/reward_model.hpp"

namespace mascot::app {

namespace fs = std::filesystem;

// Reads one JSON object, naming every problem by its dotted path. Keys that
// were never read are reported by finish(), so typos do not pass silently.
class Section {
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) fail("", "expected an object");
    }

    [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
        throw ConfigError("config field '" + where(key) + "': " + msg);
    }

    std::string where(const std::string& key) const {
        if (key.empty()) return path_.empty() ? "<root>" : path_;
        return path_.empty() ? key : path_ + "." + key;
    }

    bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }

    template <typename T>
    T get(const std::string& key, T def) {
        seen_.insert(key);
        if (!has(key)) return def;
        return convert<T>(key);
    }

    template <typename T>
    T require(const std::string& key) {
        seen_.insert(key);
        if (!has(key)) fail(key, "required field is missing");
        return convert<T>(key);
    }

    Section sub(const std::string& key) {
        seen_.insert(key);
        static const json empty = json::object();
        return Section(has(key) ? j_.at(key) : empty, where(key));
    }

    Section require_sub(const std::string& key) {
        if (!has(key)) fail(key, "required section is missing");
        return sub(key);
    }

    template <typename T>
    void check(const std::string& key, const T& value, bool ok, const std::string& rule) const {
        if (!ok) {
            fail(key, rule + " (got " + json(value).dump() + ")");
        }
    }

    void finish() const {
        for (const auto& [k, v] : j_.items())
            if (!seen_.count(k)) fail(k, "unknown field");
    }

private:
    template <typename T>
    T convert(const std::string& key) const {
        const auto& v = j_.at(key);
        if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) fail(key, "expected a boolean");
        } else if constexpr (std::is_same_v<T, std::uint64_t>) {
            if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
                fail(key, "expected a non-negative integer");
        } else if constexpr (std::is_integral_v<T>) {
            if (!v.is_number_integer()) fail(key, "expected an integer");
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!v.is_number()) fail(key, "expected a number");
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!v.is_string()) fail(key, "expected a string");
        } else if constexpr (std::is_same_v<T, std::vector<std::string>>) {
            if (!v.is_array()) fail(key, "expected an array of strings");
            for (const auto& e : v)
                if (!e.is_string()) fail(key, "expected an array of strings");
        }
        return v.get<T>();
    }

    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

struct GeneratorSpec {
    std::string kind = "mock"; // mock | openai | cycling (director only)
    backend::MockGeneratorConfig mock;
    backend::BackendEndpoint endpoint;
    std::string replay_dir; // openai: serve recorded fixtures instead of the network
    std::string record_dir; // openai: record live exchanges
};

struct JudgeSpec {
    std::string kind = "mock"; // mock | openai
    std::string rule = "constant"; // constant | keyword_overlap | hashed | persona_bias | alternation
    int score = 4;
    std::uint64_t seed = 0;
    std::string favoured;
    int bonus = 1;
    int max_new_tokens = 512;
    backend::BackendEndpoint endpoint;
    std::string replay_dir;
    std::string record_dir;
};

struct EmbedderSpec {
    std::string kind = "mock";
    std::size_t dimension = 32;
    std::uint64_t seed = 0;
    backend::BackendEndpoint endpoint;
    std::string replay_dir;
    std::string record_dir;
};

struct ServiceSpec {
    std::string host = "127.0.0.1";
    int port = 8080;
    fs::path store_dir;
    std::string auth_token_env; // empty: auth off
    int delta_words = 4;
    int worker_threads = 32;
    std::string scenario = "";
};

struct AppConfig {
    json document; // effective document (file + overrides), hashed into run names
    fs::path base_dir;
    std::uint64_t seed = 0;
    fs::path data_dir;
    fs::path output_dir;

    GeneratorSpec generator;
    std::optional<GeneratorSpec> director;
    JudgeSpec judge;
    EmbedderSpec embedder;
    std::optional<GeneratorSpec> user;
    int max_concurrency = 8;

    std::string roster;
    fs::path fixtures;
    eval::FixtureKind fixture_kind = eval::FixtureKind::ed;
    int max_contexts = 0; // 0: all

    orch::EpisodeConfig episode;
    std::vector<std::string> user_messages;
    orch::BaselineConfig baseline;
    preference::PipelineConfig preference;
    reward::RmTrainConfig rm;
    fs::path rm_dataset;
    grpo::GrpoConfig grpo;
    grpo::PersonaTokenTask toy;
    int toy_eval_samples = 2000;
    orch::DirectorTrainingConfig director_training;
    std::vector<Mode> eval_modes{Mode::mascot, Mode::zero_shot};
    std::string criteria_set = "agent_specific.v1";
    fs::path mbti_profiles;
    int mbti_rounds = 2;
    int mbti_scenarios = 1;
    ServiceSpec service;

    std::string config_hash() const { return util::hash_hex(document.dump()); }
};

namespace detail {

inline void set_path(json& doc, const std::string& dotted, const json& value) {
    json* cur = &doc;
    std::size_t pos = 0;
    while (true) {
        auto dot = dotted.find('.', pos);
        const auto key = dotted.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
        if (key.empty()) throw ConfigError("invalid override path '" + dotted + "'");
        if (!cur->is_object()) throw ConfigError("override path '" + dotted + "' crosses a non-object value");
        if (dot == std::string::npos) {
            (*cur)[key] = value;
            return;
        }
        if (!cur->contains(key)) (*cur)[key] = json::object();
        cur = &(*cur)[key];
        pos = dot + 1;
    }
}

inline fs::path resolve(const fs::path& base, const std::string& p) {
    fs::path path(p);
    return path.is_absolute() ? path : (base / path).lexically_normal();
}

inline backend::BackendEndpoint read_endpoint(Section& s) {
    backend::BackendEndpoint e;
    e.base_url = s.require<std::string>("base_url");
    e.model_name = s.require<std::string>("model");
    e.api_key_env = s.get<std::string>("api_key_env", "");
    const int timeout = s.get<int>("timeout_ms", 60000);
    s.check("timeout_ms", timeout, timeout > 0, "must be > 0");
    e.timeout = std::chrono::milliseconds(timeout);
    e.max_retries = s.get<int>("max_retries", 3);
    s.check("max_retries", e.max_retries, e.max_retries >= 0, "must be >= 0");
    e.max_concurrency = s.get<int>("max_concurrency", 8);
    s.check("max_concurrency", e.max_concurrency, e.max_concurrency >= 1, "must be >= 1");
    try {
        e.validate();
    } catch (const ConfigError& err) {
        s.fail("base_url", err.what());
    }
    return e;
}

inline GeneratorSpec read_generator(Section s, const fs::path& base, bool allow_cycling) {
    GeneratorSpec g;
    g.kind = s.require<std::string>("kind");
    if (g.kind == "mock") {
        g.mock.seed = s.get<std::uint64_t>("seed", 0);
        g.mock.answer_tokens_min = s.get<int>("answer_tokens_min", g.mock.answer_tokens_min);
        g.mock.answer_tokens_max = s.get<int>("answer_tokens_max", g.mock.answer_tokens_max);
        s.check("answer_tokens_min", g.mock.answer_tokens_min, g.mock.answer_tokens_min >= 1, "must be >= 1");
        s.check("answer_tokens_max", g.mock.answer_tokens_max, g.mock.answer_tokens_max >= g.mock.answer_tokens_min,
                "must be >= answer_tokens_min");
        g.mock.reasoning_tokens_min = s.get<int>("reasoning_tokens_min", 0);
        g.mock.reasoning_tokens_max = s.get<int>("reasoning_tokens_max", 0);
        s.check("reasoning_tokens_min", g.mock.reasoning_tokens_min, g.mock.reasoning_tokens_min >= 0, "must be >= 0");
        s.check("reasoning_tokens_max", g.mock.reasoning_tokens_max,
                g.mock.reasoning_tokens_max >= g.mock.reasoning_tokens_min, "must be >= reasoning_tokens_min");
        g.mock.trait_word_rate = s.get<double>("trait_word_rate", g.mock.trait_word_rate);
        s.check("trait_word_rate", g.mock.trait_word_rate,
                g.mock.trait_word_rate >= 0 && g.mock.trait_word_rate <= 1, "must be in [0,1]");
    } else if (g.kind == "openai") {
        g.endpoint = read_endpoint(s);
        if (auto r = s.get<std::string>("replay_dir", ""); !r.empty()) g.replay_dir = resolve(base, r).string();
        if (auto r = s.get<std::string>("record_dir", ""); !r.empty()) g.record_dir = resolve(base, r).string();
    } else if (g.kind == "cycling" && allow_cycling) {
        g.mock.seed = s.get<std::uint64_t>("seed", 0);
    } else {
        s.fail("kind", std::string("must be one of mock, openai") + (allow_cycling ? ", cycling" : "") + " (got \"" +
                           g.kind + "\")");
    }
    s.finish();
    return g;
}

inline JudgeSpec read_judge(Section s, const fs::path& base) {
    JudgeSpec j;
    j.kind = s.require<std::string>("kind");
    if (j.kind == "mock") {
        j.rule = s.get<std::string>("rule", "constant");
        static const std::set<std::string> rules{"constant", "keyword_overlap", "hashed", "persona_bias", "alternation"};
        s.check("rule", j.rule, rules.count(j.rule) > 0,
                "must be one of constant, keyword_overlap, hashed, persona_bias, alternation");
        j.score = s.get<int>("score", 4);
        s.check("score", j.score, j.score >= 1 && j.score <= 5, "must be in [1,5]");
        j.seed = s.get<std::uint64_t>("seed", 0);
        j.favoured = s.get<std::string>("favoured", "");
        j.bonus = s.get<int>("bonus", 1);
        if (j.rule == "persona_bias" && j.favoured.empty()) s.fail("favoured", "required for rule persona_bias");
    } else if (j.kind == "openai") {
        j.endpoint = read_endpoint(s);
        j.max_new_tokens = s.get<int>("max_new_tokens", 512);
        s.check("max_new_tokens", j.max_new_tokens, j.max_new_tokens > 0, "must be > 0");
        if (auto r = s.get<std::string>("replay_dir", ""); !r.empty()) j.replay_dir = resolve(base, r).string();
        if (auto r = s.get<std::string>("record_dir", ""); !r.empty()) j.record_dir = resolve(base, r).string();
    } else {
        s.fail("kind", "must be one of mock, openai (got \"" + j.kind + "\")");
    }
    s.finish();
    return j;
}

inline EmbedderSpec read_embedder(Section s, const fs::path& base) {
    EmbedderSpec e;
    e.kind = s.require<std::string>("kind");
    const int dim = s.get<int>("dimension", 32);
    s.check("dimension", dim, dim > 0, "must be > 0");
    e.dimension = static_cast<std::size_t>(dim);
    if (e.kind == "mock") {
        e.seed = s.get<std::uint64_t>("seed", 0);
    } else if (e.kind == "openai") {
        e.endpoint = read_endpoint(s);
        if (auto r = s.get<std::string>("replay_dir", ""); !r.empty()) e.replay_dir = resolve(base, r).string();
        if (auto r = s.get<std::string>("record_dir", ""); !r.empty()) e.record_dir = resolve(base, r).string();
    } else {
        s.fail("kind", "must be one of mock, openai (got \"" + e.kind + "\")");
    }
    s.finish();
    return e;
}

inline Mode read_mode(Section& s, const std::string& key, const std::string& value) {
    try {
        return parse_mode(value);
    } catch (const LoadError&) {
        s.fail(key, "unknown mode \"" + value + "\"; expected mascot, zero_shot, zero_shot_cot, few_shot or few_shot_cot");
    }
}

inline backend::GenerationParams read_sampling(Section& s, const std::string& prefix, backend::GenerationParams p) {
    p.temperature = s.get<double>(prefix + "temperature", p.temperature);
    s.check(prefix + "temperature", p.temperature, std::isfinite(p.temperature) && p.temperature >= 0, "must be >= 0");
    p.max_new_tokens = s.get<int>(prefix + "max_new_tokens", p.max_new_tokens);
    s.check(prefix + "max_new_tokens", p.max_new_tokens, p.max_new_tokens > 0, "must be > 0");
    return p;
}

} // namespace detail

// Parses the whole document. Every section is optional except `backends`
// (with `generator` and `judge`) and `roster`.
inline AppConfig parse_config(const json& doc, const fs::path& base_dir) {
    AppConfig c;
    c.document = doc;
    c.base_dir = base_dir;
    Section root(doc, "");
    c.seed = root.get<std::uint64_t>("seed", 0);
    c.data_dir = detail::resolve(base_dir, root.get<std::string>("data_dir", "data"));
    c.output_dir = detail::resolve(base_dir, root.get<std::string>("output_dir", "runs"));
    c.roster = root.require<std::string>("roster");

    {
        auto b = root.require_sub("backends");
        c.generator = detail::read_generator(b.require_sub("generator"), base_dir, false);
        if (b.has("director")) c.director = detail::read_generator(b.sub("director"), base_dir, true);
        else b.sub("director");
        c.judge = detail::read_judge(b.require_sub("judge"), base_dir);
        if (b.has("embedder")) c.embedder = detail::read_embedder(b.sub("embedder"), base_dir);
        else b.sub("embedder");
        if (b.has("user")) c.user = detail::read_generator(b.sub("user"), base_dir, false);
        else b.sub("user");
        c.max_concurrency = b.get<int>("max_concurrency", 8);
        b.check("max_concurrency", c.max_concurrency, c.max_concurrency >= 1, "must be >= 1");
        b.finish();
    }
    {
        auto f = root.sub("fixtures");
        c.fixtures = detail::resolve(c.data_dir, f.get<std::string>("path", "fixtures/ed_sample.jsonl"));
        const auto kind = f.get<std::string>("kind", "ed");
        f.check("kind", kind, kind == "ed" || kind == "qmsum", "must be ed or qmsum");
        c.fixture_kind = eval::parse_fixture_kind(kind);
        c.max_contexts = f.get<int>("max_contexts", 0);
        f.check("max_contexts", c.max_contexts, c.max_contexts >= 0, "must be >= 0");
        f.finish();
    }
    {
        auto e = root.sub("episode");
        c.episode.N = e.get<int>("N", 3);
        e.check("N", c.episode.N, c.episode.N >= 1, "must be >= 1");
        c.episode.max_blocks = e.get<int>("max_blocks", 1);
        e.check("max_blocks", c.episode.max_blocks, c.episode.max_blocks >= 1, "must be >= 1");
        c.episode.speaker_params = detail::read_sampling(e, "speaker_", c.episode.speaker_params);
        c.episode.director.params = detail::read_sampling(e, "director_", c.episode.director.params);
        c.episode.reward.eta = e.get<double>("eta", 1.0);
        e.check("eta", c.episode.reward.eta, std::isfinite(c.episode.reward.eta) && c.episode.reward.eta >= 0,
                "must be >= 0");
        c.episode.score_blocks = e.get<bool>("score_blocks", true);
        const int window = e.get<int>("history_window", 0);
        e.check("history_window", window, window >= 0, "must be >= 0 (0 keeps the full history)");
        if (window > 0) c.episode.render.history_window = static_cast<std::size_t>(window);
        c.user_messages = e.get<std::vector<std::string>>("user_messages", {});
        e.finish();
        c.episode.seed = c.seed;
    }
    {
        auto b = root.sub("baseline");
        c.baseline.mode = detail::read_mode(b, "mode", b.get<std::string>("mode", "zero_shot"));
        b.check("mode", std::string(to_string(c.baseline.mode)), c.baseline.mode != Mode::mascot,
                "must be a prompting baseline, not mascot");
        c.baseline.cot_trigger = b.get<std::string>("cot_trigger", orch::kDefaultCotTrigger);
        b.check("cot_trigger", c.baseline.cot_trigger, !util::trim(c.baseline.cot_trigger).empty(), "must be non-empty");
        c.baseline.exemplars = b.get<std::string>("exemplars", orch::kDefaultExemplars);
        b.check("exemplars", c.baseline.exemplars, !util::trim(c.baseline.exemplars).empty(), "must be non-empty");
        c.baseline.params = detail::read_sampling(b, "", c.baseline.params);
        b.finish();
        c.baseline.seed = c.seed;
    }
    {
        auto p = root.sub("preference");
        c.preference.K = p.get<int>("K", 8);
        p.check("K", c.preference.K, c.preference.K >= 2, "must be >= 2");
        c.preference.delta = p.get<double>("delta", 0.5);
        p.check("delta", c.preference.delta, std::isfinite(c.preference.delta) && c.preference.delta >= 0,
                "must be >= 0");
        c.preference.criteria_set_id = p.get<std::string>("criteria_set", "agent_specific.v1");
        try {
            (void)eval::criteria_set_by_id(c.preference.criteria_set_id);
        } catch (const ConfigError& e) {
            p.fail("criteria_set", e.what());
        }
        c.preference.sampling = detail::read_sampling(p, "", c.preference.sampling);
        p.finish();
        c.preference.sampling.seed = c.seed;
    }
    {
        auto r = root.sub("rm");
        const int hidden = r.get<int>("hidden_dim", static_cast<int>(c.rm.hidden_dim));
        r.check("hidden_dim", hidden, hidden >= 0, "must be >= 0 (0 is a linear head)");
        c.rm.hidden_dim = static_cast<decltype(c.rm.hidden_dim)>(hidden);
        c.rm.epochs = r.get<int>("epochs", c.rm.epochs);
        r.check("epochs", c.rm.epochs, c.rm.epochs >= 0, "must be >= 0");
        c.rm.learning_rate = r.get<double>("learning_rate", c.rm.learning_rate);
        r.check("learning_rate", c.rm.learning_rate, c.rm.learning_rate >= 0, "must be >= 0");
        c.rm.momentum = r.get<double>("momentum", c.rm.momentum);
        r.check("momentum", c.rm.momentum, c.rm.momentum >= 0 && c.rm.momentum < 1, "must be in [0,1)");
        const int batch = r.get<int>("batch_size", static_cast<int>(c.rm.batch_size));
        r.check("batch_size", batch, batch >= 0, "must be >= 0 (0 is full batch)");
        c.rm.batch_size = static_cast<std::size_t>(batch);
        c.rm.holdout_fraction = r.get<double>("holdout_fraction", c.rm.holdout_fraction);
        r.check("holdout_fraction", c.rm.holdout_fraction, c.rm.holdout_fraction >= 0 && c.rm.holdout_fraction < 1,
                "must be in [0,1)");
        if (auto d = r.get<std::string>("dataset", ""); !d.empty()) c.rm_dataset = detail::resolve(base_dir, d);
        r.finish();
        c.rm.seed = c.seed;
    }
    {
        auto g = root.sub("grpo");
        c.grpo.G = g.get<int>("G", c.grpo.G);
        g.check("G", c.grpo.G, c.grpo.G >= 2, "must be >= 2");
        c.grpo.epsilon = g.get<double>("epsilon", c.grpo.epsilon);
        g.check("epsilon", c.grpo.epsilon, c.grpo.epsilon > 0 && c.grpo.epsilon < 1, "must be in (0,1)");
        c.grpo.beta = g.get<double>("beta", c.grpo.beta);
        g.check("beta", c.grpo.beta, c.grpo.beta >= 0, "must be >= 0");
        c.grpo.learning_rate = g.get<double>("learning_rate", c.grpo.learning_rate);
        g.check("learning_rate", c.grpo.learning_rate, c.grpo.learning_rate > 0, "must be > 0");
        c.grpo.iterations = g.get<int>("iterations", c.grpo.iterations);
        g.check("iterations", c.grpo.iterations, c.grpo.iterations >= 1, "must be >= 1");
        c.grpo.groups_per_iteration = g.get<int>("groups_per_iteration", c.grpo.groups_per_iteration);
        g.check("groups_per_iteration", c.grpo.groups_per_iteration, c.grpo.groups_per_iteration >= 1, "must be >= 1");
        c.grpo.std_floor = g.get<double>("std_floor", c.grpo.std_floor);
        g.check("std_floor", c.grpo.std_floor, c.grpo.std_floor > 0, "must be > 0");
        c.toy.vocab = g.get<int>("toy_vocab", c.toy.vocab);
        c.toy.length = g.get<int>("toy_length", c.toy.length);
        c.toy.markers = g.get<int>("toy_markers", c.toy.markers);
        g.check("toy_vocab", c.toy.vocab, c.toy.vocab >= 2, "must be >= 2");
        g.check("toy_length", c.toy.length, c.toy.length >= 1, "must be >= 1");
        g.check("toy_markers", c.toy.markers, c.toy.markers >= 1 && c.toy.markers < c.toy.vocab,
                "must be in [1, toy_vocab)");
        c.toy_eval_samples = g.get<int>("eval_samples", c.toy_eval_samples);
        g.check("eval_samples", c.toy_eval_samples, c.toy_eval_samples >= 1, "must be >= 1");
        g.finish();
        c.grpo.seed = c.seed;
    }
    {
        auto d = root.sub("director_training");
        c.director_training.N = d.get<int>("N", c.episode.N);
        d.check("N", c.director_training.N, c.director_training.N >= 1, "must be >= 1");
        c.director_training.eval_blocks = d.get<int>("eval_blocks", 100);
        d.check("eval_blocks", c.director_training.eval_blocks, c.director_training.eval_blocks >= 1, "must be >= 1");
        c.director_training.grpo = c.grpo;
        c.director_training.grpo.iterations = d.get<int>("iterations", c.grpo.iterations);
        d.check("iterations", c.director_training.grpo.iterations, c.director_training.grpo.iterations >= 1,
                "must be >= 1");
        c.director_training.reward.eta = c.episode.reward.eta;
        d.finish();
        c.director_training.eval_seed = util::hash_combine(c.seed, 0xE7u);
    }
    {
        auto e = root.sub("evaluate");
        if (e.has("modes")) {
            c.eval_modes.clear();
            for (const auto& m : e.get<std::vector<std::string>>("modes", {}))
                c.eval_modes.push_back(detail::read_mode(e, "modes", m));
            e.check("modes", e.where("modes"), !c.eval_modes.empty(), "must list at least one mode");
        } else {
            e.get<std::vector<std::string>>("modes", {});
        }
        c.criteria_set = e.get<std::string>("criteria_set", "agent_specific.v1");
        try {
            (void)eval::criteria_set_by_id(c.criteria_set);
        } catch (const ConfigError& err) {
            e.fail("criteria_set", err.what());
        }
        e.finish();
    }
    {
        auto m = root.sub("mbti");
        c.mbti_profiles = detail::resolve(c.data_dir, m.get<std::string>("profiles", "mbti/profiles.json"));
        c.mbti_rounds = m.get<int>("rounds", 2);
        m.check("rounds", c.mbti_rounds, c.mbti_rounds >= 1, "must be >= 1");
        c.mbti_scenarios = m.get<int>("scenarios", 1);
        m.check("scenarios", c.mbti_scenarios, c.mbti_scenarios >= 1, "must be >= 1");
        m.finish();
    }
    {
        auto s = root.sub("service");
        c.service.host = s.get<std::string>("host", "127.0.0.1");
        s.check("host", c.service.host, !c.service.host.empty() && c.service.host.find_first_of(" /:") == std::string::npos,
                "must be a host name or IPv4 address");
        c.service.port = s.get<int>("port", 8080);
        s.check("port", c.service.port, c.service.port >= 0 && c.service.port <= 65535, "must be in [0, 65535]");
        c.service.store_dir = detail::resolve(base_dir, s.get<std::string>("store_dir", "sessions"));
        c.service.auth_token_env = s.get<std::string>("auth_token_env", "");
        c.service.delta_words = s.get<int>("delta_words", 4);
        s.check("delta_words", c.service.delta_words, c.service.delta_words >= 1, "must be >= 1");
        c.service.worker_threads = s.get<int>("worker_threads", 32);
        s.check("worker_threads", c.service.worker_threads, c.service.worker_threads >= 2, "must be >= 2");
        c.service.scenario = s.get<std::string>("scenario", "");
        s.finish();
    }
    root.finish();
    return c;
}

// Parses `path=value` overrides; the value is JSON when it parses, else a string.
inline void apply_override(json& doc, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override must look like path=value: " + assignment);
    const auto text = assignment.substr(eq + 1);
    json value;
    try {
        value = json::parse(text);
    } catch (const json::parse_error&) {
        value = text;
    }
    detail::set_path(doc, assignment.substr(0, eq), value);
}

inline AppConfig load_config(const fs::path& file, const std::vector<std::string>& overrides = {}) {
    if (!fs::exists(file)) throw ConfigError("config file not found: " + file.string());
    json doc;
    try {
        doc = json::parse(util::read_file(file.string()), nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ConfigError("config file " + file.string() + " is not valid JSON: " + e.what());
    }
    if (!doc.is_object()) throw ConfigError("config file " + file.string() + " must hold a JSON object");
    for (const auto& o : overrides) apply_override(doc, o);
    return parse_config(doc, fs::absolute(file).parent_path());
}

} // namespace mascot::app
