#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mascot/backend/gateway.hpp"
#include "mascot/core/json.hpp"
#include "mascot/core/tokens.hpp"
#include "mascot/orchestrator/director.hpp"
#include "mascot/orchestrator/group_reward.hpp"

namespace mascot::orch {

inline constexpr const char* kSpeakerTemplate = "speaker.v1";

// Generates one agent turn. The directive must name this persona.
inline Turn speaker_respond(const Trajectory& history, const PersonaProfile& persona, const Directive& directive,
                            backend::TextGenerator& speaker, const TemplateRegistry& templates,
                            const backend::GenerationParams& params, const std::string& template_id = kSpeakerTemplate,
                            const RenderOptions& render = {}) {
    if (directive.speaker_id != persona.id)
        throw PreconditionError("directive is for '" + directive.speaker_id + "' but persona is '" + persona.id + "'");
    const int index = history.next_index();
    const auto prompt = render_prompt(templates, history, persona, directive, template_id, render);
    auto p = params;
    p.num_samples = 1;
    std::string raw;
    try {
        raw = backend::generate(speaker, prompt, p).front();
    } catch (const Error& e) {
        throw EpisodeError("turn " + std::to_string(index) + " (" + persona.id + "): " + e.what());
    }
    auto split = split_think(raw);
    if (split.answer.empty())
        throw EpisodeError("turn " + std::to_string(index) + " (" + persona.id + "): empty response");
    Turn t;
    t.index = index;
    t.speaker_id = persona.id;
    t.directive = directive;
    t.directive->turn_index = index;
    t.reasoning = split.reasoning;
    t.text = split.answer;
    t.token_count_reasoning = split.reasoning ? count_tokens(*split.reasoning) : 0;
    t.token_count_text = count_tokens(t.text);
    return t;
}

struct EpisodeConfig {
    int N = 3;
    int max_blocks = 1;
    std::string speaker_template = kSpeakerTemplate;
    backend::GenerationParams speaker_params{0.7, 512, 1, 0};
    DirectorOptions director;
    RenderOptions render;
    GroupRewardConfig reward;
    bool score_blocks = true;
    std::uint64_t seed = 0;

    void validate() const {
        if (N < 1) throw ConfigError("N must be >= 1");
        if (max_blocks < 1) throw ConfigError("max_blocks must be >= 1");
        speaker_params.validate();
        director.params.validate();
        reward.validate();
    }
};

// Speaker, judge and templates come from the gateway; the director defaults to
// the speaker backend (one model can play both roles).
struct EpisodeBackends {
    backend::Gateway gw;
    std::shared_ptr<backend::TextGenerator> director;

    backend::TextGenerator& director_model() const {
        if (director) return *director;
        if (!gw.generator) throw ConfigError("no director or generator backend configured");
        return *gw.generator;
    }
};

using EventSink = std::function<void(const json&)>;

struct BlockResult {
    int block = 0;
    int first_turn = 0;
    std::vector<std::string> speakers;
    std::optional<GroupRewardBreakdown> reward;
};

inline json to_json_value(const GroupRewardBreakdown& b) {
    return json{{"coherence_score", b.coherence_score},
                {"coherence", b.coherence},
                {"diversity", b.diversity},
                {"total", b.total}};
}

// Steppable bi-level episode: each block is N (directive -> turn) steps,
// optionally followed by a group reward. User messages go in between blocks.
class EpisodeRunner {
public:
    EpisodeRunner(ConversationContext context, AgentRoster roster, EpisodeConfig config, EpisodeBackends backends,
                  EventSink sink = {})
        : roster_(std::move(roster)), cfg_(std::move(config)), be_(std::move(backends)), sink_(std::move(sink)) {
        cfg_.validate();
        context.validate();
        roster_.validate(true);
        if (!be_.gw.generator) throw ConfigError("episode needs a speaker backend");
        if (!be_.gw.templates) throw ConfigError("episode needs templates");
        if (cfg_.score_blocks && !be_.gw.judge) throw ConfigError("block scoring needs a judge backend");
        traj_ = Trajectory{std::move(context), {}, Mode::mascot};
    }

    const Trajectory& trajectory() const noexcept { return traj_; }
    const std::vector<BlockResult>& blocks() const noexcept { return blocks_; }
    const AgentRoster& roster() const noexcept { return roster_; }
    const EpisodeConfig& config() const noexcept { return cfg_; }

    // Restores a previously recorded trajectory (service replay).
    void restore(Trajectory t, std::vector<BlockResult> blocks) {
        t.validate();
        traj_ = std::move(t);
        blocks_ = std::move(blocks);
    }

    const Turn& add_user_message(const std::string& text) {
        if (util::trim(text).empty()) throw PreconditionError("user message is empty");
        Turn t;
        t.speaker_id = kUserSpeaker;
        t.text = std::string(util::trim(text));
        t.token_count_text = count_tokens(t.text);
        const auto& added = traj_.append(std::move(t));
        emit({{"type", "user_turn"}, {"turn", added}});
        return added;
    }

    // Runs one block. On failure the trajectory keeps the turns produced so
    // far, an error event is emitted, and EpisodeError is thrown.
    const BlockResult& run_block() {
        BlockResult res;
        res.block = static_cast<int>(blocks_.size()) + 1;
        res.first_turn = traj_.next_index();
        const auto block_start = traj_.turns.size();
        try {
            for (int k = 0; k < cfg_.N; ++k) {
                auto dopts = cfg_.director;
                dopts.render = cfg_.render;
                dopts.params.seed = util::hash_combine(cfg_.seed, 0xD1u);
                auto outcome = propose_directive(traj_, roster_, be_.director_model(), *be_.gw.templates, dopts,
                                                 block_start);
                emit({{"type", "directive"},
                      {"directive", outcome.directive},
                      {"attempts", outcome.attempts},
                      {"rejected", outcome.errors}});
                const auto* persona = roster_.find(outcome.directive.speaker_id);
                auto params = cfg_.speaker_params;
                params.seed = util::hash_combine(util::hash_combine(cfg_.seed, speaker_params_seed()),
                                                 static_cast<std::uint64_t>(traj_.next_index()));
                auto turn = speaker_respond(traj_, *persona, outcome.directive, *be_.gw.generator, *be_.gw.templates,
                                            params, cfg_.speaker_template, cfg_.render);
                res.speakers.push_back(turn.speaker_id);
                const auto& added = traj_.append(std::move(turn));
                emit({{"type", "agent_turn_done"}, {"turn", added}});
            }
            if (cfg_.score_blocks) {
                std::vector<Turn> block(traj_.turns.begin() + static_cast<std::ptrdiff_t>(block_start), traj_.turns.end());
                res.reward = group_reward(traj_.context, block, roster_, *be_.gw.judge, be_.gw.templates.get(), cfg_.reward);
                emit({{"type", "block_reward"},
                      {"block", res.block},
                      {"first_turn", res.first_turn},
                      {"reward", to_json_value(*res.reward)}});
            }
        } catch (const std::exception& e) {
            const std::string msg = dynamic_cast<const EpisodeError*>(&e)
                                        ? e.what()
                                        : "turn " + std::to_string(traj_.next_index()) + ": " + e.what();
            emit({{"type", "error"}, {"turn_index", traj_.next_index()}, {"message", msg}});
            throw EpisodeError(msg);
        }
        blocks_.push_back(std::move(res));
        return blocks_.back();
    }

private:
    std::uint64_t speaker_params_seed() const { return cfg_.speaker_params.seed.value_or(0); }

    void emit(json event) {
        if (sink_) sink_(event);
    }

    AgentRoster roster_;
    EpisodeConfig cfg_;
    EpisodeBackends be_;
    EventSink sink_;
    Trajectory traj_;
    std::vector<BlockResult> blocks_;
};

struct EpisodeResult {
    Trajectory trajectory;
    std::vector<BlockResult> blocks;
    bool failed = false;
    std::optional<int> failure_turn;
    std::string failure;
};

// Offline episode: max_blocks blocks, with user_messages[i] inserted before
// block i + 2.
inline EpisodeResult run_episode(const ConversationContext& context, const AgentRoster& roster,
                                 const EpisodeConfig& config, const EpisodeBackends& backends,
                                 const std::vector<std::string>& user_messages = {}, EventSink sink = {}) {
    EpisodeRunner runner(context, roster, config, backends, std::move(sink));
    EpisodeResult res;
    try {
        for (int b = 0; b < config.max_blocks; ++b) {
            if (b > 0 && static_cast<std::size_t>(b - 1) < user_messages.size())
                runner.add_user_message(user_messages[b - 1]);
            runner.run_block();
        }
    } catch (const EpisodeError& e) {
        res.failed = true;
        res.failure_turn = runner.trajectory().next_index();
        res.failure = e.what();
    }
    res.trajectory = runner.trajectory();
    res.blocks = runner.blocks();
    return res;
}

inline json episode_json(const EpisodeResult& r) {
    json blocks = json::array();
    for (const auto& b : r.blocks)
        blocks.push_back({{"block", b.block},
                          {"first_turn", b.first_turn},
                          {"speakers", b.speakers},
                          {"reward", b.reward ? to_json_value(*b.reward) : json(nullptr)}});
    json out{{"trajectory", r.trajectory}, {"blocks", blocks}, {"failed", r.failed}};
    if (r.failed) out["failure"] = {{"turn_index", r.failure_turn.value_or(0)}, {"message", r.failure}};
    return out;
}

} // namespace mascot::orch
