#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "mascot/backend/gateway.hpp"
#include "mascot/backend/judge.hpp"
#include "mascot/core/tokens.hpp"
#include "mascot/eval/criteria.hpp"
#include "mascot/util/hash.hpp"

namespace mascot::preference {

using backend::JudgeVerdict;

// Tolerance for floating-point margin comparisons between means of integers.
inline constexpr double kMarginTolerance = 1e-9;

struct ScoredCandidate {
    std::string text;
    std::optional<std::string> reasoning;
    JudgeVerdict verdict;
    double aggregate = 0.0;

    friend bool operator==(const ScoredCandidate&, const ScoredCandidate&) = default;
};

struct PreferencePair {
    std::string context_id;
    std::string persona_id;
    // Copied into each pair so reward-model features can be computed from the
    // dataset alone.
    std::string context_text;
    std::string persona_description;
    ScoredCandidate winner;
    ScoredCandidate loser;
    double margin = 0.0;

    friend bool operator==(const PreferencePair&, const PreferencePair&) = default;
};

struct PipelineConfig {
    int K = 8;
    double delta = 0.5;
    std::string criteria_set_id = "agent_specific.v1";
    backend::GenerationParams sampling{0.9, 512, 1, 0};
    std::string speaker_template = "speaker.v1";

    void validate() const {
        if (K < 2) throw ConfigError("K must be >= 2");
        if (!(delta >= 0) || !std::isfinite(delta)) throw ConfigError("delta must be >= 0");
    }
};

// Mean of the per-criterion scores.
inline double aggregate_score(const JudgeVerdict& verdict) {
    require(!verdict.criterion_scores.empty(), "aggregate_score: verdict has no criteria");
    double sum = 0;
    for (const auto& [id, s] : verdict.criterion_scores) sum += s;
    return sum / static_cast<double>(verdict.criterion_scores.size());
}

inline ScoredCandidate make_candidate(std::string text, std::optional<std::string> reasoning,
                                      JudgeVerdict verdict) {
    ScoredCandidate c{std::move(text), std::move(reasoning), std::move(verdict), 0.0};
    c.aggregate = aggregate_score(c.verdict);
    return c;
}

// Canonical candidate order: aggregate descending, then text hash, then text.
inline bool canonical_before(const ScoredCandidate& a, const ScoredCandidate& b) {
    if (a.aggregate != b.aggregate) return a.aggregate > b.aggregate;
    auto ha = util::fnv1a(a.text), hb = util::fnv1a(b.text);
    if (ha != hb) return ha < hb;
    return a.text < b.text;
}

// Every pair whose aggregate gap is at least `delta`, winner first. Equal
// aggregates never form a pair (there is no winner), even at delta = 0.
// Output order is canonical, so it does not depend on input order.
inline std::vector<PreferencePair> build_pairs(std::vector<ScoredCandidate> candidates, double delta,
                                               const std::string& context_id = {},
                                               const std::string& persona_id = {}) {
    std::sort(candidates.begin(), candidates.end(), canonical_before);
    std::vector<PreferencePair> out;
    for (std::size_t i = 0; i < candidates.size(); ++i)
        for (std::size_t j = i + 1; j < candidates.size(); ++j) {
            const double gap = candidates[i].aggregate - candidates[j].aggregate;
            if (gap > 0 && gap >= delta - kMarginTolerance)
                out.push_back({context_id, persona_id, {}, {}, candidates[i], candidates[j], gap});
        }
    return out;
}

struct CellFailure {
    std::string context_id;
    std::string persona_id;
    std::string error;
};

struct CellResult {
    std::string context_id;
    std::string persona_id;
    std::vector<ScoredCandidate> candidates; // canonical order
    std::vector<PreferencePair> pairs;
};

struct PipelineSummary {
    int cells_total = 0;
    int cells_failed = 0;
    int candidates = 0;
    int pairs = 0;
    double pair_yield = 0.0; // pairs / (successful cells * K(K-1)/2)
    std::vector<CellFailure> failures;
};

inline std::uint64_t cell_seed(std::uint64_t base, const std::string& context_id,
                               const std::string& persona_id) {
    return util::hash_combine(base, util::fnv1a(context_id + "\x1f" + persona_id));
}

// Samples K candidates for one (context, persona) cell, judges each one
// pointwise and keeps margin-qualifying pairs.
inline CellResult run_cell(const ConversationContext& context, const PersonaProfile& persona,
                           const PipelineConfig& config, const backend::Gateway& gw) {
    if (!gw.generator || !gw.judge || !gw.templates)
        throw ConfigError("preference pipeline needs generator, judge and templates");
    const auto criteria = eval::criteria_set_by_id(config.criteria_set_id);
    Trajectory empty{context, {}, Mode::mascot};
    const auto prompt = render_prompt(*gw.templates, empty, persona, std::nullopt, config.speaker_template);
    auto params = config.sampling;
    params.num_samples = config.K;
    params.seed = cell_seed(config.sampling.seed.value_or(0), context.id, persona.id);
    auto raw = backend::generate(*gw.generator, prompt, params);

    CellResult cell{context.id, persona.id, {}, {}};
    for (const auto& r : raw) {
        auto split = split_think(r);
        if (split.answer.empty()) throw BackendError("candidate with empty answer for " + context.id);
        backend::JudgeInput in{split.answer, context, persona, ""};
        auto verdict = backend::judge(*gw.judge, gw.templates.get(), in, criteria);
        cell.candidates.push_back(make_candidate(split.answer, split.reasoning, std::move(verdict)));
    }
    std::sort(cell.candidates.begin(), cell.candidates.end(), canonical_before);
    cell.pairs = build_pairs(cell.candidates, config.delta, context.id, persona.id);
    for (auto& p : cell.pairs) {
        p.context_text = context.scenario_text;
        p.persona_description = persona.description;
    }
    return cell;
}

struct PipelineRun {
    std::vector<CellResult> cells; // sorted by (context_id, persona_id)
    PipelineSummary summary;
};

inline PipelineRun run_cells(const std::vector<ConversationContext>& contexts, const AgentRoster& roster,
                             const PipelineConfig& config, const backend::Gateway& gw) {
    config.validate();
    struct Job {
        const ConversationContext* context;
        const PersonaProfile* persona;
    };
    std::vector<Job> jobs;
    for (const auto& c : contexts)
        for (const auto& p : roster.personas) jobs.push_back({&c, &p});

    auto outcomes = backend::parallel_map(jobs, gw.max_concurrency, [&](const Job& job) {
        return run_cell(*job.context, *job.persona, config, gw);
    });

    PipelineRun run;
    run.summary.cells_total = static_cast<int>(jobs.size());
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        if (outcomes[i].ok()) {
            run.cells.push_back(std::move(*outcomes[i].value));
        } else {
            run.summary.failures.push_back({jobs[i].context->id, jobs[i].persona->id, outcomes[i].error});
        }
    }
    std::sort(run.cells.begin(), run.cells.end(), [](const CellResult& a, const CellResult& b) {
        return std::tie(a.context_id, a.persona_id) < std::tie(b.context_id, b.persona_id);
    });
    std::sort(run.summary.failures.begin(), run.summary.failures.end(),
              [](const CellFailure& a, const CellFailure& b) {
                  return std::tie(a.context_id, a.persona_id) < std::tie(b.context_id, b.persona_id);
              });
    run.summary.cells_failed = static_cast<int>(run.summary.failures.size());
    for (const auto& c : run.cells) {
        run.summary.candidates += static_cast<int>(c.candidates.size());
        run.summary.pairs += static_cast<int>(c.pairs.size());
    }
    const double possible = static_cast<double>(run.cells.size()) * config.K * (config.K - 1) / 2.0;
    run.summary.pair_yield = possible > 0 ? run.summary.pairs / possible : 0.0;
    return run;
}

} // namespace mascot::preference
