#pragma once

#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "mascot/eval/evaluate.hpp"
#include "mascot/orchestrator/baseline.hpp"
#include "mascot/orchestrator/episode.hpp"

namespace mascot::eval {

inline constexpr const char* kAggregationNote = "per-turn -> per-conversation -> per-subset";

struct BenchmarkConfig {
    orch::EpisodeConfig episode;   // mascot mode; block scoring is switched off
    orch::BaselineConfig baseline; // prompting modes; `mode` is overridden per run
    std::string criteria_set = "agent_specific.v1";
    std::uint64_t seed = 0;

    void validate() const {
        episode.validate();
        auto b = baseline;
        b.mode = Mode::zero_shot;
        b.validate();
        (void)criteria_set_by_id(criteria_set);
    }
};

struct ConversationResult {
    Mode mode = Mode::mascot;
    std::string context_id;
    Valence valence = Valence::not_applicable;
    std::optional<MetricReport> report; // absent when excluded
    std::string error;
    int excluded_items = 0;
};

struct BenchmarkResult {
    std::vector<MetricReport> rows; // mode-major, then valence in enum order
    std::vector<ConversationResult> conversations;
    std::string judge_prompt_hash;
    std::string csv;
    std::string table;
};

inline std::string fmt_score(double v, int digits = 4) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

inline Trajectory produce_trajectory(const ConversationContext& context, Mode mode, const AgentRoster& roster,
                                     const BenchmarkConfig& cfg, const orch::EpisodeBackends& be,
                                     std::uint64_t seed) {
    if (mode == Mode::mascot) {
        auto ecfg = cfg.episode;
        ecfg.score_blocks = false;
        ecfg.seed = seed;
        auto res = orch::run_episode(context, roster, ecfg, be);
        if (res.failed) throw EpisodeError(res.failure);
        return res.trajectory;
    }
    auto bcfg = cfg.baseline;
    bcfg.mode = mode;
    bcfg.seed = seed;
    if (!be.gw.generator || !be.gw.templates) throw ConfigError("baseline needs a generator and templates");
    return orch::run_baseline(context, roster, bcfg, *be.gw.generator, *be.gw.templates);
}

namespace detail {

inline std::string header_lines(const BenchmarkConfig& cfg, const std::string& judge_id, const std::string& hash) {
    return "# aggregation: " + std::string(kAggregationNote) + "\n# criteria_set: " + cfg.criteria_set +
           "; judge: " + judge_id + "; judge_prompt_hash: " + hash + "; seed: " + std::to_string(cfg.seed) + "\n";
}

inline std::string render_csv(const std::vector<MetricReport>& rows, const std::vector<std::string>& ids,
                              const std::string& header) {
    std::string out = header + "mode,valence,conversations,excluded";
    for (const auto& id : ids) out += "," + id + "_mean," + id + "_std";
    out += ",overall\n";
    for (const auto& r : rows) {
        out += r.keys.at("mode") + "," + r.keys.at("valence") + "," + std::to_string(r.samples) + "," +
               std::to_string(r.excluded);
        for (const auto& id : ids) {
            if (r.empty()) out += ",,";
            else out += "," + fmt_score(r.criteria.at(id).mean) + "," + fmt_score(r.criteria.at(id).std);
        }
        out += "," + (r.empty() ? std::string() : fmt_score(r.overall)) + "\n";
    }
    return out;
}

inline std::string pad(std::string s, std::size_t w) {
    if (s.size() < w) s.append(w - s.size(), ' ');
    return s;
}

inline std::string render_table(const std::vector<MetricReport>& rows, const std::vector<std::string>& ids,
                                const std::string& header) {
    std::vector<std::string> cols{"mode", "valence", "n", "excl"};
    for (const auto& id : ids) cols.push_back(id);
    cols.push_back("overall");
    std::vector<std::vector<std::string>> cells;
    for (const auto& r : rows) {
        std::vector<std::string> line{r.keys.at("mode"), r.keys.at("valence"), std::to_string(r.samples),
                                      std::to_string(r.excluded)};
        for (const auto& id : ids) line.push_back(r.empty() ? "-" : fmt_score(r.criteria.at(id).mean, 2));
        line.push_back(r.empty() ? "-" : fmt_score(r.overall, 2));
        cells.push_back(std::move(line));
    }
    std::vector<std::size_t> width;
    for (std::size_t c = 0; c < cols.size(); ++c) {
        std::size_t w = cols[c].size();
        for (const auto& line : cells) w = std::max(w, line[c].size());
        width.push_back(w);
    }
    std::string out = header;
    auto emit = [&](const std::vector<std::string>& line) {
        for (std::size_t c = 0; c < line.size(); ++c) out += (c ? " | " : "") + pad(line[c], width[c]);
        while (!out.empty() && out.back() == ' ') out.pop_back();
        out += "\n";
    };
    emit(cols);
    std::vector<std::string> rule;
    for (auto w : width) rule.push_back(std::string(w, '-'));
    emit(rule);
    for (const auto& line : cells) emit(line);
    return out;
}

} // namespace detail

// Runs every mode over every fixture, evaluates each conversation, and groups
// the conversation-level scores by (mode, valence). A conversation whose
// generation fails or whose items all fail judging is excluded and counted.
inline BenchmarkResult run_benchmark(const std::vector<ConversationContext>& fixtures, const std::vector<Mode>& modes,
                                     const AgentRoster& roster, const BenchmarkConfig& cfg,
                                     const orch::EpisodeBackends& be) {
    cfg.validate();
    require(!fixtures.empty(), "run_benchmark: no fixtures loaded");
    require(!modes.empty(), "run_benchmark: no modes");
    if (!be.gw.judge) throw ConfigError("benchmark needs a judge backend");
    const auto set = criteria_set_by_id(cfg.criteria_set);
    const auto ids = set.ids();

    struct Job {
        Mode mode;
        const ConversationContext* context;
    };
    std::vector<Job> jobs;
    for (auto m : modes)
        for (const auto& c : fixtures) jobs.push_back({m, &c});

    auto outcomes = backend::parallel_map(jobs, be.gw.max_concurrency, [&](const Job& job) {
        const auto seed =
            util::hash_combine(cfg.seed, util::fnv1a(std::string(to_string(job.mode)) + "/" + job.context->id));
        auto traj = produce_trajectory(*job.context, job.mode, roster, cfg, be, seed);
        EvaluateOptions eo{&roster, be.gw.templates.get(), 1};
        return evaluate_trajectory(traj, set, *be.gw.judge, eo);
    });

    BenchmarkResult res;
    res.judge_prompt_hash = backend::judge_prompt_hash(be.gw.templates.get());
    std::map<std::pair<Mode, Valence>, std::pair<std::vector<std::map<std::string, double>>, int>> groups;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        ConversationResult cr{jobs[i].mode, jobs[i].context->id, jobs[i].context->valence, std::nullopt, "", 0};
        auto& g = groups[{cr.mode, cr.valence}];
        if (!outcomes[i].ok()) {
            cr.error = outcomes[i].error;
            ++g.second;
        } else if (outcomes[i].value->report.empty()) {
            cr.excluded_items = outcomes[i].value->excluded;
            cr.error = "every judged item failed";
            ++g.second;
        } else {
            cr.report = outcomes[i].value->report;
            cr.excluded_items = outcomes[i].value->excluded;
            g.first.push_back(criterion_means(*cr.report));
        }
        res.conversations.push_back(std::move(cr));
    }
    for (auto m : modes)
        for (auto v : {Valence::positive, Valence::negative, Valence::neutral, Valence::not_applicable}) {
            auto it = groups.find({m, v});
            if (it == groups.end()) continue;
            auto r = aggregate_units(it->second.first, ids, it->second.second);
            r.keys = {{"mode", std::string(to_string(m))}, {"valence", std::string(to_string(v))}};
            res.rows.push_back(std::move(r));
        }
    const auto header = detail::header_lines(cfg, be.gw.judge->identity(), res.judge_prompt_hash);
    res.csv = detail::render_csv(res.rows, ids, header);
    res.table = detail::render_table(res.rows, ids, header);
    return res;
}

} // namespace mascot::eval
