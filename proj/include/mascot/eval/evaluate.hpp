#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mascot/backend/gateway.hpp"
#include "mascot/backend/judge.hpp"
#include "mascot/eval/metrics.hpp"

namespace mascot::eval {

struct JudgedItem {
    int turn_index = 0; // 0 for the collective (whole-trajectory) item
    std::string speaker_id;
    std::optional<backend::JudgeVerdict> verdict;
    std::string error; // set when the item was excluded
    int attempts = 0;
};

struct TrajectoryEvaluation {
    MetricReport report;
    std::map<std::string, MetricReport> per_persona; // agent-specific level only
    std::vector<JudgedItem> items;                   // in turn order
    int excluded = 0;
};

struct EvaluateOptions {
    const AgentRoster* roster = nullptr;
    const TemplateRegistry* templates = nullptr;
    int max_concurrency = 1;
};

namespace detail {

inline std::map<std::string, double> scaled(const backend::JudgeVerdict& v, const CriteriaSet& set) {
    std::map<std::string, double> out;
    for (const auto& c : set.criteria) out[c.id] = rescale_likert(v.criterion_scores.at(c.id));
    return out;
}

// judge() already re-asks once on a malformed reply; backend errors get one
// plain retry here. Either way the item is excluded after that.
inline JudgedItem judge_item(backend::JudgeModel& judge, const TemplateRegistry* templates,
                             const backend::JudgeInput& in, const CriteriaSet& set, int turn_index,
                             std::string speaker) {
    JudgedItem item{turn_index, std::move(speaker), std::nullopt, "", 0};
    for (int attempt = 0; attempt < 2 && !item.verdict; ++attempt) {
        ++item.attempts;
        try {
            item.verdict = backend::judge(judge, templates, in, set);
            item.error.clear();
        } catch (const JudgeFormatError& e) {
            item.error = e.what();
            break;
        } catch (const Error& e) {
            item.error = e.what();
        }
    }
    return item;
}

} // namespace detail

// Agent-specific sets judge every agent turn; the trajectory score averages
// turns within each persona and then across personas (std is across turns).
// Collective sets judge the formatted trajectory once.
inline TrajectoryEvaluation evaluate_trajectory(const Trajectory& trajectory, const CriteriaSet& set,
                                                backend::JudgeModel& judge, const EvaluateOptions& opts = {}) {
    set.validate();
    if (trajectory.turns.empty()) throw PreconditionError("evaluate_trajectory: trajectory is empty");
    const auto ids = set.ids();
    TrajectoryEvaluation ev;

    if (set.level == CriteriaLevel::collective) {
        backend::JudgeInput in;
        in.context = trajectory.context;
        in.response = format_history(trajectory.turns);
        in.roster_text = opts.roster ? format_roster(*opts.roster) : "(none)";
        ev.items.push_back(detail::judge_item(judge, opts.templates, in, set, 0, ""));
        ev.excluded = ev.items[0].verdict ? 0 : 1;
        std::vector<std::map<std::string, double>> units;
        if (ev.items[0].verdict) units.push_back(detail::scaled(*ev.items[0].verdict, set));
        ev.report = aggregate_units(units, ids, ev.excluded);
        return ev;
    }

    std::vector<const Turn*> agent_turns;
    for (const auto& t : trajectory.turns)
        if (t.is_agent()) agent_turns.push_back(&t);
    if (agent_turns.empty()) throw PreconditionError("evaluate_trajectory: no agent turns to judge");

    auto outcomes = backend::parallel_map(agent_turns, opts.max_concurrency, [&](const Turn* t) {
        backend::JudgeInput in;
        in.context = trajectory.context;
        in.response = t->text;
        if (opts.roster)
            if (const auto* p = opts.roster->find(t->speaker_id)) in.persona = *p;
        return detail::judge_item(judge, opts.templates, in, set, t->index, t->speaker_id);
    });

    std::vector<std::string> persona_order;
    std::map<std::string, std::vector<std::map<std::string, double>>> by_persona;
    std::vector<std::map<std::string, double>> all_units;
    std::map<std::string, int> excluded_by_persona;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        JudgedItem item = outcomes[i].ok()
                              ? std::move(*outcomes[i].value)
                              : JudgedItem{agent_turns[i]->index, agent_turns[i]->speaker_id, std::nullopt,
                                           outcomes[i].error, 1};
        if (!by_persona.count(item.speaker_id) && !excluded_by_persona.count(item.speaker_id))
            persona_order.push_back(item.speaker_id);
        if (item.verdict) {
            auto u = detail::scaled(*item.verdict, set);
            by_persona[item.speaker_id].push_back(u);
            all_units.push_back(std::move(u));
        } else {
            ++ev.excluded;
            ++excluded_by_persona[item.speaker_id];
        }
        ev.items.push_back(std::move(item));
    }

    std::vector<std::map<std::string, double>> persona_means;
    for (const auto& pid : persona_order) {
        auto r = aggregate_units(by_persona[pid], ids, excluded_by_persona[pid]);
        r.keys["persona"] = pid;
        if (!r.empty()) persona_means.push_back(criterion_means(r));
        ev.per_persona.emplace(pid, std::move(r));
    }

    MetricReport& rep = ev.report;
    rep.criterion_order = ids;
    rep.samples = static_cast<int>(all_units.size());
    rep.excluded = ev.excluded;
    if (!all_units.empty()) {
        const auto over_personas = aggregate_units(persona_means, ids);
        const auto over_turns = aggregate_units(all_units, ids);
        double sum = 0.0;
        for (const auto& id : ids) {
            rep.criteria[id] = {over_personas.criteria.at(id).mean, over_turns.criteria.at(id).std};
            sum += rep.criteria[id].mean;
        }
        rep.overall = sum / static_cast<double>(ids.size());
    }
    return ev;
}

} // namespace mascot::eval
