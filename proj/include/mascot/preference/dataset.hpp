#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mascot/core/json.hpp"
#include "mascot/preference/pipeline.hpp"

namespace mascot::preference {

inline constexpr int kDatasetSchemaVersion = 1;

struct DatasetHeader {
    int schema_version = kDatasetSchemaVersion;
    int K = 8;
    double delta = 0.5;
    std::string criteria_set_id = "agent_specific.v1";

    friend bool operator==(const DatasetHeader&, const DatasetHeader&) = default;
};

struct Dataset {
    DatasetHeader header;
    std::vector<PreferencePair> pairs;
};

inline void to_json(json& j, const ScoredCandidate& c) {
    j = json{{"text", c.text},
             {"reasoning", c.reasoning ? json(*c.reasoning) : json(nullptr)},
             {"verdict", c.verdict},
             {"aggregate", c.aggregate}};
}

inline void to_json(json& j, const PreferencePair& p) {
    j = json{{"context_id", p.context_id},
             {"persona_id", p.persona_id},
             {"context_text", p.context_text},
             {"persona_description", p.persona_description},
             {"winner", p.winner},
             {"loser", p.loser},
             {"margin", p.margin}};
}

namespace detail {

inline JudgeVerdict verdict_from(const json& j, const std::string& where) {
    JudgeVerdict v;
    if (!j.is_object() || !j.contains("criterion_scores"))
        throw LoadError(where + ".criterion_scores: missing");
    for (const auto& [k, s] : j["criterion_scores"].items()) {
        if (!s.is_number_integer() || s.get<int>() < 1 || s.get<int>() > 5)
            throw LoadError(where + ".criterion_scores." + k + ": must be an integer in [1,5]");
        v.criterion_scores[k] = s.get<int>();
    }
    if (v.criterion_scores.empty()) throw LoadError(where + ".criterion_scores: empty");
    if (j.contains("rationale") && j["rationale"].is_string()) v.rationale = j["rationale"].get<std::string>();
    return v;
}

inline ScoredCandidate candidate_from(const json& j, const std::string& where) {
    if (!j.is_object()) throw LoadError(where + ": not an object");
    ScoredCandidate c;
    if (!j.contains("text") || !j["text"].is_string()) throw LoadError(where + ".text: missing or not a string");
    c.text = j["text"].get<std::string>();
    if (j.contains("reasoning") && j["reasoning"].is_string()) c.reasoning = j["reasoning"].get<std::string>();
    if (!j.contains("verdict")) throw LoadError(where + ".verdict: missing");
    c.verdict = verdict_from(j["verdict"], where + ".verdict");
    if (!j.contains("aggregate") || !j["aggregate"].is_number())
        throw LoadError(where + ".aggregate: missing or not a number");
    c.aggregate = j["aggregate"].get<double>();
    if (std::abs(c.aggregate - aggregate_score(c.verdict)) > 1e-9)
        throw LoadError(where + ".aggregate: does not equal the mean of the verdict scores");
    return c;
}

inline std::string string_field(const json& j, const char* key, const std::string& where) {
    if (!j.contains(key) || !j[key].is_string())
        throw LoadError(where + "." + key + ": missing or not a string");
    return j[key].get<std::string>();
}

} // namespace detail

inline PreferencePair pair_from_json(const json& j, double delta, const std::string& where) {
    if (!j.is_object()) throw LoadError(where + ": not a JSON object");
    PreferencePair p;
    p.context_id = detail::string_field(j, "context_id", where);
    p.persona_id = detail::string_field(j, "persona_id", where);
    p.context_text = mascot::detail::field_or<std::string>(j, "context_text", "");
    p.persona_description = mascot::detail::field_or<std::string>(j, "persona_description", "");
    if (!j.contains("winner")) throw LoadError(where + ".winner: missing");
    if (!j.contains("loser")) throw LoadError(where + ".loser: missing");
    p.winner = detail::candidate_from(j["winner"], where + ".winner");
    p.loser = detail::candidate_from(j["loser"], where + ".loser");
    if (!j.contains("margin") || !j["margin"].is_number())
        throw LoadError(where + ".margin: missing or not a number");
    p.margin = j["margin"].get<double>();
    if (std::abs(p.margin - (p.winner.aggregate - p.loser.aggregate)) > 1e-9)
        throw LoadError(where + ".margin: does not equal winner.aggregate - loser.aggregate");
    if (p.margin < delta - kMarginTolerance)
        throw LoadError(where + ".margin: " + std::to_string(p.margin) + " is below delta " +
                        std::to_string(delta));
    return p;
}

inline std::string serialize_dataset(const Dataset& ds) {
    std::string out = json{{"schema_version", ds.header.schema_version},
                           {"K", ds.header.K},
                           {"delta", ds.header.delta},
                           {"criteria_set_id", ds.header.criteria_set_id}}
                          .dump();
    out += '\n';
    for (const auto& p : ds.pairs) {
        out += json(p).dump();
        out += '\n';
    }
    return out;
}

inline void write_dataset(const Dataset& ds, const std::filesystem::path& path) {
    util::write_file(path.string(), serialize_dataset(ds));
}

// An empty file is an empty dataset. Otherwise the first line is the header
// and every further non-blank line one pair; errors name line and field.
inline Dataset read_dataset(const std::filesystem::path& path) {
    std::istringstream in(util::read_file(path.string()));
    Dataset ds;
    std::string line;
    int lineno = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (util::trim(line).empty()) continue;
        const std::string where = "line " + std::to_string(lineno);
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error&) {
            throw LoadError(where + ": not valid JSON");
        }
        if (!have_header) {
            if (!j.is_object() || !j.contains("schema_version"))
                throw LoadError(where + ".schema_version: missing dataset header");
            try {
                ds.header.schema_version = j.at("schema_version").get<int>();
                ds.header.K = j.at("K").get<int>();
                ds.header.delta = j.at("delta").get<double>();
                ds.header.criteria_set_id = j.at("criteria_set_id").get<std::string>();
            } catch (const json::exception& e) {
                throw LoadError(where + ": malformed header (" + e.what() + ")");
            }
            if (ds.header.schema_version != kDatasetSchemaVersion)
                throw LoadError(where + ".schema_version: unsupported version " +
                                std::to_string(ds.header.schema_version));
            have_header = true;
            continue;
        }
        ds.pairs.push_back(pair_from_json(j, ds.header.delta, where));
    }
    return ds;
}

struct PipelineOutputs {
    std::filesystem::path dataset;
    std::filesystem::path candidates_log;
    std::filesystem::path summary;
    PipelineSummary stats;
};

// Full preference-data run: writes `preferences.jsonl`, a candidate log
// (`candidates.jsonl`, one scored candidate per line) and `summary.json`.
inline PipelineOutputs run_pipeline(const std::vector<ConversationContext>& contexts,
                                    const AgentRoster& roster, const PipelineConfig& config,
                                    const backend::Gateway& gw, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    auto run = run_cells(contexts, roster, config, gw);

    Dataset ds{{kDatasetSchemaVersion, config.K, config.delta, config.criteria_set_id}, {}};
    std::string log;
    for (const auto& cell : run.cells) {
        for (const auto& c : cell.candidates) {
            json j = c;
            j["context_id"] = cell.context_id;
            j["persona_id"] = cell.persona_id;
            log += j.dump() + "\n";
        }
        ds.pairs.insert(ds.pairs.end(), cell.pairs.begin(), cell.pairs.end());
    }

    PipelineOutputs out{out_dir / "preferences.jsonl", out_dir / "candidates.jsonl",
                        out_dir / "summary.json", run.summary};
    write_dataset(ds, out.dataset);
    util::write_file(out.candidates_log.string(), log);
    json failures = json::array();
    for (const auto& f : run.summary.failures)
        failures.push_back({{"context_id", f.context_id}, {"persona_id", f.persona_id}, {"error", f.error}});
    json summary = {{"cells_total", run.summary.cells_total},
                    {"cells_failed", run.summary.cells_failed},
                    {"candidates", run.summary.candidates},
                    {"pairs", run.summary.pairs},
                    {"pair_yield", run.summary.pair_yield},
                    {"failures", failures}};
    util::write_file(out.summary.string(), summary.dump(2) + "\n");
    return out;
}

} // namespace mascot::preference
