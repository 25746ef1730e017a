#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "mascot/core/json.hpp"
#include "mascot/error.hpp"

namespace mascot::eval {

inline constexpr double kLikertMin = 1.0;
inline constexpr double kLikertMax = 5.0;

// Maps a 1..5 Likert score linearly onto 0..100.
inline double rescale_likert(double s) {
    if (!(s >= kLikertMin && s <= kLikertMax))
        throw PreconditionError("likert score out of range [1,5]: " + std::to_string(s));
    return (s - kLikertMin) / (kLikertMax - kLikertMin) * 100.0;
}

// Inverse of rescale_likert.
inline double likert_from_scaled(double v) {
    if (!(v >= 0.0 && v <= 100.0))
        throw PreconditionError("scaled score out of range [0,100]: " + std::to_string(v));
    return kLikertMin + v / 100.0 * (kLikertMax - kLikertMin);
}

inline double mean_of(const std::vector<double>& xs) {
    require(!xs.empty(), "mean of empty sample");
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

// Population standard deviation.
inline double std_of(const std::vector<double>& xs) {
    const double m = mean_of(xs);
    double s = 0.0;
    for (double x : xs) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(xs.size()));
}

struct CriterionStat {
    double mean = 0.0;
    double std = 0.0;
    friend bool operator==(const CriterionStat&, const CriterionStat&) = default;
};

// Scores on the 0..100 scale. `samples` counts the units that were averaged
// (judged items for one trajectory, conversations for a subset); `excluded`
// counts units dropped after failures.
struct MetricReport {
    std::map<std::string, std::string> keys; // mode, valence, persona, mbti
    std::vector<std::string> criterion_order;
    std::map<std::string, CriterionStat> criteria;
    double overall = 0.0;
    int samples = 0;
    int excluded = 0;

    bool empty() const noexcept { return samples == 0; }

    void validate() const {
        if (empty()) return;
        double sum = 0.0;
        for (const auto& id : criterion_order) {
            const auto& c = criteria.at(id);
            if (!(c.mean >= 0.0 && c.mean <= 100.0) || !(c.std >= 0.0 && c.std <= 100.0))
                throw IntegrityError("criterion '" + id + "' outside [0,100]");
            sum += c.mean;
        }
        if (std::abs(overall - sum / static_cast<double>(criterion_order.size())) > 1e-9)
            throw IntegrityError("overall is not the mean of criterion means");
    }

    friend bool operator==(const MetricReport&, const MetricReport&) = default;
};

// One report from equally weighted units, each a criterion -> 0..100 map.
// Mean and std are taken across units.
inline MetricReport aggregate_units(const std::vector<std::map<std::string, double>>& units,
                                    const std::vector<std::string>& criterion_order, int excluded = 0) {
    require(!criterion_order.empty(), "aggregate_units: no criteria");
    MetricReport r;
    r.criterion_order = criterion_order;
    r.samples = static_cast<int>(units.size());
    r.excluded = excluded;
    if (units.empty()) return r;
    double sum = 0.0;
    for (const auto& id : criterion_order) {
        std::vector<double> xs;
        for (const auto& u : units) xs.push_back(u.at(id));
        CriterionStat st{mean_of(xs), std_of(xs)};
        sum += st.mean;
        r.criteria[id] = st;
    }
    r.overall = sum / static_cast<double>(criterion_order.size());
    return r;
}

inline std::map<std::string, double> criterion_means(const MetricReport& r) {
    std::map<std::string, double> out;
    for (const auto& [id, st] : r.criteria) out[id] = st.mean;
    return out;
}

inline void to_json(json& j, const MetricReport& r) {
    json crit = json::object();
    for (const auto& id : r.criterion_order) {
        auto it = r.criteria.find(id);
        if (it != r.criteria.end()) crit[id] = {{"mean", it->second.mean}, {"std", it->second.std}};
    }
    j = json{{"keys", r.keys},
             {"criteria", crit},
             {"overall", r.empty() ? json(nullptr) : json(r.overall)},
             {"samples", r.samples},
             {"excluded", r.excluded}};
}

} // namespace mascot::eval
