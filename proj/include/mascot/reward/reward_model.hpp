#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mascot/backend/interfaces.hpp"
#include "mascot/core/json.hpp"
#include "mascot/preference/pipeline.hpp"
#include "mascot/util/text.hpp"

namespace mascot::reward {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Scalar head r(x) = w2 . tanh(W1 x + b1) + b2. With hidden_dim == 0 the
// head is linear: r(x) = w2 . x + b2.
struct RewardModelParams {
    std::size_t feature_dim = 0;
    std::size_t hidden_dim = 0;
    Matrix W1; // hidden x feature
    Vector b1; // hidden
    Vector w2; // hidden (or feature when linear)
    double b2 = 0.0;

    static RewardModelParams zeros(std::size_t feature_dim, std::size_t hidden_dim) {
        RewardModelParams p;
        p.feature_dim = feature_dim;
        p.hidden_dim = hidden_dim;
        p.W1 = Matrix::Zero(static_cast<Eigen::Index>(hidden_dim),
                            static_cast<Eigen::Index>(hidden_dim ? feature_dim : 0));
        p.b1 = Vector::Zero(static_cast<Eigen::Index>(hidden_dim));
        p.w2 = Vector::Zero(static_cast<Eigen::Index>(hidden_dim ? hidden_dim : feature_dim));
        return p;
    }

    static RewardModelParams random(std::size_t feature_dim, std::size_t hidden_dim, std::uint64_t seed) {
        auto p = zeros(feature_dim, hidden_dim);
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> n01(0.0, 1.0);
        const double s1 = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(feature_dim, 1)));
        for (Eigen::Index i = 0; i < p.W1.size(); ++i) p.W1.data()[i] = s1 * n01(rng);
        const double s2 = 1.0 / std::sqrt(static_cast<double>(std::max<Eigen::Index>(p.w2.size(), 1)));
        for (Eigen::Index i = 0; i < p.w2.size(); ++i) p.w2[i] = s2 * n01(rng);
        return p;
    }

    bool linear() const noexcept { return hidden_dim == 0; }

    std::size_t size() const noexcept {
        return static_cast<std::size_t>(W1.size() + b1.size() + w2.size() + 1);
    }

    void validate() const {
        const auto h = static_cast<Eigen::Index>(hidden_dim);
        const auto f = static_cast<Eigen::Index>(feature_dim);
        if (W1.rows() != h || W1.cols() != (hidden_dim ? f : 0) || b1.size() != h ||
            w2.size() != (hidden_dim ? h : f))
            throw ShapeError("reward model parameters have inconsistent dimensions");
        if (!W1.allFinite() || !b1.allFinite() || !w2.allFinite() || !std::isfinite(b2))
            throw ShapeError("reward model parameters are not finite");
    }

    // Flat view: W1 (column-major), b1, w2, b2.
    std::vector<double> flatten() const {
        std::vector<double> out;
        out.reserve(size());
        out.insert(out.end(), W1.data(), W1.data() + W1.size());
        out.insert(out.end(), b1.data(), b1.data() + b1.size());
        out.insert(out.end(), w2.data(), w2.data() + w2.size());
        out.push_back(b2);
        return out;
    }

    void unflatten(const std::vector<double>& flat) {
        if (flat.size() != size()) throw ShapeError("flat parameter vector has the wrong length");
        auto it = flat.begin();
        std::copy_n(it, W1.size(), W1.data());
        it += W1.size();
        std::copy_n(it, b1.size(), b1.data());
        it += b1.size();
        std::copy_n(it, w2.size(), w2.data());
        it += w2.size();
        b2 = *it;
    }

    friend bool operator==(const RewardModelParams& a, const RewardModelParams& b) {
        return a.feature_dim == b.feature_dim && a.hidden_dim == b.hidden_dim && a.W1 == b.W1 &&
               a.b1 == b.b1 && a.w2 == b.w2 && a.b2 == b.b2;
    }
};

using FeaturePair = std::pair<Vector, Vector>; // (winner, loser)

inline double rm_score(const RewardModelParams& params, const Vector& features) {
    if (static_cast<std::size_t>(features.size()) != params.feature_dim)
        throw ShapeError("feature dimension " + std::to_string(features.size()) +
                         " does not match reward model input " + std::to_string(params.feature_dim));
    if (params.linear()) return params.w2.dot(features) + params.b2;
    Vector h = (params.W1 * features + params.b1).array().tanh().matrix();
    return params.w2.dot(h) + params.b2;
}

// log(1 + e^z) without overflow.
inline double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

inline double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// Pairwise logistic loss on a score difference: -log sigma(d).
inline double pair_loss(double diff) { return softplus(-diff); }

inline double rm_loss(const RewardModelParams& params, const std::vector<FeaturePair>& batch) {
    require(!batch.empty(), "rm_loss: batch must be non-empty");
    double total = 0;
    for (const auto& [w, l] : batch) total += pair_loss(rm_score(params, w) - rm_score(params, l));
    return total / static_cast<double>(batch.size());
}

namespace detail {

// Accumulates coeff * d r(x) / d params into grad.
inline void accumulate_score_grad(const RewardModelParams& p, const Vector& x, double coeff,
                                  RewardModelParams& grad) {
    grad.b2 += coeff;
    if (p.linear()) {
        grad.w2 += coeff * x;
        return;
    }
    Vector h = (p.W1 * x + p.b1).array().tanh().matrix();
    grad.w2 += coeff * h;
    Vector dpre = coeff * (p.w2.array() * (1.0 - h.array().square())).matrix();
    grad.b1 += dpre;
    grad.W1.noalias() += dpre * x.transpose();
}

} // namespace detail

// Analytic gradient of rm_loss, same shape as params.
inline RewardModelParams rm_grad(const RewardModelParams& params, const std::vector<FeaturePair>& batch) {
    require(!batch.empty(), "rm_grad: batch must be non-empty");
    auto grad = RewardModelParams::zeros(params.feature_dim, params.hidden_dim);
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    for (const auto& [w, l] : batch) {
        const double diff = rm_score(params, w) - rm_score(params, l);
        const double dloss_ddiff = -sigmoid(-diff) * inv_n;
        detail::accumulate_score_grad(params, w, dloss_ddiff, grad);
        detail::accumulate_score_grad(params, l, -dloss_ddiff, grad);
    }
    return grad;
}

// Fraction of pairs the model orders correctly (r_w > r_l).
inline double pairwise_accuracy(const RewardModelParams& params, const std::vector<FeaturePair>& pairs) {
    if (pairs.empty()) return 0.0;
    int correct = 0;
    for (const auto& [w, l] : pairs) correct += rm_score(params, w) > rm_score(params, l);
    return static_cast<double>(correct) / static_cast<double>(pairs.size());
}

struct RmTrainConfig {
    std::size_t hidden_dim = 64;
    int epochs = 20;
    double learning_rate = 0.05;
    double momentum = 0.9; // 0 gives plain gradient descent
    std::size_t batch_size = 32; // 0 means full batch
    double holdout_fraction = 0.2;
    std::uint64_t seed = 0;

    void validate() const {
        if (epochs < 0) throw ConfigError("epochs must be >= 0");
        if (!(learning_rate >= 0)) throw ConfigError("learning_rate must be >= 0");
        if (!(momentum >= 0 && momentum < 1)) throw ConfigError("momentum must be in [0,1)");
        if (!(holdout_fraction >= 0 && holdout_fraction < 1))
            throw ConfigError("holdout_fraction must be in [0,1)");
    }
};

struct RmEpochStats {
    int epoch = 0;
    double train_loss = 0.0;
    double heldout_accuracy = 0.0;
};

struct RmTrainReport {
    std::size_t train_pairs = 0;
    std::size_t heldout_pairs = 0;
    double initial_train_loss = 0.0;
    double initial_heldout_accuracy = 0.0;
    std::vector<RmEpochStats> epochs;

    double final_heldout_accuracy() const {
        return epochs.empty() ? initial_heldout_accuracy : epochs.back().heldout_accuracy;
    }
};

struct RmTrainResult {
    RewardModelParams params;
    RmTrainReport report;
};

// Seeded mini-batch gradient descent with momentum on precomputed features.
// The held-out split is the last `holdout_fraction` of a seeded shuffle.
inline RmTrainResult train_rm(const std::vector<FeaturePair>& pairs, const RmTrainConfig& cfg) {
    cfg.validate();
    require(!pairs.empty(), "train_rm: dataset must be non-empty");
    const auto dim = static_cast<std::size_t>(pairs.front().first.size());
    for (const auto& [w, l] : pairs)
        if (static_cast<std::size_t>(w.size()) != dim || static_cast<std::size_t>(l.size()) != dim)
            throw ShapeError("train_rm: inconsistent feature dimensions");

    std::mt19937_64 rng(cfg.seed);
    std::vector<std::size_t> order(pairs.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    auto n_hold = static_cast<std::size_t>(std::floor(cfg.holdout_fraction * pairs.size()));
    if (n_hold >= pairs.size()) n_hold = pairs.size() - 1;
    std::vector<FeaturePair> train, held;
    for (std::size_t i = 0; i < order.size(); ++i)
        (i < pairs.size() - n_hold ? train : held).push_back(pairs[order[i]]);

    RmTrainResult res{RewardModelParams::random(dim, cfg.hidden_dim, util::splitmix64(cfg.seed)), {}};
    res.report.train_pairs = train.size();
    res.report.heldout_pairs = held.size();
    res.report.initial_train_loss = rm_loss(res.params, train);
    res.report.initial_heldout_accuracy = pairwise_accuracy(res.params, held.empty() ? train : held);

    auto velocity = RewardModelParams::zeros(dim, cfg.hidden_dim);
    const std::size_t bs = cfg.batch_size == 0 ? train.size() : std::min(cfg.batch_size, train.size());
    std::vector<std::size_t> idx(train.size());
    std::iota(idx.begin(), idx.end(), 0);
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        if (bs < train.size()) std::shuffle(idx.begin(), idx.end(), rng);
        for (std::size_t start = 0; start < train.size(); start += bs) {
            std::vector<FeaturePair> batch;
            for (std::size_t k = start; k < std::min(start + bs, train.size()); ++k) batch.push_back(train[idx[k]]);
            auto g = rm_grad(res.params, batch);
            velocity.W1 = cfg.momentum * velocity.W1 - cfg.learning_rate * g.W1;
            velocity.b1 = cfg.momentum * velocity.b1 - cfg.learning_rate * g.b1;
            velocity.w2 = cfg.momentum * velocity.w2 - cfg.learning_rate * g.w2;
            velocity.b2 = cfg.momentum * velocity.b2 - cfg.learning_rate * g.b2;
            res.params.W1 += velocity.W1;
            res.params.b1 += velocity.b1;
            res.params.w2 += velocity.w2;
            res.params.b2 += velocity.b2;
        }
        const double loss = rm_loss(res.params, train);
        if (!std::isfinite(loss)) throw DivergenceError("reward model loss diverged at epoch " + std::to_string(epoch));
        res.report.epochs.push_back({epoch, loss, pairwise_accuracy(res.params, held.empty() ? train : held)});
    }
    return res;
}

// Reward-model input for (context, persona, response): the three embeddings
// concatenated.
class FeatureExtractor {
public:
    explicit FeatureExtractor(backend::Embedder& embedder) : embedder_(embedder) {}

    std::size_t dimension() const { return 3 * embedder_.dimension(); }
    std::string embedder_identity() const { return embedder_.identity(); }

    Vector features(const std::string& context, const std::string& persona, const std::string& response) {
        Vector out(static_cast<Eigen::Index>(dimension()));
        const auto d = static_cast<Eigen::Index>(embedder_.dimension());
        out.segment(0, d) = cached(context);
        out.segment(d, d) = cached(persona);
        out.segment(2 * d, d) = cached(response);
        return out;
    }

private:
    const Vector& cached(const std::string& text) {
        auto it = cache_.find(text);
        if (it != cache_.end()) return it->second;
        auto v = backend::embed(embedder_, text);
        return cache_.emplace(text, Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()))).first->second;
    }

    backend::Embedder& embedder_;
    std::map<std::string, Vector> cache_;
};

inline std::vector<FeaturePair> dataset_features(const std::vector<preference::PreferencePair>& pairs,
                                                 FeatureExtractor& fx) {
    std::vector<FeaturePair> out;
    out.reserve(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const auto& p = pairs[i];
        try {
            out.emplace_back(fx.features(p.context_text, p.persona_description, p.winner.text),
                             fx.features(p.context_text, p.persona_description, p.loser.text));
        } catch (const std::exception& e) {
            throw BackendError("feature extraction failed for pair " + std::to_string(i) + " (" +
                               p.context_id + "/" + p.persona_id + "): " + e.what());
        }
    }
    return out;
}

inline constexpr const char* kCheckpointFormat = "mascot.reward_model";
inline constexpr int kCheckpointVersion = 1;

inline json checkpoint_json(const RewardModelParams& p, const std::string& embedder_identity) {
    auto vec = [](const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
    std::vector<std::vector<double>> w1;
    for (Eigen::Index r = 0; r < p.W1.rows(); ++r) w1.push_back(vec(p.W1.row(r).transpose()));
    return json{{"format", kCheckpointFormat},  {"version", kCheckpointVersion},
                {"feature_dim", p.feature_dim}, {"hidden_dim", p.hidden_dim},
                {"embedder", embedder_identity}, {"W1", w1},
                {"b1", vec(p.b1)},               {"w2", vec(p.w2)},
                {"b2", p.b2}};
}

inline void save_checkpoint(const RewardModelParams& p, const std::string& embedder_identity,
                            const std::filesystem::path& path) {
    util::write_file(path.string(), checkpoint_json(p, embedder_identity).dump(2) + "\n");
}

// Loads a checkpoint; when `expected_embedder` is non-empty it must match the
// identity the checkpoint was trained with.
inline RewardModelParams load_checkpoint(const std::filesystem::path& path,
                                         const std::string& expected_embedder = {}) {
    json j;
    try {
        j = json::parse(util::read_file(path.string()));
    } catch (const json::parse_error& e) {
        throw LoadError(path.string() + ": " + e.what());
    }
    if (j.value("format", "") != kCheckpointFormat || j.value("version", 0) != kCheckpointVersion)
        throw LoadError(path.string() + ": not a version " + std::to_string(kCheckpointVersion) +
                        " reward model checkpoint");
    const auto embedder = j.value("embedder", "");
    if (!expected_embedder.empty() && embedder != expected_embedder)
        throw ConfigError("checkpoint was trained on features from '" + embedder + "', not '" +
                          expected_embedder + "'");
    try {
        auto p = RewardModelParams::zeros(j.at("feature_dim").get<std::size_t>(), j.at("hidden_dim").get<std::size_t>());
        auto w1 = j.at("W1").get<std::vector<std::vector<double>>>();
        if (w1.size() != static_cast<std::size_t>(p.W1.rows())) throw ShapeError("W1 row count mismatch");
        for (const auto& row : w1)
            if (row.size() != static_cast<std::size_t>(p.W1.cols())) throw ShapeError("W1 column count mismatch");
        for (std::size_t r = 0; r < w1.size(); ++r) {
            for (std::size_t c = 0; c < w1[r].size(); ++c)
                p.W1(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = w1[r][c];
        }
        auto b1 = j.at("b1").get<std::vector<double>>();
        auto w2 = j.at("w2").get<std::vector<double>>();
        if (b1.size() != static_cast<std::size_t>(p.b1.size()) || w2.size() != static_cast<std::size_t>(p.w2.size()))
            throw ShapeError("bias/output vector length mismatch");
        p.b1 = Eigen::Map<Vector>(b1.data(), static_cast<Eigen::Index>(b1.size()));
        p.w2 = Eigen::Map<Vector>(w2.data(), static_cast<Eigen::Index>(w2.size()));
        p.b2 = j.at("b2").get<double>();
        p.validate();
        return p;
    } catch (const json::exception& e) {
        throw LoadError(path.string() + ": " + e.what());
    } catch (const ShapeError& e) {
        throw LoadError(path.string() + ": " + e.what());
    }
}

} // namespace mascot::reward
