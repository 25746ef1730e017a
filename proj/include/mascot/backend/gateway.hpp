#pragma once

#include <atomic>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "mascot/backend/interfaces.hpp"
#include "mascot/core/prompt.hpp"

namespace mascot::backend {

// The set of backends a pipeline stage talks to. Generator/judge/embedder may
// be the same remote model or independent mocks.
struct Gateway {
    std::shared_ptr<TextGenerator> generator;
    std::shared_ptr<JudgeModel> judge;
    std::shared_ptr<Embedder> embedder;
    std::shared_ptr<const TemplateRegistry> templates;
    int max_concurrency = 8;
};

template <typename T>
struct Outcome {
    std::optional<T> value;
    std::string error;
    bool ok() const noexcept { return value.has_value(); }
};

// Runs fn over items on up to `limit` worker threads. Results keep input
// order; exceptions are captured per item.
template <typename In, typename Fn>
auto parallel_map(const std::vector<In>& items, int limit, Fn fn)
    -> std::vector<Outcome<std::invoke_result_t<Fn, const In&>>> {
    using R = std::invoke_result_t<Fn, const In&>;
    std::vector<Outcome<R>> out(items.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < items.size(); i = next++) {
            try {
                out[i].value.emplace(fn(items[i]));
            } catch (const std::exception& e) {
                out[i].error = e.what();
            }
        }
    };
    const auto n = std::min<std::size_t>(std::max(limit, 1), items.size());
    if (n <= 1) {
        worker();
        return out;
    }
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
    pool.clear();
    return out;
}

} // namespace mascot::backend
