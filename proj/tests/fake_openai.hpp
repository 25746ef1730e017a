#pragma once

#include <atomic>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "mascot/util/httplib.hpp"
#include <json.hpp>

namespace mascot::test {

// Minimal OpenAI-compatible server for exercising the HTTP client path.
class FakeOpenAi {
public:
    using ChatHandler = std::function<nlohmann::json(const nlohmann::json& request)>;

    explicit FakeOpenAi(ChatHandler chat = {}) : chat_(std::move(chat)) {
        if (!chat_) chat_ = [](const nlohmann::json& req) { return echo_reply(req, 1); };
        server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
            enter();
            auto body = nlohmann::json::parse(req.body);
            {
                std::lock_guard lock(mu_);
                requests_.push_back(body);
            }
            if (fail_next_ > 0) {
                --fail_next_;
                res.status = 503;
                res.set_content("overloaded", "text/plain");
            } else {
                if (delay_ms_ > 0) std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms_));
                res.set_content(chat_(body).dump(), "application/json");
            }
            leave();
        });
        server_.Post("/v1/embeddings", [this](const httplib::Request& req, httplib::Response& res) {
            auto body = nlohmann::json::parse(req.body);
            const auto text = body["input"].get<std::string>();
            std::vector<double> v(4);
            for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(text.size() + i);
            res.set_content(nlohmann::json{{"data", {{{"embedding", v}, {"index", 0}}}}}.dump(),
                            "application/json");
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }

    ~FakeOpenAi() {
        server_.stop();
        if (thread_.joinable()) thread_.join();
    }

    std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }

    // Single-choice reply that echoes the prompt, regardless of `n`.
    static nlohmann::json echo_reply(const nlohmann::json& req, int choices) {
        nlohmann::json out = {{"object", "chat.completion"}, {"choices", nlohmann::json::array()}};
        const auto prompt = req["messages"][0]["content"].get<std::string>();
        for (int i = 0; i < choices; ++i)
            out["choices"].push_back({{"index", i},
                                      {"message", {{"role", "assistant"}, {"content", "echo: " + prompt}}},
                                      {"finish_reason", "stop"}});
        return out;
    }

    std::vector<nlohmann::json> requests() const {
        std::lock_guard lock(mu_);
        return requests_;
    }
    void fail_next(int n) { fail_next_ = n; }
    void delay(int ms) { delay_ms_ = ms; }
    int peak_concurrency() const { return peak_; }

private:
    void enter() {
        int now = ++in_flight_;
        int peak = peak_.load();
        while (now > peak && !peak_.compare_exchange_weak(peak, now)) {
        }
    }
    void leave() { --in_flight_; }

    httplib::Server server_;
    ChatHandler chat_;
    std::thread thread_;
    int port_ = 0;
    mutable std::mutex mu_;
    std::vector<nlohmann::json> requests_;
    std::atomic<int> fail_next_{0};
    std::atomic<int> delay_ms_{0};
    std::atomic<int> in_flight_{0};
    std::atomic<int> peak_{0};
};

} // namespace mascot::test
