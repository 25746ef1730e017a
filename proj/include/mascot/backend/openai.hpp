#pragma once

#include <memory>
#include <semaphore>
#include <string>
#include <vector>

#include <json.hpp>

#include "mascot/backend/interfaces.hpp"
#include "mascot/backend/transport.hpp"

namespace mascot::backend {

// Client for an OpenAI-compatible server (chat-completions + embeddings).
// Shareable across threads; at most `endpoint.max_concurrency` requests are in
// flight at once.
class OpenAiClient {
public:
    OpenAiClient(BackendEndpoint endpoint, std::shared_ptr<Transport> transport,
                 Sleeper sleeper = real_sleeper())
        : endpoint_(std::move(endpoint)),
          transport_(std::move(transport)),
          sleeper_(std::move(sleeper)),
          slots_(endpoint_.max_concurrency) {
        endpoint_.validate();
    }

    const BackendEndpoint& endpoint() const noexcept { return endpoint_; }

    nlohmann::json post(const std::string& path, const nlohmann::json& body) {
        HttpRequest req{"POST", path, body.dump()};
        slots_.acquire();
        HttpResponse res;
        try {
            res = send_with_retries(*transport_, endpoint_, req, sleeper_);
        } catch (...) {
            slots_.release();
            throw;
        }
        slots_.release();
        if (!res.ok()) {
            std::string detail = res.body.substr(0, 200);
            throw BackendError(endpoint_.base_url + path + " returned HTTP " +
                               std::to_string(res.status) + ": " + detail);
        }
        try {
            return nlohmann::json::parse(res.body);
        } catch (const nlohmann::json::parse_error&) {
            throw ProtocolError(endpoint_.base_url + path + " returned a body that is not JSON");
        }
    }

    std::vector<std::string> chat(const std::string& prompt, const GenerationParams& params) {
        std::vector<std::string> out;
        // Servers may cap `n`; keep asking until the requested count is reached.
        int round = 0;
        while (static_cast<int>(out.size()) < params.num_samples) {
            const int want = params.num_samples - static_cast<int>(out.size());
            nlohmann::json body = {{"model", endpoint_.model_name},
                                   {"messages", {{{"role", "user"}, {"content", prompt}}}},
                                   {"temperature", params.temperature},
                                   {"max_tokens", params.max_new_tokens},
                                   {"n", want}};
            if (params.seed) body["seed"] = *params.seed + static_cast<std::uint64_t>(round);
            auto res = post("/chat/completions", body);
            try {
                const auto& choices = res.at("choices");
                if (!choices.is_array() || choices.empty())
                    throw ProtocolError("chat completion returned no choices");
                for (const auto& c : choices) {
                    if (static_cast<int>(out.size()) == params.num_samples) break;
                    out.push_back(c.at("message").at("content").get<std::string>());
                }
            } catch (const nlohmann::json::exception& e) {
                throw ProtocolError(std::string("malformed chat completion: ") + e.what());
            }
            ++round;
        }
        return out;
    }

    std::vector<double> embedding(const std::string& text) {
        auto res = post("/embeddings", {{"model", endpoint_.model_name}, {"input", text}});
        try {
            return res.at("data").at(0).at("embedding").get<std::vector<double>>();
        } catch (const nlohmann::json::exception& e) {
            throw ProtocolError(std::string("malformed embedding response: ") + e.what());
        }
    }

private:
    BackendEndpoint endpoint_;
    std::shared_ptr<Transport> transport_;
    Sleeper sleeper_;
    std::counting_semaphore<> slots_;
};

class OpenAiGenerator final : public TextGenerator {
public:
    explicit OpenAiGenerator(std::shared_ptr<OpenAiClient> client) : client_(std::move(client)) {}

    std::vector<std::string> complete(const std::string& prompt,
                                      const GenerationParams& params) override {
        return client_->chat(prompt, params);
    }
    std::string identity() const override { return "openai:" + client_->endpoint().identity(); }

private:
    std::shared_ptr<OpenAiClient> client_;
};

// LLM judge at temperature 0 over the rendered judge prompt.
class OpenAiJudge final : public JudgeModel {
public:
    explicit OpenAiJudge(std::shared_ptr<OpenAiClient> client, int max_new_tokens = 512)
        : client_(std::move(client)), max_new_tokens_(max_new_tokens) {}

    std::string complete(const JudgeRequest& request) override {
        if (request.prompt.empty())
            throw ConfigError("LLM judge needs a rendered prompt (no template registry given)");
        std::string prompt = request.prompt;
        GenerationParams params{0.0, max_new_tokens_, 1, 0};
        return client_->chat(prompt, params).front();
    }
    std::string identity() const override { return "openai:" + client_->endpoint().identity(); }

private:
    std::shared_ptr<OpenAiClient> client_;
    int max_new_tokens_;
};

class OpenAiEmbedder final : public Embedder {
public:
    OpenAiEmbedder(std::shared_ptr<OpenAiClient> client, std::size_t dimension)
        : client_(std::move(client)), dimension_(dimension) {
        if (dimension_ == 0) throw ConfigError("embedding dimension must be > 0");
    }

    std::vector<double> embed(const std::string& text) override { return client_->embedding(text); }
    std::size_t dimension() const override { return dimension_; }
    std::string identity() const override { return "openai:" + client_->endpoint().identity(); }

private:
    std::shared_ptr<OpenAiClient> client_;
    std::size_t dimension_;
};

} // namespace mascot::backend
