#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include "mascot/util/httplib.hpp"
#include <json.hpp>

#include "mascot/backend/types.hpp"
#include "mascot/util/hash.hpp"
#include "mascot/util/text.hpp"

namespace mascot::backend {

struct HttpRequest {
    std::string method = "POST";
    std::string path; // appended to the endpoint's path prefix
    std::string body;
};

// status == 0 means the request never produced an HTTP response
// (connection refused, timeout, TLS failure).
struct HttpResponse {
    int status = 0;
    std::string body;
    std::string transport_error;

    bool ok() const noexcept { return status >= 200 && status < 300; }
    bool transient() const noexcept { return status == 0 || status == 429 || status >= 500; }
};

class Transport {
public:
    virtual ~Transport() = default;
    virtual HttpResponse send(const BackendEndpoint& endpoint, const HttpRequest& request) = 0;
};

class HttpTransport final : public Transport {
public:
    HttpResponse send(const BackendEndpoint& endpoint, const HttpRequest& request) override {
        const auto url = parse_url(endpoint.base_url);
        const std::string origin = url.scheme + "://" + url.host + ":" + std::to_string(url.port);
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
        if (url.scheme == "https")
            throw ConfigError("https endpoint requested but the build has no TLS support: " +
                              endpoint.base_url);
#endif
        httplib::Client client(origin);
        const auto secs = std::chrono::duration_cast<std::chrono::seconds>(endpoint.timeout);
        const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(endpoint.timeout - secs);
        client.set_connection_timeout(secs.count(), usecs.count());
        client.set_read_timeout(secs.count(), usecs.count());
        client.set_write_timeout(secs.count(), usecs.count());

        httplib::Headers headers;
        if (auto key = endpoint.api_key()) headers.emplace("Authorization", "Bearer " + *key);

        const std::string path = url.path_prefix + request.path;
        httplib::Result res = request.method == "GET"
                                  ? client.Get(path, headers)
                                  : client.Post(path, headers, request.body, "application/json");
        HttpResponse out;
        if (!res) {
            out.transport_error = httplib::to_string(res.error());
            return out;
        }
        out.status = res->status;
        out.body = res->body;
        return out;
    }
};

// Key under which a request/response pair is stored in a fixture directory.
inline std::string request_key(const BackendEndpoint& endpoint, const HttpRequest& request) {
    std::string canonical = request.body;
    try {
        canonical = nlohmann::json::parse(request.body).dump();
    } catch (const nlohmann::json::exception&) {
    }
    return util::hash_hex(request.method + "\n" + endpoint.model_name + "\n" + request.path + "\n" +
                          canonical);
}

// Replays recorded pairs from `<dir>/<request_key>.json`, each holding
// {"request": {...}, "response": {"status": int, "body": <json or string>}}.
class ReplayTransport final : public Transport {
public:
    explicit ReplayTransport(std::filesystem::path dir) : dir_(std::move(dir)) {}

    HttpResponse send(const BackendEndpoint& endpoint, const HttpRequest& request) override {
        const auto file = dir_ / (request_key(endpoint, request) + ".json");
        if (!std::filesystem::exists(file))
            throw BackendError("no recorded fixture for request " + file.filename().string() +
                               " in " + dir_.string());
        auto j = nlohmann::json::parse(util::read_file(file.string()));
        HttpResponse out;
        out.status = j.at("response").at("status").get<int>();
        const auto& body = j.at("response").at("body");
        out.body = body.is_string() ? body.get<std::string>() : body.dump();
        return out;
    }

private:
    std::filesystem::path dir_;
};

// Forwards to an inner transport and writes every successful exchange in the
// replay format.
class RecordingTransport final : public Transport {
public:
    RecordingTransport(std::shared_ptr<Transport> inner, std::filesystem::path dir)
        : inner_(std::move(inner)), dir_(std::move(dir)) {
        std::filesystem::create_directories(dir_);
    }

    HttpResponse send(const BackendEndpoint& endpoint, const HttpRequest& request) override {
        auto res = inner_->send(endpoint, request);
        if (res.ok()) {
            nlohmann::json body;
            try {
                body = nlohmann::json::parse(res.body);
            } catch (const nlohmann::json::exception&) {
                body = res.body;
            }
            nlohmann::json rec = {
                {"request", {{"method", request.method}, {"path", request.path},
                             {"model", endpoint.model_name},
                             {"body", nlohmann::json::parse(request.body, nullptr, false)}}},
                {"response", {{"status", res.status}, {"body", body}}}};
            std::lock_guard lock(mu_);
            util::write_file((dir_ / (request_key(endpoint, request) + ".json")).string(),
                             rec.dump(2) + "\n");
        }
        return res;
    }

private:
    std::shared_ptr<Transport> inner_;
    std::filesystem::path dir_;
    std::mutex mu_;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

inline Sleeper real_sleeper() {
    return [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

// Delay before retry `attempt` (0-based): exponential from `base`, capped,
// with deterministic jitter in [d/2, d].
inline std::chrono::milliseconds backoff_delay(const BackoffPolicy& policy, int attempt,
                                               std::uint64_t jitter_seed) {
    double d = static_cast<double>(policy.base.count()) * std::pow(2.0, attempt);
    d = std::min(d, static_cast<double>(policy.cap.count()));
    const double u = static_cast<double>(util::splitmix64(jitter_seed + attempt) >> 11) * 0x1.0p-53;
    return std::chrono::milliseconds(static_cast<long long>(d * (0.5 + 0.5 * u)));
}

// Sends with retries on transient failures. Returns the final response, which
// is either 2xx or a non-transient error status; exhausting retries throws.
inline HttpResponse send_with_retries(Transport& transport, const BackendEndpoint& endpoint,
                                      const HttpRequest& request, const Sleeper& sleep,
                                      int* attempts_out = nullptr) {
    const std::uint64_t jitter_seed = util::fnv1a(request.body);
    HttpResponse last;
    for (int attempt = 0; attempt <= endpoint.max_retries; ++attempt) {
        if (attempts_out) *attempts_out = attempt + 1;
        last = transport.send(endpoint, request);
        if (!last.transient()) return last;
        if (attempt < endpoint.max_retries) sleep(backoff_delay(endpoint.backoff, attempt, jitter_seed));
    }
    throw BackendError("request to " + endpoint.base_url + request.path + " failed after " +
                       std::to_string(endpoint.max_retries + 1) + " attempts: " +
                       (last.status == 0 ? last.transport_error
                                         : "HTTP " + std::to_string(last.status)));
}

} // namespace mascot::backend
