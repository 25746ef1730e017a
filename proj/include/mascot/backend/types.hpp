#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <map>
#include <optional>
#include <string>

#include "mascot/error.hpp"

namespace mascot::backend {

struct GenerationParams {
    double temperature = 0.7;
    int max_new_tokens = 512;
    int num_samples = 1;
    std::optional<std::uint64_t> seed;

    void validate() const {
        if (!std::isfinite(temperature) || temperature < 0)
            throw PreconditionError("temperature must be finite and >= 0");
        if (max_new_tokens <= 0) throw PreconditionError("max_new_tokens must be > 0");
        if (num_samples < 1) throw PreconditionError("num_samples must be >= 1");
    }
};

struct BackoffPolicy {
    std::chrono::milliseconds base{250};
    std::chrono::milliseconds cap{8000};
};

struct ParsedUrl {
    std::string scheme;
    std::string host;
    int port = 0;
    std::string path_prefix; // no trailing slash, may be empty
};

inline ParsedUrl parse_url(const std::string& url) {
    ParsedUrl out;
    auto sep = url.find("://");
    if (sep == std::string::npos) throw ConfigError("base_url missing scheme: " + url);
    out.scheme = url.substr(0, sep);
    if (out.scheme != "http" && out.scheme != "https")
        throw ConfigError("base_url scheme must be http or https: " + url);
    auto rest = url.substr(sep + 3);
    auto slash = rest.find('/');
    auto authority = rest.substr(0, slash);
    out.path_prefix = slash == std::string::npos ? "" : rest.substr(slash);
    while (!out.path_prefix.empty() && out.path_prefix.back() == '/') out.path_prefix.pop_back();
    if (authority.empty()) throw ConfigError("base_url missing host: " + url);
    auto colon = authority.rfind(':');
    if (colon != std::string::npos) {
        out.host = authority.substr(0, colon);
        auto port_text = authority.substr(colon + 1);
        char* end = nullptr;
        long port = std::strtol(port_text.c_str(), &end, 10);
        if (port_text.empty() || *end != '\0' || port <= 0 || port > 65535)
            throw ConfigError("base_url has invalid port: " + url);
        out.port = static_cast<int>(port);
    } else {
        out.host = authority;
        out.port = out.scheme == "https" ? 443 : 80;
    }
    if (out.host.empty()) throw ConfigError("base_url missing host: " + url);
    return out;
}

struct BackendEndpoint {
    std::string base_url;
    std::string model_name;
    std::string api_key_env; // name of the env var holding the credential, may be empty
    std::chrono::milliseconds timeout{60000};
    int max_retries = 3;
    BackoffPolicy backoff{};
    int max_concurrency = 8;

    void validate() const {
        parse_url(base_url);
        if (timeout.count() <= 0) throw ConfigError("endpoint timeout must be > 0");
        if (max_retries < 0) throw ConfigError("endpoint max_retries must be >= 0");
        if (max_concurrency < 1) throw ConfigError("endpoint max_concurrency must be >= 1");
    }

    std::optional<std::string> api_key() const {
        if (api_key_env.empty()) return std::nullopt;
        const char* v = std::getenv(api_key_env.c_str());
        if (!v || !*v) return std::nullopt;
        return std::string(v);
    }

    std::string identity() const { return base_url + "#" + model_name; }
};

struct JudgeVerdict {
    std::map<std::string, int> criterion_scores;
    std::optional<std::string> rationale;

    friend bool operator==(const JudgeVerdict&, const JudgeVerdict&) = default;
};

} // namespace mascot::backend
