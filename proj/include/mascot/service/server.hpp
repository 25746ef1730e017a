#pragma once

#include <chrono>
#include <optional>
#include <string>

#include "mascot/util/httplib.hpp"

#include "mascot/service/manager.hpp"

namespace mascot::service {

struct ServerOptions {
    std::string host = "127.0.0.1";
    int port = 8080; // 0 picks a free port
    std::optional<std::string> auth_token; // bearer token; off when unset
    int worker_threads = 32;               // SSE streams hold a worker each
    std::chrono::milliseconds heartbeat{10000};
};

inline int http_status_for(const std::exception& e) {
    if (dynamic_cast<const NotFoundError*>(&e)) return 404;
    if (dynamic_cast<const ConflictError*>(&e)) return 409;
    if (dynamic_cast<const PreconditionError*>(&e) || dynamic_cast<const ConfigError*>(&e) ||
        dynamic_cast<const LoadError*>(&e) || dynamic_cast<const json::exception*>(&e))
        return 400;
    return 500;
}

inline std::string sse_frame(const json& ev) {
    return "id: " + std::to_string(ev.at("seq").get<std::uint64_t>()) + "\nevent: " + ev.at("type").get<std::string>() +
           "\ndata: " + ev.dump() + "\n\n";
}

// REST + SSE front end over a SessionManager.
class HttpService {
public:
    HttpService(SessionManager& manager, ServerOptions opts) : mgr_(manager), opts_(std::move(opts)) {
        if (opts_.port < 0 || opts_.port > 65535) throw ConfigError("port must be in [0, 65535]");
        const auto threads = static_cast<std::size_t>(std::max(opts_.worker_threads, 2));
        svr_.new_task_queue = [threads] { return new httplib::ThreadPool(threads); };
        routes();
    }

    ~HttpService() { stop(); }

    // Binds and returns the bound port (useful with port 0).
    int bind() {
        if (opts_.port == 0) {
            port_ = svr_.bind_to_any_port(opts_.host);
            if (port_ < 0) throw ConfigError("cannot bind " + opts_.host);
        } else {
            if (!svr_.bind_to_port(opts_.host, opts_.port))
                throw ConfigError("cannot bind " + opts_.host + ":" + std::to_string(opts_.port));
            port_ = opts_.port;
        }
        return port_;
    }

    // Blocks until stop().
    void run() { svr_.listen_after_bind(); }

    void stop() {
        stopping_ = true;
        if (svr_.is_running()) svr_.stop();
    }

    int port() const noexcept { return port_; }

private:
    template <typename Fn>
    void guarded(httplib::Response& res, Fn fn) {
        try {
            fn();
        } catch (const std::exception& e) {
            res.status = http_status_for(e);
            const auto* me = dynamic_cast<const Error*>(&e);
            reply(res, {{"error", me ? me->kind() : std::string("bad_request")}, {"message", e.what()}}, res.status);
        }
    }

    static void reply(httplib::Response& res, const json& body, int status = 200) {
        res.status = status;
        res.set_content(body.dump(), "application/json");
    }

    static json body_of(const httplib::Request& req) {
        if (util::trim(req.body).empty()) return json::object();
        auto j = json::parse(req.body);
        if (!j.is_object()) throw PreconditionError("request body must be a JSON object");
        return j;
    }

    static std::string str_field(const json& j, const char* key, const std::string& def, bool required = false) {
        auto it = j.find(key);
        if (it == j.end() || it->is_null()) {
            if (required) throw PreconditionError(std::string("missing field '") + key + "'");
            return def;
        }
        if (!it->is_string()) throw PreconditionError(std::string("field '") + key + "' must be a string");
        return it->get<std::string>();
    }

    void routes() {
        svr_.set_pre_routing_handler([this](const httplib::Request& req, httplib::Response& res) {
            res.set_header("Access-Control-Allow-Origin", "*");
            res.set_header("Access-Control-Allow-Headers", "Authorization, Content-Type, Last-Event-ID");
            res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
            if (req.method == "OPTIONS") {
                res.status = 204;
                return httplib::Server::HandlerResponse::Handled;
            }
            if (opts_.auth_token && req.path != "/healthz" &&
                req.get_header_value("Authorization") != "Bearer " + *opts_.auth_token) {
                reply(res, {{"error", "unauthorized"}, {"message", "missing or invalid bearer token"}}, 401);
                return httplib::Server::HandlerResponse::Handled;
            }
            return httplib::Server::HandlerResponse::Unhandled;
        });

        svr_.Get("/healthz", [this](const httplib::Request&, httplib::Response& res) {
            reply(res, {{"status", "ok"}, {"sessions", mgr_.session_count()}});
        });

        svr_.Get("/personas", [this](const httplib::Request&, httplib::Response& res) {
            guarded(res, [&] { reply(res, mgr_.personas_json()); });
        });

        svr_.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                const auto b = body_of(req);
                reply(res,
                      mgr_.create_session(str_field(b, "roster_id", "", true), str_field(b, "mode", "mascot"),
                                          str_field(b, "scenario", "")),
                      201);
            });
        });

        svr_.Get(R"(/sessions/([0-9a-zA-Z_-]+))", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] { reply(res, mgr_.snapshot(req.matches[1])); });
        });

        svr_.Post(R"(/sessions/([0-9a-zA-Z_-]+)/messages)", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                const auto b = body_of(req);
                reply(res, mgr_.post_message(req.matches[1], str_field(b, "text", "", true)), 202);
            });
        });

        svr_.Post(R"(/sessions/([0-9a-zA-Z_-]+)/close)", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] { reply(res, mgr_.close_session(req.matches[1])); });
        });

        svr_.Get(R"(/sessions/([0-9a-zA-Z_-]+)/events)", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] { stream(req, res); });
        });
    }

    // Resume point: Last-Event-ID header, else ?after=, else 0. ?follow=0
    // returns what is already logged and ends the stream.
    void stream(const httplib::Request& req, httplib::Response& res) {
        const std::string id = req.matches[1];
        mgr_.snapshot(id); // 404 before any streaming starts
        std::string after_text = req.get_header_value("Last-Event-ID");
        if (after_text.empty() && req.has_param("after")) after_text = req.get_param_value("after");
        std::uint64_t after = 0;
        if (!after_text.empty()) {
            std::size_t used = 0;
            try {
                after = std::stoull(after_text, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != after_text.size()) throw PreconditionError("invalid resume sequence: " + after_text);
        }
        const bool follow = req.get_param_value("follow") != "0";
        auto cursor = std::make_shared<std::uint64_t>(after);
        res.set_header("Cache-Control", "no-cache");
        res.set_header("X-Accel-Buffering", "no");
        res.set_chunked_content_provider(
            "text/event-stream", [this, id, cursor, follow](std::size_t, httplib::DataSink& sink) {
                bool finished = false;
                std::vector<json> events;
                // Short waits so stop() is noticed quickly.
                const auto deadline = std::chrono::steady_clock::now() + opts_.heartbeat;
                try {
                    do {
                        events = mgr_.events_after(id, *cursor, follow ? std::chrono::milliseconds(200)
                                                                       : std::chrono::milliseconds(0),
                                                   &finished);
                    } while (follow && events.empty() && !finished && !stopping_ && sink.is_writable() &&
                             std::chrono::steady_clock::now() < deadline);
                } catch (const std::exception&) {
                    sink.done();
                    return true;
                }
                if (events.empty() && follow && !finished && !stopping_) {
                    const std::string beat = ": keepalive\n\n";
                    return sink.write(beat.data(), beat.size());
                }
                for (const auto& ev : events) {
                    const auto frame = sse_frame(ev);
                    if (!sink.write(frame.data(), frame.size())) return false;
                    *cursor = ev.at("seq").get<std::uint64_t>();
                }
                if (!follow || stopping_ || (finished && events.empty())) sink.done();
                return true;
            });
    }

    SessionManager& mgr_;
    ServerOptions opts_;
    httplib::Server svr_;
    int port_ = -1;
    std::atomic<bool> stopping_{false};
};

} // namespace mascot::service
