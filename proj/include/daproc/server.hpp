#pragma once

// HTTP/JSON facade over an enactment engine. Mutations (apply, ticket
// results, state-space builds) are serialized; reads share a lock.

#include <daproc/engine.hpp>
#include <daproc/statespace.hpp>

#include <json.hpp>

#include <chrono>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>

namespace httplib {
class Server;
}

namespace daproc {

struct ApiResponse {
    int status = 200;
    std::string body;
    std::string content_type = "application/json";

    nlohmann::json json() const { return nlohmann::json::parse(body); }
};

struct ServerOptions {
    std::chrono::milliseconds ticket_ttl = std::chrono::minutes(10);
    std::function<std::chrono::steady_clock::time_point()> now;  // steady_clock when empty
};

// Request routing, independent of the transport so it can be tested directly.
class Api {
public:
    Api(Engine& engine, ServerOptions options = {});

    ApiResponse handle(const std::string& method, const std::string& path,
                       const std::string& body = {});

private:
    struct Ticket {
        std::uint64_t id = 0;
        StateId state = 0;
        GroundAction action;
        std::uint64_t binding_id = 0;
        EffectEvaluation evaluation;
        std::vector<PendingInvocation> interactive;
        std::chrono::steady_clock::time_point expiry;
        bool open = false;
    };

    ApiResponse get_spec();
    ApiResponse get_states();
    ApiResponse get_relation(StateId s, const std::string& name);
    ApiResponse get_enabled();
    ApiResponse get_bindings(const std::string& action);
    ApiResponse apply(const std::string& action, const nlohmann::json& body);
    ApiResponse post_results(std::uint64_t ticket, const nlohmann::json& body);
    ApiResponse get_history();
    ApiResponse build_statespace(const nlohmann::json& body);
    ApiResponse get_statespace(bool dot);

    ApiResponse commit(StateId s, const GroundAction& g, const EffectEvaluation& ev,
                       const InvocationResults& supplied);
    void expire_ticket();
    std::chrono::steady_clock::time_point now() const;

    Engine& engine_;
    ServerOptions options_;
    std::shared_mutex mutex_;
    Ticket ticket_;
    std::uint64_t next_ticket_ = 1;
    std::optional<TransitionSystem> statespace_;
};

// "host:port" (or ":port"); DAPROC_ADDR overrides `fallback` when set.
std::pair<std::string, int> resolve_bind_address(const std::string& fallback);

class HttpServer {
public:
    HttpServer(Engine& engine, ServerOptions options = {});
    ~HttpServer();

    // Binds; returns the bound port (useful with port 0). Throws Error on failure.
    int bind(const std::string& host, int port);
    void run();  // blocks until stop()
    void stop();

private:
    Api api_;
    std::unique_ptr<httplib::Server> http_;
};

}  // namespace daproc
