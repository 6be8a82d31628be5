#pragma once

// Service manager: resolves service invocations during enactment, and the mock
// manager that supplies representative results during state-space construction.

#include <daproc/model.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace daproc {

struct PendingInvocation {
    std::uint64_t id = 0;
    std::string service;
    Tuple args;
    std::string signature;  // maxAmnt(Kriss,Paris)

    friend bool operator==(const PendingInvocation&, const PendingInvocation&) = default;
};

std::string call_signature(std::string_view service, const Tuple& args);

enum class HandlerKind { BuiltinGenpk, Table, Interactive, Mock };

std::string_view to_string(HandlerKind k);

struct ServiceBehavior {
    enum class Mode { Enumerated, Abstract, Table, Interactive };
    Mode mode = Mode::Interactive;
    std::vector<Value> values;                 // Enumerated
    std::int64_t seed = 0;                     // Abstract
    std::map<Tuple, Value> table;              // Table
    std::optional<Value> fallback;             // Table, for argument tuples not listed
};

// Parsed form of the services JSON file:
// {"services": {"cost": {"mode": "enumerated", "values": [400, 600]}, ...}}
struct ServiceConfig {
    std::map<std::string, ServiceBehavior, std::less<>> services;
};

ServiceConfig parse_service_config(std::string_view json_text);
ServiceConfig load_service_config(const std::string& path);

// 1 + the largest integer held in any primary-key position of s (0 when none).
std::int64_t next_key_after(const Spec& spec, const Snapshot& s);

// Every constant occurring in s.
std::set<Value> active_domain(const Snapshot& s);

class ServiceManager {
public:
    // Registers the built-in key generator for a declared `genpk() : INT`.
    explicit ServiceManager(const Spec& spec);

    void register_genpk(const std::string& service);
    void register_table(const std::string& service, std::map<Tuple, Value> table,
                        std::optional<Value> fallback = std::nullopt);
    void register_interactive(const std::string& service);
    // Applies table/interactive entries; enumerated/abstract entries register MOCK handlers.
    void configure(const ServiceConfig& cfg);
    // Every declared service without a handler becomes interactive.
    void default_to_interactive();

    std::optional<HandlerKind> kind(std::string_view service) const;

    // Resolves p against the current snapshot. Throws UnregisteredService,
    // AwaitingInteractiveResult for interactive services, Error for mock
    // services, TypeMismatch for ill-typed handler output.
    Value invoke(const PendingInvocation& p, const Snapshot& current);

    // Records a committed result; genpk freshness accounts for every result seen.
    void observe(const PendingInvocation& p, const Value& result);

private:
    struct Entry {
        HandlerKind kind;
        std::map<Tuple, Value> table;
        std::optional<Value> fallback;
    };
    const ServiceSignature& signature(std::string_view service) const;

    const Spec& spec_;
    std::map<std::string, Entry, std::less<>> handlers_;
    std::int64_t genpk_high_ = 0;
};

class MockServiceManager {
public:
    MockServiceManager(const Spec& spec, ServiceConfig cfg);

    // Throws UnconfiguredService for the first invoked service with no mock entry.
    void check_coverage() const;

    // Enumerated: the configured list. Abstract: active-domain values of the
    // return type (snapshot plus spec literals) in order, then one fresh value.
    // The built-in genpk yields the single next key of s unless configured.
    std::vector<Value> representative_results(const PendingInvocation& p, const Snapshot& s) const;

private:
    const Spec& spec_;
    ServiceConfig cfg_;
    std::set<Value> literals_;
};

}  // namespace daproc
