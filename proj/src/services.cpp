#include <daproc/errors.hpp>
#include <daproc/services.hpp>

#include <fmt/format.h>
#include <json.hpp>

#include <fstream>
#include <sstream>

namespace daproc {

using nlohmann::json;

std::string call_signature(std::string_view service, const Tuple& args) {
    return fmt::format("{}({})", service, to_display(args));
}

std::string_view to_string(HandlerKind k) {
    switch (k) {
    case HandlerKind::BuiltinGenpk: return "genpk";
    case HandlerKind::Table: return "table";
    case HandlerKind::Interactive: return "interactive";
    case HandlerKind::Mock: return "mock";
    }
    return "?";
}

namespace {

bool is_genpk(const ServiceSignature& s) {
    return s.name == "genpk" && s.param_types.empty() && s.return_type == AttrType::Int;
}

Value json_value(const json& j, std::string_view where) {
    if (j.is_number_integer()) return j.get<std::int64_t>();
    if (j.is_string()) return j.get<std::string>();
    throw Error(fmt::format("{}: expected an integer or string, got {}", where, j.dump()));
}

ServiceBehavior parse_behavior(const std::string& name, const json& j) {
    if (!j.is_object()) throw Error(fmt::format("service '{}': expected an object", name));
    ServiceBehavior b;
    const auto mode = j.value("mode", std::string{});
    const auto where = fmt::format("service '{}'", name);
    if (mode == "enumerated") {
        b.mode = ServiceBehavior::Mode::Enumerated;
        if (!j.contains("values") || !j["values"].is_array() || j["values"].empty())
            throw Error(where + ": enumerated mode needs a nonempty \"values\" list");
        for (const auto& v : j["values"]) b.values.push_back(json_value(v, where));
    } else if (mode == "abstract") {
        b.mode = ServiceBehavior::Mode::Abstract;
        b.seed = j.value("seed", std::int64_t{0});
    } else if (mode == "table") {
        b.mode = ServiceBehavior::Mode::Table;
        for (const auto& e : j.value("entries", json::array())) {
            Tuple args;
            for (const auto& a : e.at("args")) args.push_back(json_value(a, where));
            b.table[std::move(args)] = json_value(e.at("value"), where);
        }
        if (j.contains("default")) b.fallback = json_value(j["default"], where);
    } else if (mode == "interactive") {
        b.mode = ServiceBehavior::Mode::Interactive;
    } else {
        throw Error(fmt::format("{}: unknown mode '{}'", where, mode));
    }
    return b;
}

}  // namespace

ServiceConfig parse_service_config(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(fmt::format("service configuration: {}", e.what()));
    }
    ServiceConfig cfg;
    if (!j.is_object() || !j.contains("services") || !j["services"].is_object())
        throw Error("service configuration: expected {\"services\": {...}}");
    for (const auto& [name, body] : j["services"].items())
        cfg.services[name] = parse_behavior(name, body);
    return cfg;
}

ServiceConfig load_service_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(fmt::format("cannot read '{}'", path));
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_service_config(ss.str());
}

std::int64_t next_key_after(const Spec& spec, const Snapshot& s) {
    std::int64_t high = 0;
    for (const auto& r : spec.relations) {
        auto it = s.relations.find(r.name);
        if (it == s.relations.end()) continue;
        std::vector<std::size_t> pk;
        for (const auto& a : r.primary_key) pk.push_back(*r.index_of(a));
        for (const auto& t : it->second)
            for (auto i : pk)
                if (auto v = std::get_if<std::int64_t>(&t[i])) high = std::max(high, *v);
    }
    return high + 1;
}

std::set<Value> active_domain(const Snapshot& s) {
    std::set<Value> out;
    for (const auto& [_, rows] : s.relations)
        for (const auto& t : rows) out.insert(t.begin(), t.end());
    return out;
}

// ---- ServiceManager ----

ServiceManager::ServiceManager(const Spec& spec) : spec_(spec) {
    for (const auto& s : spec.services)
        if (is_genpk(s)) register_genpk(s.name);
}

const ServiceSignature& ServiceManager::signature(std::string_view service) const {
    const auto* sig = spec_.service(service);
    if (!sig) throw UnregisteredService(std::string(service));
    return *sig;
}

void ServiceManager::register_genpk(const std::string& service) {
    if (signature(service).return_type != AttrType::Int)
        throw TypeMismatch(fmt::format("key generator '{}' must return INT", service));
    handlers_[service] = {HandlerKind::BuiltinGenpk, {}, {}};
}

void ServiceManager::register_table(const std::string& service, std::map<Tuple, Value> table,
                                    std::optional<Value> fallback) {
    const auto& sig = signature(service);
    for (const auto& [args, v] : table)
        if (!has_type(v, sig.return_type))
            throw TypeMismatch(fmt::format("table entry {} = {} does not match {} return type {}",
                                           call_signature(service, args), to_literal(v), service,
                                           to_string(sig.return_type)));
    handlers_[service] = {HandlerKind::Table, std::move(table), std::move(fallback)};
}

void ServiceManager::register_interactive(const std::string& service) {
    signature(service);
    handlers_[service] = {HandlerKind::Interactive, {}, {}};
}

void ServiceManager::configure(const ServiceConfig& cfg) {
    for (const auto& [name, b] : cfg.services) {
        switch (b.mode) {
        case ServiceBehavior::Mode::Table: register_table(name, b.table, b.fallback); break;
        case ServiceBehavior::Mode::Interactive: register_interactive(name); break;
        default:
            signature(name);
            handlers_[name] = {HandlerKind::Mock, {}, {}};
        }
    }
}

void ServiceManager::default_to_interactive() {
    for (const auto& s : spec_.services)
        if (!handlers_.count(s.name)) register_interactive(s.name);
}

std::optional<HandlerKind> ServiceManager::kind(std::string_view service) const {
    auto it = handlers_.find(service);
    if (it == handlers_.end()) return std::nullopt;
    return it->second.kind;
}

Value ServiceManager::invoke(const PendingInvocation& p, const Snapshot& current) {
    auto it = handlers_.find(p.service);
    if (it == handlers_.end()) throw UnregisteredService(p.service);
    const auto& sig = signature(p.service);
    Value out;
    switch (it->second.kind) {
    case HandlerKind::BuiltinGenpk:
        out = std::max(next_key_after(spec_, current), genpk_high_ + 1);
        break;
    case HandlerKind::Table: {
        auto hit = it->second.table.find(p.args);
        if (hit != it->second.table.end()) {
            out = hit->second;
        } else if (it->second.fallback) {
            out = *it->second.fallback;
        } else {
            throw Error(fmt::format("no table entry for {}", p.signature));
        }
        break;
    }
    case HandlerKind::Interactive:
        throw AwaitingInteractiveResult(fmt::format("{} awaits a result", p.signature));
    case HandlerKind::Mock:
        throw Error(fmt::format("{} has a mock handler, usable only in state-space construction",
                                p.service));
    }
    if (!has_type(out, sig.return_type))
        throw TypeMismatch(fmt::format("{} returned {}, expected {}", p.signature, to_literal(out),
                                       to_string(sig.return_type)));
    observe(p, out);
    return out;
}

void ServiceManager::observe(const PendingInvocation& p, const Value& result) {
    auto it = handlers_.find(p.service);
    if (it == handlers_.end() || it->second.kind != HandlerKind::BuiltinGenpk) return;
    if (auto v = std::get_if<std::int64_t>(&result)) genpk_high_ = std::max(genpk_high_, *v);
}

// ---- MockServiceManager ----

MockServiceManager::MockServiceManager(const Spec& spec, ServiceConfig cfg)
    : spec_(spec), cfg_(std::move(cfg)), literals_(spec_literals(spec)) {
    for (const auto& [name, b] : cfg_.services) {
        const auto* sig = spec.service(name);
        if (!sig) throw Error(fmt::format("mock configuration names unknown service '{}'", name));
        if (b.mode != ServiceBehavior::Mode::Enumerated && b.mode != ServiceBehavior::Mode::Abstract)
            throw Error(fmt::format("service '{}': state-space construction needs mode "
                                    "\"enumerated\" or \"abstract\"",
                                    name));
        for (const auto& v : b.values)
            if (!has_type(v, sig->return_type))
                throw TypeMismatch(fmt::format("service '{}': value {} is not {}", name,
                                               to_literal(v), to_string(sig->return_type)));
    }
}

void MockServiceManager::check_coverage() const {
    for (const auto& a : spec_.actions)
        for (const auto& e : a.effects) {
            const auto* ins = std::get_if<InsertEffect>(&e);
            if (!ins) continue;
            const auto* terms = std::get_if<std::vector<Term>>(&ins->source);
            if (!terms) continue;
            for (const auto& t : *terms) {
                const auto* inv = std::get_if<Invocation>(&t);
                if (!inv || cfg_.services.count(inv->service)) continue;
                const auto* sig = spec_.service(inv->service);
                if (sig && is_genpk(*sig)) continue;
                throw UnconfiguredService(inv->service);
            }
        }
}

std::vector<Value> MockServiceManager::representative_results(const PendingInvocation& p,
                                                              const Snapshot& s) const {
    const auto* sig = spec_.service(p.service);
    if (!sig) throw UnregisteredService(p.service);
    auto it = cfg_.services.find(p.service);
    if (it == cfg_.services.end()) {
        if (is_genpk(*sig)) return {next_key_after(spec_, s)};
        throw UnconfiguredService(p.service);
    }
    const auto& b = it->second;
    if (b.mode == ServiceBehavior::Mode::Enumerated) return b.values;

    std::set<Value> domain = active_domain(s);
    domain.insert(literals_.begin(), literals_.end());
    std::vector<Value> out;
    for (const auto& v : domain)
        if (has_type(v, sig->return_type)) out.push_back(v);
    if (sig->return_type == AttrType::Int) {
        std::int64_t k = std::max<std::int64_t>(b.seed, 0);
        while (domain.count(Value{k})) ++k;
        out.emplace_back(k);
    } else {
        for (std::int64_t k = std::max<std::int64_t>(b.seed, 0);; ++k) {
            Value v = fmt::format("ν{}", k);
            if (!domain.count(v)) {
                out.push_back(std::move(v));
                break;
            }
        }
    }
    return out;
}

}  // namespace daproc
