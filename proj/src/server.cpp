#include <daproc/json_io.hpp>
#include <daproc/parser.hpp>
#include <daproc/server.hpp>

#include <httplib.h>

#include <fmt/format.h>

#include <charconv>
#include <cstdlib>

namespace daproc {

using nlohmann::json;

namespace {

ApiResponse reply(int status, const json& body) { return {status, body.dump(), "application/json"}; }

ApiResponse error(int status, const std::string& message) {
    return reply(status, json{{"error", message}});
}

json violations_json(const ConstraintViolation& e) {
    json out = json::array();
    for (const auto& v : e.violations())
        out.push_back({{"relation", v.relation}, {"constraint", v.constraint},
                       {"detail", v.detail}, {"message", describe(v)}});
    return out;
}

std::vector<std::string> split_path(std::string_view path) {
    if (auto q = path.find('?'); q != std::string_view::npos) path = path.substr(0, q);
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < path.size()) {
        while (i < path.size() && path[i] == '/') ++i;
        std::size_t j = path.find('/', i);
        if (j == std::string_view::npos) j = path.size();
        if (j > i) out.emplace_back(path.substr(i, j - i));
        i = j;
    }
    return out;
}

std::optional<std::uint64_t> parse_id(const std::string& s) {
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) return std::nullopt;
    return v;
}

json pending_json(const Spec& spec, const PendingInvocation& p) {
    return {{"invocationId", p.id},
            {"service", p.service},
            {"args", tuple_to_json(p.args)},
            {"signature", p.signature},
            {"returns", std::string(to_string(spec.service(p.service)->return_type))}};
}

json delta_json(const Spec& spec, const Snapshot& before, const Snapshot& after) {
    json deleted = json::object(), inserted = json::object();
    for (const auto& r : spec.relations) {
        const auto& b = before.at(r.name);
        const auto& a = after.at(r.name);
        std::set<Tuple> gone, added;
        for (const auto& t : b)
            if (!a.count(t)) gone.insert(t);
        for (const auto& t : a)
            if (!b.count(t)) added.insert(t);
        if (!gone.empty()) deleted[r.name] = rows_to_json(r, gone);
        if (!added.empty()) inserted[r.name] = rows_to_json(r, added);
    }
    return {{"deleted", deleted}, {"inserted", inserted}};
}

json spec_json(const Spec& spec) {
    json relations = json::array();
    for (const auto& r : spec.relations) {
        json attrs = json::array();
        for (const auto& a : r.attributes) {
            json attr = {{"name", a.name}, {"type", std::string(to_string(a.type))}};
            for (const auto& d : r.domains)
                if (d.attribute == a.name) attr["domain"] = tuple_to_json(d.values);
            attrs.push_back(std::move(attr));
        }
        json fks = json::array();
        for (const auto& fk : r.foreign_keys)
            fks.push_back({{"name", fk.name},
                           {"attributes", fk.source_attrs},
                           {"references", fk.target_relation},
                           {"targetAttributes", fk.target_attrs}});
        relations.push_back({{"name", r.name},
                             {"attributes", std::move(attrs)},
                             {"primaryKey", r.primary_key},
                             {"foreignKeys", std::move(fks)}});
    }
    json services = json::array();
    for (const auto& s : spec.services) {
        json params = json::array();
        for (auto t : s.param_types) params.push_back(std::string(to_string(t)));
        services.push_back({{"name", s.name},
                            {"params", std::move(params)},
                            {"returns", std::string(to_string(s.return_type))}});
    }
    json actions = json::array();
    for (const auto& a : spec.actions) {
        json params = json::array();
        for (const auto& p : a.params)
            params.push_back({{"name", p.name}, {"type", std::string(to_string(p.type))}});
        actions.push_back({{"name", a.name}, {"params", std::move(params)}});
    }
    return {{"relations", std::move(relations)},
            {"services", std::move(services)},
            {"actions", std::move(actions)},
            {"text", render_spec(spec)}};
}

}  // namespace

Api::Api(Engine& engine, ServerOptions options) : engine_(engine), options_(std::move(options)) {
    if (engine.modality() == Modality::StateSpace)
        throw Error("the server drives enactment engines only (plain or history)");
}

std::chrono::steady_clock::time_point Api::now() const {
    return options_.now ? options_.now() : std::chrono::steady_clock::now();
}

void Api::expire_ticket() {
    if (ticket_.open && now() >= ticket_.expiry) ticket_.open = false;
}

ApiResponse Api::handle(const std::string& method, const std::string& path,
                        const std::string& body) {
    const auto seg = split_path(path);
    const auto n = seg.size();
    try {
        if (method == "GET") {
            if (n == 1 && seg[0] == "actions") return error(404, "not found");
            if (n == 2 && seg[0] == "actions" && seg[1] == "enabled") {
                std::shared_lock lock(mutex_);
                return get_enabled();
            }
            if (n == 3 && seg[0] == "actions" && seg[2] == "bindings") {
                std::unique_lock lock(mutex_);  // fills the binding cache
                return get_bindings(seg[1]);
            }
            std::shared_lock lock(mutex_);
            if (n == 1 && seg[0] == "spec") return get_spec();
            if (n == 1 && seg[0] == "states") return get_states();
            if (n == 4 && seg[0] == "states" && seg[2] == "relations") {
                auto id = parse_id(seg[1]);
                if (!id) return error(400, "state id must be a positive integer");
                return get_relation(*id, seg[3]);
            }
            if (n == 1 && seg[0] == "history") return get_history();
            if (n == 1 && seg[0] == "statespace") return get_statespace(false);
            if (n == 1 && seg[0] == "statespace.dot") return get_statespace(true);
            return error(404, fmt::format("no route for GET {}", path));
        }
        if (method == "POST") {
            json payload = json::object();
            if (!body.empty()) {
                try {
                    payload = json::parse(body);
                } catch (const json::parse_error& e) {
                    return error(400, fmt::format("malformed JSON body: {}", e.what()));
                }
            }
            std::unique_lock lock(mutex_);
            if (n == 3 && seg[0] == "actions" && seg[2] == "apply") return apply(seg[1], payload);
            if (n == 3 && seg[0] == "tickets" && seg[2] == "results") {
                auto id = parse_id(seg[1]);
                if (!id) return error(400, "ticket id must be a positive integer");
                return post_results(*id, payload);
            }
            if (n == 2 && seg[0] == "statespace" && seg[1] == "build") return build_statespace(payload);
            return error(404, fmt::format("no route for POST {}", path));
        }
        return error(405, fmt::format("method {} not allowed", method));
    } catch (const UnknownState& e) {
        return error(404, e.what());
    } catch (const UnknownRelation& e) {
        return error(404, e.what());
    } catch (const UnknownAction& e) {
        return error(404, e.what());
    } catch (const ConstraintViolation& e) {
        return reply(422, json{{"error", e.what()}, {"violations", violations_json(e)}});
    } catch (const json::exception& e) {
        return error(400, e.what());
    } catch (const Error& e) {
        return error(400, e.what());
    }
}

ApiResponse Api::get_spec() { return reply(200, spec_json(engine_.spec())); }

ApiResponse Api::get_states() {
    json states = json::array();
    for (auto s : engine_.store().states())
        states.push_back({{"id", s}, {"timestamp", engine_.store().state_timestamp(s)}});
    return reply(200, json{{"current", engine_.current()},
                           {"mode", std::string(to_string(engine_.modality()))},
                           {"states", std::move(states)}});
}

ApiResponse Api::get_relation(StateId s, const std::string& name) {
    const auto* rel = engine_.spec().relation(name);
    if (!rel) throw UnknownRelation(name);
    auto rows = engine_.store().reconstruct(name, s);
    json cols = json::array();
    for (const auto& a : rel->attributes) cols.push_back(a.name);
    json out = json::array();
    for (const auto& t : rows) out.push_back(tuple_to_json(t));
    return reply(200, json{{"state", s}, {"relation", name}, {"columns", cols}, {"rows", out}});
}

ApiResponse Api::get_enabled() {
    return reply(200, json(engine_.enabled_actions(engine_.current())));
}

ApiResponse Api::get_bindings(const std::string& action) {
    json out = json::array();
    for (const auto& b : engine_.enumerate_bindings(engine_.current(), action))
        out.push_back({{"bindingId", b.id}, {"values", tuple_to_json(b.values)}, {"marked", b.marked}});
    return reply(200, out);
}

ApiResponse Api::commit(StateId s, const GroundAction& g, const EffectEvaluation& ev,
                        const InvocationResults& supplied) {
    const Snapshot before = engine_.store().snapshot(s);
    const StateId next = engine_.commit_ground_action(s, g, engine_.resolve(s, ev, supplied));
    const Snapshot after = engine_.store().snapshot(next);
    return reply(200, json{{"state", next},
                           {"snapshot", snapshot_to_json(engine_.spec(), after)},
                           {"delta", delta_json(engine_.spec(), before, after)}});
}

ApiResponse Api::apply(const std::string& action, const json& body) {
    expire_ticket();
    if (ticket_.open)
        return error(409, fmt::format("ticket {} is open; submit its results or let it expire",
                                      ticket_.id));
    if (!engine_.spec().action(action)) throw UnknownAction(action);
    if (!body.contains("bindingId") || !body["bindingId"].is_number_unsigned())
        return error(400, "body must be {\"bindingId\": <positive integer>}");
    const auto binding_id = body["bindingId"].get<std::uint64_t>();
    const StateId s = engine_.current();

    GroundAction g;
    try {
        g = engine_.ground(s, action, binding_id);
    } catch (const StaleBinding& e) {
        return error(409, e.what());
    }
    auto ev = engine_.evaluate_effects(s, g);
    std::vector<PendingInvocation> interactive;
    for (const auto& p : ev.pending)
        if (engine_.services().kind(p.service) == HandlerKind::Interactive) interactive.push_back(p);

    if (interactive.empty()) return commit(s, g, ev, {});

    ticket_ = Ticket{next_ticket_++, s, g, binding_id, std::move(ev), std::move(interactive),
                     now() + options_.ticket_ttl, true};
    json pending = json::array();
    for (const auto& p : ticket_.interactive) pending.push_back(pending_json(engine_.spec(), p));
    return reply(202, json{{"ticketId", ticket_.id},
                           {"state", s},
                           {"action", action},
                           {"bindingId", binding_id},
                           {"values", tuple_to_json(g.values)},
                           {"pending", std::move(pending)},
                           {"expiresInMs", options_.ticket_ttl.count()}});
}

ApiResponse Api::post_results(std::uint64_t id, const json& body) {
    if (ticket_.id != id || id == 0) return error(404, fmt::format("unknown ticket {}", id));
    expire_ticket();
    if (!ticket_.open) return error(410, fmt::format("ticket {} has expired or was closed", id));
    if (!body.is_object()) return error(400, "body must map invocation ids to values");

    InvocationResults supplied;
    for (const auto& p : ticket_.interactive) {
        const auto key = std::to_string(p.id);
        if (!body.contains(key))
            return error(400, fmt::format("missing result for invocation {} ({})", p.id, p.signature));
        Value v = value_from_json(body[key]);
        const auto ret = engine_.spec().service(p.service)->return_type;
        if (!has_type(v, ret))
            return error(400, fmt::format("{} expects {}", p.signature, to_string(ret)));
        supplied[p.id] = std::move(v);
    }
    // The ticket is consumed whatever the outcome of the commit.
    ticket_.open = false;
    return commit(ticket_.state, ticket_.action, ticket_.evaluation, supplied);
}

ApiResponse Api::get_history() {
    json out = json::array();
    for (const auto& t : engine_.store().transitions()) {
        json j = label_to_json(t.label);
        j["from"] = t.from;
        j["to"] = t.to;
        j["timestamp"] = t.timestamp;
        out.push_back(std::move(j));
    }
    return reply(200, json{{"transitions", std::move(out)}});
}

ApiResponse Api::build_statespace(const json& body) {
    if (!body.contains("mockConfigPath") || !body["mockConfigPath"].is_string())
        return error(400, "body must name a mockConfigPath");
    BuildOptions opts;
    if (body.contains("maxStates")) {
        if (!body["maxStates"].is_number_unsigned() || body["maxStates"].get<std::size_t>() == 0)
            return error(400, "maxStates must be a positive integer");
        opts.max_states = body["maxStates"].get<std::size_t>();
    }
    auto cfg = load_service_config(body["mockConfigPath"].get<std::string>());
    const Snapshot from = engine_.store().snapshot(engine_.current());
    statespace_ = daproc::build_statespace(engine_.spec(), from, cfg, opts);
    return reply(200, json{{"states", statespace_->states.size()},
                           {"edges", statespace_->edges.size()},
                           {"complete", statespace_->complete}});
}

ApiResponse Api::get_statespace(bool dot) {
    if (!statespace_) return error(404, "no state space has been built");
    if (dot) return {200, export_dot(*statespace_), "text/vnd.graphviz"};
    return {200, export_json(engine_.spec(), *statespace_), "application/json"};
}

// ---- transport ----

std::pair<std::string, int> resolve_bind_address(const std::string& fallback) {
    std::string addr = fallback;
    if (const char* env = std::getenv("DAPROC_ADDR"); env && *env) addr = env;
    auto colon = addr.rfind(':');
    std::string host = colon == std::string::npos ? addr : addr.substr(0, colon);
    std::string port_text = colon == std::string::npos ? "8080" : addr.substr(colon + 1);
    if (host.empty()) host = "127.0.0.1";
    int port = 0;
    auto [p, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), port);
    if (ec != std::errc{} || p != port_text.data() + port_text.size() || port < 0 || port > 65535)
        throw Error(fmt::format("bad bind address '{}'", addr));
    return {host, port};
}

HttpServer::HttpServer(Engine& engine, ServerOptions options)
    : api_(engine, std::move(options)), http_(std::make_unique<httplib::Server>()) {
    auto route = [this](const httplib::Request& req, httplib::Response& res) {
        auto r = api_.handle(req.method, req.path, req.body);
        res.status = r.status;
        res.set_content(r.body, r.content_type);
    };
    http_->Get(R"(/.*)", route);
    http_->Post(R"(/.*)", route);
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
    int bound = port == 0 ? http_->bind_to_any_port(host) : (http_->bind_to_port(host, port) ? port : -1);
    if (bound < 0) throw Error(fmt::format("cannot bind {}:{}", host, port));
    return bound;
}

void HttpServer::run() { http_->listen_after_bind(); }

void HttpServer::stop() {
    if (http_) http_->stop();
}

}  // namespace daproc
