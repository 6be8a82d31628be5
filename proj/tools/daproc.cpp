#include <daproc/engine.hpp>
#include <daproc/json_io.hpp>
#include <daproc/parser.hpp>
#include <daproc/persist.hpp>
#include <daproc/server.hpp>
#include <daproc/statespace.hpp>

#include <CLI11.hpp>
#include <fmt/format.h>

#include <csignal>
#include <iostream>
#include <memory>
#include <sstream>

using namespace daproc;

namespace {

enum Exit { kOk = 0, kUsage = 1, kInvalid = 2, kRuntime = 3 };

struct ValidationFailed {};

Spec load_spec(const std::string& path) {
    auto parsed = parse_spec_file(path);
    for (const auto& d : parsed.diagnostics) std::cerr << to_string(d) << "\n";
    if (!parsed.ok()) throw ValidationFailed{};
    auto report = validate_spec(*parsed.spec);
    for (const auto& d : report.diagnostics) std::cerr << to_string(d) << "\n";
    if (!report.ok()) throw ValidationFailed{};
    return std::move(*parsed.spec);
}

int cmd_validate(const std::string& path) {
    Spec spec = load_spec(path);
    fmt::print("OK: {} relations, {} actions\n", spec.relations.size(), spec.actions.size());
    return kOk;
}

void print_relation(const Engine& engine, StateId s, const RelationSchema& r) {
    auto rows = engine.store().reconstruct(r.name, s);
    std::vector<std::string> names;
    for (const auto& a : r.attributes) names.push_back(a.name);
    fmt::print("{}({}) {} row{}\n", r.name, fmt::join(names, ", "), rows.size(),
               rows.size() == 1 ? "" : "s");
    for (const auto& t : rows) fmt::print("  {}\n", to_display(t));
}

void print_state(const Engine& engine, StateId s) {
    fmt::print("state {}\n", s);
    for (const auto& r : engine.spec().relations) print_relation(engine, s, r);
}

void print_history(const Engine& engine) {
    for (const auto& t : engine.store().transitions())
        fmt::print("{} -> {}  {}\n", t.from, t.to, t.label.to_string());
}

Value read_value(std::istream& in, AttrType type, const std::string& prompt) {
    for (;;) {
        fmt::print("{} : {} = ", prompt, to_string(type));
        std::fflush(stdout);
        std::string line;
        if (!std::getline(in, line)) throw Error("input ended while awaiting a service result");
        if (type == AttrType::Int) {
            try {
                std::size_t used = 0;
                long long v = std::stoll(line, &used);
                if (used == line.size()) return static_cast<std::int64_t>(v);
            } catch (const std::exception&) {
            }
            fmt::print("expected an integer\n");
        } else {
            if (line.size() >= 2 && line.front() == '\'' && line.back() == '\'')
                line = line.substr(1, line.size() - 2);
            return line;
        }
    }
}

void repl_apply(Engine& engine, const std::string& action, std::uint64_t id) {
    const StateId s = engine.current();
    auto g = engine.ground(s, action, id);
    auto ev = engine.evaluate_effects(s, g);
    InvocationResults supplied;
    for (const auto& p : ev.pending)
        if (engine.services().kind(p.service) == HandlerKind::Interactive)
            supplied[p.id] = read_value(std::cin, engine.spec().service(p.service)->return_type,
                                        p.signature);
    try {
        const StateId next = engine.commit_ground_action(s, g, engine.resolve(s, ev, supplied));
        fmt::print("now at state {}\n", next);
    } catch (const ConstraintViolation& e) {
        fmt::print("rolled back, still at state {}\n", s);
        for (const auto& v : e.violations()) fmt::print("  {}\n", describe(v));
    }
}

const char* kReplHelp =
    "commands: enabled | bindings <action> | apply <action> <binding> | show [relation] [state]\n"
    "          history | state | help | quit\n";

void repl(Engine& engine) {
    fmt::print("{}", kReplHelp);
    std::string line;
    for (;;) {
        fmt::print("[{}]> ", engine.current());
        std::fflush(stdout);
        if (!std::getline(std::cin, line)) break;
        std::istringstream words(line);
        std::string cmd;
        words >> cmd;
        if (cmd.empty()) continue;
        try {
            if (cmd == "quit" || cmd == "exit") break;
            if (cmd == "help") {
                fmt::print("{}", kReplHelp);
            } else if (cmd == "enabled") {
                for (const auto& a : engine.enabled_actions(engine.current())) fmt::print("{}\n", a);
            } else if (cmd == "bindings") {
                std::string a;
                words >> a;
                for (const auto& b : engine.enumerate_bindings(engine.current(), a))
                    fmt::print("{:>3}  {}{}\n", b.id, to_display(b.values), b.marked ? "  (used)" : "");
            } else if (cmd == "apply") {
                std::string a;
                std::uint64_t id = 0;
                if (!(words >> a >> id)) {
                    fmt::print("usage: apply <action> <binding>\n");
                    continue;
                }
                repl_apply(engine, a, id);
            } else if (cmd == "show") {
                std::string rel;
                StateId s = engine.current();
                words >> rel >> s;
                if (rel.empty()) {
                    print_state(engine, s);
                } else if (const auto* r = engine.spec().relation(rel)) {
                    engine.store().snapshot(s);  // rejects unknown states
                    print_relation(engine, s, *r);
                } else {
                    throw UnknownRelation(rel);
                }
            } else if (cmd == "history") {
                print_history(engine);
            } else if (cmd == "state") {
                print_state(engine, engine.current());
            } else {
                fmt::print("unknown command '{}'\n", cmd);
            }
        } catch (const Error& e) {
            fmt::print("error: {}\n", e.what());
        }
    }
}

HttpServer* g_server = nullptr;

void on_signal(int) {
    if (g_server) g_server->stop();
}

struct EnactArgs {
    std::string spec, init, mode = "history", script, services, persist, addr = "127.0.0.1:8080";
    bool serve = false;
};

int cmd_enact(const EnactArgs& a) {
    Spec spec = load_spec(a.spec);
    auto modality = parse_modality(a.mode);
    if (!modality || *modality == Modality::StateSpace) {
        std::cerr << "--mode must be plain or history\n";
        return kUsage;
    }
    Snapshot init = a.init.empty() ? empty_snapshot(spec) : load_snapshot(spec, a.init);
    std::unique_ptr<JournalWriter> journal;
    if (!a.persist.empty()) journal = std::make_unique<JournalWriter>(a.persist, spec);
    Engine engine(spec, init, *modality, EngineOptions{{}, journal.get()});
    if (!a.services.empty()) engine.services().configure(load_service_config(a.services));
    engine.services().default_to_interactive();

    if (!a.script.empty()) {
        auto steps = parse_script(read_text_file(a.script));
        const StateId last = run_script(engine, steps);
        fmt::print("ran {} step{}; now at state {}\n", steps.size(), steps.size() == 1 ? "" : "s", last);
        if (!a.serve) {
            print_state(engine, last);
            if (*modality == Modality::History) print_history(engine);
        }
    }
    if (a.serve) {
        auto [host, port] = resolve_bind_address(a.addr);
        HttpServer server(engine);
        const int bound = server.bind(host, port);
        fmt::print("listening on http://{}:{}\n", host, bound);
        std::fflush(stdout);
        g_server = &server;
        std::signal(SIGINT, on_signal);
        std::signal(SIGTERM, on_signal);
        server.run();
        g_server = nullptr;
        return kOk;
    }
    if (a.script.empty()) repl(engine);
    return kOk;
}

struct StatespaceArgs {
    std::string spec, init, services, out, goal;
    std::size_t max_states = kDefaultMaxStates;
};

int cmd_statespace(const StatespaceArgs& a) {
    Spec spec = load_spec(a.spec);
    std::optional<SelectQuery> goal;
    if (!a.goal.empty()) {
        auto q = parse_query(a.goal);
        for (const auto& d : q.diagnostics) std::cerr << to_string(d) << "\n";
        if (!q.query) return kInvalid;
        goal = std::move(q.query);
    }
    Snapshot init = a.init.empty() ? empty_snapshot(spec) : load_snapshot(spec, a.init);
    auto ts = build_statespace(spec, init, load_service_config(a.services), {a.max_states, nullptr});
    fmt::print("states: {}\nedges: {}\ncomplete: {}\n", ts.states.size(), ts.edges.size(), ts.complete);
    if (ts.complete) {
        auto sinks = find_deadlocks(ts);
        fmt::print("sinks: [{}]\n", fmt::join(sinks, ", "));
    }
    if (goal) {
        auto r = check_reachable(spec, ts, *goal);
        switch (r.outcome) {
        case Reachability::Outcome::Reachable:
            fmt::print("goal: reachable via [{}]\n", fmt::join(r.path, ", "));
            break;
        case Reachability::Outcome::NotReachable: fmt::print("goal: not reachable\n"); break;
        case Reachability::Outcome::Inconclusive: fmt::print("goal: inconclusive\n"); break;
        }
    }
    if (!a.out.empty()) {
        const bool dot = a.out.size() >= 4 && a.out.compare(a.out.size() - 4, 4, ".dot") == 0;
        const std::string text = dot ? export_dot(ts) : export_json(spec, ts);
        std::FILE* f = std::fopen(a.out.c_str(), "wb");
        if (!f) throw Error(fmt::format("cannot write '{}'", a.out));
        std::fwrite(text.data(), 1, text.size(), f);
        std::fclose(f);
    }
    return kOk;
}

int cmd_replay(const std::string& path) {
    auto journal = read_journal(path);
    auto store = EncodedStore::replay(journal.spec, journal.records);
    const auto states = store->states();
    fmt::print("records: {}\nstates: {}\ntransitions: {}\n", journal.records.size(), states.size(),
               store->transitions().size());
    if (states.empty()) return kOk;
    const StateId last = store->latest_state();
    fmt::print("latest state {}\n", last);
    for (const auto& r : journal.spec.relations) {
        auto rows = store->reconstruct(r.name, last);
        fmt::print("{} {} row{}\n", r.name, rows.size(), rows.size() == 1 ? "" : "s");
        for (const auto& t : rows) fmt::print("  {}\n", to_display(t));
    }
    for (const auto& t : store->transitions())
        fmt::print("{} -> {}  {}\n", t.from, t.to, t.label.to_string());
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"daproc: data-aware process engine"};
    app.require_subcommand(1);

    std::string validate_path;
    auto* validate = app.add_subcommand("validate", "Parse and check a specification");
    validate->add_option("spec", validate_path, "Specification file")->required();

    EnactArgs enact_args;
    auto* enact = app.add_subcommand("enact", "Run a process, from a script or interactively");
    enact->add_option("spec", enact_args.spec, "Specification file")->required();
    enact->add_option("--init", enact_args.init, "Initial instance (JSON)");
    enact->add_option("--mode", enact_args.mode, "plain or history")->capture_default_str();
    enact->add_option("--script", enact_args.script, "Script of ground actions");
    enact->add_option("--services", enact_args.services, "Service configuration (JSON)");
    enact->add_option("--persist", enact_args.persist, "Append the store journal to this file");
    enact->add_flag("--serve", enact_args.serve, "Start the HTTP server");
    enact->add_option("--addr", enact_args.addr, "Bind address (DAPROC_ADDR overrides)")
        ->capture_default_str();

    StatespaceArgs ss_args;
    auto* ss = app.add_subcommand("statespace", "Build the transition system under mock services");
    ss->add_option("spec", ss_args.spec, "Specification file")->required();
    ss->add_option("goal", ss_args.goal, "Reachability goal (SELECT query)");
    ss->add_option("--init", ss_args.init, "Initial instance (JSON); empty when omitted");
    ss->add_option("--services", ss_args.services, "Mock service configuration (JSON)")->required();
    ss->add_option("--max-states", ss_args.max_states, "State budget")->capture_default_str();
    ss->add_option("--out", ss_args.out, "Export path (.dot or .json)");

    std::string replay_path;
    auto* replay = app.add_subcommand("replay", "Rebuild a store from its journal");
    replay->add_option("journal", replay_path, "Journal file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*validate) return cmd_validate(validate_path);
        if (*enact) return cmd_enact(enact_args);
        if (*ss) return cmd_statespace(ss_args);
        if (*replay) return cmd_replay(replay_path);
    } catch (const ValidationFailed&) {
        return kInvalid;
    } catch (const InvalidSpec& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kInvalid;
    } catch (const ConstraintViolation& e) {
        std::cerr << "error: " << e.what() << "\n";
        for (const auto& v : e.violations()) std::cerr << "  " << describe(v) << "\n";
        return kRuntime;
    } catch (const ScriptError& e) {
        std::cerr << "error: step " << e.step() << ": " << e.what() << "\n";
        return kRuntime;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kRuntime;
    }
    return kUsage;
}
