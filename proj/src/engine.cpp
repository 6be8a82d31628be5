#include <daproc/engine.hpp>

#include "lexer.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <thread>

namespace daproc {

std::string_view to_string(Modality m) {
    switch (m) {
    case Modality::Plain: return "plain";
    case Modality::History: return "history";
    case Modality::StateSpace: return "statespace";
    }
    return "?";
}

std::optional<Modality> parse_modality(std::string_view text) {
    for (auto m : {Modality::Plain, Modality::History, Modality::StateSpace})
        if (text == to_string(m)) return m;
    return std::nullopt;
}

Delta instantiate(const DeltaTemplate& t, const InvocationResults& results) {
    Delta d;
    d.deletes = t.deletes;
    for (const auto& [rel, rows] : t.inserts) {
        auto& out = d.inserts[rel];
        for (const auto& cells : rows) {
            Tuple row;
            row.reserve(cells.size());
            for (const auto& c : cells) {
                if (auto v = std::get_if<Value>(&c)) {
                    row.push_back(*v);
                    continue;
                }
                auto id = std::get<InvocationSlot>(c).invocation;
                auto it = results.find(id);
                if (it == results.end())
                    throw MissingInvocationResult(fmt::format("no result for invocation #{}", id));
                row.push_back(it->second);
            }
            out.insert(std::move(row));
        }
    }
    return d;
}

TransitionLabel make_label(const GroundAction& g, const std::vector<PendingInvocation>& pending,
                           const InvocationResults& results) {
    TransitionLabel l{g.action, g.values, {}};
    for (const auto& p : pending) l.results.emplace_back(p.signature, results.at(p.id));
    return l;
}

namespace {

std::int64_t system_millis() {
    using namespace std::chrono;
    return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

Spec prepare(const Spec& spec) {
    auto report = validate_spec(spec);
    if (!report.ok()) throw InvalidSpec(to_string(report.errors().front()));
    return normalize_rules(spec);
}

}  // namespace

Engine::Engine(const Spec& spec, const Snapshot& initial, Modality modality, EngineOptions options)
    : modality_(modality), clock_(options.clock ? std::move(options.clock) : system_millis) {
    Spec normalized = prepare(spec);
    const std::int64_t ts = modality_ == Modality::History ? tick() : 0;
    store_ = std::make_unique<EncodedStore>(std::move(normalized), initial, options.sink, ts);
    services_ = std::make_unique<ServiceManager>(store_->spec());
}

std::int64_t Engine::tick() {
    std::int64_t now = clock_();
    // Timestamps must strictly increase; a commit in the same millisecond waits.
    for (int tries = 0; now <= last_tick_ && tries < 1000; ++tries) {
        std::this_thread::sleep_for(std::chrono::milliseconds(1));
        now = clock_();
    }
    if (now <= last_tick_) now = last_tick_ + 1;
    last_tick_ = now;
    return now;
}

void Engine::require_executable(StateId s) const {
    if (!store_->has_state(s)) throw UnknownState(s);
    if (modality_ != Modality::StateSpace && s != current_)
        throw StaleBinding(fmt::format("state {} is no longer current (current is {})", s, current_));
}

std::vector<std::string> Engine::enabled_actions(StateId s) const {
    if (!store_->has_state(s)) throw UnknownState(s);
    std::vector<std::string> out;
    for (const auto& a : spec().actions) {
        const auto* rule = spec().rule_for(a.name);
        if (rule && !store_->query(rule->condition, s).empty()) out.push_back(a.name);
    }
    return out;
}

std::vector<Binding>& Engine::bindings_of(StateId s, std::string_view action) {
    if (!store_->has_state(s)) throw UnknownState(s);
    if (!spec().action(action)) throw UnknownAction(std::string(action));
    auto key = std::make_pair(s, std::string(action));
    auto it = bindings_.find(key);
    if (it != bindings_.end()) return it->second;

    std::vector<Binding> out;
    if (const auto* rule = spec().rule_for(action)) {
        std::vector<std::size_t> idx;
        for (const auto& arg : rule->args) idx.push_back(*resolve_rule_arg(rule->condition, arg));
        std::set<Tuple> values;
        for (const auto& row : store_->query(rule->condition, s)) {
            Tuple v;
            for (auto i : idx) v.push_back(row[i]);
            values.insert(std::move(v));
        }
        std::uint64_t id = 0;
        for (auto& v : values) out.push_back({++id, std::string(action), v, false});
    }
    return bindings_.emplace(std::move(key), std::move(out)).first->second;
}

std::vector<Binding> Engine::enumerate_bindings(StateId s, std::string_view action) {
    return bindings_of(s, action);
}

GroundAction Engine::ground(StateId s, std::string_view action, std::uint64_t binding_id) {
    for (const auto& b : bindings_of(s, action)) {
        if (b.id != binding_id) continue;
        if (b.marked && modality_ != Modality::StateSpace)
            throw StaleBinding(fmt::format("binding {} of {} was already used in state {}", binding_id, action, s));
        return {b.action, b.values};
    }
    throw StaleBinding(fmt::format("no binding {} for {} in state {}", binding_id, action, s));
}

void Engine::check_binding(StateId s, const GroundAction& g) {
    for (auto& b : bindings_of(s, g.action)) {
        if (b.values != g.values) continue;
        if (b.marked && modality_ != Modality::StateSpace)
            throw StaleBinding(fmt::format("{}({}) was already used in state {}", g.action,
                                           to_display(g.values), s));
        return;
    }
    throw StaleBinding(
        fmt::format("{}({}) is not enabled in state {}", g.action, to_display(g.values), s));
}

EffectEvaluation Engine::evaluate_effects(StateId s, const GroundAction& g) const {
    if (!store_->has_state(s)) throw UnknownState(s);
    const auto* action = spec().action(g.action);
    if (!action) throw UnknownAction(g.action);
    if (g.values.size() != action->params.size())
        throw TypeMismatch(fmt::format("{} takes {} parameters, got {}", g.action,
                                       action->params.size(), g.values.size()));
    ParamEnv env;
    for (std::size_t i = 0; i < g.values.size(); ++i) {
        if (!has_type(g.values[i], action->params[i].type))
            throw TypeMismatch(fmt::format("parameter {} of {} expects {}", action->params[i].name,
                                           g.action, to_string(action->params[i].type)));
        env[action->params[i].name] = g.values[i];
    }

    auto param = [&](const std::string& name) -> const Value& {
        auto it = env.find(name);
        if (it == env.end()) throw Error(fmt::format("unbound parameter ':{}'", name));
        return it->second;
    };

    EffectEvaluation out;
    for (const auto& effect : action->effects) {
        if (const auto* del = std::get_if<DeleteEffect>(&effect)) {
            const auto& rel = *spec().relation(del->relation);
            SelectQuery q;
            for (const auto& a : rel.attributes) q.projection.push_back(AttrRef{{}, a.name});
            q.from.push_back({rel.name, {}});
            q.where = del->where;
            auto rows = store_->query(q, s, env);
            out.delta.deletes[rel.name].insert(rows.begin(), rows.end());
            continue;
        }
        const auto& ins = std::get<InsertEffect>(effect);
        const auto& rel = *spec().relation(ins.relation);
        std::vector<std::size_t> target;
        for (const auto& c : ins.columns) target.push_back(*rel.index_of(c));
        auto& rows = out.delta.inserts[rel.name];

        if (const auto* q = std::get_if<SelectQuery>(&ins.source)) {
            for (const auto& r : store_->query(*q, s, env)) {
                std::vector<InsertCell> cells(rel.attributes.size());
                for (std::size_t k = 0; k < target.size(); ++k) cells[target[k]] = r[k];
                rows.push_back(std::move(cells));
            }
            continue;
        }
        std::vector<InsertCell> cells(rel.attributes.size());
        const auto& terms = std::get<std::vector<Term>>(ins.source);
        for (std::size_t k = 0; k < terms.size(); ++k) {
            const auto& t = terms[k];
            if (const auto* c = std::get_if<Const>(&t)) {
                cells[target[k]] = c->value;
            } else if (const auto* p = std::get_if<Param>(&t)) {
                cells[target[k]] = param(p->name);
            } else {
                const auto& inv = std::get<Invocation>(t);
                Tuple args;
                for (const auto& a : inv.args) {
                    if (const auto* c = std::get_if<Const>(&a))
                        args.push_back(c->value);
                    else
                        args.push_back(param(std::get<Param>(a).name));
                }
                // Identical calls within one application share one result.
                auto same = std::find_if(out.pending.begin(), out.pending.end(), [&](const auto& p) {
                    return p.service == inv.service && p.args == args;
                });
                if (same == out.pending.end()) {
                    PendingInvocation p{out.pending.size() + 1, inv.service, args,
                                        call_signature(inv.service, args)};
                    out.pending.push_back(std::move(p));
                    same = out.pending.end() - 1;
                }
                cells[target[k]] = InvocationSlot{same->id};
            }
        }
        rows.push_back(std::move(cells));
    }
    return out;
}

InvocationResults Engine::resolve(StateId s, const EffectEvaluation& ev,
                                  const InvocationResults& supplied) {
    InvocationResults out;
    std::optional<Snapshot> snap;
    for (const auto& p : ev.pending) {
        if (auto it = supplied.find(p.id); it != supplied.end()) {
            out[p.id] = it->second;
            continue;
        }
        if (!snap) snap = store_->snapshot(s);
        out[p.id] = services_->invoke(p, *snap);
    }
    return out;
}

StateId Engine::commit_ground_action(StateId s, const GroundAction& g,
                                     const InvocationResults& results) {
    require_executable(s);
    check_binding(s, g);
    auto ev = evaluate_effects(s, g);
    for (const auto& p : ev.pending) {
        auto it = results.find(p.id);
        if (it == results.end())
            throw MissingInvocationResult(fmt::format("no result supplied for {}", p.signature));
        const auto& ret = spec().service(p.service)->return_type;
        if (!has_type(it->second, ret))
            throw TypeMismatch(fmt::format("{} must return {}, got {}", p.signature, to_string(ret),
                                           to_literal(it->second)));
    }

    for (auto& b : bindings_of(s, g.action))
        if (b.values == g.values) b.marked = true;

    const Delta delta = instantiate(ev.delta, results);
    const TransitionLabel label = make_label(g, ev.pending, results);
    const std::int64_t ts = modality_ == Modality::History ? tick() : 0;
    const bool record = modality_ != Modality::Plain;
    const StateId next = store_->apply_delta(s, delta, record ? &label : nullptr, ts);

    for (const auto& p : ev.pending) services_->observe(p, results.at(p.id));
    if (modality_ == Modality::Plain) {
        store_->drop_state(s);
        std::erase_if(bindings_, [&](const auto& kv) { return kv.first.first == s; });
    }
    if (modality_ != Modality::StateSpace || next > current_) current_ = next;
    return next;
}

// ---- scripts ----

ScriptError::ScriptError(std::size_t step, const std::string& message)
    : Error(fmt::format("step {}: {}", step, message)), step_(step) {}

namespace {

Value script_value(detail::TokenCursor& cur) {
    const auto& t = cur.peek();
    if (t.kind == detail::Token::Kind::Ident) return cur.next().text;
    return detail::parse_literal(cur);
}

Tuple script_values(detail::TokenCursor& cur) {
    Tuple out;
    cur.expect_symbol("(");
    if (cur.accept_symbol(")")) return out;
    do {
        out.push_back(script_value(cur));
    } while (cur.accept_symbol(","));
    cur.expect_symbol(")");
    return out;
}

}  // namespace

std::vector<ScriptStep> parse_script(std::string_view text) {
    detail::TokenCursor cur(detail::tokenize(text), "<script>");
    std::vector<ScriptStep> out;
    try {
        while (!cur.at_end()) {
            ScriptStep step;
            step.line = cur.peek().line;
            cur.expect_keyword("ACTION");
            step.action = cur.expect_ident("action name");
            step.values = script_values(cur);
            if (cur.accept_keyword("WITH")) {
                do {
                    auto service = cur.expect_ident("service name");
                    auto args = script_values(cur);
                    cur.expect_symbol("=");
                    step.results.push_back({{std::move(service), std::move(args)}, script_value(cur)});
                } while (cur.accept_symbol(","));
            }
            cur.expect_symbol(";");
            out.push_back(std::move(step));
        }
    } catch (const detail::SyntaxError& e) {
        throw Error(fmt::format("script line {}:{}: {}", e.span.start_line, e.span.start_col,
                                e.message));
    }
    return out;
}

StateId run_script(Engine& engine, const std::vector<ScriptStep>& steps) {
    for (std::size_t i = 0; i < steps.size(); ++i) {
        const auto& step = steps[i];
        const std::size_t index = i + 1;
        try {
            const StateId s = engine.current();
            GroundAction g{step.action, step.values};
            bool enabled = false;
            for (const auto& b : engine.enumerate_bindings(s, step.action))
                enabled = enabled || b.values == step.values;
            if (!enabled)
                throw ScriptError(index, fmt::format("{}({}) is not enabled in state {}",
                                                     step.action, to_display(step.values), s));
            auto ev = engine.evaluate_effects(s, g);
            InvocationResults supplied;
            for (const auto& [call, value] : step.results) {
                auto it = std::find_if(ev.pending.begin(), ev.pending.end(), [&](const auto& p) {
                    return p.service == call.first && p.args == call.second;
                });
                if (it == ev.pending.end())
                    throw ScriptError(index, fmt::format("{} is not invoked by this step",
                                                         call_signature(call.first, call.second)));
                supplied[it->id] = value;
            }
            engine.commit_ground_action(s, g, engine.resolve(s, ev, supplied));
        } catch (const ScriptError&) {
            throw;
        } catch (const Error& e) {
            throw ScriptError(index, e.what());
        }
    }
    return engine.current();
}

}  // namespace daproc
