#include "oracle.hpp"

#include <functional>
#include <stdexcept>
#include <vector>

namespace oracle {

using namespace daproc;

namespace {

struct Row {
    const TableRef* ref;
    const RelationSchema* rel;
    const Tuple* tuple;
};

const RelationSchema& schema(const Spec& spec, const std::string& name) {
    for (const auto& r : spec.relations)
        if (r.name == name) return r;
    throw std::runtime_error("oracle: no relation " + name);
}

std::size_t column(const RelationSchema& r, const std::string& attr) {
    for (std::size_t i = 0; i < r.attributes.size(); ++i)
        if (r.attributes[i].name == attr) return i;
    throw std::runtime_error("oracle: no attribute " + r.name + "." + attr);
}

const std::set<Tuple>& rows_of(const Snapshot& s, const std::string& rel) {
    static const std::set<Tuple> none;
    auto it = s.relations.find(rel);
    return it == s.relations.end() ? none : it->second;
}

Value lookup(const std::vector<Row>& env, const AttrRef& a) {
    const Row* hit = nullptr;
    auto has = [&](const Row& r) {
        for (const auto& at : r.rel->attributes)
            if (at.name == a.name) return true;
        return false;
    };
    if (!a.qualifier.empty()) {
        for (const auto& r : env)
            if (std::string(r.ref->effective_name()) == a.qualifier) hit = &r;
        if (!hit)
            for (const auto& r : env)
                if (r.ref->alias.empty() && r.ref->relation == a.qualifier) hit = &r;
    } else {
        for (const auto& r : env)
            if (has(r)) {
                if (hit) throw std::runtime_error("oracle: ambiguous " + a.name);
                hit = &r;
            }
    }
    if (!hit) throw std::runtime_error("oracle: unresolved " + a.qualifier + "." + a.name);
    return (*hit->tuple)[column(*hit->rel, a.name)];
}

Value operand(const std::vector<Row>& env, const Operand& op, const ParamEnv& params) {
    if (auto c = std::get_if<Const>(&op)) return c->value;
    if (auto p = std::get_if<Param>(&op)) return params.at(p->name);
    return lookup(env, std::get<AttrRef>(op));
}

bool cmp(CmpOp op, const Value& l, const Value& r) {
    if (l.index() != r.index()) return op == CmpOp::Ne;
    switch (op) {
    case CmpOp::Eq: return l == r;
    case CmpOp::Ne: return l != r;
    case CmpOp::Lt: return l < r;
    case CmpOp::Le: return !(r < l);
    case CmpOp::Gt: return r < l;
    case CmpOp::Ge: return !(l < r);
    }
    return false;
}

bool holds(const std::vector<Row>& env, const Condition& c, const ParamEnv& params) {
    switch (c.kind) {
    case Condition::Kind::True: return true;
    case Condition::Kind::Cmp:
        return cmp(c.op, operand(env, c.lhs, params), operand(env, c.rhs, params));
    case Condition::Kind::And:
        for (const auto& ch : c.children)
            if (!holds(env, ch, params)) return false;
        return true;
    case Condition::Kind::Or:
        for (const auto& ch : c.children)
            if (holds(env, ch, params)) return true;
        return false;
    case Condition::Kind::Not: return !holds(env, c.children.at(0), params);
    }
    return false;
}

void branch(const Spec& spec, const Snapshot& s, const SelectQuery& q, const ParamEnv& params,
            std::set<Tuple>& out) {
    std::vector<Row> env;
    std::function<void(std::size_t)> loop = [&](std::size_t i) {
        if (i == q.from.size()) {
            if (!holds(env, q.where, params)) return;
            Tuple t;
            for (const auto& p : q.projection) t.push_back(operand(env, p, params));
            out.insert(std::move(t));
            return;
        }
        const auto& rel = schema(spec, q.from[i].relation);
        for (const auto& t : rows_of(s, rel.name)) {
            env.push_back({&q.from[i], &rel, &t});
            loop(i + 1);
            env.pop_back();
        }
    };
    loop(0);
}

Value term(const Term& t, const ParamEnv& params, const CallResults* results, std::set<Call>* seen) {
    if (auto c = std::get_if<Const>(&t)) return c->value;
    if (auto p = std::get_if<Param>(&t)) return params.at(p->name);
    const auto& inv = std::get<Invocation>(t);
    Tuple args;
    for (const auto& a : inv.args) {
        if (auto c = std::get_if<Const>(&a))
            args.push_back(c->value);
        else
            args.push_back(params.at(std::get<Param>(a).name));
    }
    Call call{inv.service, args};
    if (seen) seen->insert(call);
    if (!results) return Value{std::int64_t{0}};
    return results->at(call);
}

ParamEnv bind_params(const Spec& spec, const std::string& action, const Tuple& binding) {
    const Action* a = nullptr;
    for (const auto& x : spec.actions)
        if (x.name == action) a = &x;
    if (!a || a->params.size() != binding.size()) throw std::runtime_error("oracle: bad action " + action);
    ParamEnv env;
    for (std::size_t i = 0; i < binding.size(); ++i) env[a->params[i].name] = binding[i];
    return env;
}

const Action& find_action(const Spec& spec, const std::string& name) {
    for (const auto& a : spec.actions)
        if (a.name == name) return a;
    throw std::runtime_error("oracle: no action " + name);
}

// Applies the effects, evaluated on `s`, with results either supplied or
// (for call discovery) stubbed.
Snapshot effects(const Spec& spec, const Snapshot& s, const std::string& action,
                 const Tuple& binding, const CallResults* results, std::set<Call>* seen) {
    const auto& a = find_action(spec, action);
    const ParamEnv params = bind_params(spec, action, binding);
    std::map<std::string, std::set<Tuple>> dels, adds;
    for (const auto& e : a.effects) {
        if (auto d = std::get_if<DeleteEffect>(&e)) {
            const auto& rel = schema(spec, d->relation);
            TableRef ref{rel.name, {}};
            for (const auto& t : rows_of(s, rel.name)) {
                std::vector<Row> env{{&ref, &rel, &t}};
                if (holds(env, d->where, params)) dels[rel.name].insert(t);
            }
            continue;
        }
        const auto& ins = std::get<InsertEffect>(e);
        const auto& rel = schema(spec, ins.relation);
        std::vector<std::string> cols = ins.columns;
        if (cols.empty())
            for (const auto& at : rel.attributes) cols.push_back(at.name);
        std::vector<Tuple> produced;
        if (auto q = std::get_if<SelectQuery>(&ins.source)) {
            auto rows = query(spec, s, *q, params);
            produced.assign(rows.begin(), rows.end());
        } else {
            Tuple t;
            for (const auto& x : std::get<std::vector<Term>>(ins.source))
                t.push_back(term(x, params, results, seen));
            produced.push_back(std::move(t));
        }
        for (const auto& p : produced) {
            Tuple full(rel.attributes.size());
            for (std::size_t k = 0; k < cols.size(); ++k) full[column(rel, cols[k])] = p[k];
            adds[rel.name].insert(std::move(full));
        }
    }
    Snapshot out = s;
    for (const auto& [r, ts] : dels)
        for (const auto& t : ts) out.relations[r].erase(t);
    for (const auto& [r, ts] : adds)
        for (const auto& t : ts) out.relations[r].insert(t);
    return out;
}

}  // namespace

std::set<Tuple> query(const Spec& spec, const Snapshot& s, const SelectQuery& q,
                      const ParamEnv& params) {
    std::set<Tuple> out;
    branch(spec, s, q, params, out);
    for (const auto& b : q.union_branches) branch(spec, s, b, params, out);
    return out;
}

bool consistent(const Spec& spec, const Snapshot& s) {
    for (const auto& r : spec.relations) {
        const auto& rows = rows_of(s, r.name);
        std::set<Tuple> keys;
        for (const auto& t : rows) {
            if (t.size() != r.attributes.size()) return false;
            for (std::size_t i = 0; i < t.size(); ++i) {
                bool is_int = std::holds_alternative<std::int64_t>(t[i]);
                if (is_int != (r.attributes[i].type == AttrType::Int)) return false;
            }
            for (const auto& d : r.domains) {
                const auto& v = t[column(r, d.attribute)];
                if (std::find(d.values.begin(), d.values.end(), v) == d.values.end()) return false;
            }
            Tuple key;
            for (const auto& k : r.primary_key) key.push_back(t[column(r, k)]);
            if (!keys.insert(key).second) return false;
        }
        for (const auto& fk : r.foreign_keys) {
            const auto& target = schema(spec, fk.target_relation);
            for (const auto& t : rows) {
                bool found = false;
                for (const auto& u : rows_of(s, target.name)) {
                    bool all = true;
                    for (std::size_t k = 0; k < fk.source_attrs.size(); ++k)
                        if (t[column(r, fk.source_attrs[k])] != u[column(target, fk.target_attrs[k])])
                            all = false;
                    if (all) found = true;
                }
                if (!found) return false;
            }
        }
    }
    return true;
}

std::set<Tuple> bindings(const Spec& spec, const Snapshot& s, const std::string& action) {
    std::set<Tuple> out;
    for (const auto& rule : spec.rules) {
        if (rule.action != action) continue;
        SelectQuery q = rule.condition;
        // Rule arguments name columns of the projection; selecting them
        // directly gives the same tuples.
        q.projection.assign(rule.args.begin(), rule.args.end());
        for (auto& b : q.union_branches) b.projection.assign(rule.args.begin(), rule.args.end());
        auto rows = query(spec, s, q);
        out.insert(rows.begin(), rows.end());
    }
    return out;
}

std::set<Call> calls(const Spec& spec, const Snapshot& s, const std::string& action,
                     const Tuple& binding) {
    std::set<Call> seen;
    effects(spec, s, action, binding, nullptr, &seen);
    return seen;
}

std::optional<Snapshot> step(const Spec& spec, const Snapshot& s, const std::string& action,
                             const Tuple& binding, const CallResults& results) {
    Snapshot next = effects(spec, s, action, binding, &results, nullptr);
    if (!consistent(spec, next)) return std::nullopt;
    return next;
}

Space explore(const Spec& spec, const Snapshot& initial, const ServiceConfig& mock,
              std::size_t limit) {
    auto values_for = [&](const Call& c, const Snapshot& s) -> std::vector<Value> {
        auto it = mock.services.find(c.first);
        if (it != mock.services.end()) {
            if (it->second.mode != ServiceBehavior::Mode::Enumerated)
                throw std::runtime_error("oracle: only enumerated services are supported");
            return it->second.values;
        }
        const ServiceSignature* sig = nullptr;
        for (const auto& x : spec.services)
            if (x.name == c.first) sig = &x;
        if (sig && sig->param_types.empty() && sig->return_type == AttrType::Int) {
            std::int64_t high = 0;
            for (const auto& r : spec.relations)
                for (const auto& t : rows_of(s, r.name))
                    for (const auto& k : r.primary_key)
                        if (auto v = std::get_if<std::int64_t>(&t[column(r, k)])) high = std::max(high, *v);
            return {Value{high + 1}};
        }
        throw std::runtime_error("oracle: no values for " + c.first);
    };

    Space out;
    std::vector<Snapshot> stack{initial};
    out.states.insert(initial);
    while (!stack.empty()) {
        Snapshot s = std::move(stack.back());
        stack.pop_back();
        std::size_t outgoing = 0;
        for (const auto& a : spec.actions) {
            for (const auto& b : bindings(spec, s, a.name)) {
                std::vector<Call> cs;
                for (const auto& c : calls(spec, s, a.name, b)) cs.push_back(c);
                std::vector<std::vector<Value>> choices;
                for (const auto& c : cs) choices.push_back(values_for(c, s));

                CallResults res;
                std::function<void(std::size_t)> each = [&](std::size_t i) {
                    if (i == cs.size()) {
                        auto next = step(spec, s, a.name, b, res);
                        if (!next) {
                            ++out.rolled_back;
                            return;
                        }
                        ++out.edges;
                        ++outgoing;
                        if (out.states.insert(*next).second) {
                            if (out.states.size() > limit) throw std::runtime_error("oracle: too many states");
                            stack.push_back(std::move(*next));
                        }
                        return;
                    }
                    for (const auto& v : choices[i]) {
                        res[cs[i]] = v;
                        each(i + 1);
                    }
                };
                each(0);
            }
        }
        if (outgoing == 0) ++out.sinks;
    }
    return out;
}

}  // namespace oracle
