#include <daproc/model.hpp>

#include <fmt/format.h>

#include <algorithm>

namespace daproc {

std::string to_string(const SourceSpan& span) {
    if (!span.known()) return span.file.empty() ? std::string("<unknown>") : span.file;
    return fmt::format("{}:{}:{}", span.file.empty() ? "<input>" : span.file, span.start_line,
                       span.start_col);
}

std::optional<std::size_t> RelationSchema::index_of(std::string_view attr) const {
    for (std::size_t i = 0; i < attributes.size(); ++i)
        if (attributes[i].name == attr) return i;
    return std::nullopt;
}

const Attribute* RelationSchema::find(std::string_view attr) const {
    auto i = index_of(attr);
    return i ? &attributes[*i] : nullptr;
}

std::string_view to_string(CmpOp op) {
    switch (op) {
    case CmpOp::Eq: return "=";
    case CmpOp::Ne: return "<>";
    case CmpOp::Lt: return "<";
    case CmpOp::Le: return "<=";
    case CmpOp::Gt: return ">";
    case CmpOp::Ge: return ">=";
    }
    return "?";
}

bool compare(CmpOp op, const Value& lhs, const Value& rhs) {
    switch (op) {
    case CmpOp::Eq: return lhs == rhs;
    case CmpOp::Ne: return lhs != rhs;
    case CmpOp::Lt: return lhs < rhs;
    case CmpOp::Le: return lhs <= rhs;
    case CmpOp::Gt: return lhs > rhs;
    case CmpOp::Ge: return lhs >= rhs;
    }
    return false;
}

Condition Condition::cmp(Operand l, CmpOp o, Operand r) {
    Condition c;
    c.kind = Kind::Cmp;
    c.op = o;
    c.lhs = std::move(l);
    c.rhs = std::move(r);
    return c;
}

Condition Condition::all(std::vector<Condition> cs) {
    Condition c;
    c.kind = Kind::And;
    c.children = std::move(cs);
    return c;
}

Condition Condition::any(std::vector<Condition> cs) {
    Condition c;
    c.kind = Kind::Or;
    c.children = std::move(cs);
    return c;
}

Condition Condition::negate(Condition inner) {
    Condition c;
    c.kind = Kind::Not;
    c.children.push_back(std::move(inner));
    return c;
}

std::optional<std::size_t> Action::param_index(std::string_view n) const {
    for (std::size_t i = 0; i < params.size(); ++i)
        if (params[i].name == n) return i;
    return std::nullopt;
}

const RelationSchema* Spec::relation(std::string_view name) const {
    for (const auto& r : relations)
        if (r.name == name) return &r;
    return nullptr;
}

const ServiceSignature* Spec::service(std::string_view name) const {
    for (const auto& s : services)
        if (s.name == name) return &s;
    return nullptr;
}

const Action* Spec::action(std::string_view name) const {
    auto i = action_index(name);
    return i ? &actions[*i] : nullptr;
}

std::optional<std::size_t> Spec::action_index(std::string_view name) const {
    for (std::size_t i = 0; i < actions.size(); ++i)
        if (actions[i].name == name) return i;
    return std::nullopt;
}

const CARule* Spec::rule_for(std::string_view a) const {
    for (const auto& r : rules)
        if (r.action == a) return &r;
    return nullptr;
}

SourceSpan Spec::span_of(std::string_view key) const {
    auto it = spans.find(key);
    return it == spans.end() ? SourceSpan{} : it->second;
}

bool operator==(const Spec& a, const Spec& b) {
    return a.relations == b.relations && a.services == b.services && a.actions == b.actions &&
           a.rules == b.rules;
}

std::optional<ResolvedAttr> resolve_attr(const Spec& spec, const std::vector<TableRef>& from,
                                         const AttrRef& ref, bool* ambiguous) {
    if (ambiguous) *ambiguous = false;
    std::optional<ResolvedAttr> found;
    for (std::size_t t = 0; t < from.size(); ++t) {
        if (!ref.qualifier.empty() && from[t].effective_name() != ref.qualifier) continue;
        const auto* rel = spec.relation(from[t].relation);
        if (!rel) continue;
        auto col = rel->index_of(ref.name);
        if (!col) continue;
        if (found) {
            if (ambiguous) *ambiguous = true;
            return std::nullopt;
        }
        found = ResolvedAttr{t, *col};
    }
    return found;
}

std::optional<AttrType> operand_type(const Spec& spec, const std::vector<TableRef>& from,
                                     const Operand& op, const std::vector<ActionParam>* params) {
    if (auto c = std::get_if<Const>(&op)) return type_of(c->value);
    if (auto p = std::get_if<Param>(&op)) {
        if (!params) return std::nullopt;
        for (const auto& ap : *params)
            if (ap.name == p->name) return ap.type;
        return std::nullopt;
    }
    const auto& ref = std::get<AttrRef>(op);
    auto r = resolve_attr(spec, from, ref);
    if (!r) return std::nullopt;
    return spec.relation(from[r->table].relation)->attributes[r->column].type;
}

std::optional<std::size_t> resolve_rule_arg(const SelectQuery& q, const AttrRef& arg) {
    std::optional<std::size_t> found;
    for (std::size_t i = 0; i < q.projection.size(); ++i) {
        const auto* item = std::get_if<AttrRef>(&q.projection[i]);
        if (!item || item->name != arg.name) continue;
        if (!arg.qualifier.empty() && item->qualifier != arg.qualifier) continue;
        if (found) {
            // Repeating the identical reference is harmless; distinct ones are ambiguous.
            if (std::get<AttrRef>(q.projection[*found]) != *item) return std::nullopt;
            continue;
        }
        found = i;
    }
    return found;
}

namespace {

void collect_literals(const Condition& c, std::set<Value>& out) {
    if (c.kind == Condition::Kind::Cmp) {
        if (auto k = std::get_if<Const>(&c.lhs)) out.insert(k->value);
        if (auto k = std::get_if<Const>(&c.rhs)) out.insert(k->value);
    }
    for (const auto& ch : c.children) collect_literals(ch, out);
}

void collect_literals(const SelectQuery& q, std::set<Value>& out) {
    for (const auto& p : q.projection)
        if (auto k = std::get_if<Const>(&p)) out.insert(k->value);
    collect_literals(q.where, out);
    for (const auto& b : q.union_branches) collect_literals(b, out);
}

}  // namespace

std::set<Value> spec_literals(const Spec& spec) {
    std::set<Value> out;
    for (const auto& r : spec.rules) collect_literals(r.condition, out);
    for (const auto& a : spec.actions) {
        for (const auto& e : a.effects) {
            if (auto d = std::get_if<DeleteEffect>(&e)) {
                collect_literals(d->where, out);
                continue;
            }
            const auto& ins = std::get<InsertEffect>(e);
            if (auto q = std::get_if<SelectQuery>(&ins.source)) {
                collect_literals(*q, out);
                continue;
            }
            for (const auto& t : std::get<std::vector<Term>>(ins.source)) {
                if (auto k = std::get_if<Const>(&t)) out.insert(k->value);
                if (auto inv = std::get_if<Invocation>(&t))
                    for (const auto& arg : inv->args)
                        if (auto k = std::get_if<Const>(&arg)) out.insert(k->value);
            }
        }
    }
    return out;
}

}  // namespace daproc
