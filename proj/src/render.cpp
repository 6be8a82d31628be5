#include <daproc/digest.hpp>
#include <daproc/parser.hpp>

#include <fmt/format.h>

namespace daproc {

namespace {

std::string join(const std::vector<std::string>& items, std::string_view sep = ", ") {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += sep;
        out += items[i];
    }
    return out;
}

std::string render_operand(const Operand& op) {
    if (auto r = std::get_if<AttrRef>(&op))
        return r->qualifier.empty() ? r->name : r->qualifier + "." + r->name;
    if (auto c = std::get_if<Const>(&op)) return to_literal(c->value);
    return ":" + std::get<Param>(op).name;
}

std::string render_child(const Condition& c, Condition::Kind parent) {
    // Nested connectives of the same kind would otherwise be flattened by the parser.
    bool wrap = (c.kind == Condition::Kind::Or) ||
                (c.kind == Condition::Kind::And && parent == Condition::Kind::And);
    auto text = render_condition(c);
    return wrap ? "(" + text + ")" : text;
}

std::string render_term(const Term& t) {
    if (auto c = std::get_if<Const>(&t)) return to_literal(c->value);
    if (auto p = std::get_if<Param>(&t)) return ":" + p->name;
    const auto& inv = std::get<Invocation>(t);
    std::vector<std::string> args;
    for (const auto& a : inv.args) {
        if (auto c = std::get_if<Const>(&a))
            args.push_back(to_literal(c->value));
        else
            args.push_back(":" + std::get<Param>(a).name);
    }
    return fmt::format("@{}({})", inv.service, join(args));
}

std::string render_relation(const RelationSchema& r) {
    std::vector<std::string> lines;
    const bool inline_pk = r.primary_key.size() == 1;
    for (const auto& a : r.attributes) {
        std::string line = fmt::format("  {} {}", a.name, to_string(a.type));
        if (inline_pk && r.primary_key.front() == a.name) line += " PRIMARY KEY";
        for (const auto& d : r.domains) {
            if (d.attribute != a.name) continue;
            std::vector<std::string> vals;
            for (const auto& v : d.values) vals.push_back(to_literal(v));
            line += fmt::format(" DOMAIN ({})", join(vals));
        }
        lines.push_back(std::move(line));
    }
    if (!inline_pk && !r.primary_key.empty())
        lines.push_back(fmt::format("  PRIMARY KEY ({})", join(r.primary_key)));
    for (const auto& fk : r.foreign_keys)
        lines.push_back(fmt::format("  CONSTRAINT {} FOREIGN KEY ({}) REFERENCES {} ({})", fk.name,
                                    join(fk.source_attrs), fk.target_relation,
                                    join(fk.target_attrs)));
    return fmt::format("RELATION {} (\n{}\n);\n", r.name, join(lines, ",\n"));
}

std::string render_effect(const Effect& e) {
    if (auto d = std::get_if<DeleteEffect>(&e)) {
        if (d->where.kind == Condition::Kind::True) return fmt::format("DELETE FROM {};", d->relation);
        return fmt::format("DELETE FROM {} WHERE {};", d->relation, render_condition(d->where));
    }
    const auto& ins = std::get<InsertEffect>(e);
    std::string head = fmt::format("INSERT INTO {}({})", ins.relation, join(ins.columns));
    if (auto q = std::get_if<SelectQuery>(&ins.source))
        return fmt::format("{} {};", head, render_query(*q));
    std::vector<std::string> terms;
    for (const auto& t : std::get<std::vector<Term>>(ins.source)) terms.push_back(render_term(t));
    return fmt::format("{} VALUES ({});", head, join(terms));
}

std::string render_action(const Action& a) {
    std::vector<std::string> params;
    for (const auto& p : a.params) params.push_back(fmt::format("{} {}", p.name, to_string(p.type)));
    if (a.effects.empty()) return fmt::format("ACTION {}({}) {{ }}\n", a.name, join(params));
    std::string out = fmt::format("ACTION {}({}) {{\n", a.name, join(params));
    for (const auto& e : a.effects) out += "  " + render_effect(e) + "\n";
    out += "}\n";
    return out;
}

}  // namespace

std::string render_condition(const Condition& c) {
    switch (c.kind) {
    case Condition::Kind::True: return "";
    case Condition::Kind::Cmp:
        return fmt::format("{} {} {}", render_operand(c.lhs), to_string(c.op), render_operand(c.rhs));
    case Condition::Kind::Not: {
        const auto& inner = c.children.front();
        if (inner.kind == Condition::Kind::Cmp || inner.kind == Condition::Kind::Not)
            return "NOT " + render_condition(inner);
        return "NOT (" + render_condition(inner) + ")";
    }
    case Condition::Kind::And:
    case Condition::Kind::Or: {
        std::vector<std::string> parts;
        for (const auto& ch : c.children) parts.push_back(render_child(ch, c.kind));
        return join(parts, c.kind == Condition::Kind::And ? " AND " : " OR ");
    }
    }
    return {};
}

std::string render_query(const SelectQuery& q) {
    std::vector<std::string> proj, from;
    for (const auto& p : q.projection) proj.push_back(render_operand(p));
    for (const auto& t : q.from) from.push_back(t.alias.empty() ? t.relation : t.relation + " " + t.alias);
    std::string out = fmt::format("SELECT {} FROM {}", join(proj), join(from));
    if (q.where.kind != Condition::Kind::True) out += " WHERE " + render_condition(q.where);
    for (const auto& b : q.union_branches) out += " UNION " + render_query(b);
    return out;
}

std::string render_spec(const Spec& spec) {
    std::string out;
    for (const auto& r : spec.relations) out += render_relation(r);
    if (!spec.services.empty()) out += "\n";
    for (const auto& s : spec.services) {
        std::vector<std::string> types;
        for (auto t : s.param_types) types.emplace_back(to_string(t));
        out += fmt::format("SERVICE {}({}) : {};\n", s.name, join(types), to_string(s.return_type));
    }
    for (const auto& a : spec.actions) out += "\n" + render_action(a);
    if (!spec.rules.empty()) out += "\n";
    for (const auto& r : spec.rules) {
        std::vector<std::string> args;
        for (const auto& a : r.args) args.push_back(render_operand(a));
        out += fmt::format("RULE {} ENABLES {}({});\n", render_query(r.condition), r.action, join(args));
    }
    return out;
}

std::uint64_t spec_digest(const Spec& spec) {
    Fnv1a h;
    h.bytes(render_spec(spec));
    return h.digest();
}

}  // namespace daproc
