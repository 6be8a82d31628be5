#include <daproc/errors.hpp>
#include <daproc/model.hpp>

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <set>

namespace daproc {

std::string to_string(const Diagnostic& d) {
    return fmt::format("{}: {}: {}{}", to_string(d.span),
                       d.severity == Diagnostic::Severity::Error ? "error" : "warning",
                       d.element.empty() ? "" : d.element + ": ", d.message);
}

bool ValidationReport::ok() const { return errors().empty(); }

std::vector<Diagnostic> ValidationReport::errors() const {
    std::vector<Diagnostic> out;
    for (const auto& d : diagnostics)
        if (d.severity == Diagnostic::Severity::Error) out.push_back(d);
    return out;
}

std::vector<Diagnostic> ValidationReport::warnings() const {
    std::vector<Diagnostic> out;
    for (const auto& d : diagnostics)
        if (d.severity == Diagnostic::Severity::Warning) out.push_back(d);
    return out;
}

namespace {

bool ends_with(std::string_view s, std::string_view suffix) {
    return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

// Column names used by the raw/log encoding.
bool reserved_attribute(std::string_view name) {
    auto l = lower(name);
    return l == "state" || l == "rid" || l == "hash";
}

bool reserved_table_name(std::string_view name) {
    return ends_with(name, "_raw") || ends_with(name, "_log");
}

std::string ref_text(const AttrRef& r) {
    return r.qualifier.empty() ? r.name : r.qualifier + "." + r.name;
}

class Validator {
public:
    explicit Validator(const Spec& spec) : spec_(spec) {}

    ValidationReport run() {
        if (spec_.relations.empty() && spec_.services.empty() && spec_.actions.empty() &&
            spec_.rules.empty())
            warn("", "", "specification declares nothing");
        check_relations();
        check_services();
        check_actions();
        check_rules();
        return std::move(report_);
    }

private:
    void error(const std::string& key, std::string element, std::string msg) {
        report_.diagnostics.push_back(
            {Diagnostic::Severity::Error, spec_.span_of(key), std::move(element), std::move(msg)});
    }
    void warn(const std::string& key, std::string element, std::string msg) {
        report_.diagnostics.push_back({Diagnostic::Severity::Warning, spec_.span_of(key),
                                       std::move(element), std::move(msg)});
    }

    void check_relations() {
        std::set<std::string, std::less<>> names;
        std::set<std::string, std::less<>> fk_names;
        for (const auto& rel : spec_.relations) {
            const std::string key = "relation " + rel.name;
            const std::string el = "relation " + rel.name;
            if (!names.insert(rel.name).second) error(key, el, "duplicate relation name");
            if (reserved_table_name(rel.name))
                error(key, el, "relation names ending in _raw or _log are reserved");
            if (rel.attributes.empty()) error(key, el, "relation has no attributes");

            std::set<std::string, std::less<>> attrs;
            for (const auto& a : rel.attributes) {
                const std::string akey = key + "." + a.name;
                if (!attrs.insert(a.name).second)
                    error(akey, el, fmt::format("duplicate attribute '{}'", a.name));
                if (reserved_attribute(a.name))
                    error(akey, el, fmt::format("attribute name '{}' is reserved", a.name));
            }

            if (rel.primary_key.empty()) error(key, el, "primary key is empty");
            std::set<std::string, std::less<>> pk;
            for (const auto& p : rel.primary_key) {
                if (!rel.find(p))
                    error(key, el, fmt::format("unknown attribute '{}' in primary key", p));
                if (!pk.insert(p).second)
                    error(key, el, fmt::format("attribute '{}' repeated in primary key", p));
            }

            for (const auto& fk : rel.foreign_keys) check_foreign_key(rel, fk, fk_names, key);

            std::set<std::string, std::less<>> domain_attrs;
            for (const auto& d : rel.domains) {
                const auto* a = rel.find(d.attribute);
                if (!a) {
                    error(key, el, fmt::format("unknown attribute '{}' in domain constraint",
                                               d.attribute));
                    continue;
                }
                if (!domain_attrs.insert(d.attribute).second)
                    error(key, el,
                          fmt::format("attribute '{}' has more than one domain", d.attribute));
                if (d.values.empty())
                    error(key, el, fmt::format("domain of '{}' is empty", d.attribute));
                for (const auto& v : d.values)
                    if (!has_type(v, a->type))
                        error(key, el,
                              fmt::format("type mismatch: domain value {} for {} attribute '{}'",
                                          to_literal(v), to_string(a->type), d.attribute));
            }
        }
    }

    void check_foreign_key(const RelationSchema& rel, const ForeignKey& fk,
                           std::set<std::string, std::less<>>& fk_names, const std::string& key) {
        const std::string el = "relation " + rel.name;
        if (!fk_names.insert(fk.name).second)
            error(key, el, fmt::format("duplicate foreign key name '{}'", fk.name));
        if (fk.source_attrs.size() != fk.target_attrs.size() || fk.source_attrs.empty()) {
            error(key, el, fmt::format("foreign key '{}' has mismatched arity", fk.name));
            return;
        }
        const auto* target = spec_.relation(fk.target_relation);
        if (!target) {
            error(key, el, fmt::format("foreign key '{}' references unknown relation '{}'",
                                       fk.name, fk.target_relation));
            return;
        }
        for (std::size_t i = 0; i < fk.source_attrs.size(); ++i) {
            const auto* s = rel.find(fk.source_attrs[i]);
            const auto* t = target->find(fk.target_attrs[i]);
            if (!s)
                error(key, el, fmt::format("unknown attribute '{}' in foreign key '{}'",
                                           fk.source_attrs[i], fk.name));
            if (!t)
                error(key, el, fmt::format("unknown attribute '{}.{}' in foreign key '{}'",
                                           fk.target_relation, fk.target_attrs[i], fk.name));
            if (s && t && s->type != t->type)
                error(key, el, fmt::format("type mismatch in foreign key '{}': {} vs {}", fk.name,
                                           fk.source_attrs[i], fk.target_attrs[i]));
        }
        std::set<std::string> a(fk.target_attrs.begin(), fk.target_attrs.end());
        std::set<std::string> k(target->primary_key.begin(), target->primary_key.end());
        if (a != k)
            error(key, el,
                  fmt::format("foreign key '{}' must reference the primary key of '{}'", fk.name,
                              fk.target_relation));
    }

    void check_services() {
        std::set<std::string, std::less<>> names;
        for (const auto& s : spec_.services) {
            if (!names.insert(s.name).second)
                error("service " + s.name, "service " + s.name, "duplicate service name");
        }
    }

    // Returns the output column types when they can all be determined.
    std::optional<std::vector<AttrType>> check_query(const SelectQuery& q,
                                                     const std::vector<ActionParam>* params,
                                                     const std::string& key,
                                                     const std::string& el) {
        std::vector<AttrType> out;
        bool complete = true;
        if (q.from.empty()) error(key, el, "query has an empty FROM list");
        std::set<std::string, std::less<>> names;
        for (const auto& t : q.from) {
            if (!spec_.relation(t.relation)) {
                error(key, el, fmt::format("unknown relation '{}'", t.relation));
                complete = false;
            }
            if (!names.insert(std::string(t.effective_name())).second)
                error(key, el, fmt::format("duplicate table name '{}' in FROM", t.effective_name()));
            if (!t.alias.empty() && reserved_table_name(t.alias))
                error(key, el, fmt::format("alias '{}' uses a reserved suffix", t.alias));
        }
        for (const auto& item : q.projection) {
            auto t = check_operand(q.from, item, params, key, el);
            if (t)
                out.push_back(*t);
            else
                complete = false;
        }
        if (q.projection.empty()) error(key, el, "query projects no columns");
        check_condition(q.where, q.from, params, key, el);

        for (const auto& b : q.union_branches) {
            auto bt = check_query(b, params, key, el);
            if (b.projection.size() != q.projection.size())
                error(key, el, "UNION branches have different arity");
            else if (bt && complete && *bt != out)
                error(key, el, "type mismatch between UNION branches");
        }
        if (!complete) return std::nullopt;
        return out;
    }

    std::optional<AttrType> check_operand(const std::vector<TableRef>& from, const Operand& op,
                                          const std::vector<ActionParam>* params,
                                          const std::string& key, const std::string& el) {
        if (auto ref = std::get_if<AttrRef>(&op)) {
            bool ambiguous = false;
            auto r = resolve_attr(spec_, from, *ref, &ambiguous);
            if (!r) {
                if (ambiguous) {
                    error(key, el, fmt::format("ambiguous attribute '{}'", ref_text(*ref)));
                } else if (!ref->qualifier.empty() &&
                           std::none_of(from.begin(), from.end(), [&](const TableRef& t) {
                               return t.effective_name() == ref->qualifier;
                           })) {
                    error(key, el, fmt::format("unknown table '{}'", ref->qualifier));
                } else {
                    std::string rels;
                    for (const auto& t : from) rels += (rels.empty() ? "" : ", ") + t.relation;
                    error(key, el,
                          fmt::format("unknown attribute '{}' in {}", ref_text(*ref), rels));
                }
                return std::nullopt;
            }
            return spec_.relation(from[r->table].relation)->attributes[r->column].type;
        }
        if (auto p = std::get_if<Param>(&op)) {
            if (!params) {
                error(key, el, fmt::format("parameter ':{}' is not allowed here", p->name));
                return std::nullopt;
            }
            auto t = operand_type(spec_, from, op, params);
            if (!t) error(key, el, fmt::format("undeclared parameter ':{}'", p->name));
            return t;
        }
        return type_of(std::get<Const>(op).value);
    }

    void check_condition(const Condition& c, const std::vector<TableRef>& from,
                         const std::vector<ActionParam>* params, const std::string& key,
                         const std::string& el) {
        if (c.kind == Condition::Kind::Cmp) {
            auto l = check_operand(from, c.lhs, params, key, el);
            auto r = check_operand(from, c.rhs, params, key, el);
            if (l && r && *l != *r)
                error(key, el,
                      fmt::format("type mismatch in comparison: {} {} {}", to_string(*l),
                                  to_string(c.op), to_string(*r)));
        }
        if (c.kind == Condition::Kind::Not && c.children.size() != 1)
            error(key, el, "NOT takes exactly one operand");
        for (const auto& ch : c.children) check_condition(ch, from, params, key, el);
    }

    void check_actions() {
        std::set<std::string, std::less<>> names;
        for (const auto& a : spec_.actions) {
            const std::string key = "action " + a.name;
            const std::string el = "action " + a.name;
            if (!names.insert(a.name).second) error(key, el, "duplicate action name");
            std::set<std::string, std::less<>> params;
            for (const auto& p : a.params)
                if (!params.insert(p.name).second)
                    error(key, el, fmt::format("duplicate parameter '{}'", p.name));

            for (std::size_t i = 0; i < a.effects.size(); ++i) {
                const std::string ekey = fmt::format("{}/effect {}", key, i + 1);
                if (auto d = std::get_if<DeleteEffect>(&a.effects[i]))
                    check_delete(a, *d, ekey, el);
                else
                    check_insert(a, std::get<InsertEffect>(a.effects[i]), ekey, el);
                for (std::size_t j = 0; j < i; ++j)
                    if (a.effects[j] == a.effects[i]) {
                        warn(ekey, el, fmt::format("effect {} duplicates effect {}", i + 1, j + 1));
                        break;
                    }
            }
            if (!spec_.rule_for(a.name)) warn(key, el, "no rule enables this action");
        }
    }

    void check_delete(const Action& a, const DeleteEffect& d, const std::string& key,
                      const std::string& el) {
        if (!spec_.relation(d.relation)) {
            error(key, el, fmt::format("unknown relation '{}'", d.relation));
            return;
        }
        check_condition(d.where, {TableRef{d.relation, {}}}, &a.params, key, el);
    }

    void check_insert(const Action& a, const InsertEffect& ins, const std::string& key,
                      const std::string& el) {
        const auto* rel = spec_.relation(ins.relation);
        if (!rel) {
            error(key, el, fmt::format("unknown relation '{}'", ins.relation));
            return;
        }
        std::vector<std::optional<AttrType>> col_types;
        std::set<std::string, std::less<>> seen;
        for (const auto& c : ins.columns) {
            const auto* attr = rel->find(c);
            if (!attr) error(key, el, fmt::format("unknown attribute '{}' in {}", c, rel->name));
            if (!seen.insert(c).second)
                error(key, el, fmt::format("column '{}' listed twice", c));
            col_types.push_back(attr ? std::optional(attr->type) : std::nullopt);
        }
        for (const auto& attr : rel->attributes)
            if (!seen.count(attr.name))
                error(key, el,
                      fmt::format("insert into {} does not supply attribute '{}'", rel->name,
                                  attr.name));

        if (auto q = std::get_if<SelectQuery>(&ins.source)) {
            auto types = check_query(*q, &a.params, key, el);
            if (q->projection.size() != ins.columns.size()) {
                error(key, el, "insert source arity differs from column list");
                return;
            }
            if (!types) return;
            for (std::size_t i = 0; i < col_types.size(); ++i)
                if (col_types[i] && *col_types[i] != (*types)[i])
                    error(key, el,
                          fmt::format("type mismatch: {} value for {} column '{}'",
                                      to_string((*types)[i]), to_string(*col_types[i]),
                                      ins.columns[i]));
            return;
        }

        const auto& terms = std::get<std::vector<Term>>(ins.source);
        if (terms.size() != ins.columns.size()) {
            error(key, el, "VALUES arity differs from column list");
            return;
        }
        for (std::size_t i = 0; i < terms.size(); ++i) {
            auto t = term_type(a, terms[i], key, el);
            if (t && col_types[i] && *t != *col_types[i])
                error(key, el,
                      fmt::format("type mismatch: {} value for {} column '{}'", to_string(*t),
                                  to_string(*col_types[i]), ins.columns[i]));
        }
    }

    std::optional<AttrType> term_type(const Action& a, const Term& t, const std::string& key,
                                      const std::string& el) {
        if (auto c = std::get_if<Const>(&t)) return type_of(c->value);
        if (auto p = std::get_if<Param>(&t)) {
            auto i = a.param_index(p->name);
            if (!i) {
                error(key, el, fmt::format("undeclared parameter ':{}'", p->name));
                return std::nullopt;
            }
            return a.params[*i].type;
        }
        const auto& inv = std::get<Invocation>(t);
        const auto* sig = spec_.service(inv.service);
        if (!sig) {
            error(key, el, fmt::format("unknown service '{}'", inv.service));
            return std::nullopt;
        }
        if (sig->param_types.size() != inv.args.size()) {
            error(key, el, fmt::format("service '{}' expects {} arguments, got {}", inv.service,
                                       sig->param_types.size(), inv.args.size()));
        } else {
            for (std::size_t i = 0; i < inv.args.size(); ++i) {
                std::optional<AttrType> at;
                if (auto c = std::get_if<Const>(&inv.args[i])) {
                    at = type_of(c->value);
                } else {
                    const auto& p = std::get<Param>(inv.args[i]);
                    auto pi = a.param_index(p.name);
                    if (!pi)
                        error(key, el, fmt::format("undeclared parameter ':{}'", p.name));
                    else
                        at = a.params[*pi].type;
                }
                if (at && *at != sig->param_types[i])
                    error(key, el,
                          fmt::format("type mismatch: argument {} of '{}' is {}, expected {}",
                                      i + 1, inv.service, to_string(*at),
                                      to_string(sig->param_types[i])));
            }
        }
        return sig->return_type;
    }

    void check_rules() {
        std::map<std::string, int, std::less<>> per_action;
        for (std::size_t i = 0; i < spec_.rules.size(); ++i) {
            const auto& r = spec_.rules[i];
            const std::string key = fmt::format("rule {}", i + 1);
            const std::string el = fmt::format("rule {} ({})", i + 1, r.action);
            auto types = check_query(r.condition, nullptr, key, el);
            const auto* a = spec_.action(r.action);
            if (!a) {
                error(key, el, fmt::format("rule enables unknown action '{}'", r.action));
                continue;
            }
            if (++per_action[r.action] == 2)
                warn(key, el,
                     fmt::format("action '{}' has several rules; they are merged by UNION",
                                 r.action));
            if (r.args.size() != a->params.size()) {
                error(key, el, fmt::format("rule passes {} arguments, action '{}' expects {}",
                                           r.args.size(), r.action, a->params.size()));
                continue;
            }
            for (std::size_t k = 0; k < r.args.size(); ++k) {
                auto idx = resolve_rule_arg(r.condition, r.args[k]);
                if (!idx) {
                    error(key, el,
                          fmt::format("argument '{}' is not in the rule's projection",
                                      ref_text(r.args[k])));
                    continue;
                }
                if (types && (*types)[*idx] != a->params[k].type)
                    error(key, el,
                          fmt::format("type mismatch: argument '{}' is {}, parameter '{}' is {}",
                                      ref_text(r.args[k]), to_string((*types)[*idx]),
                                      a->params[k].name, to_string(a->params[k].type)));
            }
        }
    }

    const Spec& spec_;
    ValidationReport report_;
};

// Splits a query into its UNION-free branches.
void flatten_branches(const SelectQuery& q, std::vector<SelectQuery>& out) {
    SelectQuery head = q;
    head.union_branches.clear();
    out.push_back(std::move(head));
    for (const auto& b : q.union_branches) flatten_branches(b, out);
}

std::vector<AttrType> rule_arg_types(const Spec& spec, const CARule& r) {
    std::vector<AttrType> out;
    for (const auto& arg : r.args) {
        auto idx = resolve_rule_arg(r.condition, arg);
        if (!idx) throw MergeArityMismatch("rule argument not in projection");
        auto t = operand_type(spec, r.condition.from, r.condition.projection[*idx]);
        if (!t) throw MergeArityMismatch("cannot type rule argument");
        out.push_back(*t);
    }
    return out;
}

}  // namespace

ValidationReport validate_spec(const Spec& spec) { return Validator(spec).run(); }

Spec normalize_rules(const Spec& spec) {
    Spec out = spec;
    for (auto& a : out.actions) {
        std::vector<Effect> unique;
        for (auto& e : a.effects)
            if (std::find(unique.begin(), unique.end(), e) == unique.end())
                unique.push_back(std::move(e));
        a.effects = std::move(unique);
    }

    std::map<std::string, std::vector<const CARule*>, std::less<>> groups;
    std::vector<std::string> order;
    for (const auto& r : spec.rules) {
        auto& g = groups[r.action];
        if (g.empty()) order.push_back(r.action);
        g.push_back(&r);
    }

    out.rules.clear();
    for (const auto& name : order) {
        const auto& group = groups[name];
        if (group.size() == 1) {
            out.rules.push_back(*group.front());
            continue;
        }
        const auto expected = rule_arg_types(spec, *group.front());
        std::vector<SelectQuery> branches;
        for (const auto* r : group) {
            if (rule_arg_types(spec, *r) != expected)
                throw MergeArityMismatch(
                    fmt::format("rules for action '{}' bind different parameter types", name));
            std::vector<std::size_t> idx;
            for (const auto& arg : r->args) idx.push_back(*resolve_rule_arg(r->condition, arg));
            std::vector<SelectQuery> flat;
            flatten_branches(r->condition, flat);
            for (auto& b : flat) {
                std::vector<Operand> proj;
                for (auto i : idx) proj.push_back(b.projection[i]);
                b.projection = std::move(proj);
                branches.push_back(std::move(b));
            }
        }
        CARule merged;
        merged.action = name;
        merged.condition = std::move(branches.front());
        for (std::size_t i = 1; i < branches.size(); ++i)
            merged.condition.union_branches.push_back(std::move(branches[i]));
        for (const auto& p : merged.condition.projection)
            merged.args.push_back(std::get<AttrRef>(p));
        out.rules.push_back(std::move(merged));
    }
    return out;
}

}  // namespace daproc
