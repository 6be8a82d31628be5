#include <daproc/parser.hpp>

#include "lexer.hpp"

#include <fmt/format.h>

#include <fstream>
#include <sstream>

namespace daproc {

using detail::SyntaxError;
using detail::Token;
using detail::TokenCursor;

namespace {

bool is_declaration_start(const Token& t) {
    return t.is_keyword("RELATION") || t.is_keyword("SERVICE") || t.is_keyword("RULE") ||
           t.is_keyword("ACTION");
}

std::vector<std::string> parse_name_list(TokenCursor& cur, std::string_view what) {
    std::vector<std::string> out;
    cur.expect_symbol("(");
    do {
        out.push_back(cur.expect_ident(what));
    } while (cur.accept_symbol(","));
    cur.expect_symbol(")");
    return out;
}

class SpecParser {
public:
    SpecParser(std::string_view text, std::string file)
        : cur_(detail::tokenize(text), std::move(file)) {}

    ParseResult run() {
        ParseResult result;
        if (cur_.at_end()) {
            result.diagnostics.push_back(error_at(cur_.span_of(cur_.peek()), "no declarations"));
            return result;
        }
        while (!cur_.at_end()) {
            const std::size_t start = cur_.position();
            try {
                declaration();
            } catch (const SyntaxError& e) {
                result.diagnostics.push_back(error_at(e.span, e.message));
                recover(start);
            }
        }
        infer_param_types(result.diagnostics);
        for (const auto& d : result.diagnostics)
            if (d.severity == Diagnostic::Severity::Error) return result;
        result.spec = std::move(spec_);
        return result;
    }

private:
    static Diagnostic error_at(SourceSpan span, std::string msg) {
        return {Diagnostic::Severity::Error, std::move(span), {}, std::move(msg)};
    }

    // Skips to the next top-level declaration keyword after a ';' or '}'.
    void recover(std::size_t start) {
        if (cur_.position() == start && !cur_.at_end()) cur_.seek(start + 1);
        int depth = 0;
        bool boundary = false;
        while (!cur_.at_end()) {
            const Token& t = cur_.peek();
            if (depth == 0 && boundary && is_declaration_start(t)) return;
            if (t.is_symbol("{")) ++depth;
            if (t.is_symbol("}") && depth > 0) --depth;
            boundary = t.is_symbol(";") || t.is_symbol("}");
            cur_.seek(cur_.position() + 1);
        }
    }

    void declaration() {
        const Token& t = cur_.peek();
        if (t.is_keyword("RELATION")) return relation();
        if (t.is_keyword("SERVICE")) return service();
        if (t.is_keyword("ACTION")) return action();
        if (t.is_keyword("RULE")) return rule();
        cur_.fail(t, "expected RELATION, SERVICE, ACTION or RULE");
    }

    void relation() {
        const Token start = cur_.next();
        RelationSchema rel;
        rel.name = cur_.expect_ident("relation name");
        cur_.expect_symbol("(");
        bool inline_pk = false, trailing_pk = false;
        std::vector<ForeignKey> inline_fks;
        std::vector<ForeignKey> trailing_fks;
        do {
            const Token elem = cur_.peek();
            if (elem.is_keyword("PRIMARY")) {
                cur_.next();
                cur_.expect_keyword("KEY");
                if (trailing_pk || inline_pk) cur_.fail(elem, "primary key declared twice");
                rel.primary_key = parse_name_list(cur_, "attribute name");
                trailing_pk = true;
                continue;
            }
            if (elem.is_keyword("CONSTRAINT") || elem.is_keyword("FOREIGN")) {
                ForeignKey fk;
                if (cur_.accept_keyword("CONSTRAINT")) fk.name = cur_.expect_ident("constraint name");
                cur_.expect_keyword("FOREIGN");
                cur_.expect_keyword("KEY");
                fk.source_attrs = parse_name_list(cur_, "attribute name");
                cur_.expect_keyword("REFERENCES");
                fk.target_relation = cur_.expect_ident("relation name");
                fk.target_attrs = parse_name_list(cur_, "attribute name");
                trailing_fks.push_back(std::move(fk));
                continue;
            }
            Attribute attr;
            attr.name = cur_.expect_ident("attribute name");
            attr.type = detail::parse_type(cur_);
            for (;;) {
                const Token mod = cur_.peek();
                if (cur_.accept_keyword("PRIMARY")) {
                    cur_.expect_keyword("KEY");
                    if (trailing_pk) cur_.fail(mod, "primary key declared twice");
                    rel.primary_key.push_back(attr.name);
                    inline_pk = true;
                } else if (cur_.accept_keyword("DOMAIN")) {
                    DomainConstraint d{attr.name, {}};
                    cur_.expect_symbol("(");
                    do {
                        d.values.push_back(detail::parse_literal(cur_));
                    } while (cur_.accept_symbol(","));
                    cur_.expect_symbol(")");
                    rel.domains.push_back(std::move(d));
                } else if (cur_.accept_keyword("REFERENCES")) {
                    ForeignKey fk;
                    fk.source_attrs = {attr.name};
                    fk.target_relation = cur_.expect_ident("relation name");
                    fk.target_attrs = parse_name_list(cur_, "attribute name");
                    inline_fks.push_back(std::move(fk));
                } else {
                    break;
                }
            }
            spec_.spans["relation " + rel.name + "." + attr.name] = cur_.span_from(elem);
            rel.attributes.push_back(std::move(attr));
        } while (cur_.accept_symbol(","));
        cur_.expect_symbol(")");
        cur_.expect_symbol(";");

        for (auto& fk : inline_fks) rel.foreign_keys.push_back(std::move(fk));
        for (auto& fk : trailing_fks) rel.foreign_keys.push_back(std::move(fk));
        for (auto& fk : rel.foreign_keys)
            if (fk.name.empty()) fk.name = default_fk_name(rel, fk);
        spec_.spans["relation " + rel.name] = cur_.span_from(start);
        spec_.relations.push_back(std::move(rel));
    }

    std::string default_fk_name(const RelationSchema& rel, const ForeignKey& fk) {
        const std::string base = fmt::format("FK_{}_{}", rel.name, fk.target_relation);
        auto taken = [&](const std::string& n) {
            for (const auto& r : spec_.relations)
                for (const auto& f : r.foreign_keys)
                    if (f.name == n) return true;
            for (const auto& f : rel.foreign_keys)
                if (f.name == n) return true;
            return false;
        };
        if (!taken(base)) return base;
        for (int i = 2;; ++i) {
            auto n = fmt::format("{}_{}", base, i);
            if (!taken(n)) return n;
        }
    }

    void service() {
        const Token start = cur_.next();
        ServiceSignature sig;
        sig.name = cur_.expect_ident("service name");
        cur_.expect_symbol("(");
        if (!cur_.accept_symbol(")")) {
            do {
                sig.param_types.push_back(detail::parse_type(cur_));
            } while (cur_.accept_symbol(","));
            cur_.expect_symbol(")");
        }
        cur_.expect_symbol(":");
        sig.return_type = detail::parse_type(cur_);
        cur_.expect_symbol(";");
        spec_.spans["service " + sig.name] = cur_.span_from(start);
        spec_.services.push_back(std::move(sig));
    }

    std::variant<Const, Param> parse_invocation_arg() {
        if (cur_.accept_symbol(":")) return Param{cur_.expect_ident("parameter name")};
        return Const{detail::parse_literal(cur_)};
    }

    Term parse_term() {
        if (cur_.accept_symbol("@")) {
            Invocation inv;
            inv.service = cur_.expect_ident("service name");
            cur_.expect_symbol("(");
            if (!cur_.accept_symbol(")")) {
                do {
                    if (cur_.peek().is_symbol("@"))
                        cur_.fail(cur_.peek(), "service invocations cannot be nested");
                    inv.args.push_back(parse_invocation_arg());
                } while (cur_.accept_symbol(","));
                cur_.expect_symbol(")");
            }
            return inv;
        }
        if (cur_.accept_symbol(":")) return Param{cur_.expect_ident("parameter name")};
        return Const{detail::parse_literal(cur_)};
    }

    Effect parse_effect() {
        if (cur_.accept_keyword("DELETE")) {
            DeleteEffect d;
            cur_.expect_keyword("FROM");
            d.relation = cur_.expect_ident("relation name");
            if (cur_.accept_keyword("WHERE")) d.where = detail::parse_condition(cur_);
            cur_.expect_symbol(";");
            return d;
        }
        if (cur_.accept_keyword("INSERT")) {
            InsertEffect ins;
            cur_.expect_keyword("INTO");
            ins.relation = cur_.expect_ident("relation name");
            ins.columns = parse_name_list(cur_, "column name");
            if (cur_.accept_keyword("VALUES")) {
                std::vector<Term> terms;
                cur_.expect_symbol("(");
                do {
                    terms.push_back(parse_term());
                } while (cur_.accept_symbol(","));
                cur_.expect_symbol(")");
                ins.source = std::move(terms);
            } else if (cur_.peek().is_keyword("SELECT")) {
                ins.source = detail::parse_select(cur_);
            } else {
                cur_.fail(cur_.peek(), "expected VALUES or SELECT");
            }
            cur_.expect_symbol(";");
            return ins;
        }
        cur_.fail(cur_.peek(), "expected DELETE or INSERT");
    }

    void action() {
        const Token start = cur_.next();
        Action a;
        a.name = cur_.expect_ident("action name");
        std::vector<bool> typed;
        cur_.expect_symbol("(");
        if (!cur_.accept_symbol(")")) {
            do {
                ActionParam p{cur_.expect_ident("parameter name"), AttrType::Int};
                const Token& t = cur_.peek();
                bool has_type = t.is_keyword("INT") || t.is_keyword("INTEGER") ||
                                t.is_keyword("STRING") || t.is_keyword("TEXT") ||
                                t.is_keyword("VARCHAR");
                if (has_type) p.type = detail::parse_type(cur_);
                typed.push_back(has_type);
                a.params.push_back(std::move(p));
            } while (cur_.accept_symbol(","));
            cur_.expect_symbol(")");
        }
        cur_.expect_symbol("{");
        while (!cur_.accept_symbol("}")) {
            const Token e = cur_.peek();
            if (e.kind == Token::Kind::End) cur_.fail(e, "unterminated action body");
            a.effects.push_back(parse_effect());
            spec_.spans[fmt::format("action {}/effect {}", a.name, a.effects.size())] =
                cur_.span_from(e);
        }
        cur_.accept_symbol(";");
        spec_.spans["action " + a.name] = cur_.span_from(start);
        untyped_.push_back({spec_.actions.size(), std::move(typed)});
        spec_.actions.push_back(std::move(a));
    }

    void rule() {
        const Token start = cur_.next();
        CARule r;
        r.condition = detail::parse_select(cur_);
        cur_.expect_keyword("ENABLES");
        r.action = cur_.expect_ident("action name");
        cur_.expect_symbol("(");
        if (!cur_.accept_symbol(")")) {
            do {
                auto op = detail::parse_operand(cur_);
                auto* ref = std::get_if<AttrRef>(&op);
                if (!ref) cur_.fail(cur_.peek(), "rule arguments must be attribute names");
                r.args.push_back(std::move(*ref));
            } while (cur_.accept_symbol(","));
            cur_.expect_symbol(")");
        }
        cur_.expect_symbol(";");
        spec_.spans[fmt::format("rule {}", spec_.rules.size() + 1)] = cur_.span_from(start);
        spec_.rules.push_back(std::move(r));
    }

    void infer_param_types(std::vector<Diagnostic>& diags) {
        auto name_of = [](const AttrRef& r) { return r.qualifier.empty() ? r.name : r.qualifier + "." + r.name; };
        for (const auto& [index, typed] : untyped_) {
            auto& a = spec_.actions[index];
            const CARule* rule = spec_.rule_for(a.name);
            const bool usable = rule && rule->args.size() == a.params.size();
            for (std::size_t k = 0; k < a.params.size(); ++k) {
                if (typed[k]) continue;
                if (!usable) {
                    diags.push_back(error_at(
                        spec_.span_of("action " + a.name),
                        fmt::format("cannot infer the type of parameter '{}' of action '{}'; "
                                    "declare it explicitly",
                                    a.params[k].name, a.name)));
                    continue;
                }
                // blame the rule, where the misspelling usually is
                const auto span = spec_.span_of(
                    fmt::format("rule {}", static_cast<std::size_t>(rule - spec_.rules.data()) + 1));
                const AttrRef* unknown = nullptr;
                for (const auto& item : rule->condition.projection)
                    if (const auto* ref = std::get_if<AttrRef>(&item);
                        ref && !unknown && !operand_type(spec_, rule->condition.from, item))
                        unknown = ref;
                if (unknown) {
                    diags.push_back(error_at(span, fmt::format("rule enabling {}: unknown attribute '{}'",
                                                               a.name, name_of(*unknown))));
                    break;
                }
                auto idx = resolve_rule_arg(rule->condition, rule->args[k]);
                if (!idx) {
                    diags.push_back(error_at(span, fmt::format("rule enabling {}: argument '{}' is not selected",
                                                               a.name, name_of(rule->args[k]))));
                    continue;
                }
                const auto& selected = rule->condition.projection[*idx];
                auto t = operand_type(spec_, rule->condition.from, selected);
                if (!t) {
                    const auto* ref = std::get_if<AttrRef>(&selected);
                    diags.push_back(error_at(
                        span, ref ? fmt::format("rule enabling {}: unknown attribute '{}'", a.name, name_of(*ref))
                                  : fmt::format("rule enabling {}: cannot type argument {}", a.name, k + 1)));
                    continue;
                }
                a.params[k].type = *t;
            }
        }
    }

    TokenCursor cur_;
    Spec spec_;
    std::vector<std::pair<std::size_t, std::vector<bool>>> untyped_;
};

}  // namespace

ParseResult parse_spec(std::string_view text, std::string file) {
    return SpecParser(text, std::move(file)).run();
}

ParseResult parse_spec_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        ParseResult r;
        r.diagnostics.push_back({Diagnostic::Severity::Error, SourceSpan{path}, {},
                                 "cannot read file"});
        return r;
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_spec(ss.str(), path);
}

QueryParseResult parse_query(std::string_view text) {
    QueryParseResult r;
    TokenCursor cur(detail::tokenize(text), "<query>");
    try {
        auto q = detail::parse_select(cur);
        cur.accept_symbol(";");
        if (!cur.at_end()) cur.fail(cur.peek(), "unexpected input after query");
        r.query = std::move(q);
    } catch (const SyntaxError& e) {
        r.diagnostics.push_back({Diagnostic::Severity::Error, e.span, {}, e.message});
    }
    return r;
}

}  // namespace daproc
