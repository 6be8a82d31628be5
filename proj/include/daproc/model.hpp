#pragma once

// Abstract syntax of dapSL specifications.

#include <daproc/value.hpp>

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace daproc {

struct SourceSpan {
    std::string file;
    int start_line = 0;
    int start_col = 0;
    int end_line = 0;
    int end_col = 0;

    bool known() const { return start_line > 0; }
    friend bool operator==(const SourceSpan&, const SourceSpan&) = default;
};

std::string to_string(const SourceSpan& span);

// ---- data layer ----

struct Attribute {
    std::string name;
    AttrType type;
    friend bool operator==(const Attribute&, const Attribute&) = default;
};

struct ForeignKey {
    std::string name;
    std::vector<std::string> source_attrs;
    std::string target_relation;
    std::vector<std::string> target_attrs;
    friend bool operator==(const ForeignKey&, const ForeignKey&) = default;
};

struct DomainConstraint {
    std::string attribute;
    std::vector<Value> values;
    friend bool operator==(const DomainConstraint&, const DomainConstraint&) = default;
};

struct RelationSchema {
    std::string name;
    std::vector<Attribute> attributes;
    std::vector<std::string> primary_key;
    std::vector<ForeignKey> foreign_keys;
    std::vector<DomainConstraint> domains;

    std::optional<std::size_t> index_of(std::string_view attr) const;
    const Attribute* find(std::string_view attr) const;

    friend bool operator==(const RelationSchema&, const RelationSchema&) = default;
};

// ---- queries ----

struct AttrRef {
    std::string qualifier;  // alias or relation name; empty when unqualified
    std::string name;
    friend bool operator==(const AttrRef&, const AttrRef&) = default;
};

struct Const {
    Value value;
    friend bool operator==(const Const&, const Const&) = default;
};

struct Param {
    std::string name;
    friend bool operator==(const Param&, const Param&) = default;
};

using Operand = std::variant<AttrRef, Const, Param>;

enum class CmpOp { Eq, Ne, Lt, Le, Gt, Ge };

std::string_view to_string(CmpOp op);
bool compare(CmpOp op, const Value& lhs, const Value& rhs);

struct Condition {
    enum class Kind { True, Cmp, And, Or, Not };

    Kind kind = Kind::True;
    CmpOp op = CmpOp::Eq;
    Operand lhs;
    Operand rhs;
    std::vector<Condition> children;

    static Condition always() { return {}; }
    static Condition cmp(Operand l, CmpOp o, Operand r);
    static Condition all(std::vector<Condition> cs);
    static Condition any(std::vector<Condition> cs);
    static Condition negate(Condition c);

    friend bool operator==(const Condition&, const Condition&) = default;
};

struct TableRef {
    std::string relation;
    std::string alias;  // empty when none
    std::string_view effective_name() const { return alias.empty() ? relation : alias; }
    friend bool operator==(const TableRef&, const TableRef&) = default;
};

struct SelectQuery {
    std::vector<Operand> projection;
    std::vector<TableRef> from;
    Condition where;
    std::vector<SelectQuery> union_branches;

    friend bool operator==(const SelectQuery&, const SelectQuery&) = default;
};

// ---- control layer ----

struct Invocation {
    std::string service;
    std::vector<std::variant<Const, Param>> args;
    friend bool operator==(const Invocation&, const Invocation&) = default;
};

using Term = std::variant<Const, Param, Invocation>;

struct DeleteEffect {
    std::string relation;
    Condition where;
    friend bool operator==(const DeleteEffect&, const DeleteEffect&) = default;
};

struct InsertEffect {
    std::string relation;
    std::vector<std::string> columns;
    // Either a single row of terms or a query supplying the row set.
    std::variant<std::vector<Term>, SelectQuery> source;
    friend bool operator==(const InsertEffect&, const InsertEffect&) = default;
};

using Effect = std::variant<DeleteEffect, InsertEffect>;

struct ActionParam {
    std::string name;
    AttrType type;
    friend bool operator==(const ActionParam&, const ActionParam&) = default;
};

struct Action {
    std::string name;
    std::vector<ActionParam> params;
    std::vector<Effect> effects;

    std::optional<std::size_t> param_index(std::string_view name) const;
    friend bool operator==(const Action&, const Action&) = default;
};

struct CARule {
    SelectQuery condition;
    std::string action;
    std::vector<AttrRef> args;  // drawn from the condition's projection
    friend bool operator==(const CARule&, const CARule&) = default;
};

struct ServiceSignature {
    std::string name;
    std::vector<AttrType> param_types;
    AttrType return_type;
    friend bool operator==(const ServiceSignature&, const ServiceSignature&) = default;
};

// Element locations recorded by the parser. Keys: "relation R", "relation R.a",
// "service f", "action A", "action A/effect 2", "rule 3". Not part of equality.
using SourceMap = std::map<std::string, SourceSpan, std::less<>>;

struct Spec {
    std::vector<RelationSchema> relations;
    std::vector<ServiceSignature> services;
    std::vector<Action> actions;
    std::vector<CARule> rules;
    SourceMap spans;

    const RelationSchema* relation(std::string_view name) const;
    const ServiceSignature* service(std::string_view name) const;
    const Action* action(std::string_view name) const;
    std::optional<std::size_t> action_index(std::string_view name) const;
    const CARule* rule_for(std::string_view action) const;

    SourceSpan span_of(std::string_view key) const;

    friend bool operator==(const Spec& a, const Spec& b);
};

// ---- helpers shared by the validator, parser and engine ----

// Resolves an attribute reference against a FROM list. Returns the FROM index
// and the attribute index, or nullopt when absent; `ambiguous` is set when an
// unqualified name matches more than one entry.
struct ResolvedAttr {
    std::size_t table;
    std::size_t column;
};
std::optional<ResolvedAttr> resolve_attr(const Spec& spec, const std::vector<TableRef>& from,
                                         const AttrRef& ref, bool* ambiguous = nullptr);

// Static type of a query operand, if it can be determined. Params are typed by
// `params` when given.
std::optional<AttrType> operand_type(const Spec& spec, const std::vector<TableRef>& from,
                                     const Operand& op,
                                     const std::vector<ActionParam>* params = nullptr);

// Index of the projection item a CA-rule argument refers to.
std::optional<std::size_t> resolve_rule_arg(const SelectQuery& q, const AttrRef& arg);

// All constants appearing in rules and effects.
std::set<Value> spec_literals(const Spec& spec);

// Canonical 64-bit digest of the spec (over its rendered text).
std::uint64_t spec_digest(const Spec& spec);

// ---- validation ----

struct Diagnostic {
    enum class Severity { Error, Warning };
    Severity severity;
    SourceSpan span;
    std::string element;
    std::string message;
};

std::string to_string(const Diagnostic& d);

struct ValidationReport {
    std::vector<Diagnostic> diagnostics;

    bool ok() const;
    std::vector<Diagnostic> errors() const;
    std::vector<Diagnostic> warnings() const;
};

ValidationReport validate_spec(const Spec& spec);

// Merges all rules enabling the same action into one rule whose condition is the
// UNION of the originals (projections reordered to the argument order), and drops
// duplicate effects. Identity on specs that are already one-rule-per-action.
Spec normalize_rules(const Spec& spec);

}  // namespace daproc
