#include <daproc/errors.hpp>
#include <daproc/value.hpp>

#include <fmt/format.h>

namespace daproc {

std::string_view to_string(AttrType type) {
    return type == AttrType::Int ? "INT" : "STRING";
}

AttrType type_of(const Value& v) {
    return std::holds_alternative<std::int64_t>(v) ? AttrType::Int : AttrType::String;
}

bool has_type(const Value& v, AttrType type) { return type_of(v) == type; }

std::string to_literal(const Value& v) {
    if (auto i = std::get_if<std::int64_t>(&v)) return std::to_string(*i);
    const auto& s = std::get<std::string>(v);
    std::string out = "'";
    for (char c : s) {
        if (c == '\'') out += '\'';
        out += c;
    }
    out += '\'';
    return out;
}

std::string to_display(const Value& v) {
    if (auto i = std::get_if<std::int64_t>(&v)) return std::to_string(*i);
    return std::get<std::string>(v);
}

std::string to_display(const Tuple& t) {
    std::string out;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (i) out += ',';
        out += to_display(t[i]);
    }
    return out;
}

const std::set<Tuple>& Snapshot::at(std::string_view relation) const {
    auto it = relations.find(relation);
    if (it == relations.end()) throw UnknownRelation(std::string(relation));
    return it->second;
}

std::size_t Snapshot::tuple_count() const {
    std::size_t n = 0;
    for (const auto& [_, rows] : relations) n += rows.size();
    return n;
}

// ---- errors ----

std::string describe(const Violation& v) {
    std::string_view kind;
    switch (v.kind) {
    case Violation::Kind::PrimaryKey: kind = "pk"; break;
    case Violation::Kind::ForeignKey: kind = "fk"; break;
    case Violation::Kind::Domain: kind = "domain"; break;
    case Violation::Kind::Type: kind = "type"; break;
    }
    return fmt::format("{}({}): {}", kind, v.constraint, v.detail);
}

static std::string join_violations(const std::vector<Violation>& vs) {
    std::string out = "constraint violation";
    for (const auto& v : vs) out += "; " + describe(v);
    return out;
}

ConstraintViolation::ConstraintViolation(std::vector<Violation> violations)
    : Error(join_violations(violations)), violations_(std::move(violations)) {}

UnknownState::UnknownState(std::uint64_t state)
    : Error(fmt::format("unknown state {}", state)) {}

UnknownRelation::UnknownRelation(const std::string& name)
    : Error(fmt::format("unknown relation '{}'", name)) {}

UnknownAction::UnknownAction(const std::string& name)
    : Error(fmt::format("unknown action '{}'", name)) {}

UnregisteredService::UnregisteredService(const std::string& name)
    : Error(fmt::format("no handler registered for service '{}'", name)) {}

UnconfiguredService::UnconfiguredService(const std::string& name)
    : Error(fmt::format("mock configuration does not cover service '{}'", name)) {}

}  // namespace daproc
