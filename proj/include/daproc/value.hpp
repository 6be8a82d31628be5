#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace daproc {

enum class AttrType { Int, String };

std::string_view to_string(AttrType type);

// No NULLs: every attribute holds exactly one of these.
using Value = std::variant<std::int64_t, std::string>;
using Tuple = std::vector<Value>;

AttrType type_of(const Value& v);
bool has_type(const Value& v, AttrType type);

// SQL literal form: 42, 'it''s'.
std::string to_literal(const Value& v);
// Bare form used in service signatures and labels: 42, Kriss.
std::string to_display(const Value& v);
std::string to_display(const Tuple& t);

// A plain database instance over the original schema, keyed by relation name.
struct Snapshot {
    std::map<std::string, std::set<Tuple>, std::less<>> relations;

    const std::set<Tuple>& at(std::string_view relation) const;
    std::size_t tuple_count() const;

    friend bool operator==(const Snapshot&, const Snapshot&) = default;
    friend bool operator<(const Snapshot& a, const Snapshot& b) { return a.relations < b.relations; }
};

using ParamEnv = std::map<std::string, Value, std::less<>>;

}  // namespace daproc
