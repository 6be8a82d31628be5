#pragma once

#include <daproc/model.hpp>

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace daproc {

struct ParseResult {
    std::optional<Spec> spec;  // set iff diagnostics holds no error
    std::vector<Diagnostic> diagnostics;

    bool ok() const { return spec.has_value(); }
};

// Parses dapSL text. Keywords are case-insensitive, identifiers case-sensitive.
// Action parameters written without a type take the type of the rule argument
// bound to them.
ParseResult parse_spec(std::string_view text, std::string file = "<input>");

// Reads and parses a file; I/O failures become diagnostics.
ParseResult parse_spec_file(const std::string& path);

// Parses a standalone SELECT query (e.g. a reachability goal).
struct QueryParseResult {
    std::optional<SelectQuery> query;
    std::vector<Diagnostic> diagnostics;
};
QueryParseResult parse_query(std::string_view text);

// Canonical text: RELATION, SERVICE, ACTION, RULE blocks, in declaration order
// within each block. parse_spec(render_spec(s)) == s.
std::string render_spec(const Spec& spec);

std::string render_query(const SelectQuery& q);
std::string render_condition(const Condition& c);

}  // namespace daproc
