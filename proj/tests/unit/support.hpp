#pragma once

#include <daproc/json_io.hpp>
#include <daproc/parser.hpp>

#include <doctest.h>

#include <string>

namespace support {

inline const std::string kData = DAPROC_DATA_DIR;

inline daproc::Spec parse(const std::string& text) {
    auto p = daproc::parse_spec(text);
    if (!p.ok())
        for (const auto& d : p.diagnostics) FAIL_CHECK(daproc::to_string(d));
    REQUIRE(p.ok());
    return *p.spec;
}

inline daproc::Spec travel() {
    auto p = daproc::parse_spec_file(kData + "/travel.dap");
    REQUIRE(p.ok());
    return *p.spec;
}

inline daproc::Snapshot load(const daproc::Spec& spec, const std::string& file) {
    return daproc::load_snapshot(spec, kData + "/" + file);
}

inline daproc::Value I(std::int64_t v) { return v; }
inline daproc::Value S(const char* v) { return std::string(v); }

inline daproc::SelectQuery query(const std::string& text) {
    auto q = daproc::parse_query(text);
    REQUIRE(q.query.has_value());
    return *q.query;
}

}  // namespace support
