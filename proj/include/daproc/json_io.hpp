#pragma once

// JSON forms shared by the CLI, the server and the state-space export.
// A snapshot is {"Relation": [{"attr": value, ...}, ...], ...}.

#include <daproc/model.hpp>
#include <daproc/store.hpp>

#include <json.hpp>

#include <string>

namespace daproc {

nlohmann::json value_to_json(const Value& v);
Value value_from_json(const nlohmann::json& j);  // integers and strings only
nlohmann::json tuple_to_json(const Tuple& t);
Tuple tuple_from_json(const nlohmann::json& j);

nlohmann::json tuple_record(const RelationSchema& r, const Tuple& t);
nlohmann::json rows_to_json(const RelationSchema& r, const std::set<Tuple>& rows);
nlohmann::json snapshot_to_json(const Spec& spec, const Snapshot& s);

// Checks relation and attribute names, completeness and types. Relations not
// mentioned are empty. Throws Error.
Snapshot snapshot_from_json(const Spec& spec, const nlohmann::json& j);
Snapshot load_snapshot(const Spec& spec, const std::string& path);

nlohmann::json label_to_json(const TransitionLabel& l);
TransitionLabel label_from_json(const nlohmann::json& j);

std::string read_text_file(const std::string& path);

}  // namespace daproc
