#include <daproc/errors.hpp>
#include <daproc/json_io.hpp>

#include <fmt/format.h>

#include <fstream>
#include <sstream>

namespace daproc {

using nlohmann::json;

json value_to_json(const Value& v) {
    if (auto i = std::get_if<std::int64_t>(&v)) return *i;
    return std::get<std::string>(v);
}

Value value_from_json(const json& j) {
    if (j.is_number_integer()) return j.get<std::int64_t>();
    if (j.is_string()) return j.get<std::string>();
    throw Error(fmt::format("expected an integer or string, got {}", j.dump()));
}

json tuple_to_json(const Tuple& t) {
    json out = json::array();
    for (const auto& v : t) out.push_back(value_to_json(v));
    return out;
}

Tuple tuple_from_json(const json& j) {
    if (!j.is_array()) throw Error(fmt::format("expected an array, got {}", j.dump()));
    Tuple t;
    for (const auto& v : j) t.push_back(value_from_json(v));
    return t;
}

json tuple_record(const RelationSchema& r, const Tuple& t) {
    json rec = json::object();
    for (std::size_t i = 0; i < r.attributes.size() && i < t.size(); ++i)
        rec[r.attributes[i].name] = value_to_json(t[i]);
    return rec;
}

json rows_to_json(const RelationSchema& r, const std::set<Tuple>& rows) {
    json out = json::array();
    for (const auto& t : rows) out.push_back(tuple_record(r, t));
    return out;
}

json snapshot_to_json(const Spec& spec, const Snapshot& s) {
    json out = json::object();
    for (const auto& r : spec.relations) {
        auto it = s.relations.find(r.name);
        out[r.name] = it == s.relations.end() ? json::array() : rows_to_json(r, it->second);
    }
    return out;
}

Snapshot snapshot_from_json(const Spec& spec, const json& j) {
    if (!j.is_object()) throw Error("instance: expected an object keyed by relation name");
    Snapshot s;
    for (const auto& r : spec.relations) s.relations[r.name];
    for (const auto& [name, rows] : j.items()) {
        const auto* rel = spec.relation(name);
        if (!rel) throw Error(fmt::format("instance: unknown relation '{}'", name));
        if (!rows.is_array()) throw Error(fmt::format("instance: {} must be a list", name));
        for (const auto& rec : rows) {
            if (!rec.is_object())
                throw Error(fmt::format("instance: {} rows must be objects", name));
            for (const auto& [attr, _] : rec.items())
                if (!rel->find(attr))
                    throw Error(fmt::format("instance: unknown attribute {}.{}", name, attr));
            Tuple t;
            for (const auto& a : rel->attributes) {
                if (!rec.contains(a.name))
                    throw Error(fmt::format("instance: {} row lacks '{}'", name, a.name));
                Value v = value_from_json(rec[a.name]);
                if (!has_type(v, a.type))
                    throw Error(fmt::format("instance: {}.{} expects {}, got {}", name, a.name,
                                            to_string(a.type), rec[a.name].dump()));
                t.push_back(std::move(v));
            }
            s.relations[name].insert(std::move(t));
        }
    }
    return s;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(fmt::format("cannot read '{}'", path));
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Snapshot load_snapshot(const Spec& spec, const std::string& path) {
    json j;
    try {
        j = json::parse(read_text_file(path));
    } catch (const json::parse_error& e) {
        throw Error(fmt::format("{}: {}", path, e.what()));
    }
    return snapshot_from_json(spec, j);
}

json label_to_json(const TransitionLabel& l) {
    json results = json::array();
    for (const auto& [call, v] : l.results) results.push_back({{"call", call}, {"value", value_to_json(v)}});
    return {{"action", l.action}, {"binding", tuple_to_json(l.binding)}, {"results", results},
            {"label", l.to_string()}};
}

TransitionLabel label_from_json(const json& j) {
    TransitionLabel l;
    l.action = j.at("action").get<std::string>();
    l.binding = tuple_from_json(j.at("binding"));
    for (const auto& r : j.at("results"))
        l.results.emplace_back(r.at("call").get<std::string>(), value_from_json(r.at("value")));
    return l;
}

}  // namespace daproc
