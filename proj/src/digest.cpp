#include <daproc/digest.hpp>

#include <fmt/format.h>

namespace daproc {

void Fnv1a::bytes(std::string_view data) {
    for (unsigned char c : data) {
        h_ ^= c;
        h_ *= 0x100000001b3ULL;
    }
}

void Fnv1a::u8(std::uint8_t v) {
    h_ ^= v;
    h_ *= 0x100000001b3ULL;
}

void Fnv1a::u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
}

void Fnv1a::value(const Value& v) {
    if (auto i = std::get_if<std::int64_t>(&v)) {
        u8(0);
        u64(static_cast<std::uint64_t>(*i));
        return;
    }
    const auto& s = std::get<std::string>(v);
    u8(1);
    u64(s.size());
    bytes(s);
}

void Fnv1a::tuple(const Tuple& t) {
    u64(t.size());
    for (const auto& v : t) value(v);
}

std::uint64_t hash_tuple(const Tuple& t) {
    Fnv1a h;
    h.tuple(t);
    return h.digest();
}

std::uint64_t hash_snapshot(const Snapshot& s) {
    // std::map and std::set already iterate in name / lexicographic order.
    Fnv1a h;
    h.u64(s.relations.size());
    for (const auto& [name, rows] : s.relations) {
        h.u64(name.size());
        h.bytes(name);
        h.u64(rows.size());
        for (const auto& t : rows) h.tuple(t);
    }
    return h.digest();
}

std::string hex64(std::uint64_t v) { return fmt::format("{:016x}", v); }

}  // namespace daproc
