#pragma once

#include <daproc/value.hpp>

#include <cstdint>
#include <string>
#include <string_view>

namespace daproc {

// Stable 64-bit FNV-1a over a canonical byte serialization. Used for raw-tuple
// hashes, snapshot keys and spec digests; never treated as identity on its own.
class Fnv1a {
public:
    void bytes(std::string_view data);
    void u8(std::uint8_t v);
    void u64(std::uint64_t v);
    void value(const Value& v);
    void tuple(const Tuple& t);
    std::uint64_t digest() const { return h_; }

private:
    std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

std::uint64_t hash_tuple(const Tuple& t);
std::uint64_t hash_snapshot(const Snapshot& s);
std::string hex64(std::uint64_t v);

}  // namespace daproc
