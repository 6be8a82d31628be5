#include <daproc/digest.hpp>
#include <daproc/parser.hpp>
#include <daproc/persist.hpp>

#include <fmt/format.h>

#include <fstream>
#include <sstream>

namespace daproc {

namespace {

constexpr std::string_view kMagic = "DAPROCJ1";
constexpr std::uint32_t kVersion = 1;

enum RecordType : std::uint8_t {
    kRawInsert = 1,
    kLogInsert = 2,
    kStateCommit = 3,
    kTransition = 4,
    kStateDrop = 5,
};

class Out {
public:
    void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void str(std::string_view s) {
        u32(static_cast<std::uint32_t>(s.size()));
        buf_.append(s);
    }
    void value(const Value& v) {
        if (auto i = std::get_if<std::int64_t>(&v)) {
            u8(0);
            u64(static_cast<std::uint64_t>(*i));
        } else {
            u8(1);
            str(std::get<std::string>(v));
        }
    }
    void tuple(const Tuple& t) {
        u32(static_cast<std::uint32_t>(t.size()));
        for (const auto& v : t) value(v);
    }
    std::string& buf() { return buf_; }

private:
    std::string buf_;
};

class In {
public:
    explicit In(std::string_view data) : data_(data) {}

    bool done() const { return pos_ == data_.size(); }
    std::size_t remaining() const { return data_.size() - pos_; }
    std::size_t pos() const { return pos_; }

    std::uint8_t u8() {
        need(1);
        return static_cast<std::uint8_t>(data_[pos_++]);
    }
    std::uint32_t u32() {
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(u8()) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(u8()) << (8 * i);
        return v;
    }
    std::string str() {
        auto n = u32();
        need(n);
        std::string s(data_.substr(pos_, n));
        pos_ += n;
        return s;
    }
    std::string_view bytes(std::size_t n) {
        need(n);
        auto s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    Value value() {
        auto tag = u8();
        if (tag == 0) return static_cast<std::int64_t>(u64());
        if (tag == 1) return str();
        throw PersistenceError(fmt::format("bad value tag {}", tag));
    }
    Tuple tuple() {
        Tuple t(u32());
        for (auto& v : t) v = value();
        return t;
    }

private:
    void need(std::size_t n) const {
        if (data_.size() - pos_ < n) throw PersistenceError("truncated journal record");
    }
    std::string_view data_;
    std::size_t pos_ = 0;
};

void write_label(Out& o, const TransitionLabel& l) {
    o.str(l.action);
    o.tuple(l.binding);
    o.u32(static_cast<std::uint32_t>(l.results.size()));
    for (const auto& [sig, v] : l.results) {
        o.str(sig);
        o.value(v);
    }
}

TransitionLabel read_label(In& in) {
    TransitionLabel l;
    l.action = in.str();
    l.binding = in.tuple();
    auto n = in.u32();
    for (std::uint32_t i = 0; i < n; ++i) {
        auto sig = in.str();
        l.results.emplace_back(std::move(sig), in.value());
    }
    return l;
}

std::uint8_t type_of_record(const StoreRecord& r) {
    return static_cast<std::uint8_t>(r.index() + 1);
}

std::string payload_of(const StoreRecord& rec) {
    Out o;
    std::visit(
        [&](const auto& r) {
            using T = std::decay_t<decltype(r)>;
            if constexpr (std::is_same_v<T, record::RawInsert> ||
                          std::is_same_v<T, record::LogInsert>) {
                o.str(r.relation);
                o.tuple(r.row);
            } else if constexpr (std::is_same_v<T, record::StateCommit>) {
                o.u64(r.state);
                o.u64(static_cast<std::uint64_t>(r.timestamp));
            } else if constexpr (std::is_same_v<T, record::Transition>) {
                o.u64(r.transition.from);
                o.u64(r.transition.to);
                o.u64(static_cast<std::uint64_t>(r.transition.timestamp));
                write_label(o, r.transition.label);
            } else {
                o.u64(r.state);
            }
        },
        rec);
    return std::move(o.buf());
}

StoreRecord parse_payload(std::uint8_t type, std::string_view payload) {
    In in(payload);
    StoreRecord out;
    switch (type) {
    case kRawInsert: {
        auto rel = in.str();
        out = record::RawInsert{std::move(rel), in.tuple()};
        break;
    }
    case kLogInsert: {
        auto rel = in.str();
        out = record::LogInsert{std::move(rel), in.tuple()};
        break;
    }
    case kStateCommit: {
        auto s = in.u64();
        out = record::StateCommit{s, static_cast<std::int64_t>(in.u64())};
        break;
    }
    case kTransition: {
        TransitionRecord t;
        t.from = in.u64();
        t.to = in.u64();
        t.timestamp = static_cast<std::int64_t>(in.u64());
        t.label = read_label(in);
        out = record::Transition{std::move(t)};
        break;
    }
    case kStateDrop: out = record::StateDrop{in.u64()}; break;
    default: throw PersistenceError(fmt::format("unknown record type {}", type));
    }
    if (!in.done()) throw PersistenceError("trailing bytes in journal record");
    return out;
}

std::uint64_t checksum(std::uint8_t type, std::string_view payload) {
    Fnv1a h;
    h.u8(type);
    h.bytes(payload);
    return h.digest();
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw PersistenceError(fmt::format("cannot open journal '{}'", path));
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

StoreRecord without_timestamp(StoreRecord r) {
    if (auto c = std::get_if<record::StateCommit>(&r)) c->timestamp = 0;
    if (auto t = std::get_if<record::Transition>(&r)) t->transition.timestamp = 0;
    return r;
}

}  // namespace

std::string encode_header(const Spec& spec) {
    Out o;
    o.buf().append(kMagic);
    o.u32(kVersion);
    o.u64(spec_digest(spec));
    o.str(render_spec(spec));
    return std::move(o.buf());
}

std::string encode_record(const StoreRecord& r) {
    const auto type = type_of_record(r);
    const auto payload = payload_of(r);
    Out o;
    o.u32(static_cast<std::uint32_t>(payload.size() + 1 + 8));
    o.u8(type);
    o.buf().append(payload);
    o.u64(checksum(type, payload));
    return std::move(o.buf());
}

JournalWriter::JournalWriter(const std::string& path, const Spec& spec) : path_(path) {
    file_ = std::fopen(path.c_str(), "wb");
    if (!file_) throw PersistenceError(fmt::format("cannot create journal '{}'", path));
    auto header = encode_header(spec);
    if (std::fwrite(header.data(), 1, header.size(), file_) != header.size())
        throw PersistenceError(fmt::format("write to '{}' failed", path));
    std::fflush(file_);
}

JournalWriter::~JournalWriter() {
    if (file_) std::fclose(file_);
}

void JournalWriter::append(const StoreRecord& r) {
    auto bytes = encode_record(r);
    if (std::fwrite(bytes.data(), 1, bytes.size(), file_) != bytes.size() || std::fflush(file_) != 0)
        throw PersistenceError(fmt::format("write to '{}' failed", path_));
}

Journal read_journal(const std::string& path) {
    const auto data = read_file(path);
    In in(data);
    if (data.size() < kMagic.size() || in.bytes(kMagic.size()) != kMagic)
        throw PersistenceError(fmt::format("'{}' is not a daproc journal", path));
    if (auto v = in.u32(); v != kVersion)
        throw PersistenceError(fmt::format("unsupported journal version {}", v));
    Journal j;
    j.digest = in.u64();
    auto text = in.str();
    auto parsed = parse_spec(text, path);
    if (!parsed.ok()) throw PersistenceError("journal header holds an unparsable spec");
    j.spec = std::move(*parsed.spec);
    if (spec_digest(j.spec) != j.digest) throw PersistenceError("journal spec digest mismatch");

    while (!in.done()) {
        const auto at = in.pos();
        if (in.remaining() < 4) throw PersistenceError(fmt::format("torn record at offset {}", at));
        const auto len = in.u32();
        if (len < 9 || in.remaining() < len)
            throw PersistenceError(fmt::format("torn record at offset {}", at));
        const auto type = in.u8();
        const auto payload = in.bytes(len - 9);
        if (in.u64() != checksum(type, payload))
            throw PersistenceError(fmt::format("checksum mismatch at offset {}", at));
        j.records.push_back(parse_payload(type, payload));
    }
    return j;
}

std::string journal_bytes_without_timestamps(const std::string& path) {
    auto j = read_journal(path);
    std::string out = encode_header(j.spec);
    for (auto& r : j.records) out += encode_record(without_timestamp(std::move(r)));
    return out;
}

}  // namespace daproc
