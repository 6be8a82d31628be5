#pragma once

// Append-only store journal. Layout:
//   header: "DAPROCJ1" | u32 version | u64 spec digest | u32 len | spec text
//   record: u32 len | u8 type | payload[len - 9] | u64 fnv(type, payload)
// All integers little-endian.

#include <daproc/store.hpp>

#include <cstdio>
#include <string>
#include <vector>

namespace daproc {

class JournalWriter : public RecordSink {
public:
    // Creates (truncates) `path` and writes the header for `spec`.
    JournalWriter(const std::string& path, const Spec& spec);
    ~JournalWriter() override;
    JournalWriter(const JournalWriter&) = delete;
    JournalWriter& operator=(const JournalWriter&) = delete;

    void append(const StoreRecord& r) override;
    const std::string& path() const { return path_; }

private:
    std::string path_;
    std::FILE* file_ = nullptr;
};

struct Journal {
    Spec spec;
    std::uint64_t digest = 0;
    std::vector<StoreRecord> records;
};

// Throws PersistenceError on a bad header, checksum mismatch or torn record.
Journal read_journal(const std::string& path);

std::string encode_header(const Spec& spec);
std::string encode_record(const StoreRecord& r);

// The journal bytes with every timestamp field zeroed, for comparing runs.
std::string journal_bytes_without_timestamps(const std::string& path);

}  // namespace daproc
