#include "support.hpp"

#include <daproc/engine.hpp>
#include <daproc/persist.hpp>

#include <filesystem>
#include <fstream>
#include <unistd.h>

using namespace daproc;
namespace fs = std::filesystem;

TEST_SUITE_BEGIN("persist");

namespace {

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& stem)
        : path((fs::temp_directory_path() / ("daproc-test-" + std::to_string(getpid()) + "-" + stem)).string()) {}
    ~TempFile() { fs::remove(path); }
};

std::string bytes(const std::string& path) { return read_text_file(path); }

void write_bytes(const std::string& path, const std::string& data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << data;
}

struct Run {
    Spec spec = support::travel();
    JournalWriter journal;
    std::int64_t clock;
    Engine engine;

    Run(const std::string& path, Modality m, std::int64_t clock_start)
        : journal(path, spec),
          clock(clock_start),
          engine(spec, support::load(spec, "travel_init.json"), m, EngineOptions{[this] { return clock += 3; }, &journal}) {
        engine.services().configure(load_service_config(support::kData + "/travel_services.json"));
        engine.services().default_to_interactive();
        run_script(engine, parse_script(read_text_file(support::kData + "/travel_trace.script")));
    }
};

void run_trace(const std::string& path, Modality m, std::int64_t clock_start) { Run run(path, m, clock_start); }

}  // namespace

TEST_CASE("replay rebuilds the store") {
    TempFile f("trace.journal");
    run_trace(f.path, Modality::History, 1000);
    auto journal = read_journal(f.path);
    Spec spec = support::travel();
    CHECK(journal.spec == spec);
    CHECK(journal.digest == spec_digest(spec));

    Run live(f.path + ".live", Modality::History, 1000);
    auto store = EncodedStore::replay(journal.spec, journal.records);
    CHECK(store->states() == std::vector<StateId>{1, 2, 3, 4});
    CHECK(store->transitions() == live.engine.store().transitions());
    for (StateId s : store->states()) {
        CHECK(store->snapshot(s) == live.engine.store().snapshot(s));
        CHECK(store->state_timestamp(s) == live.engine.store().state_timestamp(s));
    }
    CHECK(store->state_timestamp(1) < store->state_timestamp(4));
    CHECK(store->reconstruct("TrvlCost", 4) == std::set<Tuple>{{support::I(4), support::I(2), support::I(700)}});
    for (const auto& r : spec.relations) CHECK(store->raw_rows(r.name) == live.engine.store().raw_rows(r.name));
    fs::remove(f.path + ".live");
}

TEST_CASE("replaying into a new journal reproduces the bytes") {
    TempFile a("a.journal"), b("b.journal");
    run_trace(a.path, Modality::History, 50);
    auto journal = read_journal(a.path);
    {
        JournalWriter w(b.path, journal.spec);
        EncodedStore::replay(journal.spec, journal.records, &w);
    }
    CHECK(bytes(a.path) == bytes(b.path));

    std::string encoded = encode_header(journal.spec);
    for (const auto& r : journal.records) encoded += encode_record(r);
    CHECK(encoded == bytes(a.path));
}

TEST_CASE("plain mode journals state drops") {
    TempFile f("plain.journal");
    run_trace(f.path, Modality::Plain, 0);
    auto journal = read_journal(f.path);
    std::size_t drops = 0;
    for (const auto& r : journal.records) drops += std::holds_alternative<record::StateDrop>(r);
    CHECK(drops == 3);
    auto store = EncodedStore::replay(journal.spec, journal.records);
    CHECK(store->states() == std::vector<StateId>{4});
    CHECK(store->raw_rows("CurrReq").size() == 3);
}

TEST_CASE("timestamps are the only difference between runs") {
    TempFile a("t1.journal"), b("t2.journal");
    run_trace(a.path, Modality::History, 1000);
    run_trace(b.path, Modality::History, 777777);
    CHECK(bytes(a.path) != bytes(b.path));
    CHECK(journal_bytes_without_timestamps(a.path) == journal_bytes_without_timestamps(b.path));
}

TEST_CASE("damaged journals are rejected") {
    TempFile f("bad.journal");
    run_trace(f.path, Modality::History, 0);
    const std::string good = bytes(f.path);

    SUBCASE("flipped byte") {
        std::string bad = good;
        bad[bad.size() - 20] ^= 0x5a;
        write_bytes(f.path, bad);
        CHECK_THROWS_AS(read_journal(f.path), PersistenceError);
    }
    SUBCASE("torn tail") {
        write_bytes(f.path, good.substr(0, good.size() - 5));
        CHECK_THROWS_AS(read_journal(f.path), PersistenceError);
    }
    SUBCASE("wrong magic") {
        std::string bad = good;
        bad[0] = 'X';
        write_bytes(f.path, bad);
        CHECK_THROWS_AS(read_journal(f.path), PersistenceError);
    }
    SUBCASE("missing file") { CHECK_THROWS_AS(read_journal(f.path + ".nope"), PersistenceError); }
}

TEST_SUITE_END();
