#pragma once

// State-relativized storage: every relation R is kept as an inflationary R_raw
// table of payloads plus an R_log table tying (state, key, foreign-key values)
// to raw rows.

#include <daproc/errors.hpp>
#include <daproc/eval.hpp>
#include <daproc/model.hpp>

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

namespace daproc {

using StateId = std::uint64_t;
using Rid = std::uint64_t;

struct Delta {
    std::map<std::string, std::set<Tuple>, std::less<>> deletes;
    std::map<std::string, std::set<Tuple>, std::less<>> inserts;

    bool empty() const;
    friend bool operator==(const Delta&, const Delta&) = default;
};

struct TransitionLabel {
    std::string action;
    Tuple binding;
    // Textual service call, e.g. "maxAmnt(Kriss,Paris)", and its result.
    std::vector<std::pair<std::string, Value>> results;

    std::string to_string() const;  // RvwRequest(2,Kriss,Paris)/status(Kriss,Paris)=acceptd
    friend bool operator==(const TransitionLabel&, const TransitionLabel&) = default;
};

struct TransitionRecord {
    StateId from = 0;
    StateId to = 0;
    TransitionLabel label;
    std::int64_t timestamp = 0;  // ms since epoch; 0 when not recorded
    friend bool operator==(const TransitionRecord&, const TransitionRecord&) = default;
};

Snapshot empty_snapshot(const Spec& spec);
// (s minus deletes) union inserts, relation by relation.
Snapshot apply_delta_to(const Snapshot& s, const Delta& d);
// Types, primary keys, foreign keys and domains. Empty when s satisfies them all.
std::vector<Violation> check_constraints(const Spec& spec, const Snapshot& s);

// ---- store mutation records (the unit of persistence) ----

namespace record {
struct RawInsert {
    std::string relation;
    Tuple row;  // rid, hash, payload...
    friend bool operator==(const RawInsert&, const RawInsert&) = default;
};
struct LogInsert {
    std::string relation;
    Tuple row;  // state, key..., rid, fk...
    friend bool operator==(const LogInsert&, const LogInsert&) = default;
};
struct StateCommit {
    StateId state = 0;
    std::int64_t timestamp = 0;
    friend bool operator==(const StateCommit&, const StateCommit&) = default;
};
struct Transition {
    TransitionRecord transition;
    friend bool operator==(const Transition&, const Transition&) = default;
};
struct StateDrop {
    StateId state = 0;
    friend bool operator==(const StateDrop&, const StateDrop&) = default;
};
}  // namespace record

using StoreRecord = std::variant<record::RawInsert, record::LogInsert, record::StateCommit,
                                 record::Transition, record::StateDrop>;

class RecordSink {
public:
    virtual ~RecordSink() = default;
    virtual void append(const StoreRecord& r) = 0;
};

class EncodedStore : public TableSource {
public:
    // Encodes `initial` as state 1. Throws ConstraintViolation.
    EncodedStore(Spec spec, const Snapshot& initial, RecordSink* sink = nullptr,
                 std::int64_t timestamp = 0);

    // Rebuilds a store by re-applying recorded mutations, forwarding each to `sink`.
    static std::unique_ptr<EncodedStore> replay(Spec spec, const std::vector<StoreRecord>& records,
                                                RecordSink* sink = nullptr);

    const Spec& spec() const { return spec_; }

    bool has_state(StateId s) const { return states_.count(s) != 0; }
    std::vector<StateId> states() const;
    StateId latest_state() const { return next_state_ - 1; }
    std::int64_t state_timestamp(StateId s) const;

    std::set<Tuple> reconstruct(std::string_view relation, StateId s) const;
    Snapshot snapshot(StateId s) const;

    // Reformulates q over the raw/log tables, restricted to state s.
    SelectQuery rewrite_query(const SelectQuery& q, StateId s) const;
    std::set<Tuple> query(const SelectQuery& q, StateId s, const ParamEnv& params = {}) const;

    // Candidate successor of s; throws ConstraintViolation when it violates a constraint.
    Snapshot successor_snapshot(StateId s, const Delta& delta) const;

    // Commits the successor of s under delta as a fresh state. A transition
    // record is appended when `label` is given. Atomic: on ConstraintViolation
    // nothing changes.
    StateId apply_delta(StateId s, const Delta& delta, const TransitionLabel* label = nullptr,
                        std::int64_t timestamp = 0);
    // Same, for a successor snapshot that has already been checked.
    StateId commit_snapshot(StateId s, const Snapshot& next, const TransitionLabel* label,
                            std::int64_t timestamp);

    void add_transition(StateId from, StateId to, const TransitionLabel& label,
                        std::int64_t timestamp = 0);
    const std::vector<TransitionRecord>& transitions() const { return transitions_; }

    // Forgets the log rows of s. Raw rows are never removed.
    void drop_state(StateId s);

    // Encoded tables, for inspection.
    static std::string raw_name(std::string_view relation);
    static std::string log_name(std::string_view relation);
    const std::vector<Tuple>& raw_rows(std::string_view relation) const;
    std::vector<Tuple> log_rows(std::string_view relation) const;
    std::vector<Tuple> log_rows(std::string_view relation, StateId s) const;

    const std::vector<std::string>* columns(std::string_view table) const override;
    void scan(std::string_view table, std::span<const ColumnEq> hints,
              const RowFn& fn) const override;

private:
    struct Encoded {
        const RelationSchema* schema = nullptr;
        std::vector<std::size_t> key;      // attribute positions stored in the log as key
        std::vector<std::size_t> fk_only;  // FK sources not in the key, stored in the log
        std::vector<std::size_t> payload;  // everything else, stored in raw
        std::vector<std::string> log_columns;
        std::vector<std::string> raw_columns;
        std::vector<Tuple> raw;  // raw[rid - 1]
        std::unordered_multimap<std::uint64_t, Rid> raw_by_hash;
        std::map<StateId, std::vector<Tuple>> log;
        bool raw_needed(std::size_t attr) const;
    };

    explicit EncodedStore(Spec spec, RecordSink* sink);
    void layout();
    Encoded& encoded(std::string_view relation);
    const Encoded& encoded(std::string_view relation) const;
    const Encoded* find_table(std::string_view table, bool& is_raw) const;
    Rid intern_raw(Encoded& e, const Tuple& original);
    Tuple log_row(const Encoded& e, StateId s, const Tuple& original, Rid rid) const;
    void apply(const StoreRecord& r);
    void emit(const StoreRecord& r);
    void require_state(StateId s) const;

    Spec spec_;
    RecordSink* sink_;
    std::map<std::string, Encoded, std::less<>> tables_;
    std::map<StateId, std::int64_t> states_;
    StateId next_state_ = 1;
    std::vector<TransitionRecord> transitions_;
};

}  // namespace daproc
