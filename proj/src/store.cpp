#include <daproc/digest.hpp>
#include <daproc/store.hpp>

#include <fmt/format.h>

#include <algorithm>
#include <bit>

namespace daproc {

bool Delta::empty() const {
    for (const auto& [_, rows] : deletes)
        if (!rows.empty()) return false;
    for (const auto& [_, rows] : inserts)
        if (!rows.empty()) return false;
    return true;
}

std::string TransitionLabel::to_string() const {
    std::string out = fmt::format("{}({})", action, to_display(binding));
    for (std::size_t i = 0; i < results.size(); ++i)
        out += fmt::format("{}{}={}", i ? "," : "/", results[i].first, to_display(results[i].second));
    return out;
}

Snapshot empty_snapshot(const Spec& spec) {
    Snapshot s;
    for (const auto& r : spec.relations) s.relations[r.name];
    return s;
}

Snapshot apply_delta_to(const Snapshot& s, const Delta& d) {
    Snapshot out = s;
    for (const auto& [rel, rows] : d.deletes) {
        auto it = out.relations.find(rel);
        if (it == out.relations.end()) continue;
        for (const auto& t : rows) it->second.erase(t);
    }
    for (const auto& [rel, rows] : d.inserts) out.relations[rel].insert(rows.begin(), rows.end());
    return out;
}

namespace {

Tuple project(const Tuple& t, const std::vector<std::size_t>& idx) {
    Tuple out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(t[i]);
    return out;
}

std::vector<std::size_t> positions(const RelationSchema& r, const std::vector<std::string>& names) {
    std::vector<std::size_t> out;
    for (const auto& n : names) out.push_back(*r.index_of(n));
    return out;
}

}  // namespace

std::vector<Violation> check_constraints(const Spec& spec, const Snapshot& s) {
    std::vector<Violation> out;
    using K = Violation::Kind;
    for (const auto& [name, _] : s.relations)
        if (!spec.relation(name))
            out.push_back({K::Type, name, name, fmt::format("relation '{}' is not declared", name)});

    static const std::set<Tuple> none;
    auto rows_of = [&](const std::string& rel) -> const std::set<Tuple>& {
        auto it = s.relations.find(rel);
        return it == s.relations.end() ? none : it->second;
    };

    for (const auto& r : spec.relations) {
        const auto& rows = rows_of(r.name);
        bool typed = true;
        for (const auto& t : rows) {
            if (t.size() != r.attributes.size()) {
                out.push_back({K::Type, r.name, r.name,
                               fmt::format("tuple ({}) has {} values, expected {}", to_display(t),
                                           t.size(), r.attributes.size())});
                typed = false;
                continue;
            }
            for (std::size_t i = 0; i < t.size(); ++i) {
                if (has_type(t[i], r.attributes[i].type)) continue;
                out.push_back({K::Type, r.name, r.name + "." + r.attributes[i].name,
                               fmt::format("value {} is not {}", to_literal(t[i]),
                                           to_string(r.attributes[i].type))});
                typed = false;
            }
        }
        if (!typed) continue;

        for (const auto& d : r.domains) {
            auto i = *r.index_of(d.attribute);
            for (const auto& t : rows)
                if (std::find(d.values.begin(), d.values.end(), t[i]) == d.values.end())
                    out.push_back({K::Domain, r.name, r.name + "." + d.attribute,
                                   fmt::format("value {} outside the domain of {}.{}",
                                               to_literal(t[i]), r.name, d.attribute)});
        }

        const auto pk = positions(r, r.primary_key);
        std::map<Tuple, int> seen;
        for (const auto& t : rows)
            if (++seen[project(t, pk)] == 2)
                out.push_back({K::PrimaryKey, r.name, r.name,
                               fmt::format("duplicate key ({}) in {}", to_display(project(t, pk)),
                                           r.name)});

        for (const auto& fk : r.foreign_keys) {
            const auto* target = spec.relation(fk.target_relation);
            if (!target) continue;
            const auto src = positions(r, fk.source_attrs);
            const auto dst = positions(*target, fk.target_attrs);
            std::set<Tuple> keys;
            for (const auto& t : rows_of(target->name))
                if (t.size() == target->attributes.size()) keys.insert(project(t, dst));
            for (const auto& t : rows) {
                auto v = project(t, src);
                if (!keys.count(v))
                    out.push_back({K::ForeignKey, r.name, fk.name,
                                   fmt::format("({}) in {} has no match in {}", to_display(v),
                                               r.name, target->name)});
            }
        }
    }
    return out;
}

// ---- EncodedStore ----

bool EncodedStore::Encoded::raw_needed(std::size_t attr) const {
    return std::find(payload.begin(), payload.end(), attr) != payload.end();
}

std::string EncodedStore::raw_name(std::string_view relation) {
    return std::string(relation) + "_raw";
}

std::string EncodedStore::log_name(std::string_view relation) {
    return std::string(relation) + "_log";
}

EncodedStore::EncodedStore(Spec spec, RecordSink* sink) : spec_(std::move(spec)), sink_(sink) {
    layout();
}

EncodedStore::EncodedStore(Spec spec, const Snapshot& initial, RecordSink* sink,
                           std::int64_t timestamp)
    : EncodedStore(std::move(spec), sink) {
    Snapshot full = empty_snapshot(spec_);
    for (const auto& [rel, rows] : initial.relations) full.relations[rel] = rows;
    if (auto v = check_constraints(spec_, full); !v.empty()) throw ConstraintViolation(std::move(v));
    for (const auto& [rel, rows] : full.relations) {
        auto& e = encoded(rel);
        for (const auto& t : rows) {
            Rid rid = intern_raw(e, t);
            StoreRecord r = record::LogInsert{rel, log_row(e, 1, t, rid)};
            apply(r);
            emit(r);
        }
    }
    StoreRecord commit = record::StateCommit{1, timestamp};
    apply(commit);
    emit(commit);
}

std::unique_ptr<EncodedStore> EncodedStore::replay(Spec spec,
                                                   const std::vector<StoreRecord>& records,
                                                   RecordSink* sink) {
    std::unique_ptr<EncodedStore> store(new EncodedStore(std::move(spec), sink));
    for (const auto& r : records) {
        store->apply(r);
        store->emit(r);
    }
    return store;
}

void EncodedStore::layout() {
    for (const auto& r : spec_.relations) {
        Encoded e;
        e.schema = &r;
        e.key = positions(r, r.primary_key);
        for (std::size_t i = 0; i < r.attributes.size(); ++i) {
            const auto& name = r.attributes[i].name;
            bool in_key = std::find(e.key.begin(), e.key.end(), i) != e.key.end();
            bool fk_source = false;
            for (const auto& fk : r.foreign_keys)
                if (std::find(fk.source_attrs.begin(), fk.source_attrs.end(), name) !=
                    fk.source_attrs.end())
                    fk_source = true;
            if (in_key) continue;
            (fk_source ? e.fk_only : e.payload).push_back(i);
        }
        e.log_columns.push_back("state");
        for (auto i : e.key) e.log_columns.push_back(r.attributes[i].name);
        e.log_columns.push_back("rid");
        for (auto i : e.fk_only) e.log_columns.push_back(r.attributes[i].name);
        e.raw_columns = {"rid", "hash"};
        for (auto i : e.payload) e.raw_columns.push_back(r.attributes[i].name);
        tables_.emplace(r.name, std::move(e));
    }
}

EncodedStore::Encoded& EncodedStore::encoded(std::string_view relation) {
    auto it = tables_.find(relation);
    if (it == tables_.end()) throw UnknownRelation(std::string(relation));
    return it->second;
}

const EncodedStore::Encoded& EncodedStore::encoded(std::string_view relation) const {
    auto it = tables_.find(relation);
    if (it == tables_.end()) throw UnknownRelation(std::string(relation));
    return it->second;
}

void EncodedStore::require_state(StateId s) const {
    if (!has_state(s)) throw UnknownState(s);
}

std::vector<StateId> EncodedStore::states() const {
    std::vector<StateId> out;
    for (const auto& [s, _] : states_) out.push_back(s);
    return out;
}

std::int64_t EncodedStore::state_timestamp(StateId s) const {
    require_state(s);
    return states_.at(s);
}

Rid EncodedStore::intern_raw(Encoded& e, const Tuple& original) {
    Tuple payload = project(original, e.payload);
    const std::uint64_t h = hash_tuple(payload);
    auto [lo, hi] = e.raw_by_hash.equal_range(h);
    for (auto it = lo; it != hi; ++it) {
        const Tuple& row = e.raw[it->second - 1];
        if (std::equal(payload.begin(), payload.end(), row.begin() + 2, row.end())) return it->second;
    }
    Tuple row;
    row.reserve(payload.size() + 2);
    const Rid rid = e.raw.size() + 1;
    row.push_back(static_cast<std::int64_t>(rid));
    row.push_back(std::bit_cast<std::int64_t>(h));
    row.insert(row.end(), payload.begin(), payload.end());
    StoreRecord r = record::RawInsert{e.schema->name, std::move(row)};
    apply(r);
    emit(r);
    return rid;
}

Tuple EncodedStore::log_row(const Encoded& e, StateId s, const Tuple& original, Rid rid) const {
    Tuple row;
    row.reserve(e.log_columns.size());
    row.push_back(static_cast<std::int64_t>(s));
    for (auto i : e.key) row.push_back(original[i]);
    row.push_back(static_cast<std::int64_t>(rid));
    for (auto i : e.fk_only) row.push_back(original[i]);
    return row;
}

void EncodedStore::apply(const StoreRecord& rec) {
    if (auto r = std::get_if<record::RawInsert>(&rec)) {
        auto& e = encoded(r->relation);
        if (r->row.size() != e.raw_columns.size() ||
            std::get<std::int64_t>(r->row[0]) != static_cast<std::int64_t>(e.raw.size() + 1))
            throw PersistenceError(fmt::format("out-of-order raw row for {}", r->relation));
        e.raw_by_hash.emplace(std::bit_cast<std::uint64_t>(std::get<std::int64_t>(r->row[1])),
                              e.raw.size() + 1);
        e.raw.push_back(r->row);
    } else if (auto r = std::get_if<record::LogInsert>(&rec)) {
        auto& e = encoded(r->relation);
        if (r->row.size() != e.log_columns.size())
            throw PersistenceError(fmt::format("malformed log row for {}", r->relation));
        auto s = static_cast<StateId>(std::get<std::int64_t>(r->row[0]));
        e.log[s].push_back(r->row);
    } else if (auto r = std::get_if<record::StateCommit>(&rec)) {
        states_[r->state] = r->timestamp;
        next_state_ = std::max(next_state_, r->state + 1);
    } else if (auto r = std::get_if<record::Transition>(&rec)) {
        transitions_.push_back(r->transition);
    } else if (auto r = std::get_if<record::StateDrop>(&rec)) {
        for (auto& [_, e] : tables_) e.log.erase(r->state);
        states_.erase(r->state);
    }
}

void EncodedStore::emit(const StoreRecord& r) {
    if (sink_) sink_->append(r);
}

std::set<Tuple> EncodedStore::reconstruct(std::string_view relation, StateId s) const {
    require_state(s);
    const auto& e = encoded(relation);
    std::set<Tuple> out;
    auto it = e.log.find(s);
    if (it == e.log.end()) return out;
    const std::size_t n = e.schema->attributes.size();
    for (const auto& row : it->second) {
        Tuple t(n);
        std::size_t col = 1;
        for (auto i : e.key) t[i] = row[col++];
        const Rid rid = static_cast<Rid>(std::get<std::int64_t>(row[col++]));
        for (auto i : e.fk_only) t[i] = row[col++];
        const Tuple& raw = e.raw.at(rid - 1);
        for (std::size_t k = 0; k < e.payload.size(); ++k) t[e.payload[k]] = raw[k + 2];
        out.insert(std::move(t));
    }
    return out;
}

Snapshot EncodedStore::snapshot(StateId s) const {
    require_state(s);
    Snapshot out;
    for (const auto& r : spec_.relations) out.relations[r.name] = reconstruct(r.name, s);
    return out;
}

namespace {

class Rewriter {
public:
    Rewriter(const Spec& spec, const std::map<std::string, std::vector<bool>, std::less<>>& raw_attrs)
        : spec_(spec), raw_attrs_(raw_attrs) {}

    SelectQuery branch(const SelectQuery& q, StateId s) const {
        // First pass: which FROM entries need their raw table.
        std::vector<bool> need_raw(q.from.size(), false);
        auto mark = [&](const Operand& op) {
            if (auto r = resolve(q.from, op); r && r->raw) need_raw[r->table] = true;
        };
        for (const auto& p : q.projection) mark(p);
        visit(q.where, mark);

        SelectQuery out;
        std::vector<Condition> where;
        for (std::size_t i = 0; i < q.from.size(); ++i) {
            const std::string name(q.from[i].effective_name());
            out.from.push_back({EncodedStore::log_name(q.from[i].relation), name});
            where.push_back(Condition::cmp(AttrRef{name, "state"}, CmpOp::Eq,
                                           Const{static_cast<std::int64_t>(s)}));
            if (need_raw[i]) {
                out.from.push_back({EncodedStore::raw_name(q.from[i].relation), name + "_raw"});
                where.push_back(Condition::cmp(AttrRef{name, "rid"}, CmpOp::Eq,
                                               AttrRef{name + "_raw", "rid"}));
            }
        }
        for (const auto& p : q.projection) out.projection.push_back(operand(q.from, p));
        if (q.where.kind == Condition::Kind::And) {
            for (const auto& ch : q.where.children) where.push_back(condition(q.from, ch));
        } else if (q.where.kind != Condition::Kind::True) {
            where.push_back(condition(q.from, q.where));
        }
        out.where = Condition::all(std::move(where));
        return out;
    }

private:
    struct Target {
        std::size_t table;
        bool raw;
    };

    std::optional<Target> resolve(const std::vector<TableRef>& from, const Operand& op) const {
        const auto* ref = std::get_if<AttrRef>(&op);
        if (!ref) return std::nullopt;
        auto r = resolve_attr(spec_, from, *ref);
        if (!r) throw Error(fmt::format("cannot resolve attribute '{}'", ref->name));
        return Target{r->table, raw_attrs_.find(from[r->table].relation)->second[r->column]};
    }

    template <class F>
    static void visit(const Condition& c, F&& f) {
        if (c.kind == Condition::Kind::Cmp) {
            f(c.lhs);
            f(c.rhs);
        }
        for (const auto& ch : c.children) visit(ch, f);
    }

    Operand operand(const std::vector<TableRef>& from, const Operand& op) const {
        auto t = resolve(from, op);
        if (!t) return op;
        std::string name(from[t->table].effective_name());
        return AttrRef{t->raw ? name + "_raw" : name, std::get<AttrRef>(op).name};
    }

    Condition condition(const std::vector<TableRef>& from, const Condition& c) const {
        Condition out = c;
        if (c.kind == Condition::Kind::Cmp) {
            out.lhs = operand(from, c.lhs);
            out.rhs = operand(from, c.rhs);
        }
        for (auto& ch : out.children) ch = condition(from, ch);
        return out;
    }

    const Spec& spec_;
    const std::map<std::string, std::vector<bool>, std::less<>>& raw_attrs_;
};

}  // namespace

SelectQuery EncodedStore::rewrite_query(const SelectQuery& q, StateId s) const {
    std::map<std::string, std::vector<bool>, std::less<>> raw_attrs;
    for (const auto& [name, e] : tables_) {
        auto& flags = raw_attrs[name];
        for (std::size_t i = 0; i < e.schema->attributes.size(); ++i)
            flags.push_back(e.raw_needed(i));
    }
    Rewriter rw(spec_, raw_attrs);
    SelectQuery out = rw.branch(q, s);
    for (const auto& b : q.union_branches) out.union_branches.push_back(rw.branch(b, s));
    return out;
}

std::set<Tuple> EncodedStore::query(const SelectQuery& q, StateId s, const ParamEnv& params) const {
    require_state(s);
    return evaluate(*this, rewrite_query(q, s), params);
}

Snapshot EncodedStore::successor_snapshot(StateId s, const Delta& delta) const {
    require_state(s);
    for (const auto* part : {&delta.deletes, &delta.inserts})
        for (const auto& [rel, _] : *part)
            if (!spec_.relation(rel)) throw UnknownRelation(rel);
    Snapshot next = apply_delta_to(snapshot(s), delta);
    if (auto v = check_constraints(spec_, next); !v.empty()) throw ConstraintViolation(std::move(v));
    return next;
}

StateId EncodedStore::apply_delta(StateId s, const Delta& delta, const TransitionLabel* label,
                                  std::int64_t timestamp) {
    return commit_snapshot(s, successor_snapshot(s, delta), label, timestamp);
}

StateId EncodedStore::commit_snapshot(StateId s, const Snapshot& next, const TransitionLabel* label,
                                      std::int64_t timestamp) {
    require_state(s);
    const StateId fresh = next_state_;
    for (auto& [name, e] : tables_) {
        // Tuples already present in s keep their log row, re-stamped with the new state.
        std::map<Tuple, const Tuple*> previous;
        std::vector<Tuple> prior_rows;
        if (auto it = e.log.find(s); it != e.log.end()) prior_rows = it->second;
        auto prior_tuples = reconstruct(name, s);
        for (const auto& row : prior_rows) {
            // Match each prior log row to its reconstructed tuple through the key columns.
            Tuple key(row.begin() + 1, row.begin() + 1 + static_cast<std::ptrdiff_t>(e.key.size()));
            previous.emplace(std::move(key), &row);
        }
        auto rel_it = next.relations.find(name);
        if (rel_it == next.relations.end()) continue;
        for (const auto& t : rel_it->second) {
            Tuple row;
            auto p = previous.find(project(t, e.key));
            if (p != previous.end() && prior_tuples.count(t)) {
                row = *p->second;
                row[0] = static_cast<std::int64_t>(fresh);
            } else {
                row = log_row(e, fresh, t, intern_raw(e, t));
            }
            StoreRecord r = record::LogInsert{name, std::move(row)};
            apply(r);
            emit(r);
        }
    }
    StoreRecord commit = record::StateCommit{fresh, timestamp};
    apply(commit);
    emit(commit);
    if (label) add_transition(s, fresh, *label, timestamp);
    return fresh;
}

void EncodedStore::add_transition(StateId from, StateId to, const TransitionLabel& label,
                                  std::int64_t timestamp) {
    require_state(from);
    require_state(to);
    StoreRecord r = record::Transition{{from, to, label, timestamp}};
    apply(r);
    emit(r);
}

void EncodedStore::drop_state(StateId s) {
    require_state(s);
    StoreRecord r = record::StateDrop{s};
    apply(r);
    emit(r);
}

const std::vector<Tuple>& EncodedStore::raw_rows(std::string_view relation) const {
    return encoded(relation).raw;
}

std::vector<Tuple> EncodedStore::log_rows(std::string_view relation) const {
    std::vector<Tuple> out;
    for (const auto& [_, rows] : encoded(relation).log) out.insert(out.end(), rows.begin(), rows.end());
    return out;
}

std::vector<Tuple> EncodedStore::log_rows(std::string_view relation, StateId s) const {
    const auto& e = encoded(relation);
    auto it = e.log.find(s);
    return it == e.log.end() ? std::vector<Tuple>{} : it->second;
}

const EncodedStore::Encoded* EncodedStore::find_table(std::string_view table, bool& is_raw) const {
    for (std::string_view suffix : {"_raw", "_log"}) {
        if (table.size() <= suffix.size() || !table.ends_with(suffix)) continue;
        auto it = tables_.find(table.substr(0, table.size() - suffix.size()));
        if (it == tables_.end()) return nullptr;
        is_raw = suffix == "_raw";
        return &it->second;
    }
    return nullptr;
}

const std::vector<std::string>* EncodedStore::columns(std::string_view table) const {
    bool is_raw = false;
    const auto* e = find_table(table, is_raw);
    if (!e) return nullptr;
    return is_raw ? &e->raw_columns : &e->log_columns;
}

void EncodedStore::scan(std::string_view table, std::span<const ColumnEq> hints,
                        const RowFn& fn) const {
    bool is_raw = false;
    const auto* e = find_table(table, is_raw);
    if (!e) throw UnknownRelation(std::string(table));
    if (is_raw) {
        for (const auto& h : hints) {
            if (h.column != 0) continue;
            const auto* rid = std::get_if<std::int64_t>(&h.value);
            if (!rid || *rid < 1 || static_cast<std::size_t>(*rid) > e->raw.size()) return;
            fn(e->raw[static_cast<std::size_t>(*rid) - 1]);
            return;
        }
        for (const auto& row : e->raw) fn(row);
        return;
    }
    for (const auto& h : hints) {
        if (h.column != 0) continue;
        const auto* s = std::get_if<std::int64_t>(&h.value);
        if (!s) return;
        auto it = e->log.find(static_cast<StateId>(*s));
        if (it == e->log.end()) return;
        for (const auto& row : it->second) fn(row);
        return;
    }
    for (const auto& [_, rows] : e->log)
        for (const auto& row : rows) fn(row);
}

}  // namespace daproc
