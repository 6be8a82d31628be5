#include <daproc/errors.hpp>
#include <daproc/eval.hpp>

#include <fmt/format.h>

namespace daproc {

namespace {

struct Slot {
    std::size_t table;
    std::size_t column;
};

using CompiledOperand = std::variant<Slot, Value>;

struct CompiledCondition {
    Condition::Kind kind = Condition::Kind::True;
    CmpOp op = CmpOp::Eq;
    CompiledOperand lhs, rhs;
    std::vector<CompiledCondition> children;
    std::ptrdiff_t last_table = -1;  // highest FROM index referenced
};

struct TableInfo {
    std::string relation;
    std::string name;  // alias or relation
    const std::vector<std::string>* columns;
};

class BranchPlan {
public:
    BranchPlan(const TableSource& src, const SelectQuery& q, const ParamEnv& params)
        : src_(src), params_(params) {
        for (const auto& t : q.from) {
            const auto* cols = src.columns(t.relation);
            if (!cols) throw UnknownRelation(t.relation);
            tables_.push_back({t.relation, std::string(t.effective_name()), cols});
        }
        for (const auto& p : q.projection) projection_.push_back(compile(p));

        buckets_.resize(tables_.size() + 1);
        std::vector<CompiledCondition> conjuncts;
        if (q.where.kind == Condition::Kind::And) {
            for (const auto& c : q.where.children) conjuncts.push_back(compile(c));
        } else if (q.where.kind != Condition::Kind::True) {
            conjuncts.push_back(compile(q.where));
        }
        hints_.resize(tables_.size());
        for (auto& c : conjuncts) {
            add_hint(c);
            // bucket k runs once tables [0, k) are bound
            buckets_[static_cast<std::size_t>(c.last_table + 1)].push_back(std::move(c));
        }
    }

    void run(std::set<Tuple>& out) {
        rows_.assign(tables_.size(), nullptr);
        if (!check(0)) return;
        bind(0, out);
    }

private:
    struct Hint {
        std::size_t column;
        CompiledOperand other;
    };

    CompiledOperand compile(const Operand& op) {
        if (auto c = std::get_if<Const>(&op)) return c->value;
        if (auto p = std::get_if<Param>(&op)) {
            auto it = params_.find(p->name);
            if (it == params_.end()) throw Error(fmt::format("unbound parameter ':{}'", p->name));
            return it->second;
        }
        const auto& ref = std::get<AttrRef>(op);
        std::optional<Slot> found;
        for (std::size_t t = 0; t < tables_.size(); ++t) {
            if (!ref.qualifier.empty() && tables_[t].name != ref.qualifier) continue;
            const auto& cols = *tables_[t].columns;
            for (std::size_t c = 0; c < cols.size(); ++c) {
                if (cols[c] != ref.name) continue;
                if (found)
                    throw Error(fmt::format("ambiguous attribute '{}'", ref.name));
                found = Slot{t, c};
            }
        }
        if (!found) {
            auto shown = ref.qualifier.empty() ? ref.name : ref.qualifier + "." + ref.name;
            throw Error(fmt::format("unknown attribute '{}'", shown));
        }
        return *found;
    }

    static std::ptrdiff_t last_of(const CompiledOperand& op) {
        if (auto s = std::get_if<Slot>(&op)) return static_cast<std::ptrdiff_t>(s->table);
        return -1;
    }

    CompiledCondition compile(const Condition& c) {
        CompiledCondition out;
        out.kind = c.kind;
        out.op = c.op;
        if (c.kind == Condition::Kind::Cmp) {
            out.lhs = compile(c.lhs);
            out.rhs = compile(c.rhs);
            out.last_table = std::max(last_of(out.lhs), last_of(out.rhs));
        }
        for (const auto& ch : c.children) {
            out.children.push_back(compile(ch));
            out.last_table = std::max(out.last_table, out.children.back().last_table);
        }
        return out;
    }

    void add_hint(const CompiledCondition& c) {
        if (c.kind != Condition::Kind::Cmp || c.op != CmpOp::Eq) return;
        auto try_side = [&](const CompiledOperand& mine, const CompiledOperand& other) {
            const auto* s = std::get_if<Slot>(&mine);
            if (!s || last_of(other) >= static_cast<std::ptrdiff_t>(s->table)) return;
            hints_[s->table].push_back({s->column, other});
        };
        try_side(c.lhs, c.rhs);
        try_side(c.rhs, c.lhs);
    }

    const Value& value_of(const CompiledOperand& op) const {
        if (auto s = std::get_if<Slot>(&op)) return (*rows_[s->table])[s->column];
        return std::get<Value>(op);
    }

    bool eval(const CompiledCondition& c) const {
        switch (c.kind) {
        case Condition::Kind::True: return true;
        case Condition::Kind::Cmp: return compare(c.op, value_of(c.lhs), value_of(c.rhs));
        case Condition::Kind::Not: return !eval(c.children.front());
        case Condition::Kind::And:
            for (const auto& ch : c.children)
                if (!eval(ch)) return false;
            return true;
        case Condition::Kind::Or:
            for (const auto& ch : c.children)
                if (eval(ch)) return true;
            return false;
        }
        return false;
    }

    bool check(std::size_t bucket) const {
        for (const auto& c : buckets_[bucket])
            if (!eval(c)) return false;
        return true;
    }

    void bind(std::size_t t, std::set<Tuple>& out) {
        if (t == tables_.size()) {
            Tuple row;
            row.reserve(projection_.size());
            for (const auto& p : projection_) row.push_back(value_of(p));
            out.insert(std::move(row));
            return;
        }
        std::vector<ColumnEq> hints;
        for (const auto& h : hints_[t]) hints.push_back({h.column, value_of(h.other)});
        src_.scan(tables_[t].relation, hints, [&](const Tuple& row) {
            rows_[t] = &row;
            if (check(t + 1)) bind(t + 1, out);
        });
        rows_[t] = nullptr;
    }

    const TableSource& src_;
    const ParamEnv& params_;
    std::vector<TableInfo> tables_;
    std::vector<CompiledOperand> projection_;
    std::vector<std::vector<CompiledCondition>> buckets_;
    std::vector<std::vector<Hint>> hints_;
    std::vector<const Tuple*> rows_;
};

void evaluate_into(const TableSource& src, const SelectQuery& q, const ParamEnv& params,
                   std::set<Tuple>& out) {
    BranchPlan(src, q, params).run(out);
    for (const auto& b : q.union_branches) evaluate_into(src, b, params, out);
}

}  // namespace

std::set<Tuple> evaluate(const TableSource& src, const SelectQuery& q, const ParamEnv& params) {
    std::set<Tuple> out;
    evaluate_into(src, q, params, out);
    return out;
}

SnapshotSource::SnapshotSource(const Spec& spec, const Snapshot& snapshot) : snapshot_(snapshot) {
    for (const auto& r : spec.relations) {
        auto& cols = columns_[r.name];
        for (const auto& a : r.attributes) cols.push_back(a.name);
    }
}

const std::vector<std::string>* SnapshotSource::columns(std::string_view table) const {
    auto it = columns_.find(table);
    return it == columns_.end() ? nullptr : &it->second;
}

void SnapshotSource::scan(std::string_view table, std::span<const ColumnEq>,
                          const RowFn& fn) const {
    auto it = snapshot_.relations.find(table);
    if (it == snapshot_.relations.end()) return;
    for (const auto& row : it->second) fn(row);
}

}  // namespace daproc
