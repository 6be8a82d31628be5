#pragma once

// Set-semantics evaluation of SelectQuery over any tabular source.

#include <daproc/model.hpp>

#include <functional>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace daproc {

// An equality the evaluator already knows must hold for rows of one table.
// Sources may use it to narrow a scan; the evaluator re-checks every row anyway.
struct ColumnEq {
    std::size_t column;
    Value value;
};

using RowFn = std::function<void(const Tuple&)>;

class TableSource {
public:
    virtual ~TableSource() = default;
    virtual const std::vector<std::string>* columns(std::string_view table) const = 0;
    virtual void scan(std::string_view table, std::span<const ColumnEq> hints,
                      const RowFn& fn) const = 0;
};

// Evaluates q; UNION branches are combined by set union. Throws Error on
// unknown tables, unknown/ambiguous attributes or unbound parameters.
std::set<Tuple> evaluate(const TableSource& src, const SelectQuery& q,
                         const ParamEnv& params = {});

// Adapter over a plain snapshot, with column names taken from the spec.
class SnapshotSource : public TableSource {
public:
    SnapshotSource(const Spec& spec, const Snapshot& snapshot);
    const std::vector<std::string>* columns(std::string_view table) const override;
    void scan(std::string_view table, std::span<const ColumnEq> hints,
              const RowFn& fn) const override;

private:
    const Snapshot& snapshot_;
    std::map<std::string, std::vector<std::string>, std::less<>> columns_;
};

}  // namespace daproc
