#pragma once

// Reference implementations used only by tests. They work directly on
// snapshots with nested loops and share nothing with the store, the evaluator
// or the engine beyond the AST types.

#include <daproc/model.hpp>
#include <daproc/services.hpp>

#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

using daproc::Snapshot;
using daproc::Spec;
using daproc::Tuple;
using daproc::Value;

std::set<Tuple> query(const Spec& spec, const Snapshot& s, const daproc::SelectQuery& q,
                      const daproc::ParamEnv& params = {});

// True iff every type, domain, key and reference constraint holds.
bool consistent(const Spec& spec, const Snapshot& s);

// Argument tuples for `action` over all of its rules.
std::set<Tuple> bindings(const Spec& spec, const Snapshot& s, const std::string& action);

using Call = std::pair<std::string, Tuple>;
using CallResults = std::map<Call, Value>;

// Distinct service calls made by the action's effects under `binding`.
std::set<Call> calls(const Spec& spec, const Snapshot& s, const std::string& action,
                     const Tuple& binding);

// Successor snapshot, or nullopt when it violates a constraint.
std::optional<Snapshot> step(const Spec& spec, const Snapshot& s, const std::string& action,
                             const Tuple& binding, const CallResults& results);

struct Space {
    std::set<Snapshot> states;
    std::size_t edges = 0;
    std::size_t sinks = 0;
    std::size_t rolled_back = 0;
};

// Exhaustive exploration. Enumerated services take their listed values; a
// nullary INT service without configuration acts as a key generator
// (1 + largest integer key in the state). Anything else throws.
Space explore(const Spec& spec, const Snapshot& initial, const daproc::ServiceConfig& mock,
              std::size_t limit = 100000);

}  // namespace oracle
