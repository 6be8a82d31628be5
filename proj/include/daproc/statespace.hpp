#pragma once

// Breadth-first construction of the relational transition system under a mock
// service manager, with reachability and deadlock queries and DOT/JSON export.

#include <daproc/engine.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace daproc {

struct TransitionSystem {
    std::map<StateId, Snapshot> states;
    std::vector<TransitionRecord> edges;  // in discovery order
    StateId initial = 1;
    bool complete = true;

    std::uint64_t digest(StateId s) const;
    std::vector<StateId> successors(StateId s) const;
    friend bool operator==(const TransitionSystem&, const TransitionSystem&) = default;
};

constexpr std::size_t kDefaultMaxStates = 10000;

struct BuildOptions {
    std::size_t max_states = kDefaultMaxStates;
    RecordSink* sink = nullptr;  // receives the exploration store's records
};

// Throws InvalidSpec, ConstraintViolation (initial), UnconfiguredService.
TransitionSystem build_statespace(const Spec& spec, const Snapshot& initial,
                                  const ServiceConfig& mock, BuildOptions options = {});

struct Reachability {
    enum class Outcome { Reachable, NotReachable, Inconclusive };
    Outcome outcome = Outcome::NotReachable;
    std::vector<StateId> path;  // initial .. witness, when reachable
};

// Shortest path from the initial state to a state where `goal` has an answer.
Reachability check_reachable(const Spec& spec, const TransitionSystem& ts, const SelectQuery& goal);

// States with no outgoing edge. Throws Inconclusive when ts is incomplete.
std::vector<StateId> find_deadlocks(const TransitionSystem& ts);

std::string export_dot(const TransitionSystem& ts);
std::string export_json(const Spec& spec, const TransitionSystem& ts);
TransitionSystem import_json(const Spec& spec, std::string_view text);

}  // namespace daproc
