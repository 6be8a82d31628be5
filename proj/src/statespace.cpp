#include <daproc/digest.hpp>
#include <daproc/json_io.hpp>
#include <daproc/statespace.hpp>

#include <fmt/format.h>

#include <deque>
#include <unordered_map>

namespace daproc {

using nlohmann::json;

std::uint64_t TransitionSystem::digest(StateId s) const { return hash_snapshot(states.at(s)); }

std::vector<StateId> TransitionSystem::successors(StateId s) const {
    std::vector<StateId> out;
    for (const auto& e : edges)
        if (e.from == s) out.push_back(e.to);
    return out;
}

namespace {

class Explorer {
public:
    Explorer(const Spec& spec, const Snapshot& initial, const ServiceConfig& mock,
             const BuildOptions& options)
        : engine_(spec, initial, Modality::StateSpace, EngineOptions{{}, options.sink}),
          mock_(engine_.spec(), mock),
          max_states_(options.max_states) {
        mock_.check_coverage();
    }

    TransitionSystem run() {
        add_state(1, engine_.store().snapshot(1));
        std::deque<StateId> frontier{1};
        while (!frontier.empty() && ts_.complete) {
            const StateId s = frontier.front();
            frontier.pop_front();
            expand(s, frontier);
        }
        ts_.edges = engine_.store().transitions();
        return std::move(ts_);
    }

private:
    void add_state(StateId id, Snapshot snap) {
        index_.emplace(hash_snapshot(snap), id);
        ts_.states.emplace(id, std::move(snap));
    }

    std::optional<StateId> find(const Snapshot& snap) const {
        auto [lo, hi] = index_.equal_range(hash_snapshot(snap));
        for (auto it = lo; it != hi; ++it)
            if (ts_.states.at(it->second) == snap) return it->second;
        return std::nullopt;
    }

    void expand(StateId s, std::deque<StateId>& frontier) {
        const Snapshot& snap = ts_.states.at(s);
        const Spec& spec = engine_.spec();
        for (const auto& action : engine_.enabled_actions(s)) {
            for (const auto& b : engine_.enumerate_bindings(s, action)) {
                GroundAction g{b.action, b.values};
                auto ev = engine_.evaluate_effects(s, g);
                std::vector<std::vector<Value>> choices;
                for (const auto& p : ev.pending) choices.push_back(mock_.representative_results(p, snap));

                // Odometer over the result lists; the first invocation varies slowest.
                std::vector<std::size_t> pick(choices.size(), 0);
                bool any = std::all_of(choices.begin(), choices.end(),
                                       [](const auto& c) { return !c.empty(); });
                while (any) {
                    InvocationResults results;
                    for (std::size_t i = 0; i < choices.size(); ++i)
                        results[ev.pending[i].id] = choices[i][pick[i]];
                    if (!successor(s, snap, g, ev, results, spec, frontier)) return;

                    std::size_t k = choices.size();
                    while (k > 0) {
                        --k;
                        if (++pick[k] < choices[k].size()) break;
                        pick[k] = 0;
                        if (k == 0) any = false;
                    }
                    if (choices.empty()) any = false;
                }
            }
        }
    }

    // Returns false once the state budget is exhausted.
    bool successor(StateId s, const Snapshot& snap, const GroundAction& g,
                   const EffectEvaluation& ev, const InvocationResults& results, const Spec& spec,
                   std::deque<StateId>& frontier) {
        Snapshot next = apply_delta_to(snap, instantiate(ev.delta, results));
        if (!check_constraints(spec, next).empty()) return true;  // rolled back: no edge
        const auto label = make_label(g, ev.pending, results);
        if (auto existing = find(next)) {
            engine_.store().add_transition(s, *existing, label);
            return true;
        }
        if (ts_.states.size() >= max_states_) {
            ts_.complete = false;
            return false;
        }
        const StateId id = engine_.store().commit_snapshot(s, next, &label, 0);
        add_state(id, std::move(next));
        frontier.push_back(id);
        return true;
    }

    Engine engine_;
    MockServiceManager mock_;
    std::size_t max_states_;
    TransitionSystem ts_;
    std::unordered_multimap<std::uint64_t, StateId> index_;
};

std::string dot_escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    return out;
}

}  // namespace

TransitionSystem build_statespace(const Spec& spec, const Snapshot& initial,
                                  const ServiceConfig& mock, BuildOptions options) {
    if (options.max_states == 0) throw Error("max states must be positive");
    return Explorer(spec, initial, mock, options).run();
}

Reachability check_reachable(const Spec& spec, const TransitionSystem& ts, const SelectQuery& goal) {
    std::map<StateId, std::vector<StateId>> succ;
    for (const auto& e : ts.edges) succ[e.from].push_back(e.to);

    std::map<StateId, StateId> parent;
    std::deque<StateId> queue{ts.initial};
    parent[ts.initial] = ts.initial;
    while (!queue.empty()) {
        const StateId s = queue.front();
        queue.pop_front();
        SnapshotSource src(spec, ts.states.at(s));
        if (!evaluate(src, goal).empty()) {
            Reachability r{Reachability::Outcome::Reachable, {}};
            for (StateId at = s;; at = parent[at]) {
                r.path.insert(r.path.begin(), at);
                if (at == ts.initial) break;
            }
            return r;
        }
        for (auto t : succ[s])
            if (parent.emplace(t, s).second) queue.push_back(t);
    }
    return {ts.complete ? Reachability::Outcome::NotReachable : Reachability::Outcome::Inconclusive,
            {}};
}

std::vector<StateId> find_deadlocks(const TransitionSystem& ts) {
    if (!ts.complete)
        throw Inconclusive("the state space is incomplete; deadlock freedom cannot be decided");
    std::set<StateId> has_out;
    for (const auto& e : ts.edges) has_out.insert(e.from);
    std::vector<StateId> out;
    for (const auto& [s, _] : ts.states)
        if (!has_out.count(s)) out.push_back(s);
    return out;
}

std::string export_dot(const TransitionSystem& ts) {
    std::string out = "digraph statespace {\n  node [shape=circle];\n";
    for (const auto& [s, _] : ts.states)
        out += fmt::format("  {} [label=\"{}\"{}];\n", s, s,
                           s == ts.initial ? ", shape=doublecircle" : "");
    for (const auto& e : ts.edges)
        out += fmt::format("  {} -> {} [label=\"{}\"];\n", e.from, e.to,
                           dot_escape(e.label.to_string()));
    out += "}\n";
    return out;
}

std::string export_json(const Spec& spec, const TransitionSystem& ts) {
    json states = json::array();
    for (const auto& [s, snap] : ts.states)
        states.push_back({{"id", s},
                          {"digest", hex64(hash_snapshot(snap))},
                          {"snapshot", snapshot_to_json(spec, snap)}});
    json edges = json::array();
    for (const auto& e : ts.edges) {
        json je = label_to_json(e.label);
        je["from"] = e.from;
        je["to"] = e.to;
        edges.push_back(std::move(je));
    }
    json out = {{"initial", ts.initial},
                {"complete", ts.complete},
                {"states", std::move(states)},
                {"edges", std::move(edges)}};
    return out.dump(2) + "\n";
}

TransitionSystem import_json(const Spec& spec, std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(fmt::format("state space JSON: {}", e.what()));
    }
    TransitionSystem ts;
    ts.initial = j.at("initial").get<StateId>();
    ts.complete = j.at("complete").get<bool>();
    for (const auto& s : j.at("states"))
        ts.states.emplace(s.at("id").get<StateId>(), snapshot_from_json(spec, s.at("snapshot")));
    for (const auto& e : j.at("edges")) {
        TransitionRecord r;
        r.from = e.at("from").get<StateId>();
        r.to = e.at("to").get<StateId>();
        r.label = label_from_json(e);
        if (!ts.states.count(r.from) || !ts.states.count(r.to))
            throw Error(fmt::format("edge {} -> {} names an unknown state", r.from, r.to));
        ts.edges.push_back(std::move(r));
    }
    return ts;
}

}  // namespace daproc
