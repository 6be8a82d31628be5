#pragma once

// The execution cycle: CA-rule evaluation, binding selection, effect
// evaluation with service calls, and transactional commit.

#include <daproc/services.hpp>
#include <daproc/store.hpp>

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace daproc {

enum class Modality { Plain, History, StateSpace };

std::string_view to_string(Modality m);
std::optional<Modality> parse_modality(std::string_view text);

struct Binding {
    std::uint64_t id = 0;
    std::string action;
    Tuple values;
    bool marked = false;
    friend bool operator==(const Binding&, const Binding&) = default;
};

struct GroundAction {
    std::string action;
    Tuple values;
    friend bool operator==(const GroundAction&, const GroundAction&) = default;
};

struct InvocationSlot {
    std::uint64_t invocation = 0;
    friend bool operator==(const InvocationSlot&, const InvocationSlot&) = default;
};
using InsertCell = std::variant<Value, InvocationSlot>;

// Ground deletions plus insert rows (in attribute order) whose service-call
// cells are still placeholders.
struct DeltaTemplate {
    std::map<std::string, std::set<Tuple>, std::less<>> deletes;
    std::map<std::string, std::vector<std::vector<InsertCell>>, std::less<>> inserts;
};

struct EffectEvaluation {
    DeltaTemplate delta;
    std::vector<PendingInvocation> pending;  // distinct (service, args), ids from 1
};

using InvocationResults = std::map<std::uint64_t, Value>;

// Throws MissingInvocationResult when a placeholder has no result.
Delta instantiate(const DeltaTemplate& t, const InvocationResults& results);

TransitionLabel make_label(const GroundAction& g, const std::vector<PendingInvocation>& pending,
                           const InvocationResults& results);

struct EngineOptions {
    // Milliseconds since the Unix epoch; the system clock when empty.
    std::function<std::int64_t()> clock;
    RecordSink* sink = nullptr;
};

class Engine {
public:
    // Validates and normalizes the spec, then encodes `initial` as state 1.
    // Throws InvalidSpec or ConstraintViolation.
    Engine(const Spec& spec, const Snapshot& initial, Modality modality, EngineOptions options = {});

    Engine(const Engine&) = delete;
    Engine& operator=(const Engine&) = delete;

    Modality modality() const { return modality_; }
    const Spec& spec() const { return store_->spec(); }
    const EncodedStore& store() const { return *store_; }
    EncodedStore& store() { return *store_; }
    ServiceManager& services() { return *services_; }
    StateId current() const { return current_; }

    std::vector<std::string> enabled_actions(StateId s) const;
    std::vector<Binding> enumerate_bindings(StateId s, std::string_view action);
    // The ground action for a binding id listed by enumerate_bindings.
    GroundAction ground(StateId s, std::string_view action, std::uint64_t binding_id);

    EffectEvaluation evaluate_effects(StateId s, const GroundAction& g) const;

    // Fills in results for pending invocations not in `supplied` by calling the
    // service manager (throws AwaitingInteractiveResult for interactive ones).
    InvocationResults resolve(StateId s, const EffectEvaluation& ev,
                              const InvocationResults& supplied);

    // Throws ConstraintViolation (state unchanged, binding stays marked),
    // MissingInvocationResult, TypeMismatch, StaleBinding, UnknownState.
    StateId commit_ground_action(StateId s, const GroundAction& g, const InvocationResults& results);

private:
    void require_executable(StateId s) const;
    void check_binding(StateId s, const GroundAction& g);
    std::vector<Binding>& bindings_of(StateId s, std::string_view action);
    std::int64_t tick();

    Modality modality_;
    std::function<std::int64_t()> clock_;
    std::unique_ptr<EncodedStore> store_;
    std::unique_ptr<ServiceManager> services_;
    StateId current_ = 1;
    std::int64_t last_tick_ = 0;
    std::map<std::pair<StateId, std::string>, std::vector<Binding>, std::less<>> bindings_;
};

// ---- batch scripts ----

// One line: ACTION name(v1, ...) [WITH svc(a1, ...) = result, ...] ;
// Values are integers, quoted strings, or bare words (read as strings).
struct ScriptStep {
    std::string action;
    Tuple values;
    std::vector<std::pair<std::pair<std::string, Tuple>, Value>> results;
    int line = 0;
};

std::vector<ScriptStep> parse_script(std::string_view text);

class ScriptError : public Error {
public:
    ScriptError(std::size_t step, const std::string& message);
    std::size_t step() const { return step_; }  // 1-based

private:
    std::size_t step_;
};

// Runs the steps from the current state. Services not given a result in the
// step are resolved through the engine's service manager.
StateId run_script(Engine& engine, const std::vector<ScriptStep>& steps);

}  // namespace daproc
