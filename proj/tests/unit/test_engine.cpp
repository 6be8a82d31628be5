#include "gen.hpp"
#include "oracle.hpp"
#include "support.hpp"

#include <daproc/engine.hpp>

using namespace daproc;
using support::I;
using support::S;

TEST_SUITE_BEGIN("engine");

namespace {

using Rows = std::set<Tuple>;

struct Fixture {
    Spec spec = support::travel();
    std::int64_t clock = 1000;
    Engine engine{spec, support::load(spec, "travel_init.json"), Modality::History,
                  EngineOptions{[this] { return clock += 5; }, nullptr}};
    Fixture() { engine.services().default_to_interactive(); }

    StateId apply(const std::string& action, const Tuple& values,
                  std::map<std::string, Value> by_signature = {}) {
        const StateId s = engine.current();
        GroundAction g{action, values};
        for (const auto& b : engine.enumerate_bindings(s, action))
            if (b.values == values) g = engine.ground(s, action, b.id);
        auto ev = engine.evaluate_effects(s, g);
        InvocationResults supplied;
        for (const auto& p : ev.pending)
            if (auto it = by_signature.find(p.signature); it != by_signature.end()) supplied[p.id] = it->second;
        return engine.commit_ground_action(s, g, engine.resolve(s, ev, supplied));
    }
};

const Tuple kKriss{I(2), S("Kriss"), S("Paris")};

}  // namespace

TEST_CASE("enabled actions along the trace") {
    Fixture f;
    CHECK(f.engine.enabled_actions(1) == std::vector<std::string>{"StartWorkflow"});
    f.apply("StartWorkflow", kKriss);
    CHECK(f.engine.enabled_actions(2) == std::vector<std::string>{"StartWorkflow", "RvwRequest"});
    CHECK_THROWS_AS(f.engine.enabled_actions(99), UnknownState);

    Spec spec = support::travel();
    Engine empty(spec, empty_snapshot(spec), Modality::Plain);
    CHECK(empty.enabled_actions(1).empty());
}

TEST_CASE("bindings") {
    Fixture f;
    auto b = f.engine.enumerate_bindings(1, "StartWorkflow");
    REQUIRE(b.size() == 2);
    CHECK(b[0].values == Tuple{I(1), S("Bob"), S("NY")});
    CHECK(b[1].values == kKriss);
    CHECK(b[0].id == 1);
    CHECK(b[1].id == 2);
    CHECK_FALSE(b[0].marked);
    CHECK(f.engine.enumerate_bindings(1, "RvwRequest").empty());
    CHECK_THROWS_AS(f.engine.enumerate_bindings(1, "Nope"), UnknownAction);

    f.apply("StartWorkflow", kKriss);
    auto r = f.engine.enumerate_bindings(2, "RvwRequest");
    REQUIRE(r.size() == 1);
    CHECK(r[0].values == kKriss);
    CHECK(f.engine.enumerate_bindings(1, "StartWorkflow")[1].marked);
    CHECK_FALSE(f.engine.enumerate_bindings(2, "StartWorkflow")[0].marked);
}

TEST_CASE("effect evaluation collects distinct invocations") {
    Fixture f;
    f.apply("StartWorkflow", kKriss);
    auto ev = f.engine.evaluate_effects(2, {"RvwRequest", kKriss});
    CHECK(ev.delta.deletes.at("CurrReq") == Rows{{I(2), S("Kriss"), S("Paris"), S("submitd")}});
    REQUIRE(ev.pending.size() == 3);
    CHECK(ev.pending[0].signature == "status(Kriss,Paris)");
    CHECK(ev.pending[1].signature == "genpk()");
    CHECK(ev.pending[2].signature == "maxAmnt(Kriss,Paris)");
    CHECK(ev.pending[0].id == 1);
    const auto& max_rows = ev.delta.inserts.at("TrvlMaxAmnt");
    REQUIRE(max_rows.size() == 1);
    CHECK(std::get<InvocationSlot>(max_rows[0][0]).invocation == 2);
    CHECK(std::get<Value>(max_rows[0][1]) == I(2));
    CHECK(std::get<InvocationSlot>(max_rows[0][2]).invocation == 3);

    CHECK(f.engine.evaluate_effects(2, {"StartWorkflow", {I(1), S("Bob"), S("NY")}}).pending.empty());
}

TEST_CASE("identical calls share one result") {
    Spec spec = support::parse(R"(
RELATION T (k INT PRIMARY KEY);
RELATION R (k INT PRIMARY KEY, a INT, b INT);
SERVICE f(INT) : INT;
RULE SELECT k FROM T ENABLES A(k);
ACTION A(k) { INSERT INTO R(k, a, b) VALUES (:k, @f(:k), @f(:k)); }
)");
    Snapshot s;
    s.relations["T"] = {{I(7)}};
    Engine e(spec, s, Modality::History);
    auto ev = e.evaluate_effects(1, {"A", {I(7)}});
    REQUIRE(ev.pending.size() == 1);
    const StateId next = e.commit_ground_action(1, {"A", {I(7)}}, {{1, I(40)}});
    CHECK(e.store().reconstruct("R", next) == Rows{{I(7), I(40), I(40)}});
}

TEST_CASE("insert-select rows come from the pre-state") {
    Spec spec = support::parse(R"(
RELATION Src (k INT PRIMARY KEY, v STRING);
RELATION Dst (k INT PRIMARY KEY, v STRING);
RULE SELECT k FROM Src WHERE k = 1 ENABLES Move(k);
ACTION Move(k) {
  DELETE FROM Src WHERE k >= :k;
  INSERT INTO Dst(k, v) SELECT k, v FROM Src WHERE k >= :k;
}
)");
    Snapshot s;
    s.relations["Src"] = {{I(1), S("a")}, {I(2), S("b")}, {I(3), S("c")}};
    s.relations["Dst"];
    Engine e(spec, s, Modality::History);
    auto ev = e.evaluate_effects(1, {"Move", {I(1)}});
    CHECK(ev.delta.inserts.at("Dst").size() == 3);
    auto want = oracle::step(spec, s, "Move", {I(1)}, {});
    REQUIRE(want);
    const StateId next = e.commit_ground_action(1, {"Move", {I(1)}}, {});
    CHECK(e.store().snapshot(next) == *want);
    CHECK(e.store().reconstruct("Src", next).empty());
}

TEST_CASE("the figure trace") {
    Fixture f;
    f.engine.services().register_table("maxAmnt", {{{S("Kriss"), S("Paris")}, I(900)}});
    CHECK(f.apply("StartWorkflow", kKriss) == 2);
    CHECK(f.apply("RvwRequest", kKriss, {{"status(Kriss,Paris)", S("acceptd")}}) == 3);
    CHECK(f.engine.store().reconstruct("CurrReq", 3) == Rows{{I(2), S("Kriss"), S("Paris"), S("acceptd")}});
    CHECK(f.engine.store().reconstruct("TrvlMaxAmnt", 3) == Rows{{I(3), I(2), I(900)}});
    CHECK(f.apply("FillReimb", kKriss, {{"cost(Kriss,Paris)", I(700)}}) == 4);
    CHECK(f.engine.store().reconstruct("TrvlCost", 4) == Rows{{I(4), I(2), I(700)}});

    const auto& tr = f.engine.store().transitions();
    REQUIRE(tr.size() == 3);
    for (std::size_t i = 0; i < tr.size(); ++i) {
        CHECK(tr[i].from == i + 1);
        CHECK(tr[i].to == i + 2);
        if (i) CHECK(tr[i].timestamp > tr[i - 1].timestamp);
    }
    CHECK(tr[1].label.to_string() ==
          "RvwRequest(2,Kriss,Paris)/status(Kriss,Paris)=acceptd,genpk()=3,maxAmnt(Kriss,Paris)=900");
}

TEST_CASE("rollback keeps the state and marks the binding") {
    Fixture f;
    f.apply("StartWorkflow", kKriss);
    auto before = f.engine.store().snapshot(2);
    CHECK_THROWS_AS(f.apply("RvwRequest", kKriss, {{"status(Kriss,Paris)", S("nonsense")}, {"maxAmnt(Kriss,Paris)", I(1)}}),
                    ConstraintViolation);
    CHECK(f.engine.current() == 2);
    CHECK(f.engine.store().states().size() == 2);
    CHECK(f.engine.store().snapshot(2) == before);
    CHECK(f.engine.store().transitions().size() == 1);
    CHECK(f.engine.enumerate_bindings(2, "RvwRequest")[0].marked);
    CHECK_THROWS_AS(f.engine.ground(2, "RvwRequest", 1), StaleBinding);
}

TEST_CASE("commit preconditions") {
    Fixture f;
    GroundAction start{"StartWorkflow", kKriss};
    f.engine.commit_ground_action(1, start, {});
    GroundAction review{"RvwRequest", kKriss};
    CHECK_THROWS_AS(f.engine.commit_ground_action(2, review, {{1, S("acceptd")}}), MissingInvocationResult);
    CHECK_THROWS_AS(f.engine.commit_ground_action(2, review, {{1, I(5)}, {2, I(3)}, {3, I(9)}}), TypeMismatch);
    // not the current state any more
    CHECK_THROWS_AS(f.engine.commit_ground_action(1, {"StartWorkflow", {I(1), S("Bob"), S("NY")}}, {}),
                    StaleBinding);
    // not enabled
    CHECK_THROWS_AS(f.engine.commit_ground_action(2, {"FillReimb", kKriss}, {{1, I(1)}, {2, I(1)}}), StaleBinding);
    CHECK(f.engine.current() == 2);
}

TEST_CASE("plain mode keeps only the current state") {
    Spec spec = support::travel();
    Engine e(spec, support::load(spec, "travel_init.json"), Modality::Plain);
    e.commit_ground_action(1, {"StartWorkflow", kKriss}, {});
    CHECK(e.current() == 2);
    CHECK(e.store().states() == std::vector<StateId>{2});
    CHECK(e.store().transitions().empty());
    CHECK(e.store().raw_rows("Pending").size() == 2);
}

TEST_CASE("scripts") {
    auto steps = parse_script(read_text_file(support::kData + "/travel_trace.script"));
    REQUIRE(steps.size() == 3);
    CHECK(steps[1].action == "RvwRequest");
    CHECK(steps[1].results.size() == 2);
    CHECK(steps[1].results[1].second == I(900));

    SUBCASE("empty script") {
        Fixture f;
        CHECK(run_script(f.engine, {}) == 1);
    }
    SUBCASE("full trace is deterministic") {
        Fixture a, b;
        CHECK(run_script(a.engine, steps) == 4);
        CHECK(run_script(b.engine, steps) == 4);
        CHECK(a.engine.store().snapshot(4) == b.engine.store().snapshot(4));
    }
    SUBCASE("a disabled step stops the script") {
        Fixture f;
        auto bad = parse_script("ACTION StartWorkflow(2, Kriss, Paris);\nACTION FillReimb(2, Kriss, Paris);\n");
        try {
            run_script(f.engine, bad);
            FAIL("expected a script error");
        } catch (const ScriptError& e) {
            CHECK(e.step() == 2);
        }
        CHECK(f.engine.current() == 2);
        CHECK(f.engine.store().reconstruct("CurrReq", 2).size() == 1);
    }
    CHECK_THROWS_AS(parse_script("ACTION Go(1"), Error);
}

TEST_CASE("engine steps agree with the reference interpreter") {
    int compared = 0;
    for (int seed = 0; seed < 40; ++seed) {
        gen::Rng rng(seed);
        auto w = gen::mutation_world(rng, 6);
        Engine e(w.spec, w.instance, Modality::History);
        for (int i = 0; i < 6; ++i) {
            const StateId s = e.current();
            auto actions = e.enabled_actions(s);
            REQUIRE_FALSE(actions.empty());
            const auto& a = actions[rng() % actions.size()];
            CHECK(e.enumerate_bindings(s, a).size() == oracle::bindings(w.spec, e.store().snapshot(s), a).size());
            auto b = e.enumerate_bindings(s, a)[0];
            if (b.marked) continue;
            auto ev = e.evaluate_effects(s, {a, b.values});
            InvocationResults res;
            oracle::CallResults calls;
            for (const auto& p : ev.pending) {
                res[p.id] = gen::value(rng, e.spec().service(p.service)->return_type);
                calls[{p.service, p.args}] = res[p.id];
            }
            auto want = oracle::step(w.spec, e.store().snapshot(s), a, b.values, calls);
            try {
                const StateId next = e.commit_ground_action(s, {a, b.values}, res);
                REQUIRE(want);
                CHECK(e.store().snapshot(next) == *want);
            } catch (const ConstraintViolation&) {
                CHECK_FALSE(want);
            }
            ++compared;
        }
    }
    CHECK(compared > 100);
}

TEST_CASE("modality names") {
    CHECK(parse_modality("plain") == Modality::Plain);
    CHECK(parse_modality("history") == Modality::History);
    CHECK_FALSE(parse_modality("fancy"));
    CHECK(to_string(Modality::StateSpace) == "statespace");
}

TEST_CASE("invalid specs are refused") {
    Spec spec = support::parse("RELATION R (a INT PRIMARY KEY);\nRULE SELECT b FROM R ENABLES A(b);\nACTION A(x INT) { }\n");
    Snapshot s;
    s.relations["R"];
    CHECK_THROWS_AS(Engine(spec, s, Modality::Plain), InvalidSpec);
}

TEST_SUITE_END();
