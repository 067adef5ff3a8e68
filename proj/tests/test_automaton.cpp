#include <numeric>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "mixdiag/automaton.hpp"

using namespace mixdiag;
using namespace mixdiag::ta;

namespace {

std::vector<events::EventTrace> nominal_cycles(int n, std::uint64_t seed = 42) {
  const auto c = plant::default_config();
  return events::split_cycles(helpers::trace_of(c, n, {}, seed), events::all_off(c.actuator_ids()));
}

events::ActuatorVector vec(bool a, bool b) { return {{{"A", a}, {"B", b}}}; }

}  // namespace

TEST_SUITE("automaton") {
  TEST_CASE("ten nominal cycles give a seven-state cycle") {
    const auto a = learn(nominal_cycles(10));
    REQUIRE(a.states().size() == 7);
    REQUIRE(a.transitions().size() == 7);
    // Every state has exactly one outgoing edge and following them from the
    // initial state visits all states before returning.
    std::map<StateId, StateId> next;
    for (const auto& [key, t] : a.transitions()) CHECK(next.emplace(t.source, t.target).second);
    std::set<StateId> seen;
    StateId s = a.initial_state();
    for (int i = 0; i < 7; ++i) {
      seen.insert(s);
      s = next.at(s);
    }
    CHECK(s == a.initial_state());
    CHECK(seen.size() == 7);
    for (const auto& [key, t] : a.transitions()) CHECK(t.count == 10);
  }

  TEST_CASE("single step") {
    events::EventTrace t{vec(false, false), 0.0, {{{"A\xE2\x86\x91", 3.0}, vec(true, false), 3.0}}};
    const auto a = learn({t});
    CHECK(a.states().size() == 2);
    REQUIRE(a.transitions().size() == 1);
    const auto& tr = a.transitions().begin()->second;
    CHECK(tr.t_min_s == 3.0);
    CHECK(tr.t_max_s == 3.0);
    CHECK(tr.mean_s == 3.0);
    CHECK(tr.count == 1);
  }

  TEST_CASE("Transfer exit bounds match the closed form") {
    const auto a = learn(nominal_cycles(10));
    const auto transfer = a.find_state(events::ActuatorVector{
        {{"M201", false}, {"P201", true}, {"V201", false}, {"V202", false}, {"V203", false}, {"V205", false}}});
    REQUIRE(transfer.has_value());
    bool found = false;
    for (const auto& [key, t] : a.transitions()) {
      if (t.source != *transfer) continue;
      found = true;
      CHECK(t.t_min_s == doctest::Approx(30.0).epsilon(0.1 / 30.0));
      CHECK(t.t_max_s == doctest::Approx(30.0).epsilon(0.1 / 30.0));
    }
    CHECK(found);
  }

  TEST_CASE("update semantics") {
    TimedAutomaton a(vec(false, false));
    const StateId s0 = a.initial_state();
    const StateId s1 = a.update(s0, {"A\xE2\x86\x91", 0}, vec(true, false), 10.0);
    a.update(s0, {"A\xE2\x86\x91", 0}, vec(true, false), 12.0);
    const auto* t = a.find_transition(s0, "A\xE2\x86\x91");
    REQUIRE(t != nullptr);
    CHECK(t->target == s1);
    CHECK(t->t_min_s == 10.0);
    CHECK(t->t_max_s == 12.0);

    a.update(s0, {"A\xE2\x86\x91", 0}, vec(true, false), 11.0);
    CHECK(t->count == 3);
    CHECK(t->t_min_s == 10.0);
    CHECK(t->t_max_s == 12.0);
    CHECK(t->mean_s == doctest::Approx(11.0));

    a.update(s0, {"A\xE2\x86\x91", 0}, vec(true, false), 20.0);
    CHECK(t->t_max_s == 20.0);
  }

  TEST_CASE("corrupted step violates determinism") {
    TimedAutomaton a(vec(false, false));
    CHECK_THROWS_AS(a.update(a.initial_state(), {"A\xE2\x86\x91", 0}, vec(false, true), 1.0), DeterminismViolation);
    CHECK_THROWS_AS(a.update(a.initial_state(), {"A\xE2\x86\x91", 0}, vec(true, false), 0.0), PreconditionError);
    CHECK_THROWS_AS(a.update(42, {"A\xE2\x86\x91", 0}, vec(true, false), 1.0), PreconditionError);
  }

  TEST_CASE("convergence") {
    const auto traces = nominal_cycles(10);
    CHECK(learn(traces).has_converged(7, 0.2));

    TimedAutomaton once(vec(false, false));
    once.update(once.initial_state(), {"A\xE2\x86\x91", 0}, vec(true, false), 1.0);
    CHECK_FALSE(once.has_converged(1, 0.2));

    // A fresh state on every step never converges.
    TimedAutomaton fresh(events::ActuatorVector{{{"A", false}, {"B", false}, {"C", false}}});
    StateId s = fresh.initial_state();
    s = fresh.update(s, {"A\xE2\x86\x91", 0}, {{{"A", true}, {"B", false}, {"C", false}}}, 1.0);
    s = fresh.update(s, {"B\xE2\x86\x91", 0}, {{{"A", true}, {"B", true}, {"C", false}}}, 1.0);
    s = fresh.update(s, {"C\xE2\x86\x91", 0}, {{{"A", true}, {"B", true}, {"C", true}}}, 1.0);
    CHECK_FALSE(fresh.has_converged(3, 0.2));
    CHECK_THROWS_AS(fresh.has_converged(0, 0.2), PreconditionError);
  }

  TEST_CASE("serialize round-trip") {
    const auto a = learn(nominal_cycles(10));
    const auto text = serialize(a);
    const auto b = deserialize(text);
    CHECK(b == a);
    CHECK(serialize(b) == text);
  }

  TEST_CASE("empty state list is rejected") {
    CHECK_THROWS_AS(deserialize(R"({"format":"timed-automaton/1","alphabet":[],"states":[],"transitions":[]})"),
                    ParseError);
  }

  TEST_CASE("hand-written two-state file") {
    const std::string text = R"({
      "format": "timed-automaton/1",
      "alphabet": ["A↑"],
      "states": [
        {"id": 0, "initial": true, "vector": {"A": false}},
        {"id": 1, "initial": false, "vector": {"A": true}}
      ],
      "transitions": [
        {"source": 0, "event": "A↑", "target": 1, "t_min_s": 2, "t_max_s": 4, "mean_s": 3, "m2_s2": 2, "count": 2}
      ]
    })";
    const auto a = deserialize(text);
    CHECK(a.states().size() == 2);
    CHECK(a.initial_state() == 0);
    REQUIRE(a.find_transition(0, "A\xE2\x86\x91") != nullptr);
    CHECK(a.find_transition(0, "A\xE2\x86\x91")->variance_s2() == doctest::Approx(1.0));

    auto two_initial = text;
    two_initial.replace(two_initial.find("\"initial\": false"), 16, "\"initial\": true");
    CHECK_THROWS_AS(deserialize(two_initial), ParseError);
    auto bad_mean = text;
    bad_mean.replace(bad_mean.find("\"mean_s\": 3"), 11, "\"mean_s\": 9");
    CHECK_THROWS_AS(deserialize(bad_mean), ParseError);
    CHECK_THROWS_AS(deserialize("{}"), ParseError);
  }

  TEST_CASE("learning is insensitive to trace order") {
    auto traces = nominal_cycles(6, 3);
    const auto a = learn(traces);
    std::reverse(traces.begin(), traces.end());
    const auto b = learn(traces);
    REQUIRE(a.transitions().size() == b.transitions().size());
    for (const auto& [key, t] : a.transitions()) {
      const auto& u = b.transitions().at(key);
      CHECK(t.t_min_s == u.t_min_s);
      CHECK(t.t_max_s == u.t_max_s);
      CHECK(t.count == u.count);
      CHECK(t.mean_s == doctest::Approx(u.mean_s).epsilon(1e-12));
    }
    CHECK(a.states() == b.states());
  }

  TEST_CASE("running statistics match a two-pass computation") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> dwell(0.1, 50.0);
    TimedAutomaton a(vec(false, false));
    std::vector<double> xs;
    for (int i = 0; i < 500; ++i) {
      const double d = dwell(rng);
      xs.push_back(d);
      const StateId s1 = a.update(a.initial_state(), {"A\xE2\x86\x91", 0}, vec(true, false), d);
      a.update(s1, {"A\xE2\x86\x93", 0}, vec(false, false), 1.0);
    }
    const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    const auto* t = a.find_transition(a.initial_state(), "A\xE2\x86\x91");
    CHECK(t->mean_s == doctest::Approx(mean).epsilon(1e-12));
    CHECK(t->variance_s2() == doctest::Approx(ss / xs.size()).epsilon(1e-9));
    CHECK(t->t_min_s == *std::min_element(xs.begin(), xs.end()));
    CHECK(t->t_max_s == *std::max_element(xs.begin(), xs.end()));
  }

  TEST_CASE("traces must share ids and initial vector") {
    CHECK_THROWS_AS(learn({}), PreconditionError);
    events::EventTrace t1{vec(false, false), 0.0, {{{"A\xE2\x86\x91", 1}, vec(true, false), 1.0}}};
    events::EventTrace t2{vec(true, false), 0.0, {{{"A\xE2\x86\x93", 1}, vec(false, false), 1.0}}};
    CHECK_THROWS_AS(learn({t1, t2}), InconsistentTraces);
    events::EventTrace t3{{{{"A", false}}}, 0.0, {{{"A\xE2\x86\x91", 1}, {{{"A", true}}}, 1.0}}};
    CHECK_THROWS_AS(learn({t1, t3}), InconsistentTraces);
  }

  TEST_CASE("every training trace replays through the automaton") {
    const auto traces = nominal_cycles(10, 11);
    const auto a = learn(traces);
    for (const auto& trace : traces) {
      StateId s = a.initial_state();
      for (const auto& step : trace.steps) {
        const auto* t = a.find_transition(s, step.event.label);
        REQUIRE(t != nullptr);
        CHECK(a.state(t->target).vector == step.resulting_vector);
        CHECK(step.dwell_s >= t->t_min_s);
        CHECK(step.dwell_s <= t->t_max_s);
        s = t->target;
      }
    }
  }
}
