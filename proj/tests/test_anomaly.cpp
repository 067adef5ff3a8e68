#include "doctest.h"
#include "helpers.hpp"
#include "mixdiag/anomaly.hpp"
#include "oracles.hpp"

using namespace mixdiag;
using namespace mixdiag::anomaly;

namespace {

struct Fixture {
  plant::PlantConfig config = plant::default_config();
  events::ActuatorVector idle = events::all_off(config.actuator_ids());
  std::vector<events::EventTrace> training =
      events::split_cycles(helpers::trace_of(config, 10, {}, 42), idle);
  ta::TimedAutomaton automaton = ta::learn(training);

  events::EventTrace scenario(const std::string& fault) const {
    return helpers::trace_of(config, 1, {plant::parse_fault(fault)}, 43);
  }
  std::optional<ta::StateId> phase_state(const std::string& name) const {
    auto v = idle;
    for (const auto& p : config.phases)
      if (p.name == name)
        for (const auto& [id, on] : p.actuator_vector) v.signals[id] = on;
    return automaton.find_state(v);
  }
};

const DetectionSettings zero_tol{0.0, 0.0};

}  // namespace

TEST_SUITE("anomaly") {
  TEST_CASE("training traces replay with zero tolerance") {
    Fixture f;
    for (const auto& t : f.training) {
      const auto d = detect(f.automaton, t, zero_tol);
      CHECK(d.anomalies.empty());
      CHECK_FALSE(d.initial_mismatch);
    }
  }

  TEST_CASE("blockage yields one TimingAboveMax on the Transfer exit") {
    Fixture f;
    const auto d = detect(f.automaton, f.scenario("blockage:P201:0.5"));
    REQUIRE(d.anomalies.size() == 1);
    const auto& a = d.anomalies.front();
    CHECK(a.kind == AnomalyKind::TimingAboveMax);
    CHECK(a.source.id == f.phase_state("Transfer"));
    REQUIRE(a.target.has_value());
    CHECK(a.target->id == f.phase_state("Drain"));
    const double observed = oracle::duration_of(oracle::phase_durations(f.config, {plant::parse_fault("blockage:P201:0.5")}), "Transfer");
    const double learned = oracle::duration_of(oracle::phase_durations(f.config), "Transfer");
    CHECK(*a.observed_dwell_s == doctest::Approx(observed).epsilon(1e-9));
    CHECK(*a.bound_s == doctest::Approx(learned).epsilon(1e-9));
    CHECK(std::abs(*a.deviation_s - (observed - learned)) <= 0.2);
    CHECK(*a.deviation_s == *a.observed_dwell_s - *a.bound_s);
  }

  TEST_CASE("leakage stretches every dose and shortens the drain side") {
    Fixture f;
    const auto faults = std::vector<plant::FaultSpec>{plant::parse_fault("leakage:B204:0.02")};
    const auto d = detect(f.automaton, f.scenario("leakage:B204:0.02"));
    const auto expected = oracle::phase_durations(f.config, faults);
    const auto nominal = oracle::phase_durations(f.config);
    const DetectionSettings defaults;
    // Closed form: every phase whose duration moves beyond its tolerance shows up, nothing else.
    std::size_t expected_count = 0;
    for (std::size_t i = 0; i < expected.size(); ++i) {
      const double delta = expected[i].seconds - nominal[i].seconds;
      if (std::abs(delta) > defaults.tolerance_for(nominal[i].seconds)) ++expected_count;
    }
    CHECK(d.anomalies.size() == expected_count);
    bool dose1 = false;
    for (const auto& a : d.anomalies) {
      CHECK(is_timing(a.kind));
      CHECK(*a.deviation_s > 0.0);
      if (a.source.id == f.phase_state("Dose1")) {
        dose1 = true;
        CHECK(a.kind == AnomalyKind::TimingAboveMax);
        CHECK(*a.observed_dwell_s == doctest::Approx(25.0));
        CHECK(std::abs(*a.deviation_s - 5.0) <= 0.2);
      }
    }
    CHECK(dose1);
  }

  TEST_CASE("never-seen vector is an UnknownState") {
    Fixture f;
    const auto m201 = f.phase_state("Mix");
    REQUIRE(m201.has_value());
    auto both = f.automaton.state(*m201).vector;
    both.signals["P201"] = true;
    auto trace = f.training.front();
    // Replace the Mix -> Transfer step by Mix -> (Mix+P201) -> Transfer.
    for (std::size_t i = 0; i < trace.steps.size(); ++i) {
      if (trace.steps[i].resulting_vector == f.automaton.state(*m201).vector) {
        auto next = trace.steps[i + 1];
        const events::TraceStep into{{"P201\xE2\x86\x91", next.event.t_s}, both, next.dwell_s};
        next.event.label = "M201\xE2\x86\x93";
        next.dwell_s = 0.1;
        next.event.t_s += 0.1;
        trace.steps[i + 1] = into;
        trace.steps.insert(trace.steps.begin() + static_cast<std::ptrdiff_t>(i) + 2, next);
        // Later timestamps are irrelevant to detection; dwell drives timing.
        break;
      }
    }
    REQUIRE(events::replays_consistently(trace));
    const auto d = detect(f.automaton, trace);
    REQUIRE(d.anomalies.size() == 1);
    CHECK(d.anomalies.front().kind == AnomalyKind::UnknownState);
    CHECK(d.anomalies.front().source.vector == both);
    CHECK_FALSE(d.anomalies.front().target.has_value());
  }

  TEST_CASE("unknown event between known states") {
    Fixture f;
    auto trace = f.training.front();
    // Skip Dose2: Dose1 -> Dose3 directly is a label the automaton never saw.
    const auto dose1 = f.automaton.state(*f.phase_state("Dose1")).vector;
    const auto dose3 = f.automaton.state(*f.phase_state("Dose3")).vector;
    for (std::size_t i = 0; i + 1 < trace.steps.size(); ++i) {
      if (trace.steps[i].resulting_vector == dose1) {
        trace.steps[i + 1] = {{events::make_label(dose1, dose3), trace.steps[i + 1].event.t_s}, dose3,
                              trace.steps[i + 1].dwell_s};
        trace.steps.erase(trace.steps.begin() + static_cast<std::ptrdiff_t>(i) + 2);
        break;
      }
    }
    const auto d = detect(f.automaton, trace);
    REQUIRE(d.anomalies.size() == 1);
    CHECK(d.anomalies.front().kind == AnomalyKind::UnknownEvent);
    CHECK(d.anomalies.front().target->id == f.phase_state("Dose3"));
  }

  TEST_CASE("larger tolerance never adds anomalies") {
    Fixture f;
    const auto trace = f.scenario("leakage:B204:0.02");
    std::size_t previous = SIZE_MAX;
    for (double tol : {0.0, 0.5, 1.0, 2.0, 3.0, 4.0, 6.0}) {
      const auto n = detect(f.automaton, trace, {tol, 0.0}).anomalies.size();
      CHECK(n <= previous);
      previous = n;
    }
    CHECK(detect(f.automaton, trace, {100.0, 0.0}).anomalies.empty());
  }

  TEST_CASE("deviation equals distance to the violated bound") {
    Fixture f;
    for (const char* fault : {"blockage:P201:0.5", "blockage:V202:0.4", "leakage:B204:0.02"}) {
      for (const auto& a : detect(f.automaton, f.scenario(fault), zero_tol).anomalies) {
        REQUIRE(is_timing(a.kind));
        const auto* t = f.automaton.find_transition(*a.source.id, a.event_label);
        REQUIRE(t != nullptr);
        const double bound = a.kind == AnomalyKind::TimingAboveMax ? t->t_max_s : t->t_min_s;
        CHECK(*a.bound_s == bound);
        CHECK(*a.deviation_s == std::abs(*a.observed_dwell_s - bound));
      }
    }
  }

  TEST_CASE("settings validation") {
    Fixture f;
    CHECK_THROWS_AS(detect(f.automaton, f.training.front(), {-1.0, 0.1}), PreconditionError);
    CHECK_THROWS_AS(detect(f.automaton, f.training.front(), {0.5, 1.0}), PreconditionError);
    CHECK(DetectionSettings{}.tolerance_for(30.0) == doctest::Approx(3.0));
    CHECK(DetectionSettings{}.tolerance_for(2.0) == doctest::Approx(0.5));
  }

  TEST_CASE("actuator set must match") {
    Fixture f;
    events::EventTrace t{{{{"A", false}}}, 0.0, {}};
    CHECK_THROWS_AS(detect(f.automaton, t), PreconditionError);
  }

  TEST_CASE("initial mismatch is reported and detection resumes") {
    Fixture f;
    auto trace = f.training.front();
    trace.initial_vector = trace.steps.front().resulting_vector;
    trace.steps.erase(trace.steps.begin());
    const auto d = detect(f.automaton, trace, zero_tol);
    CHECK(d.initial_mismatch);
    CHECK(d.anomalies.empty());
  }

  TEST_CASE("anomaly JSON round-trip") {
    Fixture f;
    const auto d = detect(f.automaton, f.scenario("leakage:B204:0.02"));
    CHECK(anomalies_from_json_text(anomalies_to_json_text(d.anomalies)) == d.anomalies);
    CHECK(anomalies_from_json_text("[]").empty());
    CHECK_THROWS_AS(anomaly_kind_from("Spooky"), ParseError);
  }
}
