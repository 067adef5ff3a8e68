#include "doctest.h"
#include "helpers.hpp"
#include "mixdiag/annotate.hpp"
#include "mixdiag/kg/query.hpp"
#include "mixdiag/pipeline.hpp"

using namespace mixdiag;
using namespace mixdiag::kg;
using namespace mixdiag::annotate;

namespace {

struct Learned {
  plant::PlantConfig config = plant::default_config();
  ta::TimedAutomaton automaton = [this] {
    auto a = ta::learn(events::split_cycles(helpers::trace_of(config, 10), events::all_off(config.actuator_ids())));
    a.canonicalize();
    return a;
  }();
  std::vector<anomaly::Anomaly> blockage() const {
    return anomaly::detect(automaton, helpers::trace_of(config, 1, {plant::parse_fault("blockage:P201:0.5")}, 43))
        .anomalies;
  }
};

KnowledgeGraph graph_of(const std::vector<Triple>& triples) {
  KnowledgeGraph g;
  for (const auto& t : triples) g.insert(t);
  return g;
}

std::vector<Triple> without(std::vector<Triple> triples, const Triple& drop) {
  triples.erase(std::remove(triples.begin(), triples.end(), drop), triples.end());
  return triples;
}

}  // namespace

TEST_SUITE("annotate") {
  TEST_CASE("seven states are annotated") {
    Learned l;
    const auto g = graph_of(annotate_automaton(l.automaton));
    CHECK(query(g, parse_query("SELECT ?s WHERE { ?s a sm:State }")).size() == 7);
    CHECK(query(g, parse_query("SELECT ?t WHERE { ?t a sm:Transition }")).size() == 7);
    CHECK(query(g, parse_query("SELECT ?s WHERE { ?s sm:isInitial true }")).size() == 1);
  }

  TEST_CASE("equipment links only when mapped") {
    Learned l;
    const auto q = parse_query("SELECT ?t ?e WHERE { ?t isa88:relatesToEquipment ?e }");
    CHECK(query(graph_of(annotate_automaton(l.automaton)), q).empty());
    const auto linked = query(graph_of(annotate_automaton(l.automaton, pipeline::equipment_map_for(l.automaton))), q);
    CHECK(linked.size() == 6);  // every transition except the one leaving idle
  }

  TEST_CASE("annotate then rebuild is the identity") {
    Learned l;
    const auto triples = annotate_automaton(l.automaton, pipeline::equipment_map_for(l.automaton));
    const auto back = rebuild_automaton(triples);
    CHECK(back.states() == l.automaton.states());
    CHECK(back.alphabet() == l.automaton.alphabet());
    for (const auto& [key, t] : l.automaton.transitions()) {
      const auto& u = back.transitions().at(key);
      CHECK(u.t_min_s == t.t_min_s);
      CHECK(u.t_max_s == t.t_max_s);
      CHECK(u.count == t.count);
      CHECK(std::abs(u.mean_s - t.mean_s) <= 1e-9 * std::abs(t.mean_s));
    }
  }

  TEST_CASE("initial flag must be unique") {
    Learned l;
    const auto triples = annotate_automaton(l.automaton);
    const auto s0 = state_iri(l.automaton.initial_state());
    const Triple initial{s0, iri("sm:isInitial"), Literal::of(true)};
    auto missing = without(triples, initial);
    missing.push_back({s0, iri("sm:isInitial"), Literal::of(false)});
    CHECK_THROWS_AS(rebuild_automaton(missing), MalformedAnnotation);

    auto twice = without(triples, {state_iri(1), iri("sm:isInitial"), Literal::of(false)});
    twice.push_back({state_iri(1), iri("sm:isInitial"), Literal::of(true)});
    CHECK_THROWS_AS(rebuild_automaton(twice), MalformedAnnotation);

    CHECK_THROWS_AS(rebuild_automaton({}), MalformedAnnotation);
  }

  TEST_CASE("blockage symptom sits between Transfer and Drain") {
    Learned l;
    const auto anomalies = l.blockage();
    REQUIRE(anomalies.size() == 1);
    const auto automaton_triples = annotate_automaton(l.automaton);
    auto g = graph_of(automaton_triples);
    for (const auto& t : annotate_anomalies(anomalies, automaton_triples)) g.insert(t);

    const auto rows =
        query(g, parse_query("SELECT ?s ?g WHERE { ?a iso17359:locatedAt ?t . ?t sm:source ?s . ?t sm:target ?g }"));
    REQUIRE(rows.size() == 1);
    CHECK(rows.front().at("s") == Term(state_iri(*anomalies.front().source.id)));
    CHECK(rows.front().at("g") == Term(state_iri(*anomalies.front().target->id)));
    const auto transfer_label = query(g, parse_query("SELECT ?l WHERE { ?a iso17359:locatedAt ?t . ?t sm:source ?s . ?s rdfs:label ?l }"));
    CHECK(transfer_label.front().at("l") == Term(Literal::of("P201")));
    const auto drain_label = query(g, parse_query("SELECT ?l WHERE { ?a iso17359:locatedAt ?t . ?t sm:target ?s . ?s rdfs:label ?l }"));
    CHECK(drain_label.front().at("l") == Term(Literal::of("V205")));

    const auto dev = query(g, parse_query("SELECT ?d WHERE { ?a ex:deviationSeconds ?d }"));
    REQUIRE(dev.size() == 1);
    const double d = std::get<Literal>(dev.front().at("d")).as_double();
    CHECK(d == *anomalies.front().deviation_s);
    CHECK(std::abs(d - 30.0) <= 0.2);
  }

  TEST_CASE("no anomalies, no triples") {
    Learned l;
    CHECK(annotate_anomalies({}, annotate_automaton(l.automaton)).empty());
  }

  TEST_CASE("timing anomaly on an absent transition") {
    Learned l;
    auto a = l.blockage();
    REQUIRE(!a.empty());
    a.front().event_label = "V999\xE2\x86\x91";
    CHECK_THROWS_AS(annotate_anomalies(a, annotate_automaton(l.automaton)), UnknownTransition);
  }

  TEST_CASE("state machine is visible as a diagnostic model after inference") {
    Learned l;
    const auto g = infer(graph_of(annotate_automaton(l.automaton)));
    const auto rows = query(g, parse_query("SELECT ?m WHERE { ?m a iso17359:DiagnosticModel }"));
    REQUIRE(rows.size() == 1);
    CHECK(rows.front().at("m") == Term(machine_iri()));
  }
}
