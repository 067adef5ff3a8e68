#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "mixdiag/kg/graph.hpp"
#include "mixdiag/kg/ntriples.hpp"
#include "mixdiag/kg/query.hpp"
#include "mixdiag/text.hpp"
#include "oracles.hpp"

using namespace mixdiag;
using namespace mixdiag::kg;

namespace {

Triple t(const char* s, const char* p, Term o) { return {iri(s), iri(p), std::move(o)}; }
Triple t(const char* s, const char* p, const char* o) { return {iri(s), iri(p), iri(o)}; }

bool entails(const KnowledgeGraph& g, const Triple& x) { return g.all_triples().count(x) != 0; }

}  // namespace

TEST_SUITE("kg") {
  TEST_CASE("IRIs and literals") {
    const auto b = iri("ex:B201");
    CHECK(b.compact() == "ex:B201");
    CHECK(Iri::parse("<" + b.str() + ">") == b);
    CHECK_THROWS_AS(iri("nope:X"), KgError);
    CHECK_THROWS_AS(Iri::absolute("no scheme"), KgError);
    CHECK(Literal::make("30.0", Datatype::Double) == Literal::of(30.0));
    CHECK(Literal::make("007", Datatype::Integer).lexical() == "7");
    CHECK_THROWS_AS(Literal::make("abc", Datatype::Double), KgError);
    CHECK_THROWS_AS(Literal::make("yes", Datatype::Boolean), KgError);
    CHECK(to_string(Literal::of(30.0)) == "\"30\"^^xsd:double");
    CHECK(Literal::of(0.1 + 0.2).as_double() == 0.1 + 0.2);
  }

  TEST_CASE("insert and retract") {
    KnowledgeGraph g;
    const auto x = t("ex:a", "ex:p", "ex:b");
    g = insert(g, std::vector{x, x});
    CHECK(g.size() == 1);
    const auto before = g;
    g = retract(g, std::vector{t("ex:a", "ex:p", "ex:zzz")});
    CHECK(g.asserted() == before.asserted());
    const auto y = t("ex:b", "ex:p", Literal::of(3));
    const auto g2 = retract(insert(g, std::vector{y}), std::vector{y});
    CHECK(g2.asserted() == g.asserted());
  }

  TEST_CASE("copies do not see later writes") {
    KnowledgeGraph a;
    a.insert(t("ex:a", "ex:p", "ex:b"));
    KnowledgeGraph b = a;
    b.insert(t("ex:a", "ex:p", "ex:c"));
    CHECK(a.size() == 1);
    CHECK(b.size() == 2);
  }

  TEST_CASE("subclass alignment makes instances visible under the superclass") {
    auto g = align(KnowledgeGraph{}, Alignment::Subclass, iri("sm:StateMachine"), iri("iso17359:DiagnosticModel"));
    CHECK(g.contains(t("sm:StateMachine", "rdfs:subClassOf", "iso17359:DiagnosticModel")));
    g.insert(t("ex:TA1", "rdf:type", "sm:StateMachine"));
    g = infer(g);
    CHECK(entails(g, t("ex:TA1", "rdf:type", "iso17359:DiagnosticModel")));
    const auto rows = query(g, parse_query("SELECT ?m WHERE { ?m a iso17359:DiagnosticModel }"));
    REQUIRE(rows.size() == 1);
    CHECK(rows.front().at("m") == Term(iri("ex:TA1")));
  }

  TEST_CASE("equivalence is symmetric") {
    auto g = infer(align(KnowledgeGraph{}, Alignment::EquivalentTo, iri("ex:A"), iri("ex:B")));
    CHECK(entails(g, t("ex:A", "owl:equivalentClass", "ex:B")));
    CHECK(entails(g, t("ex:B", "owl:equivalentClass", "ex:A")));
    g.insert(t("ex:x", "rdf:type", "ex:B"));
    CHECK(entails(infer(g), t("ex:x", "rdf:type", "ex:A")));
  }

  TEST_CASE("reflexive subclass adds nothing") {
    const auto g = infer(align(KnowledgeGraph{}, Alignment::Subclass, iri("ex:A"), iri("ex:A")));
    CHECK(g.all_triples().size() == 1);
  }

  TEST_CASE("attribute and relation bridges") {
    auto g = align(KnowledgeGraph{}, Alignment::AttributeToClass, iri("ex:capacityLiters"), iri("ex:Tank"));
    g = align(g, Alignment::RelationTo, iri("ex:attachedTo"), iri("isa88:isPartOf"));
    g.insert(t("ex:B201", "ex:capacityLiters", Literal::of(10.0)));
    g.insert(t("ex:L201", "ex:attachedTo", "ex:B201"));
    g = infer(g);
    CHECK(entails(g, t("ex:B201", "rdf:type", "ex:Tank")));
    CHECK(entails(g, t("ex:L201", "isa88:isPartOf", "ex:B201")));
  }

  TEST_CASE("subclass chains are complete") {
    for (int depth = 1; depth <= 5; ++depth) {
      KnowledgeGraph g;
      for (int i = 0; i < depth; ++i) {
        g = align(g, Alignment::Subclass, iri("ex:K" + std::to_string(i)), iri("ex:K" + std::to_string(i + 1)));
      }
      g.insert(t("ex:x", "rdf:type", "ex:K0"));
      g = infer(g);
      for (int i = 0; i <= depth; ++i) {
        CHECK(entails(g, {iri("ex:x"), vocab::rdf_type(), iri("ex:K" + std::to_string(i))}));
        for (int j = i + 1; j <= depth; ++j) {
          CHECK(entails(g, {iri("ex:K" + std::to_string(i)), vocab::rdfs_sub_class_of(), iri("ex:K" + std::to_string(j))}));
        }
      }
    }
  }

  TEST_CASE("empty graph infers nothing") { CHECK(infer(KnowledgeGraph{}).all_triples().empty()); }

  TEST_CASE("inference is monotone, idempotent and matches a naive closure") {
    std::mt19937_64 rng(2024);
    for (int i = 0; i < 50; ++i) {
      KnowledgeGraph g;
      for (const auto& x : oracle::random_schema_graph(rng, 40)) g.insert(x);
      const auto once = infer(g);
      const auto all = once.all_triples();
      CHECK(std::includes(all.begin(), all.end(), g.asserted().begin(), g.asserted().end()));
      CHECK(all == oracle::closure(g.asserted()));
      KnowledgeGraph materialized;
      for (const auto& x : all) materialized.insert(x);
      CHECK(infer(materialized).all_triples() == all);
      CHECK(infer(once).all_triples() == all);
    }
  }

  TEST_CASE("mutation drops inferred triples") {
    auto g = align(KnowledgeGraph{}, Alignment::Subclass, iri("ex:A"), iri("ex:B"));
    g.insert(t("ex:x", "rdf:type", "ex:A"));
    g = infer(g);
    CHECK(g.is_inferred());
    g.insert(t("ex:y", "rdf:type", "ex:A"));
    CHECK_FALSE(g.is_inferred());
    CHECK(g.inferred_index().empty());
  }

  TEST_CASE("virtual sensor binding") {
    const auto dir = helpers::scratch_dir("virtual");
    const auto path = dir + "/log.csv";
    const auto log = plant::simulate(plant::default_config(), 1, {}, 42);
    text::write_file(path, plant::write_log_csv(log));
    auto source = std::make_shared<events::SensorCsvSource>(path);

    KnowledgeGraph g;
    g.insert(t("ex:L201", "rdf:type", "sosa:Sensor"));
    g = bind_virtual(g, {"sensor-log", source});
    const auto size_before = g.size();

    const auto obs = query(g, parse_query("SELECT ?o WHERE { ?o a sosa:Observation }"));
    CHECK(obs.size() == log.sensor_records.size());
    CHECK(g.size() == size_before);
    const auto scans = source->scan_count();
    CHECK(scans >= 1);

    CHECK(query(g, parse_query("SELECT ?s WHERE { ?s a sosa:Sensor }")).size() == 1);
    CHECK(source->scan_count() == scans);

    std::size_t l201 = 0;
    for (const auto& r : log.sensor_records) l201 += r.sensor_id == "L201";
    CHECK(query(g, parse_query("SELECT ?o ?v WHERE { ?o sosa:madeBySensor ex:L201 . ?o sosa:hasSimpleResult ?v }"))
              .size() == l201);
    CHECK(g.size() == size_before);

    g.insert(t("ex:obs_manual", "rdf:type", "sosa:Observation"));
    g = unbind_virtual(g, "sensor-log");
    CHECK(query(g, parse_query("SELECT ?o WHERE { ?o a sosa:Observation }")).size() == 1);

    auto missing = bind_virtual(KnowledgeGraph{}, {"gone", std::make_shared<events::SensorCsvSource>(dir + "/x.csv")});
    CHECK_THROWS_AS(query(missing, parse_query("SELECT ?o WHERE { ?o a sosa:Observation }")), events::SourceUnavailable);
  }

  TEST_CASE("N-Triples") {
    KnowledgeGraph g;
    g.insert(t("ex:a", "rdfs:label", Literal::of("line\nbreak \"quoted\" back\\slash")));
    g.insert(t("ex:a", "ex:n", Literal::of(2.5)));
    g.insert(t("ex:a", "ex:flag", Literal::of(true)));
    g.insert(t("ex:a", "ex:k", Literal::of(7)));
    g.insert(t("ex:a", "rdf:type", "ex:Thing"));
    const auto text = serialize_ntriples(g);
    CHECK(parse_ntriples(text).asserted() == g.asserted());
    CHECK(serialize_ntriples(KnowledgeGraph{}).empty());
    CHECK(parse_ntriples("").size() == 0);
    try {
      parse_ntriples(text + "<http://x/a> <http://x/p> .\n");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 6);
    }
    CHECK_THROWS_AS(parse_ntriples("<http://x/a> <http://x/p> \"x\"@en .\n"), ParseError);

    std::mt19937_64 rng(9);
    oracle::RandomVocabulary v;
    for (int i = 0; i < 20; ++i) {
      KnowledgeGraph r;
      for (const auto& x : oracle::random_triples(rng, v, 100)) r.insert(x);
      CHECK(parse_ntriples(serialize_ntriples(r)).asserted() == r.asserted());
    }
  }
}
