#include <random>

#include "doctest.h"
#include "mixdiag/kg/query.hpp"
#include "oracles.hpp"

using namespace mixdiag;
using namespace mixdiag::kg;

namespace {

KnowledgeGraph numbers() {
  KnowledgeGraph g;
  for (int i = 0; i < 6; ++i) {
    g.insert({iri("ex:n" + std::to_string(i)), iri("ex:value"), Literal::of(static_cast<double>(i) * 1.5)});
    g.insert({iri("ex:n" + std::to_string(i)), vocab::rdf_type(), iri("ex:Item")});
  }
  return g;
}

std::multiset<Solution> as_multiset(const std::vector<Solution>& rows) { return {rows.begin(), rows.end()}; }

}  // namespace

TEST_SUITE("query") {
  TEST_CASE("parser accepts the subset") {
    const auto q = parse_query(
        "SELECT ?x ?v WHERE { ?x a ex:Item . ?x ex:value ?v . FILTER(?v >= 3) } ORDER BY DESC(?v) LIMIT 2");
    CHECK(q.select == std::vector<std::string>{"x", "v"});
    CHECK(q.where.size() == 2);
    REQUIRE(q.filters.size() == 1);
    CHECK(q.filters.front().op == CompareOp::Ge);
    CHECK(q.order_by == "v");
    CHECK(q.descending);
    CHECK(q.limit == 2u);
    CHECK(std::get<Iri>(q.where.front().predicate) == vocab::rdf_type());
  }

  TEST_CASE("parser errors") {
    CHECK_THROWS_AS(parse_query("SELECT ?x WHERE { ?x ex:p }"), QueryError);
    CHECK_THROWS_AS(parse_query("SELECT ?x WHERE { ?x ex:p ?y "), QueryError);
    CHECK_THROWS_AS(parse_query("SELECT ?x WHERE { ?x ex:p ?y } LIMIT -1"), QueryError);
    CHECK_THROWS_AS(parse_query("SELECT ?z WHERE { ?x ex:p ?y }"), QueryError);
    CHECK_THROWS_AS(parse_query("SELECT ?x WHERE { ?x ex:p ?y . FILTER(?q < 1) }"), QueryError);
    CHECK_THROWS_AS(parse_query("SELECT ?x WHERE { \"lit\" ex:p ?x }"), QueryError);
    CHECK_THROWS_AS(parse_query("SELECT ?x WHERE { ?x ex:p ?y OPTIONAL { ?y ex:q ?z } }"), QueryError);
    CHECK_THROWS_AS(parse_query("SELECT ?x WHERE { ?x zz:p ?y }"), KgError);
  }

  TEST_CASE("unsatisfiable filter") {
    CHECK(query(numbers(), parse_query("SELECT ?x WHERE { ?x ex:value ?v . FILTER(?v < 0) }")).empty());
  }

  TEST_CASE("order and limit") {
    const auto rows = query(numbers(), parse_query("SELECT ?v WHERE { ?x ex:value ?v } ORDER BY DESC(?v) LIMIT 3"));
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].at("v") == Term(Literal::of(7.5)));
    CHECK(rows[2].at("v") == Term(Literal::of(4.5)));
    const auto asc = query(numbers(), parse_query("SELECT ?v WHERE { ?x ex:value ?v } ORDER BY ?v"));
    REQUIRE(asc.size() == 6);
    CHECK(asc.front().at("v") == Term(Literal::of(0.0)));
    CHECK(query(numbers(), parse_query("SELECT * WHERE { ?x ex:value ?v } LIMIT 0")).empty());
  }

  TEST_CASE("comparisons") {
    CHECK(compare_terms(Literal::of(2), CompareOp::Lt, Literal::of(2.5)) == true);
    CHECK(compare_terms(Literal::of("a"), CompareOp::Lt, Literal::of("b")) == true);
    CHECK_FALSE(compare_terms(Literal::of("a"), CompareOp::Lt, Literal::of(1)).has_value());
    CHECK_FALSE(compare_terms(iri("ex:a"), CompareOp::Lt, iri("ex:b")).has_value());
    CHECK(compare_terms(iri("ex:a"), CompareOp::Ne, iri("ex:b")) == true);
  }

  TEST_CASE("updates") {
    KnowledgeGraph g;
    g = update(g, parse_update("INSERT DATA { ex:a ex:p ex:b . ex:b ex:p ex:c . ex:c ex:q \"x\" . ex:a ex:p ex:b }"));
    CHECK(g.size() == 3);
    g = update(g, parse_update("INSERT { ?x a ex:Linked } WHERE { ?x ex:p ?y }"));
    CHECK(g.size() == 5);
    CHECK(g.contains({iri("ex:b"), vocab::rdf_type(), iri("ex:Linked")}));
    CHECK_THROWS_AS(update(g, parse_update("INSERT { ?x a ?z } WHERE { ?x ex:p ?y }")), UpdateError);
    CHECK_THROWS_AS(parse_update("INSERT DATA { ?x ex:p ex:b }"), QueryError);
    const auto same = update(g, parse_update("INSERT { ?x a ex:Never } WHERE { ?x ex:none ?y }"));
    CHECK(same.asserted() == g.asserted());
  }

  TEST_CASE("random queries match the brute-force evaluator") {
    std::mt19937_64 rng(20241016);
    oracle::RandomVocabulary v;
    int cases = 0, non_empty = 0;
    for (int i = 0; i < 150; ++i) {
      KnowledgeGraph g;
      for (const auto& x : oracle::random_triples(rng, v, 200)) g.insert(x);
      auto q = oracle::random_query(rng, v);
      CHECK_NOTHROW(validate(q));
      const auto parsed = parse_query(oracle::render(q));
      CHECK(parsed == q);
      const std::vector<Triple> dataset(g.asserted().begin(), g.asserted().end());
      const auto expected = oracle::brute_force(dataset, q);
      const auto actual = query(g, parsed);
      CHECK(as_multiset(actual) == as_multiset(expected));
      ++cases;
      non_empty += !expected.empty();
    }
    CHECK(cases >= 100);
    CHECK(non_empty >= 20);
  }
}
