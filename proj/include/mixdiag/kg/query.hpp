#pragma once

// Basic-graph-pattern queries and inserts over a KnowledgeGraph.
//
// Text syntax (a SPARQL subset over the fixed prefix table):
//
//   SELECT ?s ?p WHERE { ?s a sosa:Sensor . ?s isa88:isPartOf ex:B201 .
//                        FILTER(?v >= 2.5) } ORDER BY DESC(?v) LIMIT 10
//   INSERT DATA { ex:a ex:p "x" . }
//   INSERT { ?s ex:flag true } WHERE { ?s a ex:Tank }
//
// Terms: ?var, <absolute-iri>, prefix:local, `a` (rdf:type), "string",
// "lex"^^xsd:double, integers, decimals, true/false.

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "mixdiag/kg/graph.hpp"
#include "mixdiag/kg/term.hpp"

namespace mixdiag::kg {

class QueryError : public KgError {
 public:
  using KgError::KgError;
};

class UpdateError : public KgError {
 public:
  using KgError::KgError;
};

struct Variable {
  std::string name;  // without the leading '?'
  auto operator<=>(const Variable&) const = default;
};

using PatternTerm = std::variant<Variable, Iri, Literal>;

struct TriplePattern {
  PatternTerm subject;
  PatternTerm predicate;
  PatternTerm object;

  bool operator==(const TriplePattern&) const = default;
};

enum class CompareOp { Eq, Ne, Lt, Le, Gt, Ge };

struct Filter {
  std::string variable;
  CompareOp op = CompareOp::Eq;
  Term constant;

  bool operator==(const Filter&) const = default;
};

struct Query {
  std::vector<std::string> select;  // empty selects every variable, in first-appearance order
  std::vector<TriplePattern> where;
  std::vector<Filter> filters;
  std::optional<std::string> order_by;
  bool descending = false;
  std::optional<std::size_t> limit;

  bool operator==(const Query&) const = default;
};

/// One solution row: variable name -> bound term.
using Solution = std::map<std::string, Term>;

struct Update {
  std::vector<TriplePattern> insert;
  std::vector<TriplePattern> where;
  std::vector<Filter> filters;
};

Query parse_query(std::string_view text);
Update parse_update(std::string_view text);

/// Throws QueryError when a filter/order/select variable does not occur in a pattern.
void validate(const Query& q);

/// Comparison used by filters. nullopt signals a type error (the filter then fails):
/// numbers compare numerically, strings and booleans within their type, IRIs only
/// for (in)equality, anything else is an error.
std::optional<bool> compare_terms(const Term& lhs, CompareOp op, const Term& rhs);

/// Variables of `q` in first-appearance order.
std::vector<std::string> pattern_variables(const std::vector<TriplePattern>& where);

/// Bag of projected solutions over asserted, inferred and virtual triples,
/// sorted by ORDER BY (if any) and then canonically by the projected values.
std::vector<Solution> query(const KnowledgeGraph& graph, const Query& q);

KnowledgeGraph update(KnowledgeGraph graph, const Update& u);

std::string to_string(CompareOp op);

}  // namespace mixdiag::kg
