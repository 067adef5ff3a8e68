#pragma once

// RDF terms over a fixed prefix table.

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "mixdiag/error.hpp"

namespace mixdiag::kg {

class KgError : public Error {
 public:
  using Error::Error;
};

/// The fixed prefix table. Unknown prefixes are rejected.
const std::vector<std::pair<std::string, std::string>>& prefix_table();

class Iri {
 public:
  Iri() = default;

  /// `ex:B201`; throws KgError for an unknown prefix.
  static Iri from_prefixed(std::string_view prefixed);
  /// Absolute IRI (must contain a scheme separator and no whitespace, '<', '>', '"').
  static Iri absolute(std::string value);
  /// Accepts either `<absolute>` or a prefixed name.
  static Iri parse(std::string_view text);

  const std::string& str() const { return value_; }
  /// Prefixed form when a table entry matches and the local part is plain, else `<...>`.
  std::string compact() const;
  /// Local part after the matching namespace (whole IRI if none matches).
  std::string local_name() const;

  auto operator<=>(const Iri&) const = default;

 private:
  explicit Iri(std::string value) : value_(std::move(value)) {}
  std::string value_;
};

/// Shorthand for Iri::parse.
Iri iri(std::string_view text);

enum class Datatype { String, Double, Boolean, Integer };

std::string datatype_iri(Datatype dt);
std::string datatype_compact(Datatype dt);
Datatype datatype_from_iri(const Iri& iri);

class Literal {
 public:
  Literal() = default;

  /// Validates the lexical form and canonicalises numbers and booleans.
  static Literal make(std::string_view lexical, Datatype datatype);
  static Literal of(double value);
  static Literal of(std::int64_t value);
  static Literal of(int value) { return of(static_cast<std::int64_t>(value)); }
  static Literal of(bool value);
  static Literal of(std::string value);
  static Literal of(const char* value) { return of(std::string(value)); }

  const std::string& lexical() const { return lexical_; }
  Datatype datatype() const { return datatype_; }
  bool is_numeric() const { return datatype_ == Datatype::Double || datatype_ == Datatype::Integer; }
  double as_double() const;
  bool as_bool() const { return lexical_ == "true"; }

  auto operator<=>(const Literal&) const = default;

 private:
  Literal(std::string lexical, Datatype datatype) : lexical_(std::move(lexical)), datatype_(datatype) {}
  std::string lexical_;
  Datatype datatype_ = Datatype::String;
};

using Term = std::variant<Iri, Literal>;

/// `ex:B201` or `"30"^^xsd:double`.
std::string to_string(const Term& term);
std::string quote_string(std::string_view s);

struct Triple {
  Iri subject;
  Iri predicate;
  Term object;

  auto operator<=>(const Triple&) const = default;
};

namespace vocab {
// Frequently used IRIs.
const Iri& rdf_type();
const Iri& rdfs_sub_class_of();
const Iri& rdfs_label();
const Iri& owl_equivalent_class();
const Iri& ex_attribute_to_class();
const Iri& ex_relation_to();
}  // namespace vocab

}  // namespace mixdiag::kg
