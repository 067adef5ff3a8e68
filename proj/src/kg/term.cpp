#include "mixdiag/kg/term.hpp"

#include <algorithm>
#include <cmath>

#include "mixdiag/text.hpp"

namespace mixdiag::kg {

const std::vector<std::pair<std::string, std::string>>& prefix_table() {
  static const std::vector<std::pair<std::string, std::string>> table = {
      {"rdf", "http://www.w3.org/1999/02/22-rdf-syntax-ns#"},
      {"rdfs", "http://www.w3.org/2000/01/rdf-schema#"},
      {"xsd", "http://www.w3.org/2001/XMLSchema#"},
      {"owl", "http://www.w3.org/2002/07/owl#"},
      {"sosa", "http://www.w3.org/ns/sosa/"},
      {"ex", "http://example.org/mixing-module#"},
      {"vdi3682", "http://www.w3id.org/hsu-aut/VDI3682#"},
      {"isa88", "http://www.w3id.org/hsu-aut/ISA88#"},
      {"din61360", "http://www.w3id.org/hsu-aut/DINEN61360#"},
      {"iso17359", "http://www.w3id.org/hsu-aut/ISO17359#"},
      {"sm", "http://www.w3id.org/hsu-aut/UMLStateMachine#"},
  };
  return table;
}

namespace {

bool plain_local(std::string_view local) {
  if (local.empty() || local.back() == '.') return false;
  return std::all_of(local.begin(), local.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '-' ||
           c == '.';
  });
}

bool valid_absolute(std::string_view v) {
  if (v.find(':') == std::string_view::npos || v.front() == ':') return false;
  return std::none_of(v.begin(), v.end(), [](char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '<' || c == '>' || c == '"' || c == '{' ||
           c == '}';
  });
}

}  // namespace

Iri Iri::from_prefixed(std::string_view prefixed) {
  const auto colon = prefixed.find(':');
  if (colon == std::string_view::npos) throw KgError("not a prefixed name: '" + std::string(prefixed) + "'");
  const auto prefix = prefixed.substr(0, colon);
  const auto local = prefixed.substr(colon + 1);
  for (const auto& [p, ns] : prefix_table()) {
    if (p == prefix) {
      std::string full = ns + std::string(local);
      if (!valid_absolute(full)) throw KgError("invalid IRI '" + std::string(prefixed) + "'");
      return Iri(std::move(full));
    }
  }
  throw KgError("unknown prefix '" + std::string(prefix) + ":'");
}

Iri Iri::absolute(std::string value) {
  if (!valid_absolute(value)) throw KgError("invalid absolute IRI '" + value + "'");
  return Iri(std::move(value));
}

Iri Iri::parse(std::string_view text) {
  if (text.size() >= 2 && text.front() == '<' && text.back() == '>') {
    return absolute(std::string(text.substr(1, text.size() - 2)));
  }
  return from_prefixed(text);
}

std::string Iri::compact() const {
  for (const auto& [p, ns] : prefix_table()) {
    if (value_.size() > ns.size() && value_.compare(0, ns.size(), ns) == 0) {
      std::string_view local(value_.data() + ns.size(), value_.size() - ns.size());
      if (plain_local(local)) return p + ":" + std::string(local);
    }
  }
  return "<" + value_ + ">";
}

std::string Iri::local_name() const {
  for (const auto& [p, ns] : prefix_table()) {
    if (value_.size() > ns.size() && value_.compare(0, ns.size(), ns) == 0) return value_.substr(ns.size());
  }
  return value_;
}

Iri iri(std::string_view text) { return Iri::parse(text); }

std::string datatype_iri(Datatype dt) { return "http://www.w3.org/2001/XMLSchema#" + datatype_compact(dt).substr(4); }

std::string datatype_compact(Datatype dt) {
  switch (dt) {
    case Datatype::String: return "xsd:string";
    case Datatype::Double: return "xsd:double";
    case Datatype::Boolean: return "xsd:boolean";
    case Datatype::Integer: return "xsd:integer";
  }
  return "";
}

Datatype datatype_from_iri(const Iri& iri) {
  for (auto dt : {Datatype::String, Datatype::Double, Datatype::Boolean, Datatype::Integer}) {
    if (iri.str() == datatype_iri(dt)) return dt;
  }
  throw KgError("unsupported datatype " + iri.compact());
}

Literal Literal::make(std::string_view lexical, Datatype datatype) {
  switch (datatype) {
    case Datatype::String: return Literal(std::string(lexical), datatype);
    case Datatype::Double: {
      double v = 0.0;
      try {
        v = text::parse_double(lexical);
      } catch (const ParseError&) {
        throw KgError("invalid xsd:double lexical '" + std::string(lexical) + "'");
      }
      if (!std::isfinite(v)) throw KgError("non-finite xsd:double '" + std::string(lexical) + "'");
      return of(v);
    }
    case Datatype::Integer: {
      try {
        return of(text::parse_int(lexical));
      } catch (const ParseError&) {
        throw KgError("invalid xsd:integer lexical '" + std::string(lexical) + "'");
      }
    }
    case Datatype::Boolean: {
      if (lexical == "true" || lexical == "1") return of(true);
      if (lexical == "false" || lexical == "0") return of(false);
      throw KgError("invalid xsd:boolean lexical '" + std::string(lexical) + "'");
    }
  }
  throw KgError("unknown datatype");
}

Literal Literal::of(double value) {
  if (!std::isfinite(value)) throw KgError("non-finite xsd:double");
  return Literal(text::format_double(value), Datatype::Double);
}

Literal Literal::of(std::int64_t value) { return Literal(std::to_string(value), Datatype::Integer); }

Literal Literal::of(bool value) { return Literal(value ? "true" : "false", Datatype::Boolean); }

Literal Literal::of(std::string value) { return Literal(std::move(value), Datatype::String); }

double Literal::as_double() const {
  if (!is_numeric()) throw KgError("literal is not numeric");
  return text::parse_double(lexical_);
}

std::string quote_string(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '"': out += "\\\""; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default: out += c;
    }
  }
  out += '"';
  return out;
}

std::string to_string(const Term& term) {
  if (const auto* i = std::get_if<Iri>(&term)) return i->compact();
  const auto& lit = std::get<Literal>(term);
  return quote_string(lit.lexical()) + "^^" + datatype_compact(lit.datatype());
}

namespace vocab {
const Iri& rdf_type() {
  static const Iri v = Iri::from_prefixed("rdf:type");
  return v;
}
const Iri& rdfs_sub_class_of() {
  static const Iri v = Iri::from_prefixed("rdfs:subClassOf");
  return v;
}
const Iri& rdfs_label() {
  static const Iri v = Iri::from_prefixed("rdfs:label");
  return v;
}
const Iri& owl_equivalent_class() {
  static const Iri v = Iri::from_prefixed("owl:equivalentClass");
  return v;
}
const Iri& ex_attribute_to_class() {
  static const Iri v = Iri::from_prefixed("ex:attributeToClass");
  return v;
}
const Iri& ex_relation_to() {
  static const Iri v = Iri::from_prefixed("ex:relationTo");
  return v;
}
}  // namespace vocab

}  // namespace mixdiag::kg
