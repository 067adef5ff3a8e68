#pragma once

// N-Triples subset: one `<s> <p> <o> .` per line, literal objects written as
// "lex"^^<datatype>. A plain "lex" object reads as xsd:string.

#include <set>
#include <string>
#include <string_view>

#include "mixdiag/kg/graph.hpp"

namespace mixdiag::kg {

std::string ntriples_line(const Triple& t);

/// Asserted triples only, lines sorted bytewise.
std::string serialize_ntriples(const KnowledgeGraph& graph);
std::string serialize_ntriples(const std::set<Triple>& triples);

/// Blank lines and `#` comment lines are skipped. Throws ParseError with the line number.
KnowledgeGraph parse_ntriples(std::string_view text);

}  // namespace mixdiag::kg
