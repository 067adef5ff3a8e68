#include "mixdiag/kg/ntriples.hpp"

#include <algorithm>
#include <vector>

namespace mixdiag::kg {

std::string ntriples_line(const Triple& t) {
  std::string out = "<" + t.subject.str() + "> <" + t.predicate.str() + "> ";
  if (const auto* o = std::get_if<Iri>(&t.object)) {
    out += "<" + o->str() + ">";
  } else {
    const auto& lit = std::get<Literal>(t.object);
    out += quote_string(lit.lexical()) + "^^<" + datatype_iri(lit.datatype()) + ">";
  }
  out += " .";
  return out;
}

std::string serialize_ntriples(const std::set<Triple>& triples) {
  std::vector<std::string> lines;
  lines.reserve(triples.size());
  for (const auto& t : triples) lines.push_back(ntriples_line(t));
  std::sort(lines.begin(), lines.end());
  std::string out;
  for (const auto& l : lines) {
    out += l;
    out += '\n';
  }
  return out;
}

std::string serialize_ntriples(const KnowledgeGraph& graph) { return serialize_ntriples(graph.asserted()); }

namespace {

class LineReader {
 public:
  LineReader(std::string_view line, std::size_t number) : s_(line), line_(number) {}

  Triple triple() {
    Triple t;
    t.subject = iri();
    t.predicate = iri();
    skip_ws();
    if (peek() == '"') {
      t.object = literal();
    } else {
      t.object = iri();
    }
    skip_ws();
    if (peek() != '.') fail("expected '.'");
    ++pos_;
    skip_ws();
    if (pos_ != s_.size() && s_[pos_] != '#') fail("trailing characters after '.'");
    return t;
  }

 private:
  [[noreturn]] void fail(const std::string& why) const { throw ParseError(line_, why); }

  char peek() const { return pos_ < s_.size() ? s_[pos_] : '\0'; }

  void skip_ws() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
  }

  Iri iri() {
    skip_ws();
    if (peek() != '<') fail("expected '<'");
    const auto close = s_.find('>', pos_);
    if (close == std::string_view::npos) fail("unterminated IRI");
    std::string value(s_.substr(pos_ + 1, close - pos_ - 1));
    pos_ = close + 1;
    try {
      return Iri::absolute(std::move(value));
    } catch (const KgError& e) {
      fail(e.what());
    }
  }

  Literal literal() {
    ++pos_;
    std::string lex;
    for (;;) {
      if (pos_ >= s_.size()) fail("unterminated literal");
      char c = s_[pos_++];
      if (c == '"') break;
      if (c == '\\') {
        if (pos_ >= s_.size()) fail("dangling escape");
        switch (s_[pos_++]) {
          case '\\': c = '\\'; break;
          case '"': c = '"'; break;
          case 'n': c = '\n'; break;
          case 'r': c = '\r'; break;
          case 't': c = '\t'; break;
          default: fail("unsupported escape");
        }
      }
      lex += c;
    }
    Datatype dt = Datatype::String;
    if (s_.substr(pos_, 2) == "^^") {
      pos_ += 2;
      try {
        dt = datatype_from_iri(iri());
      } catch (const KgError& e) {
        fail(e.what());
      }
    } else if (peek() == '@') {
      fail("language tags are not supported");
    }
    try {
      return Literal::make(lex, dt);
    } catch (const KgError& e) {
      fail(e.what());
    }
  }

  std::string_view s_;
  std::size_t pos_ = 0;
  std::size_t line_;
};

}  // namespace

KnowledgeGraph parse_ntriples(std::string_view text) {
  KnowledgeGraph graph;
  std::size_t number = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    ++number;
    start = end + 1;
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string_view::npos || line[first] == '#') continue;
    graph.insert(LineReader(line, number).triple());
  }
  return graph;
}

}  // namespace mixdiag::kg
