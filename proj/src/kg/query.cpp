#include "mixdiag/kg/query.hpp"

#include <algorithm>
#include <cctype>
#include <functional>
#include <set>

#include "mixdiag/text.hpp"

namespace mixdiag::kg {

std::string to_string(CompareOp op) {
  switch (op) {
    case CompareOp::Eq: return "=";
    case CompareOp::Ne: return "!=";
    case CompareOp::Lt: return "<";
    case CompareOp::Le: return "<=";
    case CompareOp::Gt: return ">";
    case CompareOp::Ge: return ">=";
  }
  return "";
}

// ---------------------------------------------------------------------------
// Lexer

namespace {

enum class Tok { Word, Var, IriRef, PName, String, Number, Punct, End };

struct Token {
  Tok kind = Tok::End;
  std::string text;
  std::string datatype;  // String tokens: raw datatype after ^^ (IRI ref or pname), may be empty
  std::size_t offset = 0;
};

bool is_name_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.' || c == ':';
}

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    for (;;) {
      skip_space();
      Token t;
      t.offset = pos_;
      if (pos_ >= src_.size()) {
        out.push_back(t);
        return out;
      }
      const char c = src_[pos_];
      if (c == '?' || c == '$') {
        ++pos_;
        const auto start = pos_;
        while (pos_ < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) ++pos_;
        if (pos_ == start) fail("empty variable name");
        t.kind = Tok::Var;
        t.text = std::string(src_.substr(start, pos_ - start));
      } else if (c == '<' && looks_like_iri()) {
        t.kind = Tok::IriRef;
        t.text = read_iri_ref();
      } else if (c == '"') {
        t.kind = Tok::String;
        t.text = read_string();
        if (src_.substr(pos_, 2) == "^^") {
          pos_ += 2;
          if (pos_ < src_.size() && src_[pos_] == '<') {
            t.datatype = "<" + read_iri_ref() + ">";
          } else {
            t.datatype = read_name();
            if (t.datatype.find(':') == std::string::npos) fail("datatype must be an IRI");
          }
        }
      } else if (std::isdigit(static_cast<unsigned char>(c)) ||
                 ((c == '-' || c == '+' || c == '.') && pos_ + 1 < src_.size() &&
                  (std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])) ||
                   (src_[pos_ + 1] == '.' && c != '.')))) {
        t.kind = Tok::Number;
        t.text = read_number();
      } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        std::string name = read_name();
        t.kind = name.find(':') == std::string::npos ? Tok::Word : Tok::PName;
        t.text = std::move(name);
      } else {
        t.kind = Tok::Punct;
        static const char* two[] = {"!=", "<=", ">=", "^^"};
        bool matched = false;
        for (const char* op : two) {
          if (src_.substr(pos_, 2) == op) {
            t.text = op;
            pos_ += 2;
            matched = true;
            break;
          }
        }
        if (!matched) {
          if (std::string_view("{}().*,;=<>").find(c) == std::string_view::npos) {
            fail(std::string("unexpected character '") + c + "'");
          }
          t.text = std::string(1, c);
          ++pos_;
        }
      }
      out.push_back(std::move(t));
    }
  }

 private:
  [[noreturn]] void fail(const std::string& why) const {
    throw QueryError("query syntax error at offset " + std::to_string(pos_) + ": " + why);
  }

  void skip_space() {
    while (pos_ < src_.size()) {
      const char c = src_[pos_];
      if (c == '#') {
        while (pos_ < src_.size() && src_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        return;
      }
    }
  }

  bool looks_like_iri() const {
    if (pos_ + 1 >= src_.size()) return false;
    const char n = src_[pos_ + 1];
    if (std::isspace(static_cast<unsigned char>(n)) || n == '=' || n == '?' || n == '$' || n == '"' ||
        std::isdigit(static_cast<unsigned char>(n)) || n == '-' || n == '+') {
      return false;
    }
    const auto close = src_.find('>', pos_);
    if (close == std::string_view::npos) return false;
    const auto body = src_.substr(pos_ + 1, close - pos_ - 1);
    return std::none_of(body.begin(), body.end(), [](char ch) { return std::isspace(static_cast<unsigned char>(ch)); });
  }

  std::string read_iri_ref() {
    const auto close = src_.find('>', pos_);
    if (close == std::string_view::npos) fail("unterminated IRI");
    std::string out(src_.substr(pos_ + 1, close - pos_ - 1));
    pos_ = close + 1;
    return out;
  }

  std::string read_string() {
    ++pos_;  // opening quote
    std::string out;
    while (pos_ < src_.size() && src_[pos_] != '"') {
      char c = src_[pos_++];
      if (c == '\\') {
        if (pos_ >= src_.size()) fail("dangling escape");
        const char e = src_[pos_++];
        switch (e) {
          case 'n': c = '\n'; break;
          case 't': c = '\t'; break;
          case 'r': c = '\r'; break;
          case '"': c = '"'; break;
          case '\\': c = '\\'; break;
          default: fail(std::string("unknown escape \\") + e);
        }
      }
      out += c;
    }
    if (pos_ >= src_.size()) fail("unterminated string");
    ++pos_;
    return out;
  }

  std::string read_name() {
    const auto start = pos_;
    while (pos_ < src_.size() && is_name_char(src_[pos_])) ++pos_;
    while (pos_ > start && src_[pos_ - 1] == '.') --pos_;  // a trailing '.' ends the triple
    return std::string(src_.substr(start, pos_ - start));
  }

  std::string read_number() {
    const auto start = pos_;
    if (src_[pos_] == '-' || src_[pos_] == '+') ++pos_;
    while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    if (pos_ + 1 < src_.size() && src_[pos_] == '.' && std::isdigit(static_cast<unsigned char>(src_[pos_ + 1]))) {
      ++pos_;
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      ++pos_;
      if (pos_ < src_.size() && (src_[pos_] == '-' || src_[pos_] == '+')) ++pos_;
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }
    return std::string(src_.substr(start, pos_ - start));
  }

  std::string_view src_;
  std::size_t pos_ = 0;
};

std::string upper(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

// ---------------------------------------------------------------------------
// Parser

class Parser {
 public:
  explicit Parser(std::string_view src) : toks_(Lexer(src).run()) {}

  Query query() {
    Query q;
    expect_word("SELECT");
    if (accept_punct("*")) {
      // every variable
    } else {
      while (peek().kind == Tok::Var) q.select.push_back(next().text);
      if (q.select.empty()) fail("SELECT needs '*' or at least one variable");
    }
    accept_word("WHERE");
    group(q.where, q.filters);
    if (accept_word("ORDER")) {
      expect_word("BY");
      if (accept_word("DESC")) {
        q.descending = true;
        expect_punct("(");
        q.order_by = expect_var();
        expect_punct(")");
      } else if (accept_word("ASC")) {
        expect_punct("(");
        q.order_by = expect_var();
        expect_punct(")");
      } else {
        q.order_by = expect_var();
      }
    }
    if (accept_word("LIMIT")) {
      const Token t = next();
      if (t.kind != Tok::Number || t.text.find_first_not_of("0123456789") != std::string::npos) {
        fail("LIMIT needs a non-negative integer");
      }
      q.limit = static_cast<std::size_t>(text::parse_int(t.text));
    }
    expect_end();
    validate(q);
    return q;
  }

  Update update() {
    Update u;
    expect_word("INSERT");
    if (accept_word("DATA")) {
      std::vector<Filter> none;
      group(u.insert, none);
      if (!none.empty()) fail("FILTER is not allowed in INSERT DATA");
      for (const auto& p : u.insert) {
        for (const auto* pt : {&p.subject, &p.predicate, &p.object}) {
          if (std::holds_alternative<Variable>(*pt)) fail("INSERT DATA must be ground");
        }
      }
    } else {
      std::vector<Filter> none;
      group(u.insert, none);
      if (!none.empty()) fail("FILTER is not allowed in an INSERT template");
      expect_word("WHERE");
      group(u.where, u.filters);
      Query probe;
      probe.where = u.where;
      probe.filters = u.filters;
      validate(probe);
    }
    expect_end();
    return u;
  }

 private:
  [[noreturn]] void fail(const std::string& why) const {
    throw QueryError("query syntax error at offset " + std::to_string(peek().offset) + ": " + why);
  }

  const Token& peek() const { return toks_[pos_]; }
  Token next() {
    Token t = toks_[pos_];
    if (t.kind != Tok::End) ++pos_;
    return t;
  }

  bool accept_word(const char* w) {
    if (peek().kind == Tok::Word && upper(peek().text) == w) {
      ++pos_;
      return true;
    }
    return false;
  }
  void expect_word(const char* w) {
    if (!accept_word(w)) fail(std::string("expected ") + w);
  }
  bool accept_punct(const char* p) {
    if (peek().kind == Tok::Punct && peek().text == p) {
      ++pos_;
      return true;
    }
    return false;
  }
  void expect_punct(const char* p) {
    if (!accept_punct(p)) fail(std::string("expected '") + p + "'");
  }
  std::string expect_var() {
    if (peek().kind != Tok::Var) fail("expected a variable");
    return next().text;
  }
  void expect_end() {
    if (peek().kind != Tok::End) fail("unexpected trailing input '" + peek().text + "'");
  }

  void group(std::vector<TriplePattern>& patterns, std::vector<Filter>& filters) {
    expect_punct("{");
    while (!accept_punct("}")) {
      if (peek().kind == Tok::End) fail("unterminated group");
      if (accept_punct(".")) continue;
      if (accept_word("FILTER")) {
        filters.push_back(filter());
        continue;
      }
      TriplePattern tp;
      tp.subject = term(Position::Subject);
      tp.predicate = term(Position::Predicate);
      tp.object = term(Position::Object);
      patterns.push_back(std::move(tp));
      if (peek().kind == Tok::Punct && peek().text == "}") continue;
      expect_punct(".");
    }
  }

  Filter filter() {
    expect_punct("(");
    Filter f;
    f.variable = expect_var();
    const Token op = next();
    if (op.kind != Tok::Punct) fail("expected a comparison operator");
    if (op.text == "=") {
      f.op = CompareOp::Eq;
    } else if (op.text == "!=") {
      f.op = CompareOp::Ne;
    } else if (op.text == "<") {
      f.op = CompareOp::Lt;
    } else if (op.text == "<=") {
      f.op = CompareOp::Le;
    } else if (op.text == ">") {
      f.op = CompareOp::Gt;
    } else if (op.text == ">=") {
      f.op = CompareOp::Ge;
    } else {
      fail("unknown operator '" + op.text + "'");
    }
    PatternTerm c = term(Position::Object);
    if (std::holds_alternative<Variable>(c)) fail("FILTER compares a variable with a constant");
    if (const auto* i = std::get_if<Iri>(&c)) {
      f.constant = *i;
    } else {
      f.constant = std::get<Literal>(c);
    }
    expect_punct(")");
    return f;
  }

  enum class Position { Subject, Predicate, Object };

  PatternTerm term(Position pos) {
    const Token t = next();
    try {
      switch (t.kind) {
        case Tok::Var: return Variable{t.text};
        case Tok::IriRef: return Iri::absolute(t.text);
        case Tok::PName: return Iri::from_prefixed(t.text);
        case Tok::Word:
          if (t.text == "a" && pos == Position::Predicate) return vocab::rdf_type();
          if (t.text == "true" || t.text == "false") return literal_or_fail(pos, Literal::of(t.text == "true"));
          fail("unexpected word '" + t.text + "'");
        case Tok::String: {
          Datatype dt = Datatype::String;
          if (!t.datatype.empty()) dt = datatype_from_iri(Iri::parse(t.datatype));
          return literal_or_fail(pos, Literal::make(t.text, dt));
        }
        case Tok::Number: {
          const bool integral = t.text.find_first_of(".eE") == std::string::npos;
          return literal_or_fail(pos, Literal::make(t.text, integral ? Datatype::Integer : Datatype::Double));
        }
        default: fail("expected a term, got '" + t.text + "'");
      }
    } catch (const QueryError&) {
      throw;
    } catch (const KgError& e) {
      fail(e.what());
    }
  }

  PatternTerm literal_or_fail(Position pos, Literal lit) {
    if (pos != Position::Object) fail("literals may only appear in object position");
    return lit;
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

}  // namespace

Query parse_query(std::string_view text) { return Parser(text).query(); }

Update parse_update(std::string_view text) { return Parser(text).update(); }

std::vector<std::string> pattern_variables(const std::vector<TriplePattern>& where) {
  std::vector<std::string> out;
  for (const auto& p : where) {
    for (const auto* pt : {&p.subject, &p.predicate, &p.object}) {
      if (const auto* v = std::get_if<Variable>(pt)) {
        if (std::find(out.begin(), out.end(), v->name) == out.end()) out.push_back(v->name);
      }
    }
  }
  return out;
}

void validate(const Query& q) {
  const auto vars = pattern_variables(q.where);
  auto known = [&](const std::string& v) { return std::find(vars.begin(), vars.end(), v) != vars.end(); };
  for (const auto& v : q.select) {
    if (!known(v)) throw QueryError("selected variable ?" + v + " does not occur in the WHERE clause");
  }
  for (const auto& f : q.filters) {
    if (!known(f.variable)) throw QueryError("filter variable ?" + f.variable + " does not occur in a pattern");
  }
  if (q.order_by && !known(*q.order_by)) throw QueryError("ORDER BY variable ?" + *q.order_by + " is not bound");
  for (const auto& p : q.where) {
    if (std::holds_alternative<Literal>(p.subject) || std::holds_alternative<Literal>(p.predicate)) {
      throw QueryError("literal in subject or predicate position");
    }
  }
}

std::optional<bool> compare_terms(const Term& lhs, CompareOp op, const Term& rhs) {
  auto apply = [op](auto a, auto b) {
    switch (op) {
      case CompareOp::Eq: return a == b;
      case CompareOp::Ne: return a != b;
      case CompareOp::Lt: return a < b;
      case CompareOp::Le: return a <= b;
      case CompareOp::Gt: return a > b;
      case CompareOp::Ge: return a >= b;
    }
    return false;
  };
  const auto* li = std::get_if<Iri>(&lhs);
  const auto* ri = std::get_if<Iri>(&rhs);
  if (li || ri) {
    if (!li || !ri) return std::nullopt;
    if (op != CompareOp::Eq && op != CompareOp::Ne) return std::nullopt;
    return apply(li->str(), ri->str());
  }
  const auto& l = std::get<Literal>(lhs);
  const auto& r = std::get<Literal>(rhs);
  if (l.is_numeric() && r.is_numeric()) return apply(l.as_double(), r.as_double());
  if (l.datatype() != r.datatype()) return std::nullopt;
  if (l.datatype() == Datatype::Boolean) return apply(l.as_bool(), r.as_bool());
  return apply(l.lexical(), r.lexical());
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {

using Row = std::vector<std::optional<Term>>;

struct Slot {
  std::optional<Term> constant;
  int var = -1;
};

struct CompiledPattern {
  Slot s, p, o;
  bool virtual_shape = false;
};

class Evaluator {
 public:
  Evaluator(const KnowledgeGraph& graph, const std::vector<TriplePattern>& where, const std::vector<Filter>& filters)
      : graph_(graph), vars_(pattern_variables(where)), filters_(filters) {
    auto slot = [&](const PatternTerm& pt) {
      Slot s;
      if (const auto* v = std::get_if<Variable>(&pt)) {
        s.var = index_of(v->name);
      } else if (const auto* i = std::get_if<Iri>(&pt)) {
        s.constant = *i;
      } else {
        s.constant = std::get<Literal>(pt);
      }
      return s;
    };
    for (const auto& tp : where) {
      CompiledPattern cp{slot(tp.subject), slot(tp.predicate), slot(tp.object), false};
      const Iri* pred = cp.p.constant ? std::get_if<Iri>(&*cp.p.constant) : nullptr;
      const Term* obj = cp.o.constant ? &*cp.o.constant : nullptr;
      cp.virtual_shape = VirtualBinding::serves(pred, obj);
      patterns_.push_back(std::move(cp));
    }
    for (const auto& f : filters_) filter_vars_.push_back(index_of(f.variable));
    plan();
  }

  const std::vector<std::string>& vars() const { return vars_; }

  std::vector<Row> run() {
    const bool needs_virtual =
        !graph_.virtual_bindings().empty() &&
        std::any_of(patterns_.begin(), patterns_.end(), [](const CompiledPattern& p) { return p.virtual_shape; });
    if (needs_virtual) {
      for (const auto& b : graph_.virtual_bindings()) {
        b.materialize([&](const Triple& t) {
          if (!graph_.contains(t) && !graph_.inferred_index().contains(t)) virtual_.insert(t);
        });
      }
    }
    Row row(vars_.size());
    std::vector<Row> out;
    if (!filters_hold(row, checks_before_)) return out;
    join(0, row, out);
    return out;
  }

 private:
  int index_of(const std::string& name) const {
    auto it = std::find(vars_.begin(), vars_.end(), name);
    if (it == vars_.end()) throw QueryError("variable ?" + name + " does not occur in a pattern");
    return static_cast<int>(it - vars_.begin());
  }

  // Greedy join order: most bound positions first, ties by original order.
  void plan() {
    std::vector<bool> bound(vars_.size(), false), used(patterns_.size(), false);
    auto score = [&](const Slot& s) { return s.constant || (s.var >= 0 && bound[static_cast<std::size_t>(s.var)]) ? 1 : 0; };
    for (std::size_t step = 0; step < patterns_.size(); ++step) {
      int best = -1, best_score = -1;
      for (std::size_t i = 0; i < patterns_.size(); ++i) {
        if (used[i]) continue;
        const auto& p = patterns_[i];
        const int sc = score(p.s) + score(p.p) + score(p.o);
        if (sc > best_score) {
          best = static_cast<int>(i);
          best_score = sc;
        }
      }
      used[static_cast<std::size_t>(best)] = true;
      order_.push_back(static_cast<std::size_t>(best));
      for (const Slot* s : {&patterns_[static_cast<std::size_t>(best)].s, &patterns_[static_cast<std::size_t>(best)].p,
                            &patterns_[static_cast<std::size_t>(best)].o}) {
        if (s->var >= 0) bound[static_cast<std::size_t>(s->var)] = true;
      }
      std::vector<std::size_t> ready;
      for (std::size_t f = 0; f < filters_.size(); ++f) {
        if (bound[static_cast<std::size_t>(filter_vars_[f])] && !scheduled_.count(f)) {
          ready.push_back(f);
          scheduled_.insert(f);
        }
      }
      checks_.push_back(std::move(ready));
    }
  }

  bool filters_hold(const Row& row, const std::vector<std::size_t>& which) const {
    for (std::size_t f : which) {
      const auto& value = row[static_cast<std::size_t>(filter_vars_[f])];
      if (!value) return false;
      const auto ok = compare_terms(*value, filters_[f].op, filters_[f].constant);
      if (!ok || !*ok) return false;
    }
    return true;
  }

  static bool bind(Row& row, const Slot& slot, const Term& value, std::vector<int>& newly) {
    if (slot.var < 0) return true;
    auto& cell = row[static_cast<std::size_t>(slot.var)];
    if (cell) return *cell == value;
    cell = value;
    newly.push_back(slot.var);
    return true;
  }

  void join(std::size_t depth, Row& row, std::vector<Row>& out) {
    if (depth == order_.size()) {
      out.push_back(row);
      return;
    }
    const CompiledPattern& cp = patterns_[order_[depth]];
    auto resolve = [&](const Slot& s) -> std::optional<Term> {
      if (s.constant) return s.constant;
      return row[static_cast<std::size_t>(s.var)];
    };
    const auto s_val = resolve(cp.s);
    const auto p_val = resolve(cp.p);
    const auto o_val = resolve(cp.o);
    const Iri* s_iri = s_val ? std::get_if<Iri>(&*s_val) : nullptr;
    const Iri* p_iri = p_val ? std::get_if<Iri>(&*p_val) : nullptr;
    if ((s_val && !s_iri) || (p_val && !p_iri)) return;  // a literal can never be a subject or predicate
    const Term* o_term = o_val ? &*o_val : nullptr;

    auto visit = [&](const Triple& t) {
      std::vector<int> newly;
      const bool ok = bind(row, cp.s, t.subject, newly) && bind(row, cp.p, t.predicate, newly) &&
                      bind(row, cp.o, t.object, newly);
      if (ok && filters_hold(row, checks_[depth])) join(depth + 1, row, out);
      for (int v : newly) row[static_cast<std::size_t>(v)].reset();
    };
    graph_.asserted_index().match(s_iri, p_iri, o_term, visit);
    graph_.inferred_index().match(s_iri, p_iri, o_term, visit);
    if (cp.virtual_shape && !virtual_.empty()) virtual_.match(s_iri, p_iri, o_term, visit);
  }

  const KnowledgeGraph& graph_;
  std::vector<std::string> vars_;
  const std::vector<Filter>& filters_;
  std::vector<int> filter_vars_;
  std::vector<CompiledPattern> patterns_;
  std::vector<std::size_t> order_;
  std::vector<std::vector<std::size_t>> checks_;  // filters checked after each plan depth
  std::vector<std::size_t> checks_before_;
  std::set<std::size_t> scheduled_;
  TripleIndex virtual_;
};

int order_compare(const Term& a, const Term& b) {
  const auto* la = std::get_if<Literal>(&a);
  const auto* lb = std::get_if<Literal>(&b);
  if (la && lb && la->is_numeric() && lb->is_numeric()) {
    const double x = la->as_double(), y = lb->as_double();
    if (x < y) return -1;
    if (x > y) return 1;
    return 0;
  }
  const auto c = a <=> b;
  return c < 0 ? -1 : (c > 0 ? 1 : 0);
}

}  // namespace

std::vector<Solution> query(const KnowledgeGraph& graph, const Query& q) {
  validate(q);
  Evaluator ev(graph, q.where, q.filters);
  const auto rows = ev.run();
  const auto& vars = ev.vars();
  const std::vector<std::string> projected = q.select.empty() ? vars : q.select;

  std::vector<Solution> out;
  out.reserve(rows.size());
  for (const auto& row : rows) {
    Solution s;
    for (const auto& name : projected) {
      const auto idx = static_cast<std::size_t>(std::find(vars.begin(), vars.end(), name) - vars.begin());
      s.emplace(name, *row[idx]);
    }
    if (q.order_by) {
      const auto idx = static_cast<std::size_t>(std::find(vars.begin(), vars.end(), *q.order_by) - vars.begin());
      s.emplace(" order", *row[idx]);  // sort key; removed below
    }
    out.push_back(std::move(s));
  }

  auto canonical = [&](const Solution& a, const Solution& b) {
    for (const auto& name : projected) {
      const auto c = a.at(name) <=> b.at(name);
      if (c != 0) return c < 0;
    }
    return false;
  };
  if (q.order_by) {
    std::sort(out.begin(), out.end(), [&](const Solution& a, const Solution& b) {
      const int c = order_compare(a.at(" order"), b.at(" order"));
      if (c != 0) return q.descending ? c > 0 : c < 0;
      const auto d = a.at(" order") <=> b.at(" order");
      if (d != 0) return q.descending ? d > 0 : d < 0;
      return canonical(a, b);
    });
    for (auto& s : out) s.erase(" order");
  } else {
    std::sort(out.begin(), out.end(), canonical);
  }
  if (q.limit && out.size() > *q.limit) out.resize(*q.limit);
  return out;
}

KnowledgeGraph update(KnowledgeGraph graph, const Update& u) {
  std::vector<Row> rows;
  std::vector<std::string> vars;
  if (u.where.empty()) {
    if (!u.filters.empty()) throw UpdateError("FILTER without a WHERE pattern");
    rows.emplace_back();
  } else {
    Query probe;
    probe.where = u.where;
    probe.filters = u.filters;
    try {
      validate(probe);
    } catch (const QueryError& e) {
      throw UpdateError(e.what());
    }
    Evaluator ev(graph, u.where, u.filters);
    rows = ev.run();
    vars = ev.vars();
  }

  std::vector<Triple> fresh;
  for (const auto& row : rows) {
    auto ground = [&](const PatternTerm& pt) -> Term {
      if (const auto* v = std::get_if<Variable>(&pt)) {
        auto it = std::find(vars.begin(), vars.end(), v->name);
        if (it == vars.end()) throw UpdateError("template variable ?" + v->name + " is not bound by WHERE");
        return *row[static_cast<std::size_t>(it - vars.begin())];
      }
      if (const auto* i = std::get_if<Iri>(&pt)) return *i;
      return std::get<Literal>(pt);
    };
    for (const auto& tp : u.insert) {
      const Term s = ground(tp.subject);
      const Term p = ground(tp.predicate);
      const Term o = ground(tp.object);
      const auto* si = std::get_if<Iri>(&s);
      const auto* pi = std::get_if<Iri>(&p);
      if (!si || !pi) throw UpdateError("instantiated triple has a literal subject or predicate");
      fresh.push_back({*si, *pi, o});
    }
  }
  return insert(std::move(graph), fresh);
}

}  // namespace mixdiag::kg
