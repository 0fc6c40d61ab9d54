#include <algorithm>
#include <cctype>
#include <set>

#include "tbstream/rdf/vocabulary.hpp"
#include "tbstream/sparql/query.hpp"

namespace tbstream::sparql {

namespace {

std::string describe(const std::vector<std::string>& expected, const std::string& found) {
  if (expected.empty()) return found;
  std::string out = "expected ";
  if (expected.size() > 1) out += "one of ";
  for (std::size_t i = 0; i < expected.size(); ++i) out += (i ? ", " : "") + expected[i];
  return out + ", found " + found;
}

}  // namespace

QuerySyntaxError::QuerySyntaxError(std::size_t line, std::size_t column, std::vector<std::string> expected,
                                   const std::string& found)
    : std::runtime_error(std::to_string(line) + ":" + std::to_string(column) + ": " + describe(expected, found)),
      line_(line),
      column_(column),
      expected_(std::move(expected)) {}

const std::map<std::string, std::string>& default_prefixes() {
  static const std::map<std::string, std::string> p = {
      {"rdf", std::string(rdf::iri::kRdf)},
      {"rdfs", std::string(rdf::iri::kRdfs)},
      {"xsd", std::string(rdf::iri::kXsd)},
      {"owl", std::string(rdf::iri::kOwl)},
      {"ex", std::string(rdf::kDefaultNamespace)},
  };
  return p;
}

bool QueryAst::has_aggregates() const {
  return std::any_of(select.begin(), select.end(), [](const SelectItem& s) { return s.kind != SelectKind::Var; });
}

std::vector<std::string> QueryAst::pattern_variables() const {
  std::vector<std::string> out;
  auto add = [&](const Operand& o) {
    if (o.is_var() && std::find(out.begin(), out.end(), *o.var) == out.end()) out.push_back(*o.var);
  };
  for (const auto& t : where) {
    add(t.s);
    add(t.p);
    add(t.o);
  }
  return out;
}

namespace {

enum class Tok { Iri, PName, Var, String, Number, Word, Sym, LangTag, End };

struct Token {
  Tok kind;
  std::string text;
  std::size_t line, col;
};

std::string token_desc(const Token& t) {
  switch (t.kind) {
    case Tok::End: return "end of input";
    case Tok::Iri: return "<" + t.text + ">";
    case Tok::Var: return "?" + t.text;
    case Tok::String: return "\"" + t.text + "\"";
    default: return "'" + t.text + "'";
  }
}

bool word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-'; }

std::vector<Token> tokenize(std::string_view s) {
  std::vector<Token> out;
  std::size_t i = 0, line = 1, line_start = 0;
  auto fail = [&](const std::string& what) {
    throw QuerySyntaxError(line, i - line_start + 1, {}, what);
  };
  while (i < s.size()) {
    char c = s[i];
    if (c == '\n') {
      ++i;
      ++line;
      line_start = i;
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    if (c == '#') {
      while (i < s.size() && s[i] != '\n') ++i;
      continue;
    }
    Token t{Tok::Sym, {}, line, i - line_start + 1};
    if (c == '<') {
      auto close = s.find('>', i + 1);
      auto space = s.find_first_of(" \t\r\n", i + 1);
      if (close != std::string_view::npos && (space == std::string_view::npos || close < space) && close > i + 1) {
        t.kind = Tok::Iri;
        t.text = std::string(s.substr(i + 1, close - i - 1));
        i = close + 1;
        out.push_back(std::move(t));
        continue;
      }
    }
    if (c == '?' || c == '$') {
      auto start = ++i;
      while (i < s.size() && (std::isalnum(static_cast<unsigned char>(s[i])) || s[i] == '_')) ++i;
      if (i == start) fail("empty variable name");
      t.kind = Tok::Var;
      t.text = std::string(s.substr(start, i - start));
    } else if (c == '"' || c == '\'') {
      char q = c;
      ++i;
      std::string v;
      for (;;) {
        if (i >= s.size() || s[i] == '\n') fail("unterminated string");
        char d = s[i++];
        if (d == q) break;
        if (d == '\\' && i < s.size()) {
          char e = s[i++];
          switch (e) {
            case 'n': d = '\n'; break;
            case 't': d = '\t'; break;
            case 'r': d = '\r'; break;
            default: d = e;
          }
        }
        v += d;
      }
      t.kind = Tok::String;
      t.text = std::move(v);
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      auto start = i;
      while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
      if (i + 1 < s.size() && s[i] == '.' && std::isdigit(static_cast<unsigned char>(s[i + 1]))) {
        ++i;
        while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
      }
      t.kind = Tok::Number;
      t.text = std::string(s.substr(start, i - start));
    } else if (c == '@') {
      auto start = ++i;
      while (i < s.size() && word_char(s[i])) ++i;
      if (i == start) fail("empty language tag");
      t.kind = Tok::LangTag;
      t.text = std::string(s.substr(start, i - start));
    } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == ':') {
      auto start = i;
      while (i < s.size() && word_char(s[i])) ++i;
      if (i < s.size() && s[i] == ':') {
        ++i;
        while (i < s.size() && (word_char(s[i]) || s[i] == '.')) ++i;
        while (s[i - 1] == '.') --i;  // a trailing '.' ends the triple
        t.kind = Tok::PName;
      } else {
        t.kind = Tok::Word;
      }
      t.text = std::string(s.substr(start, i - start));
    } else {
      static const char* two[] = {"&&", "||", "!=", "<=", ">=", "^^"};
      bool matched = false;
      for (const char* op : two) {
        if (s.substr(i, 2) == op) {
          t.text = op;
          i += 2;
          matched = true;
          break;
        }
      }
      if (!matched) {
        if (std::string_view("{}().;,*!=<>").find(c) == std::string_view::npos) {
          fail(std::string("unexpected character '") + c + "'");
        }
        t.text = std::string(1, c);
        ++i;
      }
    }
    out.push_back(std::move(t));
  }
  out.push_back({Tok::End, {}, line, i - line_start + 1});
  return out;
}

std::string upper(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

class Parser {
 public:
  explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

  QueryAst parse() {
    while (is_word("PREFIX")) {
      next();
      const Token& ns = expect_kind(Tok::PName, "prefix name");
      if (ns.text.back() != ':') fail_at(ns, {"prefix name ending in ':'"});
      const Token& iri = expect_kind(Tok::Iri, "IRI");
      ast_.prefixes[ns.text.substr(0, ns.text.size() - 1)] = iri.text;
    }
    expect_word("SELECT");
    if (is_word("DISTINCT")) {
      next();
      ast_.distinct = true;
    }
    select_token_ = &peek();
    if (is_sym("*")) {
      next();
      ast_.select_all = true;
    } else {
      while (peek().kind == Tok::Var || is_sym("(")) ast_.select.push_back(select_item());
      if (ast_.select.empty()) fail({"variable", "'('", "'*'"});
    }
    if (is_word("WHERE")) next();
    expect_sym("{");
    group();
    expect_sym("}");
    if (is_word("GROUP")) {
      next();
      expect_word("BY");
      ast_.group_by.push_back(expect_kind(Tok::Var, "variable").text);
      while (peek().kind == Tok::Var) ast_.group_by.push_back(next().text);
    }
    if (is_word("ORDER")) {
      next();
      expect_word("BY");
      ast_.order_by.push_back(order_key());
      while (peek().kind == Tok::Var || is_word("ASC") || is_word("DESC")) ast_.order_by.push_back(order_key());
    }
    if (is_word("LIMIT")) {
      next();
      ast_.limit = std::stoul(expect_kind(Tok::Number, "integer").text);
    }
    if (peek().kind != Tok::End) fail({"GROUP BY", "ORDER BY", "LIMIT", "end of input"});
    check();
    return std::move(ast_);
  }

 private:
  const Token& peek(std::size_t ahead = 0) const { return toks_[std::min(pos_ + ahead, toks_.size() - 1)]; }
  const Token& next() {
    const Token& t = peek();
    if (pos_ < toks_.size() - 1) ++pos_;
    return t;
  }
  bool is_word(std::string_view w) const { return peek().kind == Tok::Word && upper(peek().text) == w; }
  bool is_sym(std::string_view s) const { return peek().kind == Tok::Sym && peek().text == s; }

  [[noreturn]] void fail_at(const Token& t, std::vector<std::string> expected) const {
    throw QuerySyntaxError(t.line, t.col, std::move(expected), token_desc(t));
  }
  [[noreturn]] void fail(std::vector<std::string> expected) const { fail_at(peek(), std::move(expected)); }
  [[noreturn]] void fail_msg(const Token& t, const std::string& msg) const {
    throw QuerySyntaxError(t.line, t.col, {}, msg);
  }

  void expect_word(std::string_view w) {
    if (!is_word(w)) fail({std::string(w)});
    next();
  }
  void expect_sym(std::string_view s) {
    if (!is_sym(s)) fail({"'" + std::string(s) + "'"});
    next();
  }
  const Token& expect_kind(Tok k, const std::string& what) {
    if (peek().kind != k) fail({what});
    return next();
  }

  SelectItem select_item() {
    if (peek().kind == Tok::Var) return {SelectKind::Var, next().text, std::nullopt};
    expect_sym("(");
    SelectItem item;
    if (is_word("COUNT")) {
      item.kind = SelectKind::Count;
    } else if (is_word("SUM")) {
      item.kind = SelectKind::Sum;
    } else {
      fail({"COUNT", "SUM"});
    }
    next();
    expect_sym("(");
    if (item.kind == SelectKind::Count && is_sym("*")) {
      next();
    } else {
      item.argument = expr();
    }
    expect_sym(")");
    expect_word("AS");
    item.name = expect_kind(Tok::Var, "variable").text;
    expect_sym(")");
    return item;
  }

  OrderKey order_key() {
    if (peek().kind == Tok::Var) return {var_expr(next().text), false};
    if (!is_word("ASC") && !is_word("DESC")) fail({"variable", "ASC", "DESC"});
    bool desc = is_word("DESC");
    next();
    expect_sym("(");
    Expr e = expr();
    expect_sym(")");
    return {std::move(e), desc};
  }

  void group() {
    while (!is_sym("}")) {
      if (peek().kind == Tok::End) fail({"'}'"});
      if (is_word("FILTER")) {
        next();
        expect_sym("(");
        ast_.filters.push_back(expr());
        expect_sym(")");
        if (is_sym(".")) next();
        continue;
      }
      triples_block();
    }
  }

  void triples_block() {
    Operand s = node(false);
    for (;;) {
      Operand p = verb();
      for (;;) {
        ast_.where.push_back({s, p, node(true)});
        if (!is_sym(",")) break;
        next();
      }
      if (!is_sym(";")) break;
      while (is_sym(";")) next();
      if (is_sym(".") || is_sym("}")) break;
    }
    if (is_sym(".")) {
      next();
    } else if (!is_sym("}") && !is_word("FILTER")) {
      fail({"'.'", "';'", "','", "'}'"});
    }
  }

  Operand verb() {
    if (peek().kind == Tok::Word && peek().text == "a") {
      next();
      Operand o;
      o.term = rdf::Term::iri(std::string(rdf::iri::kType));
      return o;
    }
    if (peek().kind == Tok::Var) return var_operand(next().text);
    if (peek().kind == Tok::Iri || peek().kind == Tok::PName) return node(false);
    fail({"variable", "IRI", "prefixed name", "'a'"});
  }

  static Operand var_operand(std::string name) {
    Operand o;
    o.var = std::move(name);
    return o;
  }

  static Expr var_expr(std::string name) {
    Expr e;
    e.value = var_operand(std::move(name));
    return e;
  }

  Operand node(bool allow_literal) {
    const Token& t = peek();
    Operand o;
    switch (t.kind) {
      case Tok::Var: next(); return var_operand(t.text);
      case Tok::Iri: next(); o.term = rdf::Term::iri(t.text); return o;
      case Tok::PName: next(); o.prefixed = t.text; return o;
      default: break;
    }
    if (allow_literal) {
      if (auto lit = literal()) return *lit;
      fail({"variable", "IRI", "prefixed name", "literal"});
    }
    fail({"variable", "IRI", "prefixed name"});
  }

  std::optional<Operand> literal() {
    const Token& t = peek();
    Operand o;
    if (t.kind == Tok::Number) {
      next();
      bool decimal = t.text.find('.') != std::string::npos;
      o.term = rdf::Term::typed(t.text, decimal ? rdf::iri::kXsdDecimal : rdf::iri::kXsdInteger);
      return o;
    }
    if (t.kind == Tok::Word && (t.text == "true" || t.text == "false")) {
      next();
      o.term = rdf::Term::typed(t.text, rdf::iri::kXsdBoolean);
      return o;
    }
    if (t.kind != Tok::String) return std::nullopt;
    next();
    if (peek().kind == Tok::LangTag) {
      o.term = rdf::Term::lang_literal(t.text, next().text);
    } else if (is_sym("^^")) {
      next();
      const Token& dt = peek();
      if (dt.kind == Tok::Iri) {
        next();
        o.term = rdf::Term::typed(t.text, dt.text);
      } else if (dt.kind == Tok::PName) {
        next();
        o.term = rdf::Term::typed(t.text, resolve_at_parse(dt));
      } else {
        fail({"datatype IRI"});
      }
    } else {
      o.term = rdf::Term::literal(t.text);
    }
    return o;
  }

  std::string resolve_at_parse(const Token& t) const {
    auto colon = t.text.find(':');
    std::string pfx = t.text.substr(0, colon);
    auto it = ast_.prefixes.find(pfx);
    if (it != ast_.prefixes.end()) return it->second + t.text.substr(colon + 1);
    auto d = default_prefixes().find(pfx);
    if (d != default_prefixes().end()) return d->second + t.text.substr(colon + 1);
    fail_msg(t, "unknown prefix '" + pfx + ":' in datatype");
  }

  Expr expr() {
    Expr lhs = and_expr();
    while (is_sym("||")) {
      next();
      Expr e;
      e.op = ExprOp::Or;
      e.args = {std::move(lhs), and_expr()};
      lhs = std::move(e);
    }
    return lhs;
  }

  Expr and_expr() {
    Expr lhs = unary();
    while (is_sym("&&")) {
      next();
      Expr e;
      e.op = ExprOp::And;
      e.args = {std::move(lhs), unary()};
      lhs = std::move(e);
    }
    return lhs;
  }

  Expr unary() {
    if (is_sym("!")) {
      next();
      Expr e;
      e.op = ExprOp::Not;
      e.args = {unary()};
      return e;
    }
    return relational();
  }

  Expr relational() {
    Expr lhs = primary();
    static const std::pair<const char*, ExprOp> ops[] = {{"=", ExprOp::Eq},  {"!=", ExprOp::Ne}, {"<", ExprOp::Lt},
                                                          {"<=", ExprOp::Le}, {">", ExprOp::Gt},  {">=", ExprOp::Ge}};
    for (const auto& [sym, op] : ops) {
      if (is_sym(sym)) {
        next();
        Expr e;
        e.op = op;
        e.args = {std::move(lhs), primary()};
        return e;
      }
    }
    return lhs;
  }

  Expr primary() {
    if (is_sym("(")) {
      next();
      Expr e = expr();
      expect_sym(")");
      return e;
    }
    if (is_word("IF")) {
      next();
      expect_sym("(");
      Expr e;
      e.op = ExprOp::If;
      e.args.push_back(expr());
      expect_sym(",");
      e.args.push_back(expr());
      expect_sym(",");
      e.args.push_back(expr());
      expect_sym(")");
      return e;
    }
    Expr e;
    if (peek().kind == Tok::Var || peek().kind == Tok::Iri || peek().kind == Tok::PName) {
      e.value = node(false);
      return e;
    }
    if (auto lit = literal()) {
      e.value = *lit;
      return e;
    }
    fail({"variable", "literal", "IRI", "'('", "IF"});
  }

  void check() {
    auto vars = ast_.pattern_variables();
    std::set<std::string> known(vars.begin(), vars.end());
    const Token& at = *select_token_;
    auto expr_vars = [&](const Expr& e, auto&& self) -> void {
      if (e.op == ExprOp::Value && e.value.is_var() && !known.count(*e.value.var)) {
        fail_msg(at, "variable ?" + *e.value.var + " does not occur in WHERE");
      }
      for (const auto& a : e.args) self(a, self);
    };
    std::set<std::string> aliases;
    for (const auto& item : ast_.select) {
      if (item.kind == SelectKind::Var) {
        if (!known.count(item.name)) fail_msg(at, "projected variable ?" + item.name + " does not occur in WHERE");
      } else {
        if (item.argument) expr_vars(*item.argument, expr_vars);
        if (known.count(item.name)) fail_msg(at, "alias ?" + item.name + " is already a WHERE variable");
        aliases.insert(item.name);
      }
    }
    for (const auto& g : ast_.group_by) {
      if (!known.count(g)) fail_msg(at, "GROUP BY variable ?" + g + " does not occur in WHERE");
    }
    if (ast_.select_all && !ast_.group_by.empty()) fail_msg(at, "SELECT * cannot be grouped");
    if (ast_.has_aggregates() || !ast_.group_by.empty()) {
      for (const auto& item : ast_.select) {
        if (item.kind == SelectKind::Var &&
            std::find(ast_.group_by.begin(), ast_.group_by.end(), item.name) == ast_.group_by.end()) {
          fail_msg(at, "?" + item.name + " must appear in GROUP BY");
        }
      }
    }
    for (const auto& f : ast_.filters) expr_vars(f, expr_vars);
    std::set<std::string> order_known = known;
    order_known.insert(aliases.begin(), aliases.end());
    for (const auto& k : ast_.order_by) {
      auto walk = [&](const Expr& e, auto&& self) -> void {
        if (e.op == ExprOp::Value && e.value.is_var() && !order_known.count(*e.value.var)) {
          fail_msg(at, "ORDER BY variable ?" + *e.value.var + " is unknown");
        }
        for (const auto& a : e.args) self(a, self);
      };
      walk(k.expr, walk);
    }
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  QueryAst ast_;
  const Token* select_token_ = nullptr;
};

}  // namespace

QueryAst parse_query(std::string_view text) {
  auto toks = tokenize(text);
  if (toks.size() == 1) throw QuerySyntaxError(1, 1, {"SELECT"}, "end of input");
  return Parser(std::move(toks)).parse();
}

}  // namespace tbstream::sparql
