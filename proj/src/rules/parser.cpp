#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "tbstream/rdf/vocabulary.hpp"
#include "tbstream/rules/rule.hpp"

namespace tbstream::rules {

Value Value::individual(std::string name) { return {ValueKind::Individual, std::move(name), 0}; }
Value Value::string(std::string s) { return {ValueKind::String, std::move(s), 0}; }
Value Value::num(double d) { return {ValueKind::Number, rdf::format_number(d), d}; }
Value Value::boolean(bool b) { return {ValueKind::Bool, b ? "true" : "false", b ? 1.0 : 0.0}; }

std::string Value::repr() const {
  if (kind != ValueKind::String) return text;
  std::string out = "\"";
  for (char c : text) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

bool is_builtin_name(std::string_view name) {
  return std::find(std::begin(kBuiltins), std::end(kBuiltins), name) != std::end(kBuiltins);
}

std::string Atom::repr() const {
  std::string out = kind == AtomKind::Builtin ? "swrlb:" + name : name;
  out += '(';
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (i) out += ", ";
    out += args[i].is_var() ? "?" + *args[i].var : args[i].constant.repr();
  }
  return out + ")";
}

std::string Rule::repr() const {
  std::string out;
  for (std::size_t i = 0; i < antecedent.size(); ++i) out += (i ? " ^ " : "") + antecedent[i].repr();
  out += " -> ";
  for (std::size_t i = 0; i < consequent.size(); ++i) out += (i ? " ^ " : "") + consequent[i].repr();
  return out;
}

RuleSyntaxError::RuleSyntaxError(std::size_t line, std::size_t column, const std::string& what)
    : std::runtime_error(std::to_string(line) + ":" + std::to_string(column) + ": " + what),
      line_(line),
      column_(column) {}

UnsafeRuleError::UnsafeRuleError(std::string rule_id, std::string variable, const std::string& what)
    : std::runtime_error(what), rule_id_(std::move(rule_id)), variable_(std::move(variable)) {}

namespace {

enum class Tok { Ident, Var, String, Number, LParen, RParen, Comma, And, Or, Arrow, Directive, End };

struct Token {
  Tok kind;
  std::string text;
  std::size_t line, col;
};

std::vector<Token> tokenize(std::string_view s) {
  std::vector<Token> out;
  std::size_t i = 0, line = 1, line_start = 0;
  bool line_has_token = false;
  auto col = [&] { return i - line_start + 1; };
  auto fail = [&](const std::string& what) -> void { throw RuleSyntaxError(line, col(), what); };
  auto starts = [&](std::string_view p) { return s.substr(i, p.size()) == p; };

  while (i < s.size()) {
    char c = s[i];
    if (c == '\n') {
      ++i;
      ++line;
      line_start = i;
      line_has_token = false;
      continue;
    }
    if (c == ' ' || c == '\t' || c == '\r') {
      ++i;
      continue;
    }
    if (c == '#') {
      while (i < s.size() && s[i] != '\n') ++i;
      continue;
    }
    Token t{Tok::End, {}, line, col()};
    if (c == '@' && !line_has_token) {
      auto end = s.find('\n', i);
      if (end == std::string_view::npos) end = s.size();
      std::string text(s.substr(i + 1, end - i - 1));
      if (auto hash = text.find(" #"); hash != std::string::npos) text.resize(hash);
      while (!text.empty() && (text.back() == ' ' || text.back() == '\r' || text.back() == '\t')) text.pop_back();
      t.kind = Tok::Directive;
      t.text = std::move(text);
      i = end;
    } else if (c == '(') {
      t.kind = Tok::LParen, ++i;
    } else if (c == ')') {
      t.kind = Tok::RParen, ++i;
    } else if (c == ',') {
      t.kind = Tok::Comma, ++i;
    } else if (c == '^') {
      t.kind = Tok::And, ++i;
    } else if (c == '|') {
      t.kind = Tok::Or, ++i;
    } else if (starts("\xE2\x88\xA7")) {  // ∧
      t.kind = Tok::And, i += 3;
    } else if (starts("\xE2\x88\xA8")) {  // ∨
      t.kind = Tok::Or, i += 3;
    } else if (starts("\xE2\x86\x92")) {  // →
      t.kind = Tok::Arrow, i += 3;
    } else if (starts("->")) {
      t.kind = Tok::Arrow, i += 2;
    } else if (c == '?') {
      ++i;
      auto start = i;
      while (i < s.size() && (std::isalnum(static_cast<unsigned char>(s[i])) || s[i] == '_')) ++i;
      if (i == start) fail("empty variable name");
      t.kind = Tok::Var;
      t.text = std::string(s.substr(start, i - start));
    } else if (c == '"') {
      ++i;
      std::string v;
      for (;;) {
        if (i >= s.size() || s[i] == '\n') fail("unterminated string");
        char d = s[i++];
        if (d == '"') break;
        if (d == '\\' && i < s.size()) d = s[i++];
        v += d;
      }
      t.kind = Tok::String;
      t.text = std::move(v);
    } else if (std::isdigit(static_cast<unsigned char>(c)) ||
               ((c == '-' || c == '+') && i + 1 < s.size() && std::isdigit(static_cast<unsigned char>(s[i + 1])))) {
      auto start = i++;
      while (i < s.size() && (std::isdigit(static_cast<unsigned char>(s[i])) || s[i] == '.')) ++i;
      t.kind = Tok::Number;
      t.text = std::string(s.substr(start, i - start));
    } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      auto start = i;
      while (i < s.size() && (std::isalnum(static_cast<unsigned char>(s[i])) || s[i] == '_' || s[i] == ':')) ++i;
      t.kind = Tok::Ident;
      t.text = std::string(s.substr(start, i - start));
    } else {
      fail(std::string("unexpected character '") + c + "'");
    }
    line_has_token = true;
    out.push_back(std::move(t));
  }
  out.push_back({Tok::End, {}, line, col()});
  return out;
}

using Conj = std::vector<Atom>;
using Dnf = std::vector<Conj>;

class Parser {
 public:
  Parser(std::vector<Token> toks, std::string_view prefix) : toks_(std::move(toks)), prefix_(prefix) {}

  std::vector<Rule> parse_all() {
    std::vector<Rule> out;
    std::optional<std::string> id, source;
    std::size_t ordinal = 0;
    while (peek().kind != Tok::End) {
      if (peek().kind == Tok::Directive) {
        directive(next(), id, source);
        continue;
      }
      const Token& start = peek();
      ++ordinal;
      Dnf body;
      if (peek().kind == Tok::Arrow) {
        body.push_back({});
      } else {
        body = disjunction();
      }
      expect(Tok::Arrow, "expected '->'");
      Conj head;
      head.push_back(atom(true));
      while (peek().kind == Tok::And) {
        next();
        head.push_back(atom(true));
      }
      if (peek().kind == Tok::Or) fail(peek(), "disjunction is not allowed in a consequent");
      std::string base = id ? *id : std::string(prefix_) + std::to_string(ordinal);
      for (std::size_t d = 0; d < body.size(); ++d) {
        Rule r;
        r.id = body.size() == 1 ? base : base + static_cast<char>('a' + d);
        r.antecedent = body[d];
        r.consequent = head;
        r.provenance = source.value_or("");
        r.source_line = start.line;
        out.push_back(std::move(r));
      }
      id.reset();
      source.reset();
    }
    return out;
  }

 private:
  [[noreturn]] void fail(const Token& t, const std::string& what) const {
    throw RuleSyntaxError(t.line, t.col, what);
  }
  const Token& peek() const { return toks_[pos_]; }
  const Token& next() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }
  const Token& expect(Tok k, const std::string& what) {
    if (peek().kind != k) fail(peek(), what);
    return next();
  }

  void directive(const Token& t, std::optional<std::string>& id, std::optional<std::string>& source) {
    auto sp = t.text.find(' ');
    std::string key = t.text.substr(0, sp);
    std::string val = sp == std::string::npos ? "" : t.text.substr(sp + 1);
    val.erase(0, val.find_first_not_of(" \t"));
    if (key == "id") {
      if (val.empty() || val.find_first_of(" \t") != std::string::npos) fail(t, "bad @id value");
      id = val;
    } else if (key == "source") {
      source = val;
    } else {
      fail(t, "unknown directive @" + key);
    }
  }

  Dnf disjunction() {
    Dnf out = conjunction();
    while (peek().kind == Tok::Or) {
      next();
      Dnf more = conjunction();
      out.insert(out.end(), more.begin(), more.end());
    }
    return out;
  }

  Dnf conjunction() {
    Dnf acc = factor();
    while (peek().kind == Tok::And) {
      next();
      Dnf rhs = factor();
      Dnf product;
      for (const auto& a : acc) {
        for (const auto& b : rhs) {
          Conj c = a;
          c.insert(c.end(), b.begin(), b.end());
          product.push_back(std::move(c));
        }
      }
      acc = std::move(product);
    }
    return acc;
  }

  Dnf factor() {
    if (peek().kind == Tok::LParen) {
      next();
      Dnf inner = disjunction();
      expect(Tok::RParen, "expected ')'");
      return inner;
    }
    return {{atom(false)}};
  }

  Arg argument() {
    const Token& t = next();
    switch (t.kind) {
      case Tok::Var: return Arg::variable(t.text);
      case Tok::String: return Arg::value(Value::string(t.text));
      case Tok::Number: {
        try {
          std::size_t used = 0;
          double d = std::stod(t.text, &used);
          if (used != t.text.size()) fail(t, "malformed number " + t.text);
          return Arg::value(Value::num(d));
        } catch (const std::logic_error&) {
          fail(t, "malformed number " + t.text);
        }
      }
      case Tok::Ident:
        if (t.text == "true" || t.text == "false") return Arg::value(Value::boolean(t.text == "true"));
        if (t.text.find(':') != std::string::npos) fail(t, "prefixed names are not allowed as arguments");
        return Arg::value(Value::individual(t.text));
      default: fail(t, "expected an argument");
    }
  }

  Atom atom(bool in_head) {
    const Token& name = expect(Tok::Ident, "expected an atom");
    Atom a;
    a.name = name.text;
    if (auto colon = name.text.find(':'); colon != std::string::npos) {
      std::string pfx = name.text.substr(0, colon);
      std::string local = name.text.substr(colon + 1);
      if (pfx != "swrlb") fail(name, "unknown prefix " + pfx);
      if (!is_builtin_name(local)) fail(name, "unknown builtin swrlb:" + local);
      if (in_head) fail(name, "builtin in consequent");
      a.kind = AtomKind::Builtin;
      a.name = local;
    }
    expect(Tok::LParen, "expected '('");
    a.args.push_back(argument());
    while (peek().kind == Tok::Comma) {
      next();
      a.args.push_back(argument());
    }
    expect(Tok::RParen, "expected ')'");
    if (a.kind == AtomKind::Builtin) {
      if (a.args.size() != 2) fail(name, "builtin takes two arguments");
    } else if (a.args.size() == 1) {
      a.kind = AtomKind::Class;
    } else if (a.args.size() == 2) {
      bool object = !a.args[1].is_var() && a.args[1].constant.kind == ValueKind::Individual;
      a.kind = object ? AtomKind::ObjectProperty : AtomKind::DataProperty;
    } else {
      fail(name, "atoms take one or two arguments");
    }
    return a;
  }

  std::vector<Token> toks_;
  std::string_view prefix_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<Rule> parse_rules(std::string_view text, std::string_view id_prefix) {
  return Parser(tokenize(text), id_prefix).parse_all();
}

void validate_rule(const Rule& rule) {
  if (rule.consequent.empty()) throw UnsafeRuleError(rule.id, "", "rule " + rule.id + ": empty consequent");
  std::set<std::string> bound;
  for (const auto& a : rule.antecedent) {
    if (a.kind == AtomKind::Builtin) continue;
    for (const auto& arg : a.args) {
      if (arg.is_var()) bound.insert(*arg.var);
    }
  }
  auto check = [&](const Atom& a, const char* where) {
    for (const auto& arg : a.args) {
      if (arg.is_var() && !bound.count(*arg.var)) {
        throw UnsafeRuleError(rule.id, *arg.var,
                              "rule " + rule.id + ": unsafe variable ?" + *arg.var + " in " + where);
      }
    }
  };
  for (const auto& a : rule.antecedent) {
    if (a.kind == AtomKind::Builtin) check(a, "builtin");
  }
  for (const auto& a : rule.consequent) {
    if (a.kind == AtomKind::Builtin) {
      throw UnsafeRuleError(rule.id, "", "rule " + rule.id + ": builtin in consequent");
    }
    check(a, "consequent");
  }
  if (rule.antecedent.empty()) throw UnsafeRuleError(rule.id, "", "rule " + rule.id + ": empty antecedent");
}

std::vector<Rule> load_rule_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open rule file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  std::string stem = std::filesystem::path(path).stem().string();
  std::vector<Rule> rules;
  try {
    rules = parse_rules(buf.str(), stem + "-");
  } catch (const RuleSyntaxError& e) {
    throw RuleSyntaxError(e.line(), e.column(), path + ":" + e.what());
  }
  for (const auto& r : rules) validate_rule(r);
  return rules;
}

std::vector<std::string> rule_file_names() {
  return {"stage.swrlx", "suspected.swrlx", "pulmonary.swrlx", "severe.swrlx"};
}

std::vector<Rule> load_rule_set(const std::string& dir) {
  std::vector<Rule> all;
  std::set<std::string> ids;
  for (const auto& name : rule_file_names()) {
    for (auto& r : load_rule_file((std::filesystem::path(dir) / name).string())) {
      if (!ids.insert(r.id).second) throw std::runtime_error("duplicate rule id " + r.id);
      all.push_back(std::move(r));
    }
  }
  return all;
}

bool builtin_eval(std::string_view name, const std::vector<Value>& args) {
  if (!is_builtin_name(name)) throw std::invalid_argument("unknown builtin " + std::string(name));
  if (args.size() != 2) throw std::invalid_argument("builtin " + std::string(name) + " takes two arguments");
  const Value& a = args[0];
  const Value& b = args[1];
  bool numeric = a.is_numeric() && b.is_numeric();
  if (name == "equal") return numeric ? a.number == b.number : a.text == b.text;
  if (!numeric) return false;
  if (name == "greaterThan") return a.number > b.number;
  if (name == "greaterThanOrEqualTo") return a.number >= b.number;
  if (name == "lessThan") return a.number < b.number;
  return a.number <= b.number;  // lessThanOrEqualTo
}

}  // namespace tbstream::rules
