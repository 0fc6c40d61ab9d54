#include "oracle/nested_loop_sparql.hpp"

#include <algorithm>
#include <cstdlib>
#include <map>
#include <optional>
#include <set>

namespace oracle {

using tbstream::rdf::Term;
using tbstream::rdf::Triple;
using namespace tbstream::sparql;
using Row = std::map<std::string, Term>;

namespace {

const std::string kXsd = "http://www.w3.org/2001/XMLSchema#";

bool is_number_type(const Term& t) {
  return t.is_literal() && (t.datatype == kXsd + "integer" || t.datatype == kXsd + "decimal" ||
                            t.datatype == kXsd + "double" || t.datatype == kXsd + "float" ||
                            t.datatype == kXsd + "int" || t.datatype == kXsd + "long");
}

bool is_string(const Term& t) {
  return t.is_literal() && t.lang.empty() && (t.datatype.empty() || t.datatype == kXsd + "string");
}

std::optional<double> to_double(const std::string& s) {
  if (s.empty() || std::isspace(static_cast<unsigned char>(s[0]))) return std::nullopt;
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) return std::nullopt;
  return v;
}

Term resolve(const Operand& o, const std::map<std::string, std::string>& prefixes) {
  if (o.prefixed.empty()) return o.term;
  auto c = o.prefixed.find(':');
  auto p = o.prefixed.substr(0, c);
  auto it = prefixes.find(p);
  if (it == prefixes.end()) it = default_prefixes().find(p);
  if (it == default_prefixes().end()) throw QueryEvalError("prefix");
  return Term::iri(it->second + o.prefixed.substr(c + 1));
}

struct Ctx {
  const QueryAst& q;
};

// nullopt = evaluation error
std::optional<Term> value(const Expr& e, const Row& row, const Ctx& ctx);

std::optional<bool> truth(const std::optional<Term>& t) {
  if (!t) return std::nullopt;
  if (t->is_literal() && t->datatype == kXsd + "boolean") return t->value == "true" || t->value == "1";
  if (is_number_type(*t)) {
    auto d = to_double(t->value);
    if (!d) return std::nullopt;
    return *d != 0.0;
  }
  if (is_string(*t)) return !t->value.empty();
  return std::nullopt;
}

Term make_bool(bool b) { return Term::typed(b ? "true" : "false", kXsd + "boolean"); }

bool compare(ExprOp op, const Term& a, const Term& b) {
  auto holds = [op](int c) {
    switch (op) {
      case ExprOp::Eq: return c == 0;
      case ExprOp::Ne: return c != 0;
      case ExprOp::Lt: return c < 0;
      case ExprOp::Le: return c <= 0;
      case ExprOp::Gt: return c > 0;
      default: return c >= 0;
    }
  };
  bool ordering = op != ExprOp::Eq && op != ExprOp::Ne;
  std::optional<double> x, y;
  if (is_number_type(a)) x = to_double(a.value);
  if (is_number_type(b)) y = to_double(b.value);
  if (is_number_type(a) && is_string(b)) y = to_double(b.value);
  if (is_number_type(b) && is_string(a)) x = to_double(a.value);
  if (is_number_type(a) || is_number_type(b)) {
    if (!x || !y) return false;
    return holds(*x < *y ? -1 : (*x > *y ? 1 : 0));
  }
  if (is_string(a) && is_string(b)) return holds(a.value < b.value ? -1 : (a.value > b.value ? 1 : 0));
  if (a.kind != b.kind) return false;
  if (!a.is_literal()) return ordering ? false : holds(a.value == b.value ? 0 : 1);
  if (a.datatype != b.datatype || a.lang != b.lang) return false;
  if (ordering && a.datatype == kXsd + "boolean") return false;
  return holds(a.value < b.value ? -1 : (a.value > b.value ? 1 : 0));
}

std::optional<Term> value(const Expr& e, const Row& row, const Ctx& ctx) {
  switch (e.op) {
    case ExprOp::Value:
      if (e.value.is_var()) {
        auto it = row.find(*e.value.var);
        if (it == row.end()) return std::nullopt;
        return it->second;
      }
      return resolve(e.value, ctx.q.prefixes);
    case ExprOp::Not: {
      auto t = truth(value(e.args[0], row, ctx));
      if (!t) return std::nullopt;
      return make_bool(!*t);
    }
    case ExprOp::And:
      return make_bool(truth(value(e.args[0], row, ctx)).value_or(false) &&
                       truth(value(e.args[1], row, ctx)).value_or(false));
    case ExprOp::Or:
      return make_bool(truth(value(e.args[0], row, ctx)).value_or(false) ||
                       truth(value(e.args[1], row, ctx)).value_or(false));
    case ExprOp::If: {
      auto c = truth(value(e.args[0], row, ctx));
      if (!c) return std::nullopt;
      return value(e.args[*c ? 1 : 2], row, ctx);
    }
    default: {
      auto a = value(e.args[0], row, ctx);
      auto b = value(e.args[1], row, ctx);
      if (!a || !b) return make_bool(false);
      return make_bool(compare(e.op, *a, *b));
    }
  }
}

bool unify(const Operand& pat, const Term& t, Row& row, const Ctx& ctx) {
  if (!pat.is_var()) return resolve(pat, ctx.q.prefixes) == t;
  auto [it, fresh] = row.emplace(*pat.var, t);
  return fresh || it->second == t;
}

std::string number_text(double v) {
  if (v == static_cast<double>(static_cast<long long>(v))) return std::to_string(static_cast<long long>(v));
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

int order_cmp(const std::optional<Term>& a, const std::optional<Term>& b) {
  if (!a || !b) return a ? 1 : (b ? -1 : 0);
  return compare_terms(*a, *b);
}

}  // namespace

std::vector<std::vector<Term>> nested_loop_select(const QueryAst& q, const std::vector<Triple>& triples) {
  Ctx ctx{q};
  std::vector<Row> rows{Row{}};
  for (const auto& pat : q.where) {
    std::vector<Row> next;
    for (const auto& row : rows) {
      for (const auto& t : triples) {
        Row r = row;
        if (unify(pat.s, t.subject, r, ctx) && unify(pat.p, t.predicate, r, ctx) && unify(pat.o, t.object, r, ctx)) {
          next.push_back(std::move(r));
        }
      }
    }
    rows = std::move(next);
  }
  std::vector<Row> kept;
  for (const auto& r : rows) {
    bool ok = true;
    for (const auto& f : q.filters) ok = ok && truth(value(f, r, ctx)).value_or(false);
    if (ok) kept.push_back(r);
  }

  std::vector<Row> out;
  std::vector<std::string> header;
  if (q.select_all) {
    header = q.pattern_variables();
  } else {
    for (const auto& s : q.select) header.push_back(s.name);
  }
  if (q.has_aggregates() || !q.group_by.empty()) {
    std::map<std::vector<Term>, std::vector<Row>> groups;
    if (q.group_by.empty()) groups[{}];
    for (const auto& r : kept) {
      std::vector<Term> key;
      for (const auto& g : q.group_by) key.push_back(r.at(g));
      groups[key].push_back(r);
    }
    for (const auto& [key, members] : groups) {
      Row o;
      for (std::size_t i = 0; i < key.size(); ++i) o[q.group_by[i]] = key[i];
      for (const auto& s : q.select) {
        if (s.kind == SelectKind::Count) {
          long long n = 0;
          for (const auto& m : members) n += (!s.argument || value(*s.argument, m, ctx)) ? 1 : 0;
          o[s.name] = Term::typed(std::to_string(n), kXsd + "integer");
        } else if (s.kind == SelectKind::Sum) {
          double total = 0;
          bool ints = true;
          for (const auto& m : members) {
            auto v = value(*s.argument, m, ctx);
            if (!v || !is_number_type(*v)) continue;
            if (auto d = to_double(v->value)) {
              total += *d;
              ints = ints && v->datatype == kXsd + "integer";
            }
          }
          o[s.name] = Term::typed(number_text(total), kXsd + (ints ? "integer" : "decimal"));
        }
      }
      out.push_back(std::move(o));
    }
  } else {
    out = kept;
  }

  struct Keyed {
    std::vector<std::optional<Term>> keys;
    std::vector<Term> cells;
  };
  std::vector<Keyed> result;
  for (const auto& r : out) {
    Keyed k;
    for (const auto& ok : q.order_by) k.keys.push_back(value(ok.expr, r, ctx));
    for (const auto& h : header) k.cells.push_back(r.at(h));
    result.push_back(std::move(k));
  }
  if (!q.order_by.empty()) {
    std::stable_sort(result.begin(), result.end(), [&](const Keyed& a, const Keyed& b) {
      for (std::size_t i = 0; i < q.order_by.size(); ++i) {
        int c = order_cmp(a.keys[i], b.keys[i]);
        if (q.order_by[i].descending) c = -c;
        if (c) return c < 0;
      }
      return false;
    });
  }
  std::vector<std::vector<Term>> rowsout;
  std::set<std::vector<Term>> seen;
  for (auto& k : result) {
    if (q.distinct && !seen.insert(k.cells).second) continue;
    rowsout.push_back(std::move(k.cells));
  }
  return rowsout;
}

}  // namespace oracle
