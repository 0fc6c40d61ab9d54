#include <algorithm>
#include <charconv>
#include <functional>
#include <set>

#include "tbstream/rdf/vocabulary.hpp"
#include "tbstream/sparql/query.hpp"

namespace tbstream::sparql {

std::optional<double> numeric_value(const rdf::Term& t) { return t.numeric(); }

namespace {

bool is_plain_string(const rdf::Term& t) {
  return t.is_literal() && t.lang.empty() && (t.datatype.empty() || t.datatype == rdf::iri::kXsdString);
}

std::optional<double> parse_number(const std::string& s) {
  double v = 0;
  const char* b = s.data();
  const char* e = b + s.size();
  if (b != e && *b == '+') ++b;
  auto [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc{} || ptr != e || b == e) return std::nullopt;
  return v;
}

int sign(double d) { return d < 0 ? -1 : (d > 0 ? 1 : 0); }

bool apply_op(ExprOp op, int cmp) {
  switch (op) {
    case ExprOp::Eq: return cmp == 0;
    case ExprOp::Ne: return cmp != 0;
    case ExprOp::Lt: return cmp < 0;
    case ExprOp::Le: return cmp <= 0;
    case ExprOp::Gt: return cmp > 0;
    case ExprOp::Ge: return cmp >= 0;
    default: return false;
  }
}

bool compare_values(ExprOp op, const rdf::Term& a, const rdf::Term& b) {
  auto na = numeric_value(a), nb = numeric_value(b);
  if (!na && nb && is_plain_string(a)) na = parse_number(a.value);
  if (na && !nb && is_plain_string(b)) nb = parse_number(b.value);
  if (na && nb) return apply_op(op, sign(*na - *nb));
  if (na || nb) return false;
  bool ordering = op != ExprOp::Eq && op != ExprOp::Ne;
  if (is_plain_string(a) && is_plain_string(b)) return apply_op(op, a.value.compare(b.value));
  if (a.kind != b.kind) return false;
  if (!a.is_literal()) return !ordering && apply_op(op, a.value == b.value ? 0 : 1);
  if (a.datatype != b.datatype || a.lang != b.lang) return false;
  if (a.datatype == rdf::iri::kXsdBoolean && ordering) return false;
  return apply_op(op, a.value.compare(b.value));
}

rdf::Term bool_term(bool b) { return rdf::Term::typed(b ? "true" : "false", rdf::iri::kXsdBoolean); }

std::optional<bool> effective_bool(const std::optional<rdf::Term>& t) {
  if (!t) return std::nullopt;
  if (t->is_literal() && t->datatype == rdf::iri::kXsdBoolean) return t->value == "true" || t->value == "1";
  if (auto n = numeric_value(*t)) return *n != 0;
  if (is_plain_string(*t)) return !t->value.empty();
  return std::nullopt;
}

using Lookup = std::function<const rdf::Term*(const std::string&)>;

// Expression operands must already be resolved (no prefixed names).
std::optional<rdf::Term> eval_expr(const Expr& e, const Lookup& lookup) {
  switch (e.op) {
    case ExprOp::Value: {
      if (!e.value.is_var()) return e.value.term;
      const rdf::Term* t = lookup(*e.value.var);
      if (!t) return std::nullopt;
      return *t;
    }
    case ExprOp::Or: {
      auto a = effective_bool(eval_expr(e.args[0], lookup));
      if (a.value_or(false)) return bool_term(true);
      return bool_term(effective_bool(eval_expr(e.args[1], lookup)).value_or(false));
    }
    case ExprOp::And: {
      auto a = effective_bool(eval_expr(e.args[0], lookup));
      if (!a.value_or(false)) return bool_term(false);
      return bool_term(effective_bool(eval_expr(e.args[1], lookup)).value_or(false));
    }
    case ExprOp::Not: {
      auto a = effective_bool(eval_expr(e.args[0], lookup));
      if (!a) return std::nullopt;
      return bool_term(!*a);
    }
    case ExprOp::If: {
      auto c = effective_bool(eval_expr(e.args[0], lookup));
      if (!c) return std::nullopt;
      return eval_expr(e.args[*c ? 1 : 2], lookup);
    }
    default: {
      auto a = eval_expr(e.args[0], lookup);
      auto b = eval_expr(e.args[1], lookup);
      if (!a || !b) return bool_term(false);
      return bool_term(compare_values(e.op, *a, *b));
    }
  }
}

rdf::Term resolve_operand(const Operand& o, const std::map<std::string, std::string>& prefixes) {
  if (o.prefixed.empty()) return o.term;
  auto colon = o.prefixed.find(':');
  std::string pfx = o.prefixed.substr(0, colon);
  auto it = prefixes.find(pfx);
  if (it == prefixes.end()) {
    it = default_prefixes().find(pfx);
    if (it == default_prefixes().end()) throw QueryEvalError("unknown prefix '" + pfx + ":'");
  }
  return rdf::Term::iri(it->second + o.prefixed.substr(colon + 1));
}

void resolve_expr(Expr& e, const std::map<std::string, std::string>& prefixes) {
  if (e.op == ExprOp::Value && !e.value.is_var()) {
    e.value.term = resolve_operand(e.value, prefixes);
    e.value.prefixed.clear();
  }
  for (auto& a : e.args) resolve_expr(a, prefixes);
}

QueryAst resolved(const QueryAst& ast) {
  QueryAst r = ast;
  for (auto& t : r.where) {
    for (Operand* o : {&t.s, &t.p, &t.o}) {
      if (!o->is_var()) {
        o->term = resolve_operand(*o, ast.prefixes);
        o->prefixed.clear();
      }
    }
  }
  for (auto& f : r.filters) resolve_expr(f, ast.prefixes);
  for (auto& s : r.select) {
    if (s.argument) resolve_expr(*s.argument, ast.prefixes);
  }
  for (auto& k : r.order_by) resolve_expr(k.expr, ast.prefixes);
  return r;
}

constexpr rdf::TermId kUnbound = UINT32_MAX;
constexpr rdf::TermId kMissing = UINT32_MAX - 1;

struct Slot {
  int var = -1;
  rdf::TermId id = kUnbound;
};

std::vector<std::vector<rdf::TermId>> join(const QueryAst& q, const rdf::Graph& g,
                                           const std::vector<std::string>& vars) {
  auto var_index = [&](const std::string& v) {
    return static_cast<int>(std::find(vars.begin(), vars.end(), v) - vars.begin());
  };
  std::vector<std::array<Slot, 3>> pats;
  for (const auto& t : q.where) {
    std::array<Slot, 3> p;
    const Operand* ops[3] = {&t.s, &t.p, &t.o};
    for (int i = 0; i < 3; ++i) {
      if (ops[i]->is_var()) {
        p[i].var = var_index(*ops[i]->var);
      } else {
        p[i].id = g.lookup(ops[i]->term).value_or(kMissing);
        if (p[i].id == kMissing) return {};
      }
    }
    pats.push_back(p);
  }

  std::vector<std::size_t> constant_count(pats.size());
  for (std::size_t i = 0; i < pats.size(); ++i) {
    auto opt = [&](const Slot& s) { return s.var < 0 ? std::optional<rdf::TermId>(s.id) : std::nullopt; };
    constant_count[i] = g.count_ids(opt(pats[i][0]), opt(pats[i][1]), opt(pats[i][2]));
  }

  std::vector<std::vector<rdf::TermId>> rows(1, std::vector<rdf::TermId>(vars.size(), kUnbound));
  std::vector<bool> bound(vars.size(), false), done(pats.size(), false);
  for (std::size_t step = 0; step < pats.size(); ++step) {
    std::size_t best = pats.size();
    int best_bound = -1;
    for (std::size_t i = 0; i < pats.size(); ++i) {
      if (done[i]) continue;
      int nb = 0;
      for (const auto& s : pats[i]) nb += (s.var < 0 || bound[s.var]) ? 1 : 0;
      if (nb > best_bound || (nb == best_bound && constant_count[i] < constant_count[best])) {
        best = i;
        best_bound = nb;
      }
    }
    done[best] = true;
    const auto& pat = pats[best];
    std::vector<std::vector<rdf::TermId>> next;
    for (const auto& row : rows) {
      std::optional<rdf::TermId> key[3];
      for (int i = 0; i < 3; ++i) {
        if (pat[i].var < 0) key[i] = pat[i].id;
        else if (row[pat[i].var] != kUnbound) key[i] = row[pat[i].var];
      }
      for (const auto& t : g.match_ids(key[0], key[1], key[2])) {
        auto nrow = row;
        bool ok = true;
        for (int i = 0; i < 3 && ok; ++i) {
          if (pat[i].var < 0) continue;
          auto& cell = nrow[pat[i].var];
          if (cell == kUnbound) cell = t[i];
          else ok = cell == t[i];
        }
        if (ok) next.push_back(std::move(nrow));
      }
    }
    rows = std::move(next);
    for (const auto& s : pat) {
      if (s.var >= 0) bound[s.var] = true;
    }
    if (rows.empty()) break;
  }
  return rows;
}

int compare_rows(const std::vector<rdf::Term>& a, const std::vector<rdf::Term>& b) {
  for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) {
    if (int c = compare_terms(a[i], b[i])) return c;
  }
  return a.size() < b.size() ? -1 : (a.size() > b.size() ? 1 : 0);
}

int compare_opt(const std::optional<rdf::Term>& a, const std::optional<rdf::Term>& b) {
  if (!a || !b) return a ? 1 : (b ? -1 : 0);
  return compare_terms(*a, *b);
}

rdf::Term number_term(double v, bool integral) {
  return rdf::Term::typed(rdf::format_number(v), integral ? rdf::iri::kXsdInteger : rdf::iri::kXsdDecimal);
}

struct OutRow {
  std::vector<rdf::Term> cells;
  std::vector<std::optional<rdf::Term>> keys;
};

}  // namespace

int compare_terms(const rdf::Term& a, const rdf::Term& b) {
  auto rank = [](const rdf::Term& t) { return t.is_blank() ? 0 : (t.is_iri() ? 1 : 2); };
  if (rank(a) != rank(b)) return rank(a) < rank(b) ? -1 : 1;
  if (a.is_literal()) {
    auto na = numeric_value(a), nb = numeric_value(b);
    if (na && nb && *na != *nb) return *na < *nb ? -1 : 1;
    if (na.has_value() != nb.has_value()) return na ? -1 : 1;
  }
  if (int c = a.value.compare(b.value)) return c < 0 ? -1 : 1;
  if (int c = a.datatype.compare(b.datatype)) return c < 0 ? -1 : 1;
  if (int c = a.lang.compare(b.lang)) return c < 0 ? -1 : 1;
  return 0;
}

bool eval_filter(const Expr& expr, const Binding& binding, const std::map<std::string, std::string>& prefixes) {
  Expr e = expr;
  resolve_expr(e, prefixes);
  Lookup lookup = [&](const std::string& v) -> const rdf::Term* {
    auto it = binding.find(v);
    return it == binding.end() ? nullptr : &it->second;
  };
  return effective_bool(eval_expr(e, lookup)).value_or(false);
}

ResultTable evaluate(const QueryAst& ast, const rdf::Graph& g) {
  QueryAst q = resolved(ast);
  const auto vars = q.pattern_variables();
  auto rows = join(q, g, vars);
  const auto terms = g.term_table();

  auto row_lookup = [&](const std::vector<rdf::TermId>& row) {
    return Lookup([&vars, &terms, &row](const std::string& v) -> const rdf::Term* {
      auto it = std::find(vars.begin(), vars.end(), v);
      if (it == vars.end()) return nullptr;
      rdf::TermId id = row[it - vars.begin()];
      return id == kUnbound ? nullptr : &terms[id];
    });
  };

  if (!q.filters.empty()) {
    std::vector<std::vector<rdf::TermId>> kept;
    for (auto& row : rows) {
      auto lookup = row_lookup(row);
      bool ok = std::all_of(q.filters.begin(), q.filters.end(), [&](const Expr& f) {
        return effective_bool(eval_expr(f, lookup)).value_or(false);
      });
      if (ok) kept.push_back(std::move(row));
    }
    rows = std::move(kept);
  }

  ResultTable table;
  std::vector<OutRow> out;
  const bool grouped = q.has_aggregates() || !q.group_by.empty();
  if (!grouped) {
    std::vector<std::size_t> proj;
    if (q.select_all) {
      table.header = vars;
      for (std::size_t i = 0; i < vars.size(); ++i) proj.push_back(i);
    } else {
      for (const auto& s : q.select) {
        table.header.push_back(s.name);
        proj.push_back(std::find(vars.begin(), vars.end(), s.name) - vars.begin());
      }
    }
    for (const auto& row : rows) {
      OutRow o;
      for (auto i : proj) o.cells.push_back(terms[row[i]]);
      auto lookup = row_lookup(row);
      for (const auto& k : q.order_by) o.keys.push_back(eval_expr(k.expr, lookup));
      out.push_back(std::move(o));
    }
  } else {
    for (const auto& s : q.select) table.header.push_back(s.name);
    std::vector<std::size_t> key_idx;
    for (const auto& gv : q.group_by) key_idx.push_back(std::find(vars.begin(), vars.end(), gv) - vars.begin());
    struct Acc {
      std::vector<std::size_t> counts;
      std::vector<double> sums;
      std::vector<bool> integral;
      const std::vector<rdf::TermId>* sample = nullptr;
    };
    std::map<std::vector<rdf::TermId>, Acc> groups;
    auto fresh = [&] {
      Acc a;
      a.counts.assign(q.select.size(), 0);
      a.sums.assign(q.select.size(), 0.0);
      a.integral.assign(q.select.size(), true);
      return a;
    };
    if (q.group_by.empty()) groups.emplace(std::vector<rdf::TermId>{}, fresh());
    for (const auto& row : rows) {
      std::vector<rdf::TermId> key;
      for (auto i : key_idx) key.push_back(row[i]);
      auto it = groups.find(key);
      if (it == groups.end()) it = groups.emplace(key, fresh()).first;
      Acc& acc = it->second;
      if (!acc.sample) acc.sample = &row;
      auto lookup = row_lookup(row);
      for (std::size_t s = 0; s < q.select.size(); ++s) {
        const auto& item = q.select[s];
        if (item.kind == SelectKind::Count) {
          if (!item.argument || eval_expr(*item.argument, lookup)) ++acc.counts[s];
        } else if (item.kind == SelectKind::Sum) {
          auto v = eval_expr(*item.argument, lookup);
          auto n = v ? numeric_value(*v) : std::nullopt;
          if (n) {
            acc.sums[s] += *n;
            if (v->datatype != rdf::iri::kXsdInteger) acc.integral[s] = false;
          }
        }
      }
    }
    for (const auto& [key, acc] : groups) {
      OutRow o;
      std::map<std::string, rdf::Term> ext;
      for (std::size_t i = 0; i < q.group_by.size(); ++i) ext[q.group_by[i]] = terms[key[i]];
      for (std::size_t s = 0; s < q.select.size(); ++s) {
        const auto& item = q.select[s];
        rdf::Term cell;
        if (item.kind == SelectKind::Var) cell = ext.at(item.name);
        else if (item.kind == SelectKind::Count) cell = number_term(static_cast<double>(acc.counts[s]), true);
        else cell = number_term(acc.sums[s], acc.integral[s]);
        ext[item.name] = cell;
        o.cells.push_back(std::move(cell));
      }
      Lookup lookup = [&ext](const std::string& v) -> const rdf::Term* {
        auto it = ext.find(v);
        return it == ext.end() ? nullptr : &it->second;
      };
      for (const auto& k : q.order_by) o.keys.push_back(eval_expr(k.expr, lookup));
      out.push_back(std::move(o));
    }
  }

  std::stable_sort(out.begin(), out.end(), [&](const OutRow& a, const OutRow& b) {
    for (std::size_t k = 0; k < q.order_by.size(); ++k) {
      int c = compare_opt(a.keys[k], b.keys[k]);
      if (q.order_by[k].descending) c = -c;
      if (c) return c < 0;
    }
    return compare_rows(a.cells, b.cells) < 0;
  });
  std::set<std::vector<rdf::Term>> seen;
  for (auto& o : out) {
    if (q.distinct && !seen.insert(o.cells).second) continue;
    if (q.limit && table.rows.size() >= *q.limit) break;
    table.rows.push_back(std::move(o.cells));
  }
  return table;
}

ResultTable run_query(std::string_view text, const rdf::Graph& g) { return evaluate(parse_query(text), g); }

}  // namespace tbstream::sparql
