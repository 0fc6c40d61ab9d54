#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "tbstream/rdf/graph.hpp"

namespace tbstream::sparql {

/// A pattern or expression operand: a variable, or a constant term. Prefixed
/// names stay unresolved until evaluation so unknown prefixes surface there.
struct Operand {
  std::optional<std::string> var;
  rdf::Term term;
  std::string prefixed;  // "ex:Foo" when written as a prefixed name

  bool is_var() const { return var.has_value(); }
};

struct TriplePattern {
  Operand s, p, o;
};

enum class ExprOp { Or, And, Not, Eq, Ne, Lt, Le, Gt, Ge, Value, If };

struct Expr {
  ExprOp op = ExprOp::Value;
  std::vector<Expr> args;
  Operand value;  // for ExprOp::Value
};

enum class SelectKind { Var, Count, Sum };

struct SelectItem {
  SelectKind kind = SelectKind::Var;
  std::string name;             // projected variable (alias for aggregates)
  std::optional<Expr> argument; // aggregates; empty for COUNT(*)
};

struct OrderKey {
  Expr expr;
  bool descending = false;
};

struct QueryAst {
  std::map<std::string, std::string> prefixes;
  bool distinct = false;
  bool select_all = false;
  std::vector<SelectItem> select;
  std::vector<TriplePattern> where;
  std::vector<Expr> filters;
  std::vector<std::string> group_by;
  std::vector<OrderKey> order_by;
  std::optional<std::size_t> limit;

  bool has_aggregates() const;
  /// Variables of the WHERE patterns, in first-appearance order.
  std::vector<std::string> pattern_variables() const;
};

class QuerySyntaxError : public std::runtime_error {
 public:
  QuerySyntaxError(std::size_t line, std::size_t column, std::vector<std::string> expected,
                   const std::string& found);
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }
  const std::vector<std::string>& expected() const { return expected_; }

 private:
  std::size_t line_, column_;
  std::vector<std::string> expected_;
};

class QueryEvalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Prefixes known without a PREFIX declaration: rdf, rdfs, xsd, owl, ex.
const std::map<std::string, std::string>& default_prefixes();

/// Parses the supported subset and checks projection/grouping invariants.
QueryAst parse_query(std::string_view text);

struct ResultTable {
  std::vector<std::string> header;
  std::vector<std::vector<rdf::Term>> rows;
};

/// Rows come back ordered by ORDER BY keys, ties (and queries without ORDER
/// BY) broken by the projected row in term order, so output is deterministic.
ResultTable evaluate(const QueryAst& ast, const rdf::Graph& g);
ResultTable run_query(std::string_view text, const rdf::Graph& g);

using Binding = std::map<std::string, rdf::Term>;

/// Filter semantics over one solution. Numeric literals compare numerically
/// with numeric-typed values and with plain strings that parse as numbers;
/// other mixed-type comparisons are false, whatever the operator.
bool eval_filter(const Expr& expr, const Binding& binding,
                 const std::map<std::string, std::string>& prefixes = default_prefixes());

/// Total order used for ORDER BY and row canonicalisation.
int compare_terms(const rdf::Term& a, const rdf::Term& b);
std::optional<double> numeric_value(const rdf::Term& t);

enum class OutputFormat { Table, Csv, Json };
std::optional<OutputFormat> output_format_from_string(std::string_view name);
void write_result(std::ostream& out, const ResultTable& table, OutputFormat format);
/// Short display form: prefixed IRIs under ex:, bare literal text.
std::string display_term(const rdf::Term& t);

}  // namespace tbstream::sparql
