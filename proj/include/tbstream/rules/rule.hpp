#pragma once

#include <compare>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tbstream::rules {

enum class ValueKind : std::uint8_t { Individual, String, Number, Bool };

/// A ground value. Equality and ordering use (kind, canonical text); numbers
/// are canonicalised so 14 and 14.0 compare equal.
struct Value {
  ValueKind kind = ValueKind::Individual;
  std::string text;
  double number = 0;

  static Value individual(std::string name);
  static Value string(std::string s);
  static Value num(double d);
  static Value boolean(bool b);

  bool is_numeric() const { return kind == ValueKind::Number; }
  /// DSL spelling: bare name, quoted string, number, true/false.
  std::string repr() const;

  std::strong_ordering operator<=>(const Value& o) const {
    if (auto c = kind <=> o.kind; c != 0) return c;
    return text <=> o.text;
  }
  bool operator==(const Value& o) const { return kind == o.kind && text == o.text; }
};

enum class AtomKind : std::uint8_t { Class, DataProperty, ObjectProperty, Builtin };

struct Arg {
  std::optional<std::string> var;  // variable name without '?'
  Value constant;

  static Arg variable(std::string name) { return {std::move(name), {}}; }
  static Arg value(Value v) { return {std::nullopt, std::move(v)}; }
  bool is_var() const { return var.has_value(); }
  bool operator==(const Arg&) const = default;
};

struct Atom {
  AtomKind kind = AtomKind::Class;
  std::string name;  // builtins keep only the local name, e.g. "greaterThan"
  std::vector<Arg> args;

  std::string repr() const;
  bool operator==(const Atom&) const = default;
};

inline constexpr std::string_view kBuiltins[] = {"greaterThan", "greaterThanOrEqualTo", "lessThan",
                                                 "lessThanOrEqualTo", "equal"};
bool is_builtin_name(std::string_view name);

struct Rule {
  std::string id;
  std::vector<Atom> antecedent;
  std::vector<Atom> consequent;
  std::string provenance;  // e.g. "Table 3, Stage 1"
  std::size_t source_line = 0;

  std::string repr() const;
  bool operator==(const Rule&) const = default;
};

class RuleSyntaxError : public std::runtime_error {
 public:
  RuleSyntaxError(std::size_t line, std::size_t column, const std::string& what);
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_, column_;
};

class UnsafeRuleError : public std::runtime_error {
 public:
  UnsafeRuleError(std::string rule_id, std::string variable, const std::string& what);
  const std::string& rule_id() const { return rule_id_; }
  const std::string& variable() const { return variable_; }

 private:
  std::string rule_id_, variable_;
};

/// Parses the rule DSL. `id_prefix` names rules that carry no @id directive
/// (prefix + 1-based ordinal). Disjunctive antecedents expand into one rule
/// per disjunct, suffixed a, b, ...
std::vector<Rule> parse_rules(std::string_view text, std::string_view id_prefix = "R");

/// Throws UnsafeRuleError when a rule breaks the safety condition.
void validate_rule(const Rule& rule);

std::vector<Rule> load_rule_file(const std::string& path);
/// Loads stage, suspected, pulmonary and severe rule files from `dir`.
std::vector<Rule> load_rule_set(const std::string& dir);
std::vector<std::string> rule_file_names();

/// Ordered builtins compare numerically and return false on non-numeric
/// input; `equal` compares numerically when both sides are numbers and by
/// text otherwise. Unknown names throw std::invalid_argument.
bool builtin_eval(std::string_view name, const std::vector<Value>& args);

}  // namespace tbstream::rules
