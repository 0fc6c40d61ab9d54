#include <algorithm>
#include <unordered_map>

#include "tbstream/rules/engine.hpp"

namespace tbstream::rules {

std::string Fact::repr() const {
  if (is_class()) return predicate + "(" + subject.repr() + ")";
  return predicate + "(" + subject.repr() + ", " + object->repr() + ")";
}

namespace {

struct CArg {
  int slot = -1;  // -1 for constants
  Value constant;
};

struct CAtom {
  AtomKind kind;
  std::string name;
  std::vector<CArg> args;
};

struct CRule {
  const Rule* rule = nullptr;
  std::vector<CAtom> body;                          // relational atoms, in rule order
  std::vector<std::vector<CAtom>> builtins_after;   // checked once body[k] is matched
  std::vector<CAtom> head;
  std::size_t slots = 0;
};

CRule compile(const Rule& r) {
  CRule c;
  c.rule = &r;
  std::map<std::string, int> slot_of;
  auto carg = [&](const Arg& a) {
    CArg out;
    if (a.is_var()) {
      auto [it, inserted] = slot_of.emplace(*a.var, static_cast<int>(slot_of.size()));
      out.slot = it->second;
    } else {
      out.constant = a.constant;
    }
    return out;
  };
  auto catom = [&](const Atom& a) {
    CAtom out{a.kind, a.name, {}};
    for (const auto& arg : a.args) out.args.push_back(carg(arg));
    return out;
  };
  std::vector<const Atom*> builtins;
  for (const auto& a : r.antecedent) {
    if (a.kind == AtomKind::Builtin) builtins.push_back(&a);
    else c.body.push_back(catom(a));
  }
  c.builtins_after.resize(c.body.size());
  for (const Atom* b : builtins) {
    // Earliest body position after which every variable of b is bound.
    std::size_t ready = 0;
    for (const auto& arg : b->args) {
      if (!arg.is_var()) continue;
      for (std::size_t k = 0; k < c.body.size(); ++k) {
        bool has = std::any_of(c.body[k].args.begin(), c.body[k].args.end(),
                               [&](const CArg& x) { return x.slot == slot_of.at(*arg.var); });
        if (has) {
          ready = std::max(ready, k);
          break;
        }
      }
    }
    if (!c.body.empty()) c.builtins_after[ready].push_back(catom(*b));
  }
  for (const auto& a : r.consequent) c.head.push_back(catom(a));
  c.slots = slot_of.size();
  return c;
}

using Binding = std::vector<std::optional<Value>>;

struct Store {
  std::vector<Fact> facts;
  std::vector<std::size_t> round;
  std::set<Fact> seen;
  std::unordered_map<std::string, std::vector<std::size_t>> by_pred;
  std::map<std::pair<std::string, Value>, std::vector<std::size_t>> by_subject;

  bool add(const Fact& f, std::size_t r) {
    if (!seen.insert(f).second) return false;
    std::size_t idx = facts.size();
    facts.push_back(f);
    round.push_back(r);
    by_pred[f.predicate].push_back(idx);
    by_subject[{f.predicate, f.subject}].push_back(idx);
    return true;
  }
};

enum class Window { Old, Delta, All };

const Value& resolve(const CArg& a, const Binding& b) { return a.slot < 0 ? a.constant : *b[a.slot]; }

Fact instantiate(const CAtom& a, const Binding& b) {
  if (a.kind == AtomKind::Class) return Fact::cls(a.name, resolve(a.args[0], b));
  return Fact::prop(a.name, resolve(a.args[0], b), resolve(a.args[1], b));
}

struct Candidate {
  std::string rule_id;
  std::vector<Fact> actions;
};

class Evaluator {
 public:
  Evaluator(Store& store, std::map<Fact, Candidate>& pending) : store_(store), pending_(pending) {}

  void run(const CRule& rule, std::size_t delta_pos, std::size_t r) {
    rule_ = &rule;
    delta_pos_ = delta_pos;
    round_ = r;
    Binding b(rule.slots);
    join(0, b);
  }

 private:
  bool in_window(std::size_t fact_round, Window w) const {
    switch (w) {
      case Window::Old: return fact_round + 1 < round_;
      case Window::Delta: return fact_round + 1 == round_;
      case Window::All: return fact_round < round_;
    }
    return false;
  }

  void join(std::size_t k, Binding& b) {
    if (k == rule_->body.size()) {
      emit(b);
      return;
    }
    const CAtom& atom = rule_->body[k];
    Window w = k < delta_pos_ ? Window::Old : (k == delta_pos_ ? Window::Delta : Window::All);
    const std::vector<std::size_t>* cands = nullptr;
    const CArg& subj = atom.args[0];
    if (subj.slot < 0 || b[subj.slot]) {
      auto it = store_.by_subject.find({atom.name, resolve(subj, b)});
      if (it == store_.by_subject.end()) return;
      cands = &it->second;
    } else {
      auto it = store_.by_pred.find(atom.name);
      if (it == store_.by_pred.end()) return;
      cands = &it->second;
    }
    const bool want_class = atom.kind == AtomKind::Class;
    // Indexes only grow between rounds, so iterating by position is safe.
    for (std::size_t pos = 0; pos < cands->size(); ++pos) {
      std::size_t idx = (*cands)[pos];
      if (!in_window(store_.round[idx], w)) continue;
      const Fact& f = store_.facts[idx];
      if (f.is_class() != want_class) continue;
      std::vector<int> bound_here;
      bool ok = unify(atom.args[0], f.subject, b, bound_here);
      if (ok && !want_class) ok = unify(atom.args[1], *f.object, b, bound_here);
      if (ok) {
        for (const auto& bi : rule_->builtins_after[k]) {
          if (!builtin_eval(bi.name, {resolve(bi.args[0], b), resolve(bi.args[1], b)})) {
            ok = false;
            break;
          }
        }
      }
      if (ok) join(k + 1, b);
      for (int s : bound_here) b[s].reset();
    }
  }

  static bool unify(const CArg& a, const Value& v, Binding& b, std::vector<int>& bound_here) {
    if (a.slot < 0) return a.constant == v;
    auto& cur = b[a.slot];
    if (cur) return *cur == v;
    cur = v;
    bound_here.push_back(a.slot);
    return true;
  }

  void emit(const Binding& b) {
    std::vector<Fact> actions;
    for (const auto& h : rule_->head) actions.push_back(instantiate(h, b));
    for (const auto& f : actions) {
      if (store_.seen.count(f)) continue;
      auto it = pending_.find(f);
      if (it == pending_.end()) {
        pending_.emplace(f, Candidate{rule_->rule->id, actions});
      } else if (rule_->rule->id < it->second.rule_id ||
                 (rule_->rule->id == it->second.rule_id && actions < it->second.actions)) {
        it->second = Candidate{rule_->rule->id, actions};
      }
    }
  }

  Store& store_;
  std::map<Fact, Candidate>& pending_;
  const CRule* rule_ = nullptr;
  std::size_t delta_pos_ = 0;
  std::size_t round_ = 0;
};

std::string label_for(const Fact& f) {
  if (f.is_class()) return f.predicate;
  if (f.object->kind == ValueKind::Bool && f.object->text == "true") return f.predicate;
  return f.predicate + ":" + f.object->text;
}

}  // namespace

ApplyResult apply_rules(const FactBase& facts, const std::vector<Rule>& rules) {
  std::vector<CRule> compiled;
  compiled.reserve(rules.size());
  for (const auto& r : rules) compiled.push_back(compile(r));

  Store store;
  for (const auto& f : facts) store.add(f, 0);

  ApplyResult result;
  std::size_t r = 1;
  for (;; ++r) {
    std::map<Fact, Candidate> pending;
    Evaluator ev(store, pending);
    for (const auto& c : compiled) {
      for (std::size_t pos = 0; pos < c.body.size(); ++pos) ev.run(c, pos, r);
    }
    if (pending.empty()) break;
    for (auto& [f, cand] : pending) {
      store.add(f, r);
      result.derivations.emplace(f, Derivation{cand.rule_id, r, std::move(cand.actions)});
    }
  }
  result.rounds = r - 1;
  for (const auto& f : store.facts) result.facts.add(f);

  std::set<Value> patients;
  for (const auto& f : store.facts) {
    if (f.is_class() && f.predicate == kPatientClassName) patients.insert(f.subject);
  }
  for (const auto& [f, d] : result.derivations) {
    if (!patients.count(f.subject)) continue;
    result.classifications.push_back({f.subject.text, label_for(f), d.rule_id, d.actions, f});
  }
  sort_classifications(result.classifications);
  return result;
}

int severity_rank(std::string_view label) {
  if (label == "Severe_TB") return 0;
  if (label == "Confirmed_Pulmonary_TB" || label == "Confirmed_PulmonaryTB") return 1;
  if (label == "Extra_Pulmonary_TB") return 2;
  if (label == "Suspected_TB") return 3;
  if (label == "Recovery_Stage_TB") return 4;
  return 5;
}

void sort_classifications(std::vector<Classification>& cs) {
  std::stable_sort(cs.begin(), cs.end(), [](const Classification& a, const Classification& b) {
    int ra = severity_rank(a.label), rb = severity_rank(b.label);
    if (ra != rb) return ra < rb;
    if (a.patient != b.patient) return a.patient < b.patient;
    if (a.label != b.label) return a.label < b.label;
    return a.triggering_rule < b.triggering_rule;
  });
}

}  // namespace tbstream::rules
