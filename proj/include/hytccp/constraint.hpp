#pragma once

// One concrete cylindric constraint system: Herbrand equations over atoms, numbers and
// streams, plus single-variable comparisons against rational bounds.

#include "hytccp/number.hpp"
#include "hytccp/term.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <tuple>
#include <variant>
#include <vector>

namespace hytccp {

enum class CmpOp { Eq, Ne, Lt, Le, Gt, Ge };

inline const char* to_string(CmpOp op) {
    switch (op) {
        case CmpOp::Eq: return "=";
        case CmpOp::Ne: return "!=";
        case CmpOp::Lt: return "<";
        case CmpOp::Le: return "=<";
        case CmpOp::Gt: return ">";
        case CmpOp::Ge: return ">=";
    }
    return "?";
}

inline bool holds(CmpOp op, int three_way) {
    switch (op) {
        case CmpOp::Eq: return three_way == 0;
        case CmpOp::Ne: return three_way != 0;
        case CmpOp::Lt: return three_way < 0;
        case CmpOp::Le: return three_way <= 0;
        case CmpOp::Gt: return three_way > 0;
        case CmpOp::Ge: return three_way >= 0;
    }
    return false;
}

inline bool holds(CmpOp op, const Number& value, const Rational& bound) { return holds(op, compare(value, Number(bound))); }

/// var = rhs, always in solved form (variable on the left).
struct TermEq {
    std::string var;
    Term rhs;
    friend bool operator==(const TermEq&, const TermEq&) = default;
};

/// var op bound.
struct LinCmp {
    std::string var;
    CmpOp op;
    Rational bound;
    friend bool operator==(const LinCmp& a, const LinCmp& b) {
        return a.var == b.var && a.op == b.op && a.bound == b.bound;
    }
    friend bool operator<(const LinCmp& a, const LinCmp& b) {
        if (a.var != b.var) return a.var < b.var;
        if (a.op != b.op) return a.op < b.op;
        return a.bound < b.bound;
    }
};

using AtomicConstraint = std::variant<TermEq, LinCmp>;

inline std::string to_string(const AtomicConstraint& a) {
    if (auto* eq = std::get_if<TermEq>(&a)) return eq->var + " = " + eq->rhs.str();
    const auto& c = std::get<LinCmp>(a);
    return c.var + " " + to_string(c.op) + " " + to_string(c.bound);
}

inline std::string to_string(std::span<const AtomicConstraint> atoms) {
    if (atoms.empty()) return "true";
    std::string out;
    for (const auto& a : atoms) {
        if (!out.empty()) out += ", ";
        out += to_string(a);
    }
    return out;
}

/// Thrown when a continuous comparison reads a variable with no continuous-store entry.
struct MissingVariable : std::runtime_error {
    std::string var;
    explicit MissingVariable(std::string v)
        : std::runtime_error("uninitialized continuous variable '" + v + "'"), var(std::move(v)) {}
};

/// Element of the constraint system. Empty means true; `consistent() == false` is the
/// absorbing false element. Bindings are a triangular idempotent-on-walk substitution
/// (no cycles); comparisons are keyed on unbound variables only.
class Constraint {
public:
    static Constraint top() { return Constraint(); }
    static Constraint bottom() {
        Constraint c;
        c.consistent_ = false;
        return c;
    }
    static Constraint of(std::span<const AtomicConstraint> atoms) {
        Constraint c;
        for (const auto& a : atoms) {
            c.add(a);
            if (!c.consistent_) return bottom();
        }
        return c;
    }
    static Constraint of(std::initializer_list<AtomicConstraint> atoms) {
        return of(std::span<const AtomicConstraint>(atoms.begin(), atoms.size()));
    }

    bool consistent() const { return consistent_; }
    bool is_true() const { return consistent_ && bindings_.empty() && cmps_.empty(); }
    const std::map<std::string, Term>& bindings() const { return bindings_; }
    const std::vector<LinCmp>& comparisons() const { return cmps_; }

    /// Follows variable bindings until an unbound variable or a non-variable term.
    Term walk(Term t) const {
        while (t.is_var()) {
            auto it = bindings_.find(t.name());
            if (it == bindings_.end()) break;
            t = it->second;
        }
        return t;
    }

    /// Applies the substitution everywhere inside `t`.
    Term resolve(const Term& t) const {
        Term w = walk(t);
        if (w.kind() != TermKind::Cons) return w;
        return Term::cons(resolve(w.head()), resolve(w.tail()));
    }

    std::optional<Rational> numeric_value(const std::string& var) const {
        Term w = walk(Term::var(var));
        if (w.kind() == TermKind::Num) return w.value();
        return std::nullopt;
    }

    std::set<std::string> vars() const {
        std::set<std::string> out;
        for (const auto& [v, t] : bindings_) {
            out.insert(v);
            t.collect_vars(out);
        }
        for (const auto& c : cmps_) out.insert(c.var);
        return out;
    }

    std::vector<AtomicConstraint> atoms() const {
        std::vector<AtomicConstraint> out;
        for (const auto& [v, t] : bindings_) out.push_back(TermEq{v, t});
        for (const auto& c : cmps_) out.push_back(c);
        return out;
    }

    /// Conjoins one atom in place; the result is bottom on any clash.
    void add(const AtomicConstraint& a) {
        if (!consistent_) return;
        if (auto* eq = std::get_if<TermEq>(&a)) {
            if (eq->rhs.contains(TermKind::Wildcard) || eq->rhs.contains(TermKind::Random))
                throw std::logic_error("wildcard or unresolved random in a told constraint: " + to_string(a));
            if (!unify(Term::var(eq->var), eq->rhs)) return fail();
        } else {
            cmps_.push_back(std::get<LinCmp>(a));
        }
        normalize_cmps();
    }

    friend Constraint conj(const Constraint& c, const Constraint& d) {
        if (!c.consistent_ || !d.consistent_) return bottom();
        if (d.is_true()) return c;
        if (c.is_true()) return d;
        Constraint out = c;
        for (const auto& [v, t] : d.bindings_) {
            if (!out.unify(Term::var(v), t)) return bottom();
        }
        out.cmps_.insert(out.cmps_.end(), d.cmps_.begin(), d.cmps_.end());
        out.normalize_cmps();
        if (!out.consistent_) return bottom();
        return out;
    }

    /// Canonical textual form: every binding fully resolved, variables sorted.
    std::string str() const {
        if (!consistent_) return "false";
        if (is_true()) return "true";
        std::string out;
        for (const auto& [v, t] : bindings_) {
            if (!out.empty()) out += ", ";
            out += v + " = " + resolve(t).str();
        }
        for (const auto& c : cmps_) {
            if (!out.empty()) out += ", ";
            out += to_string(AtomicConstraint{c});
        }
        return out;
    }

private:
    void fail() {
        consistent_ = false;
        bindings_.clear();
        cmps_.clear();
    }

    bool unify(const Term& a0, const Term& b0) {
        Term a = walk(a0), b = walk(b0);
        if (a.is_var() && b.is_var() && a.name() == b.name()) return true;
        if (a.is_var()) return bind(a.name(), b);
        if (b.is_var()) return bind(b.name(), a);
        if (a.kind() != b.kind()) return false;
        switch (a.kind()) {
            case TermKind::Atom: return a.name() == b.name();
            case TermKind::Num: return a.value() == b.value();
            case TermKind::Cons: return unify(a.head(), b.head()) && unify(a.tail(), b.tail());
            default: return false;
        }
    }

    bool bind(const std::string& v, const Term& t) {
        if (resolve(t).contains_var(v)) return false;  // occurs check
        bindings_.emplace(v, t);
        return true;
    }

    // Re-keys comparisons onto the current representative, evaluates ground ones and
    // checks per-variable interval feasibility.
    void normalize_cmps() {
        if (!consistent_) return;
        std::vector<LinCmp> kept;
        for (const auto& c : cmps_) {
            Term w = walk(Term::var(c.var));
            if (w.is_var()) {
                kept.push_back(LinCmp{w.name(), c.op, c.bound});
            } else if (w.kind() == TermKind::Num) {
                if (!holds(c.op, Number(w.value()), c.bound)) return fail();
            } else {
                return fail();
            }
        }
        std::sort(kept.begin(), kept.end());
        kept.erase(std::unique(kept.begin(), kept.end()), kept.end());
        cmps_ = std::move(kept);
        for (std::size_t i = 0; i < cmps_.size();) {
            std::size_t j = i;
            while (j < cmps_.size() && cmps_[j].var == cmps_[i].var) ++j;
            if (!feasible(std::span<const LinCmp>(cmps_.data() + i, j - i))) return fail();
            i = j;
        }
    }

    static bool feasible(std::span<const LinCmp> cs) {
        std::optional<Rational> point;
        for (const auto& c : cs) {
            if (c.op == CmpOp::Eq) {
                if (point && *point != c.bound) return false;
                point = c.bound;
            }
        }
        if (point) {
            for (const auto& c : cs)
                if (!holds(c.op, Number(*point), c.bound)) return false;
            return true;
        }
        std::optional<std::pair<Rational, bool>> lo, hi;  // (bound, strict)
        for (const auto& c : cs) {
            if (c.op == CmpOp::Gt || c.op == CmpOp::Ge) {
                bool strict = c.op == CmpOp::Gt;
                if (!lo || c.bound > lo->first || (c.bound == lo->first && strict)) lo = {c.bound, strict};
            } else if (c.op == CmpOp::Lt || c.op == CmpOp::Le) {
                bool strict = c.op == CmpOp::Lt;
                if (!hi || c.bound < hi->first || (c.bound == hi->first && strict)) hi = {c.bound, strict};
            }
        }
        if (!lo || !hi) return true;
        if (lo->first < hi->first) return true;
        if (lo->first > hi->first || lo->second || hi->second) return false;
        for (const auto& c : cs)
            if (c.op == CmpOp::Ne && c.bound == lo->first) return false;
        return true;
    }

    bool consistent_ = true;
    std::map<std::string, Term> bindings_;
    std::vector<LinCmp> cmps_;
};

namespace detail {

// Unification in which only pattern variables may be bound; every other variable is rigid.
struct Matcher {
    const std::set<std::string>& patterns;
    std::map<std::string, Term> subst;

    Term walk(Term t) const {
        while (t.is_var() && patterns.count(t.name())) {
            auto it = subst.find(t.name());
            if (it == subst.end()) break;
            t = it->second;
        }
        return t;
    }
    bool is_pattern(const Term& t) const { return t.is_var() && patterns.count(t.name()) && !subst.count(t.name()); }

    bool match(const Term& a0, const Term& b0) {
        Term a = walk(a0), b = walk(b0);
        if (a.kind() == TermKind::Wildcard || b.kind() == TermKind::Wildcard) return true;
        if (is_pattern(a)) {
            if (b.is_var() && b.name() == a.name()) return true;
            subst.emplace(a.name(), b);
            return true;
        }
        if (is_pattern(b)) {
            subst.emplace(b.name(), a);
            return true;
        }
        if (a.kind() != b.kind()) return false;
        switch (a.kind()) {
            case TermKind::Var:
            case TermKind::Atom: return a.name() == b.name();
            case TermKind::Num: return a.value() == b.value();
            case TermKind::Cons: return match(a.head(), b.head()) && match(a.tail(), b.tail());
            default: return false;
        }
    }
};

// Resolves non-pattern variables of a guard term through the store.
inline Term resolve_guard_term(const Constraint& store, const Term& t, const std::set<std::string>& patterns) {
    switch (t.kind()) {
        case TermKind::Var: return patterns.count(t.name()) ? t : store.resolve(t);
        case TermKind::Cons:
            return Term::cons(resolve_guard_term(store, t.head(), patterns),
                              resolve_guard_term(store, t.tail(), patterns));
        default: return t;
    }
}

}  // namespace detail

/// store |- guard, where `locals` (and every `_`) are existential match placeholders.
/// Sound but incomplete for comparisons: a comparison on an unbound variable is entailed
/// only by a syntactically identical comparison in the store.
inline bool entails(const Constraint& store, std::span<const AtomicConstraint> guard,
                    const std::set<std::string>& locals = {}) {
    if (!store.consistent()) return true;
    detail::Matcher m{locals, {}};
    std::vector<const LinCmp*> deferred;
    for (const auto& a : guard) {
        if (auto* eq = std::get_if<TermEq>(&a)) {
            Term lhs = detail::resolve_guard_term(store, Term::var(eq->var), locals);
            Term rhs = detail::resolve_guard_term(store, eq->rhs, locals);
            if (!m.match(lhs, rhs)) return false;
        } else {
            deferred.push_back(&std::get<LinCmp>(a));
        }
    }
    for (const LinCmp* c : deferred) {
        Term w = locals.count(c->var) ? m.walk(Term::var(c->var)) : store.walk(Term::var(c->var));
        if (w.is_var() && locals.count(w.name()) == 0) w = store.walk(w);
        if (w.kind() == TermKind::Num) {
            if (!holds(c->op, Number(w.value()), c->bound)) return false;
        } else if (w.is_var() && !locals.count(w.name())) {
            LinCmp probe{w.name(), c->op, c->bound};
            const auto& cs = store.comparisons();
            if (std::find(cs.begin(), cs.end(), probe) == cs.end()) return false;
        } else {
            return false;
        }
    }
    return true;
}

inline bool entails(const Constraint& store, const Constraint& guard, const std::set<std::string>& locals = {}) {
    if (!guard.consistent()) return !store.consistent();
    auto atoms = guard.atoms();
    return entails(store, std::span<const AtomicConstraint>(atoms), locals);
}

/// Name given to a hidden variable that survives projection only through references.
inline std::string anonymous_name(const std::string& var) { return "?" + var; }

/// Existential projection of `x`: its binding is substituted into every other atom and
/// dropped; an unbound but referenced `x` is renamed to anonymous_name(x). The result
/// never mentions `x`.
inline Constraint hide(const Constraint& c, const std::string& x) {
    if (!c.consistent()) return c;
    if (!c.vars().count(x)) return c;
    std::vector<AtomicConstraint> rebuilt;
    auto bound = c.bindings().find(x);
    if (bound != c.bindings().end()) {
        const Term& value = bound->second;
        for (const auto& [v, t] : c.bindings())
            if (v != x) rebuilt.push_back(TermEq{v, t.substitute(x, value)});
        for (const auto& cmp : c.comparisons()) rebuilt.push_back(cmp);
        return Constraint::of(rebuilt);
    }
    // Unbound: prefer re-orienting a plain alias y = x so no anonymous name is needed.
    std::optional<std::string> alias;
    for (const auto& [v, t] : c.bindings())
        if (t.is_var() && t.name() == x) {
            alias = v;
            break;
        }
    bool referenced = false;
    for (const auto& [v, t] : c.bindings())
        if (t.contains_var(x)) referenced = true;
    Term replacement = alias ? Term::var(*alias) : Term::var(anonymous_name(x));
    for (const auto& [v, t] : c.bindings()) {
        if (alias && v == *alias) continue;
        rebuilt.push_back(TermEq{v, t.substitute(x, replacement)});
    }
    for (const auto& cmp : c.comparisons()) {
        if (cmp.var != x) rebuilt.push_back(cmp);
        else if (alias || referenced) rebuilt.push_back(LinCmp{replacement.name(), cmp.op, cmp.bound});
    }
    return Constraint::of(rebuilt);
}

inline Constraint hide(const Constraint& c, std::span<const std::string> xs) {
    Constraint out = c;
    auto present = out.vars();
    for (const auto& x : xs) {
        if (!present.count(x)) continue;
        out = hide(out, x);
        present = out.vars();
    }
    return out;
}

/// Evaluates comparison atoms (and `x = number` equations) against a snapshot of
/// continuous values.
inline bool eval_cont_atoms(std::span<const AtomicConstraint> guard, const std::map<std::string, Number>& snapshot) {
    for (const auto& a : guard) {
        std::string var;
        CmpOp op;
        Rational bound;
        if (auto* c = std::get_if<LinCmp>(&a)) {
            std::tie(var, op, bound) = std::tuple(c->var, c->op, c->bound);
        } else {
            const auto& eq = std::get<TermEq>(a);
            if (eq.rhs.kind() != TermKind::Num)
                throw std::logic_error("not a continuous atom: " + to_string(a));
            std::tie(var, op, bound) = std::tuple(eq.var, CmpOp::Eq, eq.rhs.value());
        }
        auto it = snapshot.find(var);
        if (it == snapshot.end()) throw MissingVariable(var);
        if (!holds(op, it->second, bound)) return false;
    }
    return true;
}

inline bool eval_cont_atoms(const Constraint& guard, const std::map<std::string, Number>& snapshot) {
    auto atoms = guard.atoms();
    return eval_cont_atoms(std::span<const AtomicConstraint>(atoms), snapshot);
}

}  // namespace hytccp
