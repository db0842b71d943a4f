#pragma once

// Agents, declarations and programs, plus the pretty-printer whose output the parser
// reads back.

#include "hytccp/constraint.hpp"
#include "hytccp/continuous_store.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace hytccp {

/// constant + sum(coeff * var); variables are read from the discrete store when used.
struct AffineExpr {
    Rational constant;
    std::map<std::string, Rational> coeffs;

    friend bool operator==(const AffineExpr&, const AffineExpr&) = default;

    bool is_constant() const { return coeffs.empty(); }

    /// Value under the store; every variable must be bound to a number.
    Rational eval(const Constraint& store) const {
        Rational out = constant;
        for (const auto& [v, k] : coeffs) {
            auto val = store.numeric_value(v);
            if (!val) throw std::runtime_error("variable '" + v + "' has no numeric value when evaluated");
            out += k * *val;
        }
        return out;
    }

    std::string str() const {
        std::string out;
        for (const auto& [v, k] : coeffs) {
            if (k == 0) continue;
            bool neg = k < 0;
            Rational mag = neg ? Rational(-k) : k;
            if (out.empty()) out += neg ? "-" : "";
            else out += neg ? " - " : " + ";
            out += mag == 1 ? v : to_string(mag) + "*" + v;
        }
        if (out.empty()) return to_string(constant);
        if (constant > 0) out += " + " + to_string(constant);
        if (constant < 0) out += " - " + to_string(Rational(-constant));
        return out;
    }
};

/// Syntactic flow `der(X) = a + b*X`, where `a` may read discrete variables.
struct FlowSpec {
    AffineExpr a;
    Rational b;
    friend bool operator==(const FlowSpec&, const FlowSpec&) = default;
    Flow eval(const Constraint& store) const { return Flow{a.eval(store), b}; }
};

struct AgentNode;

/// Immutable, shareable agent tree.
class Agent {
public:
    Agent();
    template <class T>
    Agent(T node);  // NOLINT: implicit from any node kind

    const AgentNode& node() const { return *node_; }
    template <class T>
    const T* as() const;
    template <class T>
    bool is() const {
        return as<T>() != nullptr;
    }
    bool same(const Agent& o) const { return node_ == o.node_; }

    friend bool operator==(const Agent& a, const Agent& b);

private:
    std::shared_ptr<const AgentNode> node_;
};

struct Stop {
    friend bool operator==(const Stop&, const Stop&) = default;
};
struct Tell {
    std::vector<AtomicConstraint> atoms;
    friend bool operator==(const Tell&, const Tell&) = default;
};
struct Parallel {
    Agent left, right;
    friend bool operator==(const Parallel&, const Parallel&) = default;
};
/// exists vars (body), carrying its local store (true when written in source).
struct Hide {
    std::vector<std::string> vars;
    Agent body;
    Constraint local = Constraint::top();
    friend bool operator==(const Hide& a, const Hide& b) {
        return a.vars == b.vars && a.body == b.body && a.local.str() == b.local.str();
    }
};
struct AskBranch {
    std::vector<AtomicConstraint> guard;
    Agent body;
    friend bool operator==(const AskBranch&, const AskBranch&) = default;
};
/// sum ask(c_i) -> A_i + sum ask~(inv_j)
struct Choice {
    std::vector<AskBranch> asks;
    std::vector<ContGuard> invariants;
    friend bool operator==(const Choice&, const Choice&) = default;
};
struct Now {
    std::vector<AtomicConstraint> guard;
    Agent then_branch, else_branch;
    friend bool operator==(const Now&, const Now&) = default;
};
struct Call {
    std::string name;
    std::vector<std::string> args;
    friend bool operator==(const Call&, const Call&) = default;
};
/// change(X, value | _, der(X) = flow | _); nullopt is `_` (keep).
struct Change {
    std::string var;
    std::optional<AffineExpr> value;
    std::optional<FlowSpec> flow;
    friend bool operator==(const Change&, const Change&) = default;
};

struct AgentNode {
    std::variant<Stop, Tell, Parallel, Hide, Choice, Now, Call, Change> v;
};

inline Agent::Agent() : node_(std::make_shared<const AgentNode>(AgentNode{Stop{}})) {}
template <class T>
Agent::Agent(T node) : node_(std::make_shared<const AgentNode>(AgentNode{std::move(node)})) {}
template <class T>
const T* Agent::as() const {
    return std::get_if<T>(&node_->v);
}
inline bool operator==(const Agent& a, const Agent& b) { return a.node_ == b.node_ || a.node_->v == b.node_->v; }

struct Declaration {
    std::string name;
    std::vector<std::string> params;
    Agent body;
};

struct Program {
    std::map<std::string, Rational> constants;
    std::vector<Declaration> declarations;
    Agent initial;

    std::vector<const Declaration*> lookup(const std::string& name, std::size_t arity) const {
        std::vector<const Declaration*> out;
        for (const auto& d : declarations)
            if (d.name == name && d.params.size() == arity) out.push_back(&d);
        return out;
    }
};

// ---- variables ----

inline void atom_vars(const AtomicConstraint& a, std::set<std::string>& out) {
    if (auto* eq = std::get_if<TermEq>(&a)) {
        out.insert(eq->var);
        eq->rhs.collect_vars(out);
    } else {
        out.insert(std::get<LinCmp>(a).var);
    }
}

inline void atoms_vars(const std::vector<AtomicConstraint>& atoms, std::set<std::string>& out) {
    for (const auto& a : atoms) atom_vars(a, out);
}

/// Variables not bound by an enclosing exists.
inline std::set<std::string> free_vars(const Agent& a) {
    std::set<std::string> out;
    struct Visitor {
        std::set<std::string>& out;
        void operator()(const Stop&) const {}
        void operator()(const Tell& t) const { atoms_vars(t.atoms, out); }
        void operator()(const Parallel& p) const {
            auto l = free_vars(p.left), r = free_vars(p.right);
            out.insert(l.begin(), l.end());
            out.insert(r.begin(), r.end());
        }
        void operator()(const Hide& h) const {
            auto inner = free_vars(h.body);
            for (const auto& v : h.vars) inner.erase(v);
            out.insert(inner.begin(), inner.end());
        }
        void operator()(const Choice& c) const {
            for (const auto& b : c.asks) {
                atoms_vars(b.guard, out);
                auto inner = free_vars(b.body);
                out.insert(inner.begin(), inner.end());
            }
            for (const auto& inv : c.invariants) atoms_vars(inv, out);
        }
        void operator()(const Now& n) const {
            atoms_vars(n.guard, out);
            auto t = free_vars(n.then_branch), e = free_vars(n.else_branch);
            out.insert(t.begin(), t.end());
            out.insert(e.begin(), e.end());
        }
        void operator()(const Call& c) const { out.insert(c.args.begin(), c.args.end()); }
        void operator()(const Change& c) const {
            out.insert(c.var);
            if (c.value)
                for (const auto& [v, k] : c.value->coeffs) out.insert(v);
            if (c.flow)
                for (const auto& [v, k] : c.flow->a.coeffs) out.insert(v);
        }
    };
    std::visit(Visitor{out}, a.node().v);
    return out;
}

// ---- renaming ----

inline Term rename_term(const Term& t, const std::map<std::string, std::string>& m) {
    Term out = t;
    std::set<std::string> vs;
    t.collect_vars(vs);
    // Two-phase through placeholders so swaps (X->Y, Y->X) stay correct.
    for (const auto& v : vs)
        if (auto it = m.find(v); it != m.end()) out = out.substitute(v, Term::var("\x01" + it->second));
    std::set<std::string> placeholders;
    out.collect_vars(placeholders);
    for (const auto& p : placeholders)
        if (!p.empty() && p[0] == '\x01') out = out.substitute(p, Term::var(p.substr(1)));
    return out;
}

inline std::string rename_var(const std::string& v, const std::map<std::string, std::string>& m) {
    auto it = m.find(v);
    return it == m.end() ? v : it->second;
}

inline AtomicConstraint rename_atom(const AtomicConstraint& a, const std::map<std::string, std::string>& m) {
    if (auto* eq = std::get_if<TermEq>(&a)) return TermEq{rename_var(eq->var, m), rename_term(eq->rhs, m)};
    auto c = std::get<LinCmp>(a);
    c.var = rename_var(c.var, m);
    return c;
}

inline std::vector<AtomicConstraint> rename_atoms(const std::vector<AtomicConstraint>& atoms,
                                                  const std::map<std::string, std::string>& m) {
    std::vector<AtomicConstraint> out;
    out.reserve(atoms.size());
    for (const auto& a : atoms) out.push_back(rename_atom(a, m));
    return out;
}

inline AffineExpr rename_expr(const AffineExpr& e, const std::map<std::string, std::string>& m) {
    AffineExpr out{e.constant, {}};
    for (const auto& [v, k] : e.coeffs) out.coeffs[rename_var(v, m)] += k;
    return out;
}

inline Constraint rename_constraint(const Constraint& c, const std::map<std::string, std::string>& m) {
    if (!c.consistent() || c.is_true()) return c;
    auto atoms = rename_atoms(c.atoms(), m);
    return Constraint::of(atoms);
}

/// Simultaneous renaming of free variables. Hidden variables shadow the map; callers
/// keep hidden names distinct from the targets (see freshen_hidden).
inline Agent rename_free(const Agent& a, const std::map<std::string, std::string>& m) {
    if (m.empty()) return a;
    struct Visitor {
        const std::map<std::string, std::string>& m;
        Agent operator()(const Stop& s) const { return s; }
        Agent operator()(const Tell& t) const { return Tell{rename_atoms(t.atoms, m)}; }
        Agent operator()(const Parallel& p) const { return Parallel{rename_free(p.left, m), rename_free(p.right, m)}; }
        Agent operator()(const Hide& h) const {
            auto inner = m;
            for (const auto& v : h.vars) inner.erase(v);
            return Hide{h.vars, rename_free(h.body, inner), rename_constraint(h.local, inner)};
        }
        Agent operator()(const Choice& c) const {
            Choice out;
            for (const auto& b : c.asks) out.asks.push_back(AskBranch{rename_atoms(b.guard, m), rename_free(b.body, m)});
            for (const auto& inv : c.invariants) out.invariants.push_back(rename_atoms(inv, m));
            return out;
        }
        Agent operator()(const Now& n) const {
            return Now{rename_atoms(n.guard, m), rename_free(n.then_branch, m), rename_free(n.else_branch, m)};
        }
        Agent operator()(const Call& c) const {
            Call out{c.name, {}};
            for (const auto& v : c.args) out.args.push_back(rename_var(v, m));
            return out;
        }
        Agent operator()(const Change& c) const {
            Change out{rename_var(c.var, m), c.value, c.flow};
            if (out.value) out.value = rename_expr(*out.value, m);
            if (out.flow) out.flow->a = rename_expr(out.flow->a, m);
            return out;
        }
    };
    return std::visit(Visitor{m}, a.node().v);
}

/// Hands out variable names not used anywhere in a configuration. A name `x` is also
/// reserved while its anonymous form `?x` is alive.
class NameSupply {
public:
    NameSupply() = default;
    explicit NameSupply(const std::set<std::string>& used) {
        for (const auto& v : used) reserve(v);
    }
    void reserve(const std::string& v) { used_.insert(!v.empty() && v[0] == '?' ? v.substr(1) : v); }
    bool used(const std::string& v) const { return used_.count(v) > 0; }
    /// `base` itself when free, otherwise `base#k` for the smallest free k.
    std::string fresh(const std::string& name) {
        std::string base = name.substr(0, name.find('#'));
        std::string out = base;
        for (int k = 1; used_.count(out); ++k) out = base + "#" + std::to_string(k);
        used_.insert(out);
        return out;
    }

private:
    std::set<std::string> used_;
};

/// Renames every exists-bound variable in `a` to a name fresh in `names`, so hidden
/// variables of different unfoldings never collide.
inline Agent freshen_hidden(const Agent& a, NameSupply& names) {
    struct Visitor {
        NameSupply& names;
        Agent operator()(const Stop& s) const { return s; }
        Agent operator()(const Tell& t) const { return t; }
        Agent operator()(const Call& c) const { return c; }
        Agent operator()(const Change& c) const { return c; }
        Agent operator()(const Parallel& p) const {
            auto l = freshen_hidden(p.left, names);
            return Parallel{l, freshen_hidden(p.right, names)};
        }
        Agent operator()(const Hide& h) const {
            std::map<std::string, std::string> m;
            std::vector<std::string> vars;
            for (const auto& v : h.vars) {
                std::string fresh = names.fresh(v);
                if (fresh != v) m[v] = fresh;
                vars.push_back(fresh);
            }
            Agent body = rename_free(h.body, m);
            return Hide{vars, freshen_hidden(body, names), rename_constraint(h.local, m)};
        }
        Agent operator()(const Choice& c) const {
            Choice out;
            out.invariants = c.invariants;
            for (const auto& b : c.asks) out.asks.push_back(AskBranch{b.guard, freshen_hidden(b.body, names)});
            return out;
        }
        Agent operator()(const Now& n) const {
            auto t = freshen_hidden(n.then_branch, names);
            return Now{n.guard, t, freshen_hidden(n.else_branch, names)};
        }
    };
    return std::visit(Visitor{names}, a.node().v);
}

/// Every variable name occurring in `a`, free or hidden, including local stores.
inline void all_vars(const Agent& a, std::set<std::string>& out) {
    struct Visitor {
        std::set<std::string>& out;
        void operator()(const Stop&) const {}
        void operator()(const Tell& t) const { atoms_vars(t.atoms, out); }
        void operator()(const Parallel& p) const {
            all_vars(p.left, out);
            all_vars(p.right, out);
        }
        void operator()(const Hide& h) const {
            out.insert(h.vars.begin(), h.vars.end());
            auto l = h.local.vars();
            out.insert(l.begin(), l.end());
            all_vars(h.body, out);
        }
        void operator()(const Choice& c) const {
            for (const auto& b : c.asks) {
                atoms_vars(b.guard, out);
                all_vars(b.body, out);
            }
            for (const auto& inv : c.invariants) atoms_vars(inv, out);
        }
        void operator()(const Now& n) const {
            atoms_vars(n.guard, out);
            all_vars(n.then_branch, out);
            all_vars(n.else_branch, out);
        }
        void operator()(const Call& c) const { out.insert(c.args.begin(), c.args.end()); }
        void operator()(const Change& c) const {
            auto f = free_vars(c);
            out.insert(f.begin(), f.end());
        }
    };
    std::visit(Visitor{out}, a.node().v);
}

// ---- pretty printing ----

inline std::string guard_str(const std::vector<AtomicConstraint>& g) { return to_string(std::span<const AtomicConstraint>(g)); }

std::string to_string(const Agent& a);

namespace detail {
inline std::string primary(const Agent& a) {
    if (a.is<Parallel>() || a.is<Choice>()) return "(" + to_string(a) + ")";
    return to_string(a);
}
inline std::string join(const std::vector<std::string>& xs) {
    std::string out;
    for (const auto& x : xs) out += (out.empty() ? "" : ", ") + x;
    return out;
}
}  // namespace detail

/// Concrete syntax; parse_agent(to_string(a)) == a for source-level agents.
inline std::string to_string(const Agent& a) {
    struct Visitor {
        std::string operator()(const Stop&) const { return "stop"; }
        std::string operator()(const Tell& t) const { return "tell(" + guard_str(t.atoms) + ")"; }
        std::string operator()(const Parallel& p) const {
            std::string r = p.right.is<Parallel>() ? "(" + to_string(p.right) + ")" : to_string(p.right);
            return to_string(p.left) + " || " + r;
        }
        std::string operator()(const Hide& h) const {
            std::string local = h.local.is_true() ? "" : " @{" + h.local.str() + "}";
            return "exists " + detail::join(h.vars) + local + " (" + to_string(h.body) + ")";
        }
        std::string operator()(const Choice& c) const {
            std::string out;
            for (const auto& b : c.asks) {
                if (!out.empty()) out += " + ";
                out += "ask(" + guard_str(b.guard) + ") -> " + detail::primary(b.body);
            }
            for (const auto& inv : c.invariants) {
                if (!out.empty()) out += " + ";
                out += "ask~(" + guard_str(inv) + ")";
            }
            return out;
        }
        std::string operator()(const Now& n) const {
            return "now(" + guard_str(n.guard) + ") then " + detail::primary(n.then_branch) + " else " +
                   detail::primary(n.else_branch);
        }
        std::string operator()(const Call& c) const {
            return c.args.empty() ? c.name : c.name + "(" + detail::join(c.args) + ")";
        }
        std::string operator()(const Change& c) const {
            std::string v = c.value ? c.value->str() : "_";
            std::string f = "_";
            if (c.flow) {
                AffineExpr e = c.flow->a;
                if (c.flow->b != 0) e.coeffs[c.var] += c.flow->b;
                f = "der(" + c.var + ") = " + e.str();
            }
            return "change(" + c.var + ", " + v + ", " + f + ")";
        }
    };
    return std::visit(Visitor{}, a.node().v);
}

inline std::string to_string(const Program& p) {
    std::string out;
    for (const auto& [k, v] : p.constants) out += "const " + k + " = " + to_string(v) + ";\n";
    for (const auto& d : p.declarations) {
        out += d.params.empty() ? d.name : d.name + "(" + detail::join(d.params) + ")";
        out += " :- " + to_string(d.body) + ".\n";
    }
    out += to_string(p.initial) + ".\n";
    return out;
}

/// 64-bit FNV-1a, stable across platforms (used for trace headers).
inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

// ---- Random(lo, hi) ----

/// Uniform integer in [ceil(lo), floor(hi)] drawn from a 64-bit Mersenne Twister by
/// rejection sampling (r < 2^64 - 2^64 mod span, value = lo + r mod span), so the
/// sequence is identical on every conforming standard library.
inline Rational builtin_random(const Rational& lo, const Rational& hi, std::mt19937_64& rng) {
    if (lo > hi) throw std::invalid_argument("random(" + to_string(lo) + ", " + to_string(hi) + "): empty interval");
    if (lo == hi) return lo;
    using boost::multiprecision::cpp_int;
    cpp_int first = numerator(lo) / denominator(lo);
    if (Rational(first) < lo) first += 1;
    cpp_int last = numerator(hi) / denominator(hi);
    if (Rational(last) > hi) last -= 1;
    if (first > last) throw std::invalid_argument("random(" + to_string(lo) + ", " + to_string(hi) + "): no integer in range");
    cpp_int span_big = last - first + 1;
    if (span_big > cpp_int(std::numeric_limits<std::uint64_t>::max()))
        throw std::invalid_argument("random interval too wide");
    auto span = span_big.convert_to<std::uint64_t>();
    std::uint64_t limit = span == 0 ? 0 : (0 - span) % span;  // 2^64 mod span
    std::uint64_t r;
    do r = rng();
    while (limit != 0 && r > std::numeric_limits<std::uint64_t>::max() - limit);
    return Rational(first + cpp_int(r % span));
}

}  // namespace hytccp
