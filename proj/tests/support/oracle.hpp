#pragma once

// Reference implementation of the transition rules, for tests only. Written by direct
// structural recursion over the rules with no bookkeeping and no simplification of the
// agent tree; configurations are compared through canonical_key.

#include "hytccp/semantics.hpp"

#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace oracle {

using namespace hytccp;

struct SizeCapExceeded : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline std::size_t tree_size(const Agent& a) {
    if (auto* p = a.as<Parallel>()) return 1 + tree_size(p->left) + tree_size(p->right);
    if (auto* h = a.as<Hide>()) return 1 + tree_size(h->body);
    if (auto* c = a.as<Choice>()) {
        std::size_t n = 1;
        for (const auto& b : c->asks) n += tree_size(b.body);
        return n;
    }
    if (auto* n = a.as<Now>()) return 1 + tree_size(n->then_branch) + tree_size(n->else_branch);
    return 1;
}

struct Change1 {
    std::string var;
    std::optional<Number> value;
    std::optional<Flow> flow;
};

struct Move {
    Agent agent;
    Constraint store;
    std::vector<Change1> changes;
};

// Hidden variables that are unbound in the view and appear only inside right-hand
// sides act as placeholders matched against the store.
inline std::set<std::string> placeholders(const std::vector<AtomicConstraint>& guard, const Constraint& view,
                                          const std::set<std::string>& hidden) {
    std::set<std::string> lhs, rhs;
    for (const auto& a : guard) {
        if (auto* eq = std::get_if<TermEq>(&a)) {
            lhs.insert(eq->var);
            eq->rhs.collect_vars(rhs);
        } else {
            lhs.insert(std::get<LinCmp>(a).var);
        }
    }
    std::set<std::string> out;
    for (const auto& v : rhs) {
        if (lhs.count(v) || !hidden.count(v)) continue;
        Term t = view.walk(Term::var(v));
        if (t.is_var() && t.name() == v) out.insert(v);
    }
    return out;
}

inline bool reads_continuous(const AtomicConstraint& a, const ContinuousStore& cont) {
    if (auto* c = std::get_if<LinCmp>(&a)) return cont.count(c->var) > 0;
    auto& eq = std::get<TermEq>(a);
    return cont.count(eq.var) > 0 && eq.rhs.kind() == TermKind::Num;
}

inline bool value_satisfies(const AtomicConstraint& a, const ContinuousStore& cont) {
    if (auto* c = std::get_if<LinCmp>(&a)) return holds(c->op, cont.at(c->var).value, c->bound);
    auto& eq = std::get<TermEq>(a);
    return holds(CmpOp::Eq, cont.at(eq.var).value, eq.rhs.value());
}

inline bool entailed(const std::vector<AtomicConstraint>& guard, const Constraint& view, const ContinuousStore& cont,
                     const std::set<std::string>& hidden) {
    std::vector<AtomicConstraint> disc;
    for (const auto& a : guard) {
        if (!reads_continuous(a, cont)) disc.push_back(a);
        else if (!value_satisfies(a, cont)) return false;
    }
    return entails(view, std::span<const AtomicConstraint>(disc), placeholders(disc, view, hidden));
}

inline Term lower_randoms(const Term& t) {
    if (t.kind() == TermKind::Random) return Term::num(t.random_lo());
    if (t.kind() == TermKind::Cons) return Term::cons(lower_randoms(t.head()), lower_randoms(t.tail()));
    return t;
}

struct Rules {
    const Program& program;
    const ContinuousStore& cont;
    NameSupply& names;

    std::vector<Move> moves(const Agent& a, const Constraint& d, const std::set<std::string>& hidden) {
        if (a.is<Stop>()) return {};
        if (auto* t = a.as<Tell>()) {
            Constraint c = d;
            for (const auto& at : t->atoms) {
                AtomicConstraint x = at;
                if (auto* eq = std::get_if<TermEq>(&at)) x = TermEq{eq->var, lower_randoms(eq->rhs)};
                c = conj(c, Constraint::of(std::vector<AtomicConstraint>{x}));
            }
            return {Move{Stop{}, c, {}}};
        }
        if (auto* p = a.as<Parallel>()) {
            auto l = moves(p->left, d, hidden), r = moves(p->right, d, hidden);
            std::vector<Move> out;
            if (!l.empty() && !r.empty()) {
                if (l.size() * r.size() > 100000) throw SizeCapExceeded("too many successors in one step");
                for (const auto& x : l)
                    for (const auto& y : r) {
                        Move m{Parallel{x.agent, y.agent}, conj(x.store, y.store), x.changes};
                        m.changes.insert(m.changes.end(), y.changes.begin(), y.changes.end());
                        out.push_back(std::move(m));
                    }
            } else {
                for (auto& x : l) out.push_back(Move{Parallel{x.agent, p->right}, x.store, x.changes});
                for (auto& y : r) out.push_back(Move{Parallel{p->left, y.agent}, y.store, y.changes});
            }
            return out;
        }
        if (auto* h = a.as<Hide>()) {
            std::span<const std::string> xs(h->vars);
            Constraint view = conj(h->local, hide(d, xs));
            std::set<std::string> inner = hidden;
            inner.insert(h->vars.begin(), h->vars.end());
            std::vector<Move> out;
            for (auto& m : moves(h->body, view, inner))
                out.push_back(Move{Hide{h->vars, m.agent, m.store}, conj(d, hide(m.store, xs)), m.changes});
            return out;
        }
        if (auto* c = a.as<Choice>()) {
            std::vector<Move> out;
            for (const auto& b : c->asks)
                if (entailed(b.guard, d, cont, hidden)) out.push_back(Move{b.body, d, {}});
            return out;
        }
        if (auto* n = a.as<Now>()) {
            const Agent& pick = entailed(n->guard, d, cont, hidden) ? n->then_branch : n->else_branch;
            auto inner = moves(pick, d, hidden);
            if (inner.empty()) return {Move{pick, d, {}}};
            return inner;
        }
        if (auto* c = a.as<Call>()) {
            std::vector<Move> out;
            for (const Declaration* decl : program.lookup(c->name, c->args.size())) {
                std::map<std::string, std::string> m;
                for (std::size_t i = 0; i < c->args.size(); ++i) m[decl->params[i]] = c->args[i];
                out.push_back(Move{rename_free(freshen_hidden(decl->body, names), m), d, {}});
            }
            return out;
        }
        const auto& ch = *a.as<Change>();
        Change1 c1{ch.var, std::nullopt, std::nullopt};
        if (ch.value) c1.value = Number(ch.value->eval(d));
        if (ch.flow) c1.flow = ch.flow->eval(d);
        return {Move{Stop{}, d, {c1}}};
    }
};

inline std::vector<Configuration> successors(const Configuration& cfg, const Program& program,
                                             std::size_t size_cap = 2000) {
    if (tree_size(cfg.agent) > size_cap) throw SizeCapExceeded("configuration over the oracle size cap");
    NameSupply names(configuration_names(cfg));
    Rules rules{program, cfg.cont, names};
    std::vector<Configuration> out;
    for (auto& m : rules.moves(cfg.agent, cfg.store, {})) {
        ContinuousStore c = cfg.cont;
        for (const auto& ch : m.changes) c = apply_change(std::move(c), ch.var, ch.value, ch.flow);
        out.push_back(Configuration{m.agent, m.store, std::move(c), cfg.clock});
    }
    return out;
}

// ---- time ----

struct Waiting {
    std::vector<std::vector<ContGuard>> invariants;  // one entry per choice with ask~
    std::vector<ContGuard> guards;
};

inline void waiting(const Agent& a, const Constraint& d, const ContinuousStore& cont,
                    const std::set<std::string>& hidden, Waiting& w) {
    if (a.is<Stop>()) return;
    if (auto* p = a.as<Parallel>()) {
        waiting(p->left, d, cont, hidden, w);
        waiting(p->right, d, cont, hidden, w);
        return;
    }
    if (auto* h = a.as<Hide>()) {
        std::set<std::string> inner = hidden;
        inner.insert(h->vars.begin(), h->vars.end());
        waiting(h->body, conj(h->local, hide(d, std::span<const std::string>(h->vars))), cont, inner, w);
        return;
    }
    auto* c = a.as<Choice>();
    if (!c) return;
    if (!c->invariants.empty()) w.invariants.push_back(c->invariants);
    for (const auto& b : c->asks) {
        std::vector<AtomicConstraint> disc, timed;
        for (const auto& at : b.guard) (reads_continuous(at, cont) ? timed : disc).push_back(at);
        if (timed.empty()) continue;
        if (entails(d, std::span<const AtomicConstraint>(disc), placeholders(disc, d, hidden))) w.guards.push_back(timed);
    }
}

inline bool only_stops(const Agent& a) {
    if (a.is<Stop>()) return true;
    if (auto* p = a.as<Parallel>()) return only_stops(p->left) && only_stops(p->right);
    if (auto* h = a.as<Hide>()) return only_stops(h->body);
    return false;
}

/// Earliest-event delay of a configuration with no discrete move, or nothing when time
/// cannot usefully pass (all stopped, suspended for good, or timelocked).
inline std::optional<Number> delay(const Configuration& cfg, const Number& horizon) {
    Waiting w;
    waiting(cfg.agent, cfg.store, cfg.cont, {}, w);
    if (w.invariants.empty()) {
        if (only_stops(cfg.agent)) return std::nullopt;
        bool later = false;
        for (const auto& g : w.guards)
            for (const auto& iv : truth_set(std::span<const AtomicConstraint>(g), cfg.cont))
                if (compare(iv.lo, Number(0)) > 0) later = true;
        if (!later) return std::nullopt;
    }
    auto d = max_delay_groups(w.invariants, w.guards, cfg.cont, horizon);
    if (d.timelock) return std::nullopt;
    return d.tau;
}

inline std::vector<Configuration> step_or_wait(const Configuration& cfg, const Program& program, const Number& horizon,
                                               std::size_t samples) {
    auto out = successors(cfg, program);
    if (!out.empty()) return out;
    auto tau = delay(cfg, horizon);
    if (!tau) return out;
    for (std::size_t k = 0; k <= samples; ++k) {
        Number t = k == 0 ? *tau : *tau * Number(Rational(k, samples + 1));
        out.push_back(Configuration{cfg.agent, cfg.store, evolve(cfg.cont, t), cfg.clock + t});
    }
    return out;
}

/// Canonical keys of every configuration reachable in at most `depth` steps.
inline std::set<std::string> reachable(const Program& program, std::size_t depth, std::size_t samples = 0,
                                       const Number& horizon = Number(3600), std::size_t state_cap = 20000) {
    Configuration init = initial_configuration(program);
    std::set<std::string> seen{canonical_key(init)};
    std::vector<Configuration> frontier{init};
    for (std::size_t d = 0; d < depth; ++d) {
        std::vector<Configuration> next;
        for (const auto& c : frontier)
            for (auto& n : step_or_wait(c, program, horizon, samples))
                if (seen.insert(canonical_key(n)).second) {
                    if (seen.size() > state_cap) throw SizeCapExceeded("more reachable states than the oracle cap");
                    next.push_back(std::move(n));
                }
        frontier = std::move(next);
    }
    return seen;
}

}  // namespace oracle
