#pragma once

// Transition engine over configurations <A, c, c~> plus the global clock: the discrete
// step relation (tell, choice, now, parallel, hiding, call, change) and time passage.

#include "hytccp/ast.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace hytccp {

struct Configuration {
    Agent agent;
    Constraint store = Constraint::top();
    ContinuousStore cont;
    Number clock{0};
};

struct ChoiceRecord {
    std::string site;  // path from the root: L/R parallel, H hide body, T/E now branches
    std::size_t picked = 0;
    std::size_t alternatives = 0;
    std::string guard;
};

struct AppliedChange {
    std::string var;
    std::optional<Number> value;
    std::optional<Flow> flow;
};

struct StepContext {
    const Program* program = nullptr;
    // Draw for random(lo, hi); when empty the lower bound is used.
    std::function<Rational(const Rational&, const Rational&)> random;
    // Maximal parallelism multiplies the alternatives of the two sides; past this many
    // successors of one step the program is rejected rather than enumerated.
    std::size_t fanout_cap = 100000;
    // Recursion such as p :- p || p doubles the agent every step; past this many nodes
    // the program is rejected.
    std::size_t agent_size_cap = 100000;
};

// The program needs more than the engine is willing to enumerate; not a model property.
struct ResourceLimit : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct FanoutExceeded : ResourceLimit {
    using ResourceLimit::ResourceLimit;
};
struct AgentTooLarge : ResourceLimit {
    using ResourceLimit::ResourceLimit;
};

/// Number of nodes in the agent tree, counting shared subtrees once per occurrence.
/// Stops counting past `cap`.
inline std::size_t agent_size(const Agent& a, std::size_t cap = SIZE_MAX) {
    std::size_t n = 0;
    std::vector<const Agent*> todo{&a};
    while (!todo.empty() && n <= cap) {
        const Agent* x = todo.back();
        todo.pop_back();
        ++n;
        if (auto* p = x->as<Parallel>()) {
            todo.push_back(&p->left);
            todo.push_back(&p->right);
        } else if (auto* h = x->as<Hide>()) {
            todo.push_back(&h->body);
        } else if (auto* c = x->as<Choice>()) {
            for (const auto& b : c->asks) todo.push_back(&b.body);
        } else if (auto* nw = x->as<Now>()) {
            todo.push_back(&nw->then_branch);
            todo.push_back(&nw->else_branch);
        }
    }
    return n;
}

struct Successor {
    Configuration next;
    std::vector<ChoiceRecord> choices;
    std::vector<std::string> told;
    std::vector<AppliedChange> changes;
};

/// Every name occurring in the configuration, reserved before hidden variables are renamed.
inline std::set<std::string> configuration_names(const Configuration& cfg) {
    std::set<std::string> out = cfg.store.vars();
    all_vars(cfg.agent, out);
    for (const auto& [v, e] : cfg.cont) out.insert(v);
    return out;
}

/// Initial configuration: hidden variables renamed apart from the free ones.
inline Configuration initial_configuration(const Program& p) {
    NameSupply names;
    for (const auto& v : free_vars(p.initial)) names.reserve(v);
    Configuration cfg;
    cfg.agent = freshen_hidden(p.initial, names);
    return cfg;
}

// ---- guards ----

/// Atoms that are read from the continuous store: comparisons and numeric equations on
/// variables that have a continuous entry.
inline bool is_continuous_atom(const AtomicConstraint& a, const ContinuousStore& cont) {
    if (auto* c = std::get_if<LinCmp>(&a)) return cont.count(c->var) > 0;
    const auto& eq = std::get<TermEq>(a);
    return eq.rhs.kind() == TermKind::Num && cont.count(eq.var) > 0;
}

struct SplitGuard {
    std::vector<AtomicConstraint> discrete, continuous;
};

inline SplitGuard split_guard(const std::vector<AtomicConstraint>& guard, const ContinuousStore& cont) {
    SplitGuard out;
    for (const auto& a : guard) (is_continuous_atom(a, cont) ? out.continuous : out.discrete).push_back(a);
    return out;
}

/// Enclosing hidden variables that act as match placeholders in `guard`: unbound in the
/// visible store and used only on right-hand sides of equations.
inline std::set<std::string> pattern_locals(const std::vector<AtomicConstraint>& guard, const Constraint& view,
                                            const std::set<std::string>& hidden) {
    std::set<std::string> rhs, pinned;
    for (const auto& a : guard) {
        if (auto* eq = std::get_if<TermEq>(&a)) {
            pinned.insert(eq->var);
            eq->rhs.collect_vars(rhs);
        } else {
            pinned.insert(std::get<LinCmp>(a).var);
        }
    }
    std::set<std::string> out;
    for (const auto& v : rhs) {
        if (!hidden.count(v) || pinned.count(v)) continue;
        Term w = view.walk(Term::var(v));
        if (w.is_var() && w.name() == v) out.insert(v);
    }
    return out;
}

/// Discrete atoms by entailment, continuous atoms against the current values.
inline bool guard_holds(const std::vector<AtomicConstraint>& guard, const Constraint& view, const ContinuousStore& cont,
                        const std::set<std::string>& hidden) {
    auto split = split_guard(guard, cont);
    if (!entails(view, std::span<const AtomicConstraint>(split.discrete), pattern_locals(split.discrete, view, hidden)))
        return false;
    return split.continuous.empty() || eval_cont_atoms(std::span<const AtomicConstraint>(split.continuous), snapshot(cont));
}

// ---- discrete steps ----

namespace detail {

struct Partial {
    Agent agent;
    Constraint store;
    std::vector<ChoiceRecord> choices;
    std::vector<std::string> told;
    std::vector<AppliedChange> changes;
};

inline std::string child(const std::string& path, const char* step) { return path.empty() ? step : path + "." + step; }

inline Term draw_randoms(const Term& t, const StepContext& ctx) {
    switch (t.kind()) {
        case TermKind::Random:
            return Term::num(ctx.random ? ctx.random(t.random_lo(), t.random_hi()) : t.random_lo());
        case TermKind::Cons: return Term::cons(draw_randoms(t.head(), ctx), draw_randoms(t.tail(), ctx));
        default: return t;
    }
}

// Finished parts are dropped as the agent steps: stop || A is A, and a hiding agent
// whose body has stopped has already published everything it will.
inline bool finished(const Agent& a) {
    if (a.is<Stop>()) return true;
    auto* h = a.as<Hide>();
    return h && h->body.is<Stop>();
}

inline Agent par(const Agent& l, const Agent& r) {
    if (finished(l)) return finished(r) ? Agent() : r;
    if (finished(r)) return l;
    return Parallel{l, r};
}

// Names the running part of an agent still depends on: its free names and whatever
// the local stores of inner hiding agents mention. Inner local stores copy the
// enclosing view, and those copies are what later publications are matched against.
inline void live_names(const Agent& a, std::set<std::string>& out) {
    if (auto* p = a.as<Parallel>()) {
        live_names(p->left, out);
        live_names(p->right, out);
    } else if (auto* h = a.as<Hide>()) {
        auto local = h->local.vars();
        out.insert(local.begin(), local.end());
        std::set<std::string> inner;
        live_names(h->body, inner);
        for (const auto& v : h->vars) inner.erase(v);
        out.insert(inner.begin(), inner.end());
    } else {
        auto fv = free_vars(a);
        out.insert(fv.begin(), fv.end());
    }
}

// Projects names out of every local store in the running part of an agent.
inline Agent project_locals(const Agent& a, std::span<const std::string> names) {
    if (auto* p = a.as<Parallel>()) return Parallel{project_locals(p->left, names), project_locals(p->right, names)};
    if (auto* h = a.as<Hide>()) return Hide{h->vars, project_locals(h->body, names), hide(h->local, names)};
    return a;
}

// exists X (exists Y A) with one local store; hidden names are globally fresh, so Y
// never occurs in the outer store or the global one and the two views coincide.
// A hidden name nothing inside depends on any more is projected out of the local
// store: nothing left can ask about it, and the published part is the same.
// `everywhere` (keys only) also drops names that only inner local stores still
// mention, projecting them out of those stores as well.
inline Hide nest(std::vector<std::string> vars, const Agent& body, Constraint local, bool everywhere = false) {
    Agent inner = body;
    if (auto* in = body.as<Hide>()) {
        vars.insert(vars.end(), in->vars.begin(), in->vars.end());
        local = conj(local, in->local);
        inner = in->body;
    }
    std::set<std::string> live;
    if (everywhere) live = free_vars(inner);
    else live_names(inner, live);
    std::vector<std::string> kept, dead;
    for (auto& v : vars) (live.count(v) ? kept : dead).push_back(std::move(v));
    if (!dead.empty()) {
        local = hide(local, std::span<const std::string>(dead));
        if (everywhere) inner = project_locals(inner, dead);
    }
    return Hide{std::move(kept), inner, std::move(local)};
}

template <class T>
void append(std::vector<T>& to, const std::vector<T>& from) {
    to.insert(to.end(), from.begin(), from.end());
}

class Stepper {
public:
    Stepper(const StepContext& ctx, const ContinuousStore& cont, NameSupply& names)
        : ctx_(ctx), cont_(cont), names_(names) {}

    std::vector<Partial> step(const Agent& a, const Constraint& d, const std::set<std::string>& hidden,
                              const std::string& path) {
        if (a.is<Stop>()) return {};
        if (auto* t = a.as<Tell>()) return tell(*t, d);
        if (auto* p = a.as<Parallel>()) return parallel(*p, d, hidden, path);
        if (auto* h = a.as<Hide>()) return hide_rule(*h, d, hidden, path);
        if (auto* c = a.as<Choice>()) return choice(*c, d, hidden, path);
        if (auto* n = a.as<Now>()) return now(*n, d, hidden, path);
        if (auto* c = a.as<Call>()) return call(*c, d, path);
        return change(*a.as<Change>(), d);
    }

private:
    std::vector<Partial> tell(const Tell& t, const Constraint& d) {
        std::vector<AtomicConstraint> atoms;
        for (const auto& a : t.atoms) {
            if (auto* eq = std::get_if<TermEq>(&a)) atoms.push_back(TermEq{eq->var, draw_randoms(eq->rhs, ctx_)});
            else atoms.push_back(a);
        }
        Constraint told = Constraint::of(std::span<const AtomicConstraint>(atoms));
        return {Partial{Stop{}, conj(d, told), {}, {to_string(std::span<const AtomicConstraint>(atoms))}, {}}};
    }

    std::vector<Partial> parallel(const Parallel& p, const Constraint& d, const std::set<std::string>& hidden,
                                  const std::string& path) {
        auto left = step(p.left, d, hidden, child(path, "L"));
        auto right = step(p.right, d, hidden, child(path, "R"));
        std::vector<Partial> out;
        if (left.empty()) {
            for (auto& r : right) out.push_back(Partial{par(p.left, r.agent), r.store, r.choices, r.told, r.changes});
        } else if (right.empty()) {
            for (auto& l : left) out.push_back(Partial{par(l.agent, p.right), l.store, l.choices, l.told, l.changes});
        } else {
            if (left.size() * right.size() > ctx_.fanout_cap)
                throw FanoutExceeded("one step has more than " + std::to_string(ctx_.fanout_cap) +
                                     " successors (maximal parallelism over nondeterministic branches)");
            // Maximal parallelism: both sides move, stores are merged.
            for (const auto& l : left)
                for (const auto& r : right) {
                    Partial m{par(l.agent, r.agent), conj(l.store, r.store), l.choices, l.told, l.changes};
                    append(m.choices, r.choices);
                    append(m.told, r.told);
                    append(m.changes, r.changes);
                    out.push_back(std::move(m));
                }
        }
        return out;
    }

    std::vector<Partial> hide_rule(const Hide& h, const Constraint& d, const std::set<std::string>& hidden,
                                   const std::string& path) {
        Constraint view = conj(h.local, hide(d, std::span<const std::string>(h.vars)));
        std::set<std::string> inner = hidden;
        inner.insert(h.vars.begin(), h.vars.end());
        std::vector<Partial> out;
        for (auto& s : step(h.body, view, inner, child(path, "H"))) {
            Constraint pub = conj(d, hide(s.store, std::span<const std::string>(h.vars)));
            out.push_back(Partial{nest(h.vars, s.agent, s.store), pub, std::move(s.choices), std::move(s.told),
                                  std::move(s.changes)});
        }
        return out;
    }

    std::vector<Partial> choice(const Choice& c, const Constraint& d, const std::set<std::string>& hidden,
                                const std::string& path) {
        std::vector<Partial> out;
        for (std::size_t j = 0; j < c.asks.size(); ++j) {
            const auto& b = c.asks[j];
            if (!guard_holds(b.guard, d, cont_, hidden)) continue;
            ChoiceRecord rec{path.empty() ? "." : path, j, c.asks.size(), guard_str(b.guard)};
            out.push_back(Partial{b.body, d, {rec}, {}, {}});
        }
        return out;
    }

    std::vector<Partial> now(const Now& n, const Constraint& d, const std::set<std::string>& hidden,
                             const std::string& path) {
        bool holds = guard_holds(n.guard, d, cont_, hidden);
        const Agent& branch = holds ? n.then_branch : n.else_branch;
        auto inner = step(branch, d, hidden, child(path, holds ? "T" : "E"));
        if (inner.empty()) return {Partial{branch, d, {}, {}, {}}};
        return inner;
    }

    std::vector<Partial> call(const Call& c, const Constraint& d, const std::string& path) {
        if (!ctx_.program) throw std::logic_error("call to '" + c.name + "' without a program");
        auto decls = ctx_.program->lookup(c.name, c.args.size());
        if (decls.empty()) throw std::runtime_error("no declaration for " + c.name + "/" + std::to_string(c.args.size()));
        std::vector<Partial> out;
        for (std::size_t k = 0; k < decls.size(); ++k) {
            Agent body = freshen_hidden(decls[k]->body, names_);
            std::map<std::string, std::string> m;
            for (std::size_t i = 0; i < c.args.size(); ++i)
                if (decls[k]->params[i] != c.args[i]) m[decls[k]->params[i]] = c.args[i];
            Partial p{rename_free(body, m), d, {}, {}, {}};
            if (decls.size() > 1) p.choices.push_back(ChoiceRecord{path.empty() ? "." : path, k, decls.size(), c.name});
            out.push_back(std::move(p));
        }
        return out;
    }

    std::vector<Partial> change(const Change& c, const Constraint& d) {
        AppliedChange ch{c.var, std::nullopt, std::nullopt};
        if (c.value) ch.value = Number(c.value->eval(d));
        if (c.flow) ch.flow = c.flow->eval(d);
        return {Partial{Stop{}, d, {}, {}, {ch}}};
    }

    const StepContext& ctx_;
    const ContinuousStore& cont_;
    NameSupply& names_;
};

}  // namespace detail

/// All configurations reachable by one instantaneous step, in AST order (left before
/// right, ask branches and declarations in source order).
inline std::vector<Successor> discrete_successors(const Configuration& cfg, const StepContext& ctx) {
    NameSupply names(configuration_names(cfg));
    detail::Stepper stepper(ctx, cfg.cont, names);
    std::vector<Successor> out;
    for (auto& p : stepper.step(cfg.agent, cfg.store, {}, "")) {
        if (agent_size(p.agent, ctx.agent_size_cap) > ctx.agent_size_cap)
            throw AgentTooLarge("agent grew past " + std::to_string(ctx.agent_size_cap) + " nodes at t=" +
                                cfg.clock.str() + " (recursion multiplying parallel calls)");
        ContinuousStore cont = cfg.cont;
        // Changes made in one step apply in AST order; a later change of the same
        // variable overrides an earlier one.
        for (const auto& ch : p.changes) cont = apply_change(std::move(cont), ch.var, ch.value, ch.flow);
        out.push_back(Successor{Configuration{p.agent, p.store, std::move(cont), cfg.clock}, std::move(p.choices),
                                std::move(p.told), std::move(p.changes)});
    }
    return out;
}

/// Hiding rule in isolation: steps `body` under l /\ exists x d and returns the new
/// body, the new local store and the increment published to the global store.
struct HideStep {
    Agent body;
    Constraint local;
    Constraint published;
};

inline std::vector<HideStep> hide_step(const Constraint& local, const std::vector<std::string>& vars, const Agent& body,
                                       const Constraint& d, const ContinuousStore& cont, const StepContext& ctx) {
    NameSupply names(configuration_names(Configuration{Hide{vars, body, local}, d, cont, Number(0)}));
    detail::Stepper stepper(ctx, cont, names);
    Constraint view = conj(local, hide(d, std::span<const std::string>(vars)));
    std::vector<HideStep> out;
    for (auto& s : stepper.step(body, view, std::set<std::string>(vars.begin(), vars.end()), "H"))
        out.push_back(HideStep{s.agent, s.store, hide(s.store, std::span<const std::string>(vars))});
    return out;
}

// ---- time passage ----

/// What a quiescent agent contributes to time passage: one invariant group per choice
/// with ask~ branches, and the continuous part of every ask guard whose discrete part is
/// already entailed (time may enable it).
struct WaitingSet {
    std::vector<std::vector<ContGuard>> groups;
    std::vector<ContGuard> guards;
    std::vector<std::string> group_sites, guard_sites;
    bool all_stop = true;
    bool idles = true;  // false when some component can only move discretely
};

namespace detail {

inline void collect_waiting(const Agent& a, const Constraint& d, const ContinuousStore& cont,
                            const std::set<std::string>& hidden, const std::string& path, WaitingSet& w) {
    if (a.is<Stop>()) return;
    if (auto* p = a.as<Parallel>()) {
        collect_waiting(p->left, d, cont, hidden, child(path, "L"), w);
        collect_waiting(p->right, d, cont, hidden, child(path, "R"), w);
        return;
    }
    if (auto* h = a.as<Hide>()) {
        Constraint view = conj(h->local, hide(d, std::span<const std::string>(h->vars)));
        std::set<std::string> inner = hidden;
        inner.insert(h->vars.begin(), h->vars.end());
        collect_waiting(h->body, view, cont, inner, child(path, "H"), w);
        return;
    }
    w.all_stop = false;
    auto* c = a.as<Choice>();
    if (!c) {
        w.idles = false;
        return;
    }
    std::string site = path.empty() ? "." : path;
    if (!c->invariants.empty()) {
        w.groups.push_back(c->invariants);
        w.group_sites.push_back(site);
    }
    for (const auto& b : c->asks) {
        auto split = split_guard(b.guard, cont);
        if (split.continuous.empty()) continue;
        auto locals = pattern_locals(split.discrete, d, hidden);
        if (!entails(d, std::span<const AtomicConstraint>(split.discrete), locals)) continue;
        w.guards.push_back(split.continuous);
        w.guard_sites.push_back(site);
    }
}

}  // namespace detail

inline WaitingSet waiting_set(const Configuration& cfg) {
    WaitingSet w;
    detail::collect_waiting(cfg.agent, cfg.store, cfg.cont, {}, "", w);
    return w;
}

enum class Quiescence { AllStop, Suspended, Timelock, InstantDivergence };

inline const char* to_string(Quiescence q) {
    switch (q) {
        case Quiescence::AllStop: return "all-stop";
        case Quiescence::Suspended: return "suspended";
        case Quiescence::Timelock: return "timelock";
        case Quiescence::InstantDivergence: return "instant-divergence";
    }
    return "?";
}

/// Decision for a configuration with no discrete successor: either a delay to advance
/// by, or the reason time cannot (usefully) pass.
struct TimePlan {
    std::optional<DelayOutcome> delay;
    std::optional<Quiescence> stuck;
};

/// True when some watched guard becomes true strictly after now.
inline bool some_guard_enables(const WaitingSet& w, const ContinuousStore& cont) {
    for (const auto& g : w.guards) {
        TruthSet ts = truth_set(std::span<const AtomicConstraint>(g), cont);
        for (const auto& iv : ts)
            if (compare(iv.lo, Number(0)) > 0) return true;
    }
    return false;
}

inline TimePlan plan_time_step(const Configuration& cfg, const Number& horizon) {
    WaitingSet w = waiting_set(cfg);
    if (!w.idles) throw std::logic_error("time step requested while a component can still move");
    if (w.groups.empty()) {
        if (w.all_stop) return {std::nullopt, Quiescence::AllStop};
        if (!some_guard_enables(w, cfg.cont)) return {std::nullopt, Quiescence::Suspended};
    }
    DelayOutcome d = max_delay_groups(w.groups, w.guards, cfg.cont, horizon);
    if (d.timelock) return {std::nullopt, Quiescence::Timelock};
    return {d, std::nullopt};
}

/// Time passes by tau for every component at once; agent and discrete store are kept.
inline Configuration continuous_step(const Configuration& cfg, const Number& tau) {
    if (compare(tau, Number(0)) <= 0) throw std::logic_error("continuous step needs tau > 0");
    return Configuration{cfg.agent, cfg.store, evolve(cfg.cont, tau), cfg.clock + tau};
}

/// More than `budget` consecutive instantaneous steps (first successor each time).
inline bool detect_instant_divergence(Configuration cfg, std::size_t budget, const StepContext& ctx) {
    for (std::size_t n = 0;; ++n) {
        auto next = discrete_successors(cfg, ctx);
        if (next.empty()) return false;
        if (n + 1 > budget) return true;
        cfg = std::move(next.front().next);
    }
}

// ---- configuration equality ----

namespace detail {

// Names produced by renaming (x#k) or projection (?x) are not observable; hidden
// variables are renamed by position and anonymous ones by first use.
class Canonicalizer {
public:
    std::string agent(const Agent& a) {
        if (a.is<Stop>()) return "stop";
        if (auto* t = a.as<Tell>()) return "tell(" + atoms(t->atoms) + ")";
        if (auto* p = a.as<Parallel>()) return "(" + agent(p->left) + " || " + agent(p->right) + ")";
        if (auto* h = a.as<Hide>()) {
            std::string out = "exists ";
            for (std::size_t i = 0; i < h->vars.size(); ++i) out += (i ? "," : "") + var(h->vars[i]);
            return out + " @{" + store(h->local) + "} (" + agent(h->body) + ")";
        }
        if (auto* c = a.as<Choice>()) {
            std::string out = "choice(";
            for (const auto& b : c->asks) out += "ask(" + atoms(b.guard) + ") -> " + agent(b.body) + " + ";
            for (const auto& inv : c->invariants) out += "ask~(" + atoms(inv) + ") + ";
            return out + ")";
        }
        if (auto* n = a.as<Now>())
            return "now(" + atoms(n->guard) + ") then " + agent(n->then_branch) + " else " + agent(n->else_branch);
        if (auto* c = a.as<Call>()) {
            std::string out = c->name + "(";
            for (std::size_t i = 0; i < c->args.size(); ++i) out += (i ? "," : "") + var(c->args[i]);
            return out + ")";
        }
        const auto& ch = *a.as<Change>();
        std::string out = "change(" + var(ch.var) + ",";
        out += ch.value ? expr(*ch.value) : "_";
        out += ",";
        out += ch.flow ? expr(ch.flow->a) + "+" + to_string(ch.flow->b) + "*x" : "_";
        return out + ")";
    }

    /// Reachable part of a store, printed from the observable roots. Aliased roots print
    /// as one class regardless of which way the binding points.
    std::string store(const Constraint& c) {
        if (!c.consistent()) return "false";
        std::vector<std::pair<std::string, std::string>> roots;  // (canonical, actual)
        for (const auto& v : c.vars())
            if (observable(v)) roots.emplace_back(var(v), v);
        std::sort(roots.begin(), roots.end());
        std::map<std::string, std::string> cls;
        for (const auto& [canon, v] : roots) {
            Term w = c.walk(Term::var(v));
            if (w.is_var()) cls.emplace(w.name(), canon);
        }
        std::vector<std::string> lines;
        std::set<std::string> reached;
        for (const auto& [canon, v] : roots) {
            Term w = c.walk(Term::var(v));
            if (!w.is_var()) lines.push_back(canon + "=" + term(c.resolve(w), c, cls, reached));
            else if (cls.at(w.name()) != canon) lines.push_back(cls.at(w.name()) + "~" + canon);
        }
        for (const auto& cmp : c.comparisons()) {
            if (auto it = cls.find(cmp.var); it != cls.end())
                lines.push_back(it->second + to_string(cmp.op) + to_string(cmp.bound));
            else if (reached.count(cmp.var))
                lines.push_back(var(cmp.var) + to_string(cmp.op) + to_string(cmp.bound));
        }
        std::sort(lines.begin(), lines.end());
        std::string out;
        for (const auto& l : lines) out += (out.empty() ? "" : ", ") + l;
        return out;
    }

    /// Hidden variables are numbered in pre-order before anything is printed.
    void number_hidden(const Agent& a) {
        if (auto* p = a.as<Parallel>()) {
            number_hidden(p->left);
            number_hidden(p->right);
        } else if (auto* h = a.as<Hide>()) {
            for (const auto& v : h->vars) names_[v] = "#" + std::to_string(++hidden_);
            number_hidden(h->body);
        } else if (auto* c = a.as<Choice>()) {
            for (const auto& b : c->asks) number_hidden(b.body);
        } else if (auto* n = a.as<Now>()) {
            number_hidden(n->then_branch);
            number_hidden(n->else_branch);
        }
    }

    std::string var(const std::string& v) {
        if (auto it = names_.find(v); it != names_.end()) return it->second;
        if (!v.empty() && v[0] == '?') {
            if (auto it = names_.find(v.substr(1)); it != names_.end()) return "?" + it->second;
            return names_[v] = "?" + std::to_string(++anon_);
        }
        if (v.find('#') != std::string::npos) return names_[v] = "$" + std::to_string(++anon_);
        return v;
    }

private:
    bool observable(const std::string& v) const {
        if (names_.count(v) && names_.at(v)[0] == '#') return true;
        if (v.empty() || v[0] == '?') return false;
        return v.find('#') == std::string::npos;
    }
    std::string term(const Term& t, const Constraint& c, const std::map<std::string, std::string>& cls,
                     std::set<std::string>& reached) {
        switch (t.kind()) {
            case TermKind::Var: {
                Term w = c.walk(t);
                if (!w.is_var()) return term(c.resolve(w), c, cls, reached);
                reached.insert(w.name());
                if (auto it = cls.find(w.name()); it != cls.end()) return it->second;
                return var(w.name());
            }
            case TermKind::Cons:
                return "[" + term(t.head(), c, cls, reached) + "|" + term(t.tail(), c, cls, reached) + "]";
            default: return t.str();
        }
    }
    std::string atoms(const std::vector<AtomicConstraint>& as) {
        std::string out;
        for (const auto& a : as) {
            if (!out.empty()) out += ", ";
            if (auto* eq = std::get_if<TermEq>(&a)) out += var(eq->var) + "=" + plain_term(eq->rhs);
            else {
                const auto& c = std::get<LinCmp>(a);
                out += var(c.var) + to_string(c.op) + to_string(c.bound);
            }
        }
        return out;
    }
    std::string plain_term(const Term& t) {
        switch (t.kind()) {
            case TermKind::Var: return var(t.name());
            case TermKind::Cons: return "[" + plain_term(t.head()) + "|" + plain_term(t.tail()) + "]";
            default: return t.str();
        }
    }
    std::string expr(const AffineExpr& e) {
        std::string out = to_string(e.constant);
        for (const auto& [v, k] : e.coeffs) out += "+" + to_string(k) + "*" + var(v);
        return out;
    }

    std::map<std::string, std::string> names_;
    int hidden_ = 0, anon_ = 0;
};

}  // namespace detail

/// Structural congruence applied everywhere in the running part of an agent: the
/// simplifications the step relation makes on the parts that move, plus projecting
/// hidden names no agent mentions out of every local store, so that the key does not
/// depend on when a name stopped being used.
inline Agent normal_form(const Agent& a) {
    if (auto* p = a.as<Parallel>()) return detail::par(normal_form(p->left), normal_form(p->right));
    if (auto* h = a.as<Hide>()) {
        Hide n = detail::nest(h->vars, normal_form(h->body), h->local, true);
        if (n.body.is<Stop>()) return Stop{};
        return n;
    }
    return a;
}

/// Key identifying a configuration up to renaming of hidden and generated variables and
/// the structural congruence of normal_form.
inline std::string canonical_key(const Configuration& cfg) {
    detail::Canonicalizer canon;
    Agent agent = normal_form(cfg.agent);
    canon.number_hidden(agent);
    std::string a = canon.agent(agent);
    std::string out = a + " | " + canon.store(cfg.store) + " |";
    for (const auto& [v, e] : cfg.cont) out += " " + canon.var(v) + ":" + e.value.str() + "," + e.flow.str();
    return out + " | t=" + cfg.clock.str();
}

}  // namespace hytccp
