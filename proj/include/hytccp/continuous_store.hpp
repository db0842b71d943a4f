#pragma once

// Values and flows of continuous variables: closed-form evolution of x' = a + b*x and
// event detection on the (monotone) trajectories.

#include "hytccp/constraint.hpp"
#include "hytccp/number.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hytccp {

/// x' = a + b*x
struct Flow {
    Rational a;
    Rational b;
    friend bool operator==(const Flow&, const Flow&) = default;
    std::string str() const { return to_string(a) + "+" + to_string(b) + "*x"; }
};

struct ContinuousEntry {
    Number value;
    Flow flow;
};

using ContinuousStore = std::map<std::string, ContinuousEntry>;

inline bool identical(const ContinuousStore& s, const ContinuousStore& t) {
    if (s.size() != t.size()) return false;
    for (auto i = s.begin(), j = t.begin(); i != s.end(); ++i, ++j)
        if (i->first != j->first || !i->second.value.identical(j->second.value) || !(i->second.flow == j->second.flow))
            return false;
    return true;
}

inline std::map<std::string, Number> snapshot(const ContinuousStore& s) {
    std::map<std::string, Number> out;
    for (const auto& [k, e] : s) out.emplace(k, e.value);
    return out;
}

struct ChangeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Componentwise update of one entry; nullopt keeps the current component.
inline ContinuousStore apply_change(ContinuousStore store, const std::string& x, const std::optional<Number>& value,
                                    const std::optional<Flow>& flow) {
    auto it = store.find(x);
    if (it == store.end()) {
        if (!value || !flow)
            throw ChangeError("uninitialized continuous variable '" + x + "': change(" + x +
                              ", ...) keeps a component it does not have yet");
        store.emplace(x, ContinuousEntry{*value, *flow});
        return store;
    }
    if (value) it->second.value = *value;
    if (flow) it->second.flow = *flow;
    return store;
}

/// Closed-form solution at time t of x' = a + b*x, x(0) = v0. Exact when b = 0 and the
/// inputs are exact.
inline Number solve_flow(const Number& v0, const Flow& f, const Number& t) {
    if (f.b == 0) return v0 + Number(f.a) * t;
    if (t.exact() && t.rational() == 0) return v0;
    double b = to_double(f.b), a = to_double(f.a), x0 = v0.to_double(), dt = t.to_double();
    double shift = a / b;
    return Number::inexact(x0 + (x0 + shift) * std::expm1(b * dt));
}

inline ContinuousStore evolve(const ContinuousStore& store, const Number& t) {
    ContinuousStore out;
    for (const auto& [k, e] : store) out.emplace_hint(out.end(), k, ContinuousEntry{solve_flow(e.value, e.flow, t), e.flow});
    return out;
}

/// Sign of x'(0); constant along the trajectory because the equilibrium -a/b is never crossed.
inline int trend(const Number& v0, const Flow& f) {
    return compare(Number(f.a) + Number(f.b) * v0, Number(0));
}

/// Earliest t >= 0 with x(t) = target, if the trajectory ever gets there.
inline std::optional<Number> time_to_reach(const Number& v0, const Flow& f, const Rational& target) {
    int c0 = compare(v0, Number(target));
    if (c0 == 0) return Number(0);
    int dir = trend(v0, f);
    if (dir == 0 || dir == c0) return std::nullopt;
    if (f.b == 0) return (Number(target) - v0) / Number(f.a);
    double a = to_double(f.a), b = to_double(f.b), shift = a / b;
    double ratio = (to_double(target) + shift) / (v0.to_double() + shift);
    if (!(ratio > 0)) return std::nullopt;
    double t = std::log(ratio) / b;
    if (!(t >= 0) || !std::isfinite(t)) return std::nullopt;
    // Guarded bisection around the logarithm to tighten the root of x(t) - target.
    auto g = [&](double s) { return solve_flow(v0, f, Number::inexact(s)).to_double() - to_double(target); };
    double lo = std::max(0.0, t - 1e-9 * std::max(1.0, t)), hi = t + 1e-9 * std::max(1.0, t);
    double glo = g(lo), ghi = g(hi);
    if (glo == 0) return Number::inexact(lo);
    if (ghi == 0) return Number::inexact(hi);
    if ((glo < 0) != (ghi < 0)) {
        for (int i = 0; i < 200 && hi - lo > 1e-12; ++i) {
            double mid = 0.5 * (lo + hi);
            if (mid <= lo || mid >= hi) break;
            double gm = g(mid);
            if ((gm < 0) == (glo < 0)) lo = mid, glo = gm;
            else hi = mid;
        }
        t = 0.5 * (lo + hi);
    }
    return Number::inexact(t);
}

/// A time interval inside [0, inf).
struct TimeInterval {
    Number lo;
    bool lo_open = false;
    std::optional<Number> hi;  // nullopt: unbounded
    bool hi_open = false;

    bool contains_zero() const { return !lo_open && lo == Number(0); }
    bool empty() const {
        if (!hi) return false;
        int c = compare(lo, *hi);
        return c > 0 || (c == 0 && (lo_open || hi_open));
    }
};

using TruthSet = std::vector<TimeInterval>;

/// Times at which `x op bound` holds along the trajectory from v0.
inline TruthSet truth_set(const Number& v0, const Flow& f, CmpOp op, const Rational& bound) {
    const TimeInterval all{Number(0), false, std::nullopt, false};
    int c0 = compare(v0, Number(bound));
    int dir = trend(v0, f);
    if (dir == 0) return holds(op, c0) ? TruthSet{all} : TruthSet{};
    // Normalize to an increasing trajectory by mirroring the comparison.
    if (dir < 0) {
        c0 = -c0;
        switch (op) {
            case CmpOp::Lt: op = CmpOp::Gt; break;
            case CmpOp::Le: op = CmpOp::Ge; break;
            case CmpOp::Gt: op = CmpOp::Lt; break;
            case CmpOp::Ge: op = CmpOp::Le; break;
            default: break;
        }
    }
    std::optional<Number> tc;
    if (c0 <= 0) tc = time_to_reach(v0, f, bound);
    if (c0 == 0) tc = Number(0);
    auto from = [](Number lo, bool open) { return TimeInterval{std::move(lo), open, std::nullopt, false}; };
    auto upto = [](Number hi, bool open) { return TimeInterval{Number(0), false, std::move(hi), open}; };
    switch (op) {
        case CmpOp::Lt:
            if (c0 >= 0) return {};
            return tc ? TruthSet{upto(*tc, true)} : TruthSet{all};
        case CmpOp::Le:
            if (c0 > 0) return {};
            return tc ? TruthSet{upto(*tc, false)} : TruthSet{all};
        case CmpOp::Gt:
            if (c0 > 0) return {all};
            return tc ? TruthSet{from(*tc, true)} : TruthSet{};
        case CmpOp::Ge:
            if (c0 >= 0) return {all};
            return tc ? TruthSet{from(*tc, false)} : TruthSet{};
        case CmpOp::Eq:
            if (c0 > 0 || !tc) return {};
            return {TimeInterval{*tc, false, *tc, false}};
        case CmpOp::Ne:
            if (c0 > 0 || !tc) return {all};
            if (c0 == 0) return {from(Number(0), true)};
            return {upto(*tc, true), from(*tc, true)};
    }
    return {};
}

inline TruthSet intersect(const TruthSet& p, const TruthSet& q) {
    TruthSet out;
    for (const auto& x : p)
        for (const auto& y : q) {
            TimeInterval r;
            int lc = compare(x.lo, y.lo);
            if (lc > 0 || (lc == 0 && x.lo_open)) r.lo = x.lo, r.lo_open = x.lo_open;
            else r.lo = y.lo, r.lo_open = y.lo_open;
            if (!x.hi) r.hi = y.hi, r.hi_open = y.hi_open;
            else if (!y.hi) r.hi = x.hi, r.hi_open = x.hi_open;
            else {
                int hc = compare(*x.hi, *y.hi);
                if (hc < 0 || (hc == 0 && x.hi_open)) r.hi = x.hi, r.hi_open = x.hi_open;
                else r.hi = y.hi, r.hi_open = y.hi_open;
            }
            if (!r.empty()) out.push_back(r);
        }
    std::sort(out.begin(), out.end(), [](const TimeInterval& a, const TimeInterval& b) { return a.lo < b.lo; });
    return out;
}

/// Comparison view of a continuous atom (`x op bound` or `x = number`).
inline LinCmp as_comparison(const AtomicConstraint& a) {
    if (auto* c = std::get_if<LinCmp>(&a)) return *c;
    const auto& eq = std::get<TermEq>(a);
    if (eq.rhs.kind() != TermKind::Num) throw std::logic_error("not a continuous atom: " + to_string(a));
    return LinCmp{eq.var, CmpOp::Eq, eq.rhs.value()};
}

/// Truth set of a conjunction of continuous atoms.
inline TruthSet truth_set(std::span<const AtomicConstraint> atoms, const ContinuousStore& store) {
    TruthSet acc{TimeInterval{Number(0), false, std::nullopt, false}};
    for (const auto& a : atoms) {
        LinCmp c = as_comparison(a);
        auto it = store.find(c.var);
        if (it == store.end()) throw MissingVariable(c.var);
        acc = intersect(acc, truth_set(it->second.value, it->second.flow, c.op, c.bound));
        if (acc.empty()) break;
    }
    return acc;
}

/// Earliest t >= 0 at which the truth value of `cmp` differs from its value at t = 0.
inline std::optional<Number> crossing_time(const Number& v0, const Flow& f, const LinCmp& cmp) {
    TruthSet ts = truth_set(v0, f, cmp.op, cmp.bound);
    if (!ts.empty() && ts.front().contains_zero()) return ts.front().hi;
    if (ts.empty()) return std::nullopt;
    return ts.front().lo;
}

using ContGuard = std::vector<AtomicConstraint>;

struct DelayOutcome {
    enum class Cause { GuardEnables, InvariantExpires, Horizon };
    Number tau;
    Cause cause = Cause::Horizon;
    std::size_t branch = 0;  // index of the guard or invariant group that won
    bool timelock = false;
};

inline const char* to_string(DelayOutcome::Cause c) {
    switch (c) {
        case DelayOutcome::Cause::GuardEnables: return "guard-enables";
        case DelayOutcome::Cause::InvariantExpires: return "invariant-expires";
        case DelayOutcome::Cause::Horizon: return "horizon";
    }
    return "?";
}

/// Longest admissible delay when time passage is granted by several choice agents at
/// once (each a list of ask~ invariants) while `waiting` guards are watched for enabling.
/// Ties prefer guard enabling, then invariant expiry, then the horizon. A group with no
/// invariant true now, or an invariant that expires immediately, yields a timelock.
inline DelayOutcome max_delay_groups(std::span<const std::vector<ContGuard>> groups, std::span<const ContGuard> waiting,
                                     const ContinuousStore& store, const Number& horizon) {
    DelayOutcome out{horizon, DelayOutcome::Cause::Horizon, 0, false};
    for (std::size_t i = 0; i < waiting.size(); ++i) {
        TruthSet ts = truth_set(std::span<const AtomicConstraint>(waiting[i]), store);
        if (ts.empty() || ts.front().contains_zero()) continue;
        // An enabling instant only exists when the truth set starts strictly after 0.
        const TimeInterval* first = nullptr;
        for (const auto& iv : ts)
            if (iv.lo > Number(0)) {
                first = &iv;
                break;
            }
        if (!first) continue;
        if (out.cause != DelayOutcome::Cause::GuardEnables ? first->lo <= out.tau : first->lo < out.tau)
            out = DelayOutcome{first->lo, DelayOutcome::Cause::GuardEnables, i, false};
    }
    for (std::size_t g = 0; g < groups.size(); ++g) {
        bool any = false;
        std::optional<Number> expiry;  // nullopt: never expires
        bool unbounded = false;
        for (const auto& inv : groups[g]) {
            TruthSet ts = truth_set(std::span<const AtomicConstraint>(inv), store);
            if (ts.empty() || !ts.front().contains_zero()) continue;
            any = true;
            if (!ts.front().hi) unbounded = true;
            else if (!expiry || *ts.front().hi > *expiry) expiry = ts.front().hi;
        }
        if (!any) return DelayOutcome{Number(0), DelayOutcome::Cause::InvariantExpires, g, true};
        if (unbounded) continue;
        bool wins = out.cause == DelayOutcome::Cause::Horizon ? *expiry <= out.tau : *expiry < out.tau;
        if (wins) out = DelayOutcome{*expiry, DelayOutcome::Cause::InvariantExpires, g, false};
    }
    if (out.cause == DelayOutcome::Cause::InvariantExpires && compare(out.tau, Number(0)) <= 0) out.timelock = true;
    return out;
}

/// Single choice agent form: `invariants` are its ask~ branches.
inline DelayOutcome max_delay(std::span<const ContGuard> invariants, std::span<const ContGuard> waiting,
                              const ContinuousStore& store, const Number& horizon) {
    std::vector<std::vector<ContGuard>> groups;
    if (!invariants.empty()) groups.emplace_back(invariants.begin(), invariants.end());
    return max_delay_groups(groups, waiting, store, horizon);
}

}  // namespace hytccp
