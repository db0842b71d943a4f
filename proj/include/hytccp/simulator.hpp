#pragma once

// Scheduling loop: instantaneous steps until none is enabled, then the earliest-event
// delay, then a continuous step; plus bounded breadth-first exploration.

#include "hytccp/semantics.hpp"

#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace hytccp {

enum class Policy { First, Random, Exhaustive };

inline const char* to_string(Policy p) {
    switch (p) {
        case Policy::First: return "first";
        case Policy::Random: return "random";
        case Policy::Exhaustive: return "exhaustive";
    }
    return "?";
}

struct RunOptions {
    Number max_time{86400};
    std::size_t max_steps = 1000000;  // instantaneous steps over the whole run
    Number horizon{3600};             // longest single continuous step
    Policy policy = Policy::First;
    std::uint64_t seed = 0;
    std::size_t depth = 5;            // exhaustive exploration only
    std::size_t time_samples = 0;     // exhaustive exploration only
    std::size_t divergence_budget = 10000;
};

enum class TerminalKind { AllStop, Suspended, Timelock, InstantDivergence, MaxTime, MaxSteps };

inline const char* to_string(TerminalKind k) {
    switch (k) {
        case TerminalKind::AllStop: return "all-stop";
        case TerminalKind::Suspended: return "suspended";
        case TerminalKind::Timelock: return "timelock";
        case TerminalKind::InstantDivergence: return "instant-divergence";
        case TerminalKind::MaxTime: return "max-time";
        case TerminalKind::MaxSteps: return "max-steps";
    }
    return "?";
}

struct TraceEvent {
    enum class Kind { Discrete, Continuous, Terminal };
    Kind kind = Kind::Discrete;
    Number clock;  // start of the event
    // discrete
    std::vector<ChoiceRecord> choices;
    std::vector<std::string> told;
    std::vector<AppliedChange> changes;
    // continuous
    Number tau;
    std::string cause;
    ContinuousStore start;
    // terminal
    TerminalKind terminal = TerminalKind::AllStop;
    // continuous values after the event
    ContinuousStore vars;
};

struct TraceHeader {
    std::string program_hash;
    RunOptions options;
};

struct Trace {
    TraceHeader header;
    std::vector<TraceEvent> events;
    Configuration final_state;

    const TraceEvent& terminal() const { return events.back(); }
};

inline std::string program_hash(const Program& p) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(to_string(p))));
    return buf;
}

/// Called for every event with the configurations before and after it.
using RunObserver = std::function<void(const Configuration& before, const TraceEvent& event, const Configuration& after)>;

inline Trace run(const Program& program, const RunOptions& opt, const RunObserver& observe = {}) {
    if (compare(opt.horizon, Number(0)) <= 0) throw std::invalid_argument("horizon must be positive");
    if (compare(opt.max_time, Number(0)) < 0) throw std::invalid_argument("max time must not be negative");
    Trace trace{TraceHeader{program_hash(program), opt}, {}, {}};
    std::mt19937_64 rng(opt.seed);
    StepContext ctx{&program, [&rng](const Rational& lo, const Rational& hi) { return builtin_random(lo, hi, rng); }};

    Configuration cfg = initial_configuration(program);
    std::size_t steps = 0, at_instant = 0;
    auto emit = [&](TraceEvent ev, const Configuration& before, const Configuration& after) {
        ev.vars = after.cont;
        trace.events.push_back(std::move(ev));
        if (observe) observe(before, trace.events.back(), after);
    };
    auto finish = [&](TerminalKind k) {
        TraceEvent ev;
        ev.kind = TraceEvent::Kind::Terminal;
        ev.clock = cfg.clock;
        ev.terminal = k;
        emit(std::move(ev), cfg, cfg);
        trace.final_state = cfg;
        return trace;
    };

    for (;;) {
        auto succ = discrete_successors(cfg, ctx);
        if (!succ.empty()) {
            if (steps >= opt.max_steps) return finish(TerminalKind::MaxSteps);
            if (at_instant >= opt.divergence_budget) return finish(TerminalKind::InstantDivergence);
            std::size_t pick = 0;
            if (opt.policy == Policy::Random && succ.size() > 1)
                pick = static_cast<std::size_t>(
                    builtin_random(0, Rational(succ.size() - 1), rng).convert_to<long long>());
            Successor& s = succ[pick];
            TraceEvent ev;
            ev.kind = TraceEvent::Kind::Discrete;
            ev.clock = cfg.clock;
            ev.choices = std::move(s.choices);
            ev.told = std::move(s.told);
            ev.changes = std::move(s.changes);
            Configuration before = std::move(cfg);
            cfg = std::move(s.next);
            emit(std::move(ev), before, cfg);
            ++steps;
            ++at_instant;
            continue;
        }
        if (compare(cfg.clock, opt.max_time) >= 0) return finish(TerminalKind::MaxTime);
        TimePlan plan = plan_time_step(cfg, opt.horizon);
        if (plan.stuck) {
            switch (*plan.stuck) {
                case Quiescence::AllStop: return finish(TerminalKind::AllStop);
                case Quiescence::Suspended: return finish(TerminalKind::Suspended);
                case Quiescence::Timelock: return finish(TerminalKind::Timelock);
                case Quiescence::InstantDivergence: return finish(TerminalKind::InstantDivergence);
            }
        }
        TraceEvent ev;
        ev.kind = TraceEvent::Kind::Continuous;
        ev.clock = cfg.clock;
        ev.tau = plan.delay->tau;
        ev.cause = to_string(plan.delay->cause);
        Number remaining = opt.max_time - cfg.clock;
        if (compare(remaining, ev.tau) < 0) {
            ev.tau = remaining;
            ev.cause = "max-time";
        }
        ev.start = cfg.cont;
        Configuration before = cfg;
        cfg = continuous_step(cfg, ev.tau);
        emit(std::move(ev), before, cfg);
        at_instant = 0;
    }
}

// ---- exploration ----

struct ReachabilityReport {
    std::vector<std::map<std::string, Configuration>> by_depth;  // configurations first reached per level
    std::set<std::string> reachable;
    bool complete = true;

    std::size_t size() const { return reachable.size(); }
};

/// Successors for exploration: every instantaneous step, or when none is enabled the
/// earliest-event delay plus `time_samples` evenly spaced shorter delays.
inline std::vector<Configuration> combined_successors(const Configuration& cfg, const StepContext& ctx,
                                                      const Number& horizon, std::size_t time_samples) {
    std::vector<Configuration> out;
    auto succ = discrete_successors(cfg, ctx);
    if (!succ.empty()) {
        for (auto& s : succ) out.push_back(std::move(s.next));
        return out;
    }
    TimePlan plan = plan_time_step(cfg, horizon);
    if (!plan.delay) return out;
    out.push_back(continuous_step(cfg, plan.delay->tau));
    for (std::size_t k = 1; k <= time_samples; ++k)
        out.push_back(continuous_step(cfg, plan.delay->tau * Number(Rational(k, time_samples + 1))));
    return out;
}

/// Breadth-first reachability up to `depth` combined steps, modulo canonical_key.
/// Random terms take their lower bound.
inline ReachabilityReport explore(const Program& program, std::size_t depth, std::size_t time_samples = 0,
                                  const Number& horizon = Number(3600), std::size_t state_cap = 200000) {
    StepContext ctx{&program, {}};
    ReachabilityReport rep;
    Configuration init = initial_configuration(program);
    std::string k0 = canonical_key(init);
    rep.by_depth.push_back({{k0, init}});
    rep.reachable.insert(k0);
    for (std::size_t d = 1; d <= depth; ++d) {
        std::map<std::string, Configuration> level;
        for (const auto& [key, cfg] : rep.by_depth.back()) {
            std::vector<Configuration> next;
            try {
                next = combined_successors(cfg, ctx, horizon, time_samples);
            } catch (const ResourceLimit&) {
                rep.complete = false;
                rep.by_depth.push_back(std::move(level));
                return rep;
            }
            for (auto& n : next) {
                std::string k = canonical_key(n);
                if (rep.reachable.insert(k).second) level.emplace(std::move(k), std::move(n));
                if (rep.reachable.size() > state_cap) {
                    rep.complete = false;
                    rep.by_depth.push_back(std::move(level));
                    return rep;
                }
            }
        }
        rep.by_depth.push_back(std::move(level));
    }
    return rep;
}

}  // namespace hytccp
