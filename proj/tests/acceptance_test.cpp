// Acceptance run: one PASS/FAIL line per criterion, exit status 0 only when all pass.

#include "hytccp/parser.hpp"
#include "hytccp/trace_io.hpp"
#include "support/oracle.hpp"
#include "support/random_program.hpp"
#include "support/rk4.hpp"

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

using namespace hytccp;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Program model(const std::string& name) { return parse_program(slurp(std::string(HYTCCP_MODELS_DIR) + "/" + name)); }

std::string jsonl(const Trace& t) {
    std::ostringstream os;
    write_jsonl(os, t);
    return os.str();
}

int failures = 0;

void report(int n, const std::string& name, bool ok, const std::string& detail) {
    if (!ok) ++failures;
    std::cout << (ok ? "PASS " : "FAIL ") << n << " " << name << ": " << detail << std::endl;
}

// ---- shared checks over traces ----

struct Tally {
    std::size_t programs = 0, skipped = 0, discrete = 0, continuous = 0;
    std::size_t monotonicity = 0, shape = 0, priority = 0;
    std::string first_problem;

    void problem(std::size_t& counter, const std::string& what) {
        if (counter++ == 0 && first_problem.empty()) first_problem = what;
    }
};

std::string agent_and_store(const Configuration& c) {
    return canonical_key(Configuration{c.agent, c.store, {}, Number(0)});
}

// Observes one run and checks store monotonicity, the shape of continuous events and
// the priority of instantaneous steps over time.
RunObserver checker(const Program& p, Tally& t, const std::string& label) {
    return [&p, &t, label](const Configuration& before, const TraceEvent& ev, const Configuration& after) {
        if (ev.kind == TraceEvent::Kind::Discrete) {
            ++t.discrete;
            if (!entails(after.store, before.store)) t.problem(t.monotonicity, label + ": store lost information");
            return;
        }
        if (ev.kind != TraceEvent::Kind::Continuous) return;
        ++t.continuous;
        StepContext ctx{&p, {}};
        if (!discrete_successors(before, ctx).empty())
            t.problem(t.priority, label + ": time passed with an instantaneous step enabled at t=" + before.clock.str());
        bool ok = agent_and_store(before) == agent_and_store(after);
        ok = ok && after.clock.identical(before.clock + ev.tau);
        ok = ok && after.cont.size() == before.cont.size();
        for (const auto& [x, e] : before.cont) {
            auto it = after.cont.find(x);
            if (!ok || it == after.cont.end()) {
                ok = false;
                break;
            }
            ok = it->second.flow == e.flow && it->second.value.identical(solve_flow(e.value, e.flow, ev.tau));
        }
        if (!ok) t.problem(t.shape, label + ": continuous event at t=" + before.clock.str() + " is not a pure delay");
    };
}

void check_run(const Program& p, const RunOptions& opt, Tally& t, const std::string& label) {
    try {
        run(p, opt, checker(p, t, label));
        ++t.programs;
    } catch (const ResourceLimit&) {
        ++t.skipped;
    }
}

RunOptions random_program_options(std::uint64_t seed) {
    RunOptions o;
    o.policy = Policy::Random;
    o.seed = seed;
    o.max_time = Number(30);
    o.max_steps = 400;
    o.divergence_budget = 200;
    return o;
}

// ---- criteria ----

void dam_timer() {
    Program dam = model("dam.hyt");
    std::size_t runs = 0, bad = 0;
    double slowest = 0;
    for (Policy pol : {Policy::First, Policy::Random})
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            RunOptions o;
            o.policy = pol;
            o.seed = seed;
            o.max_time = Number(14400);
            auto t0 = Clock::now();
            Trace t = run(dam, o);
            slowest = std::max(slowest, seconds_since(t0));
            ++runs;
            std::vector<Number> at;
            for (const auto& e : t.events)
                for (const auto& c : e.choices)
                    if (c.guard == "T = 3600") at.push_back(e.clock);
            bool ok = at.size() == 4;
            for (std::size_t k = 0; ok && k < 4; ++k) ok = at[k].exact() && at[k].identical(Number(3600 * int(k + 1)));
            if (!ok) ++bad;
        }
    std::ostringstream d;
    d << runs << " runs (seeds 0-19, first and random policy), " << bad
      << " with firings other than exactly 3600/7200/10800/14400; slowest run " << slowest << " s (limit 1 s)";
    report(1, "dam timer exactness", bad == 0 && slowest < 1.0, d.str());
}

Tally random_suite;

void monotonicity() {
    for (std::uint64_t seed = 0; seed < 1200; ++seed) {
        Program p = parse_program(gen::ProgramGen(seed).program());
        check_run(p, random_program_options(seed), random_suite, "program " + std::to_string(seed));
    }
    const Tally& t = random_suite;
    std::ostringstream d;
    d << t.programs << " programs (" << t.skipped << " over the fan-out or agent size cap), " << t.discrete
      << " instantaneous steps, " << t.monotonicity << " violations of entails(d', d)";
    if (t.monotonicity) d << "; first: " << t.first_problem;
    report(2, "store monotonicity", t.programs >= 1000 && t.monotonicity == 0, d.str());
}

void oracle_equivalence() {
    auto t0 = Clock::now();
    std::size_t compared = 0, capped = 0, mismatches = 0;
    std::string first;
    for (std::uint64_t seed = 0; compared < 600 && seed < 2000; ++seed) {
        Program p = parse_program(gen::ProgramGen(seed).program());
        auto rep = explore(p, 5, 1, Number(3600), 20000);
        if (!rep.complete) {
            ++capped;
            continue;
        }
        std::set<std::string> ref;
        try {
            ref = oracle::reachable(p, 5, 1);
        } catch (const oracle::SizeCapExceeded&) {
            ++capped;
            continue;
        }
        ++compared;
        if (rep.reachable != ref && mismatches++ == 0) first = "program " + std::to_string(seed);
    }
    double secs = seconds_since(t0);
    std::ostringstream d;
    d << compared << " programs to depth 5 with one sampled intermediate delay (" << capped
      << " over the size caps), " << mismatches << " mismatches" << (first.empty() ? "" : ", first " + first) << "; "
      << secs << " s (limit 60 s)";
    report(3, "oracle equivalence", compared >= 500 && mismatches == 0 && secs < 60, d.str());
}

Tally corpus;

void shape_and_priority() {
    for (const auto& entry : fs::directory_iterator(HYTCCP_MODELS_DIR)) {
        if (entry.path().extension() != ".hyt") continue;
        Program p = parse_program(slurp(entry.path()));
        for (Policy pol : {Policy::First, Policy::Random})
            for (std::uint64_t seed = 0; seed < 3; ++seed) {
                RunOptions o;
                o.policy = pol;
                o.seed = seed;
                check_run(p, o, corpus, entry.path().filename().string());
            }
    }
    std::size_t events = corpus.continuous + random_suite.continuous;
    std::size_t shape = corpus.shape + random_suite.shape;
    std::ostringstream d;
    d << events << " continuous events (" << corpus.continuous << " from " << corpus.programs << " corpus runs, "
      << random_suite.continuous << " from random programs), " << shape << " changed agent, store or flows, or did not share one tau";
    if (shape) d << "; first: " << (corpus.shape ? corpus.first_problem : random_suite.first_problem);
    report(4, "continuous steps are pure delays", shape == 0 && corpus.continuous > 0 && random_suite.continuous > 0,
           d.str());

    std::size_t prio = corpus.priority + random_suite.priority;
    std::ostringstream d5;
    d5 << events << " continuous events checked against discrete_successors, " << prio << " taken while a step was enabled";
    report(5, "instantaneous steps first", prio == 0 && events > 0, d5.str());
}

void flow_accuracy() {
    std::mt19937_64 rng(2024);
    auto q = [&](int lo, int hi, int den) {
        return Rational(std::uniform_int_distribution<int>(lo, hi)(rng), den);
    };
    double worst_rk4 = 0;
    std::size_t n_exp = 0;
    while (n_exp < 100) {
        Rational b = q(-20, 20, 10);
        if (b == 0) continue;
        Rational a = q(-50, 50, 10), x0 = q(-50, 50, 10), t = q(1, 200, 100);
        double ref = oracle::rk4(to_double(x0), to_double(a), to_double(b), to_double(t));
        double got = solve_flow(Number(x0), Flow{a, b}, Number(t)).to_double();
        if (ref == 0) continue;
        worst_rk4 = std::max(worst_rk4, std::abs(got - ref) / std::abs(ref));
        ++n_exp;
    }
    std::size_t inexact_linear = 0;
    for (int i = 0; i < 100; ++i) {
        Rational a = q(-500, 500, 7), x0 = q(-500, 500, 3), t = q(0, 10000, 11);
        Number got = solve_flow(Number(x0), Flow{a, 0}, Number(t));
        if (!got.exact() || got.rational() != x0 + a * t) ++inexact_linear;
    }
    double worst_cross = 0;
    std::size_t n_cross = 0;
    while (n_cross < 100) {
        Rational b = q(-20, 20, 10);
        if (b == 0) continue;
        Rational a = q(-50, 50, 10), x0 = q(-50, 50, 10);
        Rational bound = x0 + q(1, 300, 10) * (to_double(a + b * x0) > 0 ? 1 : -1);
        if (a + b * x0 == 0) continue;
        // Analytic first hit of `bound` from x0, when the trajectory reaches it.
        double s = to_double(a) / to_double(b);
        double ratio = (to_double(bound) + s) / (to_double(x0) + s);
        if (ratio <= 0) continue;
        double expect = std::log(ratio) / to_double(b);
        if (!(expect > 0) || !std::isfinite(expect)) continue;
        CmpOp op = to_double(a + b * x0) > 0 ? CmpOp::Ge : CmpOp::Le;
        auto got = crossing_time(Number(x0), Flow{a, b}, LinCmp{"x", op, bound});
        ++n_cross;
        if (!got) {
            worst_cross = INFINITY;
            continue;
        }
        worst_cross = std::max(worst_cross, std::abs(got->to_double() - expect) / expect);
    }
    std::ostringstream d;
    d << "exponential flows vs RK4 (step 1e-4): worst relative error " << worst_rk4 << " over " << n_exp
      << " (limit 1e-6); linear flows: " << inexact_linear << " of 100 not bit-exact; exponential crossings vs "
      << "logarithm: worst relative error " << worst_cross << " over " << n_cross << " (limit 1e-9)";
    report(6, "flow solver accuracy", worst_rk4 <= 1e-6 && inexact_linear == 0 && worst_cross <= 1e-9, d.str());
}

void dam_safety() {
    Program dam = model("dam.hyt");
    const std::vector<std::string> branches = {"Vol =< 600", "Vol > 600, Vol =< 800", "Vol > 800, Vol < 1000",
                                               "Vol = 1000"};
    std::map<std::string, std::size_t> taken;
    std::size_t events = 0, over = 0;
    Number highest(0);
    std::string first_over;
    auto watch = [&](const ContinuousStore& s, const Number& clock, std::uint64_t seed) {
        auto it = s.find("Vol");
        if (it == s.end()) return;
        if (compare(it->second.value, highest) > 0) highest = it->second.value;
        if (compare(it->second.value, Number(1000)) > 0 && over++ == 0)
            first_over = "seed " + std::to_string(seed) + " t=" + clock.str();
    };
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        RunOptions o;
        o.policy = Policy::Random;
        o.seed = seed;
        o.max_time = Number(24 * 3600);
        Trace t = run(dam, o);
        for (const auto& e : t.events) {
            ++events;
            if (e.kind == TraceEvent::Kind::Continuous) watch(e.start, e.clock, seed);
            watch(e.vars, e.clock, seed);
            for (const auto& c : e.choices) ++taken[c.guard];
        }
    }
    std::size_t missing = 0;
    std::ostringstream d;
    d << "20 seeds x 24 h, " << events << " events, highest Vol " << highest.str() << ", " << over << " above 1000"
      << (first_over.empty() ? "" : " (first " + first_over + ")") << "; branches taken:";
    for (const auto& b : branches) {
        d << " [" << b << "] " << taken[b];
        if (taken[b] == 0) ++missing;
    }
    report(7, "dam safety", over == 0 && missing == 0, d.str());
}

int run_cli(const std::string& args) {
    std::string cmd = std::string("\"") + HYTCCP_CLI + "\" " + args + " 2>/dev/null";
    int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void determinism() {
    std::size_t pairs = 0, differ = 0;
    Program dam = model("dam.hyt");
    for (std::uint64_t seed : {1, 42, 977}) {
        RunOptions o;
        o.policy = Policy::Random;
        o.seed = seed;
        o.max_time = Number(24 * 3600);
        ++pairs;
        if (jsonl(run(dam, o)) != jsonl(run(dam, o))) ++differ;
    }
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        Program p = parse_program(gen::ProgramGen(seed).program());
        auto o = random_program_options(seed);
        try {
            ++pairs;
            if (jsonl(run(p, o)) != jsonl(run(p, o))) ++differ;
        } catch (const ResourceLimit&) {
            --pairs;
        }
    }

    fs::path dir = fs::temp_directory_path() / ("hytccp_acceptance_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    std::string common = std::string(HYTCCP_MODELS_DIR) + "/dam.hyt --policy random --seed 42 --max-time 14400 --out ";
    int c1 = run_cli("run " + common + (dir / "a.jsonl").string());
    int c2 = run_cli("run " + common + (dir / "b.jsonl").string());
    std::string a = slurp(dir / "a.jsonl"), b = slurp(dir / "b.jsonl");
    RunOptions o;
    o.policy = Policy::Random;
    o.seed = 42;
    o.max_time = Number(14400);
    bool cli_same = c1 == 0 && c2 == 0 && !a.empty() && a == b;
    bool cli_matches_library = a == jsonl(run(dam, o));
    fs::remove_all(dir);

    std::ostringstream d;
    d << differ << " of " << pairs << " in-library trace pairs differ; CLI trace files "
      << (cli_same ? "identical" : "differ") << " across two runs and " << (cli_matches_library ? "equal" : "differ from")
      << " the in-library trace";
    report(8, "determinism", differ == 0 && cli_same && cli_matches_library, d.str());
}

}  // namespace

int main() {
    std::cout.setf(std::ios::fmtflags(0), std::ios::floatfield);
    std::cout.precision(3);
    auto guarded = [](int n, const char* name, const std::function<void()>& f) {
        try {
            f();
        } catch (const std::exception& e) {
            report(n, name, false, std::string("exception: ") + e.what());
        }
    };
    guarded(1, "dam timer exactness", dam_timer);
    guarded(2, "store monotonicity", monotonicity);
    guarded(3, "oracle equivalence", oracle_equivalence);
    try {
        shape_and_priority();
    } catch (const std::exception& e) {
        report(4, "continuous steps are pure delays", false, std::string("exception: ") + e.what());
        report(5, "instantaneous steps first", false, std::string("exception: ") + e.what());
    }
    guarded(6, "flow solver accuracy", flow_accuracy);
    guarded(7, "dam safety", dam_safety);
    guarded(8, "determinism", determinism);
    std::cout << (failures == 0 ? "all criteria pass" : std::to_string(failures) + " criteria fail") << std::endl;
    return failures == 0 ? 0 : 1;
}
