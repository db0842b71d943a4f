#include "hytccp/parser.hpp"
#include "hytccp/simulator.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

using namespace hytccp;

namespace {

Program load(const std::string& name) {
    std::ifstream in(std::string(HYTCCP_MODELS_DIR) + "/" + name);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_program(ss.str());
}

std::vector<Number> firings(const Trace& t, const std::string& guard) {
    std::vector<Number> out;
    for (const auto& e : t.events)
        for (const auto& c : e.choices)
            if (c.guard == guard) out.push_back(e.clock);
    return out;
}

}  // namespace

TEST(Run, DamSupplierFiresHourly) {
    auto dam = load("dam.hyt");
    RunOptions opt;
    opt.max_time = Number(14400);
    auto t = run(dam, opt);
    auto f = firings(t, "T = 3600");
    ASSERT_EQ(f.size(), 4u);
    for (int i = 0; i < 4; ++i) EXPECT_TRUE(f[i].identical(Number(3600 * (i + 1)))) << f[i].str();
    EXPECT_EQ(t.terminal().terminal, TerminalKind::MaxTime);
}

// After opening both gates at the threshold the controller must still react to the
// next inflow, every hour.
TEST(Run, DamControllerReactsToEveryInflow) {
    auto dam = load("dam.hyt");
    RunOptions opt;
    opt.max_time = Number(8 * 3600);
    auto t = run(dam, opt);
    std::size_t reactions = 0, thresholds = 0;
    for (const auto& e : t.events)
        for (const auto& c : e.choices) {
            if (c.guard.rfind("In", 0) == 0 && c.guard.find("= [NewIn") != std::string::npos) ++reactions;
            if (c.guard == "Vol = 1000") ++thresholds;
        }
    EXPECT_EQ(reactions, 8u);
    EXPECT_GE(thresholds, 1u);
}

TEST(Run, StopProgram) {
    auto t = run(parse_program("stop."), RunOptions{});
    ASSERT_EQ(t.events.size(), 1u);
    EXPECT_EQ(t.terminal().terminal, TerminalKind::AllStop);
    EXPECT_TRUE(t.terminal().clock.identical(Number(0)));
}

TEST(Run, UnsatisfiableAskSuspends) {
    auto t = run(parse_program("ask(X = a) -> stop."), RunOptions{});
    ASSERT_EQ(t.events.size(), 1u);
    EXPECT_EQ(t.terminal().terminal, TerminalKind::Suspended);
}

TEST(Run, SelfCallDiverges) {
    RunOptions opt;
    opt.divergence_budget = 1000;
    auto t = run(parse_program("p :- p.\np."), opt);
    EXPECT_EQ(t.terminal().terminal, TerminalKind::InstantDivergence);
    EXPECT_EQ(t.events.size(), 1001u);
}

TEST(Run, ThermostatOscillates) {
    auto th = load("thermostat.hyt");
    RunOptions opt;
    opt.max_time = Number(200);
    auto t = run(th, opt);
    EXPECT_EQ(t.terminal().terminal, TerminalKind::MaxTime);
    auto up = firings(t, "X = 22"), down = firings(t, "X = 18");
    EXPECT_GE(up.size(), 3u);
    EXPECT_GE(down.size(), 3u);
    for (const auto& e : t.events)
        if (e.kind == TraceEvent::Kind::Continuous) {
            double x = e.vars.at("X").value.to_double();
            EXPECT_GE(x, 18 - 1e-6);
            EXPECT_LE(x, 22 + 1e-6);
        }
}

TEST(Explore, ParallelTellsMergeInOneStep) {
    auto r = explore(parse_program("tell(X = a) || tell(Y = b)."), 1);
    ASSERT_EQ(r.by_depth.size(), 2u);
    EXPECT_EQ(r.by_depth[1].size(), 1u);
}

TEST(Explore, BothEntailedBranches) {
    auto r = explore(parse_program("ask(true) -> tell(X = a) + ask(true) -> tell(X = b)."), 2);
    EXPECT_EQ(r.by_depth[2].size(), 2u);
}

TEST(Explore, DepthZero) {
    auto r = explore(parse_program("tell(X = a)."), 0);
    EXPECT_EQ(r.size(), 1u);
    EXPECT_EQ(r.by_depth.size(), 1u);
}
