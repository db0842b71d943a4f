// hytccp: parse, check, run and explore Hy-tccp programs.
//
// Exit codes: 0 normal end (all-stop, suspended, max-time, max-steps), 2 model
// pathology (timelock, instant divergence), 1 tool error (file, parse, options,
// runtime failure such as an uninitialised continuous variable).

#include "hytccp/check.hpp"
#include "hytccp/parser.hpp"
#include "hytccp/trace_io.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace hytccp;

namespace {

struct Config {
    std::string input;
    std::string out;
    std::string format = "jsonl";
    std::string policy = "first";
    std::string max_time = "86400";
    std::string horizon = "3600";
    std::uint64_t seed = 0;
    std::size_t max_steps = 1000000;
    std::size_t depth = 5;
    std::size_t time_samples = 0;
};

struct ToolError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

Program load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ToolError("cannot read '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return parse_program(ss.str());
    } catch (const ParseError& e) {
        throw ToolError(path + ":" + e.what());
    }
}

Number positive(const std::string& flag, const std::string& text) {
    Rational q;
    try {
        q = parse_rational(text);
    } catch (const std::exception&) {
        throw ToolError(flag + ": not a number: '" + text + "'");
    }
    if (q <= 0) throw ToolError(flag + " must be positive");
    return Number(q);
}

RunOptions options(const Config& c) {
    RunOptions o;
    o.max_time = positive("--max-time", c.max_time);
    o.horizon = positive("--horizon", c.horizon);
    o.max_steps = c.max_steps;
    o.seed = c.seed;
    o.depth = c.depth;
    o.time_samples = c.time_samples;
    o.policy = c.policy == "random" ? Policy::Random : c.policy == "exhaustive" ? Policy::Exhaustive : Policy::First;
    if (const char* env = std::getenv("HYTCCP_DIVERGENCE_BUDGET")) {
        char* end = nullptr;
        unsigned long long b = std::strtoull(env, &end, 10);
        if (!*env || *end || b == 0) throw ToolError("HYTCCP_DIVERGENCE_BUDGET must be a positive integer");
        o.divergence_budget = b;
    }
    return o;
}

void emit(const Config& c, const std::string& text) {
    if (c.out.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream f(c.out, std::ios::binary);
    if (!f) throw ToolError("cannot write '" + c.out + "'");
    f << text;
}

int explore_cmd(const Config& c, const Program& p, const RunOptions& o) {
    auto rep = explore(p, o.depth, o.time_samples, o.horizon);
    std::ostringstream os;
    if (c.format == "csv") {
        os << "depth,key,t\n";
        for (std::size_t d = 0; d < rep.by_depth.size(); ++d)
            for (const auto& [key, cfg] : rep.by_depth[d]) {
                std::string quoted;
                for (char ch : key) quoted += ch == '"' ? std::string("\"\"") : std::string(1, ch);
                os << d << ",\"" << quoted << "\"," << cfg.clock.str() << "\n";
            }
    } else {
        write_reachability_jsonl(os, program_hash(p), o.depth, o.time_samples, rep);
    }
    emit(c, os.str());
    std::cerr << "hytccp: " << rep.size() << " states to depth " << o.depth
              << (rep.complete ? "" : " (incomplete: state, fan-out or agent size cap reached)") << "\n";
    return 0;
}

int run_cmd(const Config& c, const Program& p, const RunOptions& o) {
    if (o.policy == Policy::Exhaustive) return explore_cmd(c, p, o);
    Trace t = run(p, o);
    std::ostringstream os;
    if (c.format == "csv") write_csv(os, t);
    else write_jsonl(os, t);
    emit(c, os.str());
    const auto& last = t.terminal();
    std::cerr << "hytccp: " << to_string(last.terminal) << " at t=" << last.clock.str() << " after "
              << t.events.size() - 1 << " events (policy " << to_string(o.policy) << ", seed " << o.seed << ")\n";
    return last.terminal == TerminalKind::Timelock || last.terminal == TerminalKind::InstantDivergence ? 2 : 0;
}

int check_cmd(const Program& p, const RunOptions& o) {
    auto rep = check_program(p, o);
    for (const auto& e : rep.errors) std::cerr << "error: " << e << "\n";
    for (const auto& n : rep.notes) std::cerr << "note: " << n << "\n";
    std::cerr << "hytccp: " << (rep.ok() ? "ok" : "failed") << "\n";
    return rep.ok() ? 0 : 1;
}

void add_run_flags(CLI::App* sub, Config& c) {
    sub->add_option("--seed", c.seed, "seed for random(...) and the random policy");
    sub->add_option("--policy", c.policy, "first|random|exhaustive")
        ->check(CLI::IsMember({"first", "random", "exhaustive"}));
    sub->add_option("--depth", c.depth, "exploration depth (exhaustive)");
    sub->add_option("--time-samples", c.time_samples, "extra sampled delays per continuous step (exhaustive)");
    sub->add_option("--max-time", c.max_time, "stop at this clock value (rational)");
    sub->add_option("--max-steps", c.max_steps, "stop after this many instantaneous steps");
    sub->add_option("--horizon", c.horizon, "longest single continuous step (rational)");
    sub->add_option("--format", c.format, "jsonl|csv")->check(CLI::IsMember({"jsonl", "csv"}));
    sub->add_option("--out", c.out, "output path (default: standard output)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hy-tccp interpreter and simulator"};
    app.require_subcommand(1);
    Config c;
    auto* run_sub = app.add_subcommand("run", "simulate a program and write its trace");
    auto* explore_sub = app.add_subcommand("explore", "breadth-first reachable configurations");
    auto* check_sub = app.add_subcommand("check", "parse and check a program");
    auto* parse_sub = app.add_subcommand("parse", "parse a program and print it back");
    for (auto* sub : {run_sub, explore_sub, check_sub, parse_sub})
        sub->add_option("input", c.input, "program file")->required();
    for (auto* sub : {run_sub, explore_sub, check_sub}) add_run_flags(sub, c);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        Program p = load(c.input);
        if (parse_sub->parsed()) {
            std::cout << to_string(p) << "\n";
            return 0;
        }
        RunOptions o = options(c);
        if (check_sub->parsed()) return check_cmd(p, o);
        if (explore_sub->parsed()) return explore_cmd(c, p, o);
        return run_cmd(c, p, o);
    } catch (const std::exception& e) {
        std::cerr << "hytccp: error: " << e.what() << "\n";
        return 1;
    }
}
