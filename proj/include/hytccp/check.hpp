#pragma once

// Checks beyond parsing (the parser already rejects unknown constants, undeclared
// procedures and arity mismatches): a bounded dry run under the first-choice policy
// surfaces continuous variables read before any change(...) initialises them.

#include "hytccp/simulator.hpp"

#include <string>
#include <vector>

namespace hytccp {

struct CheckReport {
    std::vector<std::string> errors;
    std::vector<std::string> notes;  // pathologies of the dry run, not errors
    bool ok() const { return errors.empty(); }
};

inline CheckReport check_program(const Program& program, RunOptions opt = {}) {
    CheckReport rep;
    opt.policy = Policy::First;
    try {
        Trace t = run(program, opt);
        auto k = t.terminal().terminal;
        if (k == TerminalKind::Timelock || k == TerminalKind::InstantDivergence)
            rep.notes.push_back(std::string("dry run ended in ") + to_string(k) + " at t=" + t.terminal().clock.str());
    } catch (const MissingVariable& e) {
        rep.errors.push_back(e.what());
    } catch (const ChangeError& e) {
        rep.errors.push_back(e.what());
    } catch (const std::runtime_error& e) {
        rep.errors.push_back(e.what());
    }
    return rep;
}

}  // namespace hytccp
