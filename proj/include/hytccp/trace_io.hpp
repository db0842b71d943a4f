#pragma once

// Trace serialisation. JSONL: a header line, then one event per line. CSV: one row per
// continuous variable per event, for plotting. Exact numbers are written as "p/q"
// strings, inexact ones as JSON numbers.

#include "hytccp/simulator.hpp"

#include <json.hpp>

#include <ostream>
#include <string>

namespace hytccp {

using ojson = nlohmann::ordered_json;

inline ojson number_json(const Number& n) {
    if (n.exact()) return n.str();
    return n.to_double();
}

inline ojson store_json(const ContinuousStore& s) {
    ojson out = ojson::object();
    for (const auto& [name, e] : s) out[name] = ojson{{"v", number_json(e.value)}, {"flow", e.flow.str()}};
    return out;
}

inline ojson options_json(const RunOptions& o) {
    return ojson{{"policy", to_string(o.policy)},
                 {"max_time", number_json(o.max_time)},
                 {"max_steps", o.max_steps},
                 {"horizon", number_json(o.horizon)},
                 {"depth", o.depth},
                 {"divergence_budget", o.divergence_budget}};
}

inline ojson header_json(const TraceHeader& h) {
    return ojson{{"kind", "header"},
                 {"program_hash", h.program_hash},
                 {"options", options_json(h.options)},
                 {"seed", h.options.seed}};
}

inline const char* kind_name(TraceEvent::Kind k) {
    switch (k) {
        case TraceEvent::Kind::Discrete: return "discrete";
        case TraceEvent::Kind::Continuous: return "continuous";
        case TraceEvent::Kind::Terminal: return "terminal";
    }
    return "?";
}

inline ojson event_json(const TraceEvent& ev) {
    ojson j;
    j["t"] = number_json(ev.clock);
    j["kind"] = kind_name(ev.kind);
    j["tau"] = ev.kind == TraceEvent::Kind::Continuous ? number_json(ev.tau) : ojson(nullptr);
    j["cause"] = ev.kind == TraceEvent::Kind::Continuous ? ojson(ev.cause) : ojson(nullptr);
    j["told"] = ev.told;
    ojson choices = ojson::array();
    for (const auto& c : ev.choices)
        choices.push_back(ojson{{"site", c.site}, {"picked", c.picked}, {"of", c.alternatives}, {"guard", c.guard}});
    j["choices"] = std::move(choices);
    ojson changes = ojson::array();
    for (const auto& c : ev.changes)
        changes.push_back(ojson{{"var", c.var},
                                {"value", c.value ? number_json(*c.value) : ojson(nullptr)},
                                {"flow", c.flow ? ojson(c.flow->str()) : ojson(nullptr)}});
    j["changes"] = std::move(changes);
    if (ev.kind == TraceEvent::Kind::Continuous) j["vars_start"] = store_json(ev.start);
    j["vars"] = store_json(ev.vars);
    if (ev.kind == TraceEvent::Kind::Terminal) j["terminal"] = to_string(ev.terminal);
    return j;
}

inline void write_jsonl(std::ostream& os, const Trace& t) {
    os << header_json(t.header).dump() << '\n';
    for (const auto& ev : t.events) os << event_json(ev).dump() << '\n';
}

inline std::string csv_number(const Number& n) {
    return n.str();  // "p/q" or %.17g, never contains a comma
}

// Events without continuous variables still get one row (empty var columns) so the
// CSV keeps the same event sequence as the JSONL form.
inline void write_csv(std::ostream& os, const Trace& t) {
    os << "event,kind,t,var,value,flow_a,flow_b\n";
    for (std::size_t i = 0; i < t.events.size(); ++i) {
        const auto& ev = t.events[i];
        std::string prefix = std::to_string(i) + "," + kind_name(ev.kind) + "," + csv_number(ev.clock) + ",";
        if (ev.vars.empty()) os << prefix << ",,,\n";
        for (const auto& [name, e] : ev.vars)
            os << prefix << name << "," << csv_number(e.value) << "," << to_string(e.flow.a) << ","
               << to_string(e.flow.b) << "\n";
    }
}

inline void write_reachability_jsonl(std::ostream& os, const std::string& program_hash, std::size_t depth,
                                     std::size_t time_samples, const ReachabilityReport& rep) {
    ojson sizes = ojson::array();
    for (const auto& level : rep.by_depth) sizes.push_back(level.size());
    os << ojson{{"kind", "header"},
                {"program_hash", program_hash},
                {"options", ojson{{"policy", "exhaustive"}, {"depth", depth}, {"time_samples", time_samples}}}}
              .dump()
       << '\n';
    for (std::size_t d = 0; d < rep.by_depth.size(); ++d)
        for (const auto& [key, cfg] : rep.by_depth[d])
            os << ojson{{"kind", "state"}, {"depth", d}, {"t", number_json(cfg.clock)}, {"key", key},
                        {"vars", store_json(cfg.cont)}}
                      .dump()
               << '\n';
    os << ojson{{"kind", "summary"}, {"states", rep.size()}, {"per_depth", sizes}, {"complete", rep.complete}}.dump()
       << '\n';
}

}  // namespace hytccp
