#ifndef DBGDIFF_INVARIANTS_HPP
#define DBGDIFF_INVARIANTS_HPP

#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "dbgdiff/trace.hpp"

namespace dbgdiff {

// The four trace invariants checked between an optimized and an unoptimized
// trace of the same program:
//   LI — the optimized trace must not step on lines the unoptimized one never
//        executes (bottom excused),
//   BI — a stop's backtrace must be a subset of some unoptimized backtrace
//        observed on the same line,
//   SI — variables visible at a line must also be visible at that line in the
//        unoptimized trace,
//   PI — a parameter must not assume values never observed unoptimized
//        (optimized-out excused, pointers discarded).
enum class Invariant { LI, BI, SI, PI };

const char* to_string(Invariant inv);
std::optional<Invariant> invariant_from_string(const std::string& name);

struct LineEvidence {
    SourceLine line = SourceLine::bottom(); // never bottom in a real violation

    auto operator<=>(const LineEvidence&) const = default;
};

struct BacktraceEvidence {
    SourceLine line = SourceLine::bottom();
    std::set<std::string> extra_frames; // BT(s) minus the union of same-line unopt backtraces

    auto operator<=>(const BacktraceEvidence&) const = default;
};

struct ScopeEvidence {
    SourceLine line = SourceLine::bottom();
    std::set<VariableKey> extra_variables; // visible only on the optimized side

    auto operator<=>(const ScopeEvidence&) const = default;
};

struct ParameterEvidence {
    ParameterKey key;
    std::set<Value> offending_values; // observed optimized, never unoptimized; excludes ⊥

    auto operator<=>(const ParameterEvidence&) const = default;
};

using Evidence = std::variant<LineEvidence, BacktraceEvidence, ScopeEvidence, ParameterEvidence>;

// One invariant breach. Identical evidence within a pair is collapsed into a
// single violation; `occurrences` keeps the raw witness count:
//   LI — optimized steps on the offending line,
//   BI — offending optimized steps sharing the evidence,
//   SI — offending (opt, unopt) step pairs sharing the evidence,
//   PI — optimized-side observations of the offending values.
struct Violation {
    Invariant invariant = Invariant::LI;
    std::string case_id;
    std::size_t opt_step = 0;                // first witnessing optimized step
    std::optional<std::size_t> unopt_step;   // first matching unoptimized step, when applicable
    Evidence evidence;
    std::size_t occurrences = 1;

    bool operator==(const Violation&) const = default;
};

// Deterministic total order on violations: invariant kind, then optimized
// step, then evidence. Every checker returns its output in this order.
bool violation_before(const Violation& a, const Violation& b);

struct CheckOptions {
    // The scope invariant's formal definition quantifies existentially over
    // unoptimized steps; the universal variant only fires when a variable is
    // missing from every same-line unoptimized stop (less noise). Both are
    // available; existential is the default.
    bool si_universal = false;
};

std::vector<Violation> check_li(const Trace& t_opt, const Trace& t_unopt);
std::vector<Violation> check_bi(const Trace& t_opt, const Trace& t_unopt);
std::vector<Violation> check_si(const Trace& t_opt, const Trace& t_unopt,
                                const CheckOptions& options = {});
std::vector<Violation> check_pi(const Trace& t_opt, const Trace& t_unopt);

// All four, ordered LI, BI, SI, PI and by optimized step index within each.
std::vector<Violation> check_all(const Trace& t_opt, const Trace& t_unopt,
                                 const CheckOptions& options = {});

// Line-delimited JSON record per violation:
// {"case_id", "invariant", "opt_step", "unopt_step", "evidence", "occurrences"}
std::string violation_to_record(const Violation& violation);
Violation violation_from_record(const std::string& record_line, std::size_t record_index = 0);
void write_violations(const std::vector<Violation>& violations, std::ostream& out);
std::vector<Violation> read_violations(std::istream& in);

// Human-readable one-liner for reports and the CLI.
std::string describe(const Violation& violation);

} // namespace dbgdiff

#endif
