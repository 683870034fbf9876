#ifndef DBGDIFF_DRIVER_HPP
#define DBGDIFF_DRIVER_HPP

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dbgdiff/toolchain.hpp"
#include "dbgdiff/trace.hpp"

namespace dbgdiff {

// Session configuration for one trace extraction. One session drives one
// debugger subprocess; sessions are single-threaded and never shared.
struct DriverOptions {
    std::string debugger_binary = "gdb";
    std::vector<std::string> extra_args;
    std::string entry_symbol = "main";
    std::size_t step_limit = 50'000;
    std::chrono::milliseconds command_timeout{10'000};
    bool collect_globals = true;
    // When false, stops in other compile units are stepped out of rather than
    // recorded, confining the trace to the main source file.
    bool descend_into_other_units = false;
};

DriverOptions driver_options(const ToolchainConfig& config);

struct RawVariable {
    std::string name;
    VariableKind kind = VariableKind::Local;
    std::string owner_function; // set for parameters
    bool is_pointer = false;
    std::optional<std::string> text; // nullopt when the debugger gave no rendering
};

// What the debugger reported at one stop, before normalization.
struct RawStop {
    enum class Reason { StepComplete, Exited, Signal, Error };
    Reason reason = Reason::StepComplete;
    std::optional<int> line; // absent when the stop has no line info
    std::vector<std::string> frames; // innermost first, as reported
    std::vector<RawVariable> variables;
    std::string detail; // signal name / error text
};

// Maps a raw stop onto the trace model: line 0 or absent becomes bottom,
// "<optimized out>" renderings become the optimized-out sentinel, frame
// decorations are stripped and frames deduplicated, duplicate variable keys
// collapse (last wins). Throws ProtocolError on malformed fields.
Step normalize_stop(const RawStop& raw, std::size_t index);

// Breaks at the entry symbol, runs, then repeatedly steps source lines,
// recording one Step per stop until the program exits or a budget trips.
// truncated is set iff the step limit was reached or a command timed out.
Trace extract_trace(const std::filesystem::path& binary, const DriverOptions& options);

} // namespace dbgdiff

#endif
