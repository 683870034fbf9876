#ifndef DBGDIFF_TOOLCHAIN_HPP
#define DBGDIFF_TOOLCHAIN_HPP

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dbgdiff/subprocess.hpp"

namespace dbgdiff {

// One toolchain release used for fingerprinting. Versions without a pass
// bisection mechanism still participate; their fingerprint entries degrade
// to an unsupported marker.
struct VersionDescriptor {
    std::string label;
    std::string compiler_template; // {src} {out} {opt}
    // Flag accepting an integer, "run only the first N passes", e.g.
    // "-mllvm -opt-bisect-limit={limit}".
    std::optional<std::string> bisect_limit_flag;
    // Command whose combined output lists executed passes in order as
    // "BISECT: running pass (N) <name> ..." lines (the LLVM opt-bisect log
    // format); adapters for other toolchains must emit the same shape.
    // Placeholders: {src} {opt} {out}.
    std::optional<std::string> pass_list_command;

    bool supports_bisect() const { return bisect_limit_flag && pass_list_command; }
};

struct DebuggerConfig {
    std::string backend = "gdb-mi";
    std::string binary = "gdb";
    std::vector<std::string> extra_args;
};

struct ToolchainConfig {
    std::string compiler_template; // {src} {out} {opt}, each exactly once
    std::string debug_flag = "-g"; // appended when the template omits it
    DebuggerConfig debugger;
    std::vector<std::string> levels; // optimization levels under test
    std::string baseline = "-O0";
    std::string generator_template;                // {seed} {out}
    std::optional<std::string> ub_filter_template; // {src}
    std::optional<std::string> reducer_template;   // {src} {predicate}
    std::vector<VersionDescriptor> versions;

    std::string entry_symbol = "main";
    std::size_t step_limit = 50'000;
    std::chrono::milliseconds command_timeout{10'000}; // per debugger command
    std::chrono::milliseconds tool_timeout{120'000};   // compiler/generator/filter
    std::chrono::milliseconds reducer_timeout{1'800'000};
    bool collect_globals = true;
    bool descend_into_other_units = false;
};

// Throws ConfigInvalid with a description of every problem found.
void validate_config(const ToolchainConfig& config);
ToolchainConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const ToolchainConfig& config);

enum class Provenance { Generated, Imported };

struct TestCase {
    std::string id;
    std::filesystem::path source;
    Provenance provenance = Provenance::Generated;
    std::optional<std::uint64_t> seed;
};

// Runs the configured generator with the seed; the source lands at
// `source_path`. Generators must be seed-deterministic; that is a contract on
// the configured command, not something the harness can enforce per call.
TestCase generate_case(const ToolchainConfig& config, std::uint64_t seed,
                       const std::filesystem::path& source_path, const std::string& id);

TestCase import_case(const std::filesystem::path& source, const std::string& id);

enum class FilterOutcome { Clean, Rejected, FilterUnavailable };

struct FilterResult {
    FilterOutcome outcome = FilterOutcome::FilterUnavailable;
    bool filter_crashed = false; // nonzero-but-not-1 exit or signal; treated as rejected
    std::string detail;
};

// Exit-code contract for the filter command: 0 = clean, 1 = rejected,
// anything else = filter crash (logged, case rejected).
FilterResult filter_ub(const TestCase& test_case, const ToolchainConfig& config);

// Compiles with the version's template plus the debug-info flag; applies the
// pass-limit flag when `pass_limit` is set. Throws CompileFailure /
// PassLimitUnsupported.
std::filesystem::path compile(const TestCase& test_case, const std::string& opt_flag,
                              const VersionDescriptor& version, std::optional<int> pass_limit,
                              const std::filesystem::path& output, const ToolchainConfig& config);

struct BinaryPair {
    std::filesystem::path unopt;
    std::filesystem::path opt;
};

// Baseline + optimized binaries from the same source bytes, side by side in
// `work_dir`. Throws RefusedSameLevel when opt_flag equals the baseline.
BinaryPair build_pair(const TestCase& test_case, const std::string& opt_flag,
                      const VersionDescriptor& version, const std::filesystem::path& work_dir,
                      const ToolchainConfig& config);

// The main tested toolchain as a VersionDescriptor (first configured version
// when present, else the top-level compiler with no bisect mechanism).
VersionDescriptor main_version(const ToolchainConfig& config);

} // namespace dbgdiff

#endif
