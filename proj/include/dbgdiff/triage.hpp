#ifndef DBGDIFF_TRIAGE_HPP
#define DBGDIFF_TRIAGE_HPP

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dbgdiff/invariants.hpp"
#include "dbgdiff/toolchain.hpp"

namespace dbgdiff {

// One fingerprint component: the first optimization pass whose inclusion
// triggers a violation on one toolchain version, or a marker.
struct FingerprintEntry {
    enum class Kind { Pass, NoViolation, Unsupported };
    Kind kind = Kind::Unsupported;
    std::string pass_name; // set iff kind == Pass

    auto operator<=>(const FingerprintEntry&) const = default;
    std::string to_string() const;
};

// Per-version vector of first-violating passes, in config order. Equal
// fingerprints point at the same candidate bug.
struct Fingerprint {
    std::vector<FingerprintEntry> entries;

    auto operator<=>(const Fingerprint&) const = default;
    std::string to_string() const;
};

Fingerprint fingerprint_from_string(const std::string& text);

// Minimal-N search over the pass-limit predicate. `violates` is called with a
// concrete limit or nullopt for an unlimited build. The binary search phase
// memoizes probe results; the N-1 minimality verification afterwards always
// re-executes the predicate, and when it contradicts the search (a predicate
// that is not monotone or not stable), the search falls back to a fresh
// linear scan from 1. Returns nullopt first_n when even the unlimited build
// is clean. Throws BisectAborted when no consistent answer exists (e.g. a
// violation present with every bisectable pass disabled).
struct BisectResult {
    std::optional<int> first_n;
    std::vector<std::pair<int, bool>> probes; // (limit, violated) in probe order
    bool linear_fallback = false;
};

BisectResult bisect_first_violation(int pass_count,
                                    const std::function<bool(std::optional<int>)>& violates,
                                    const std::string& version_label);

// Runs the version's pass-listing command and parses the executed passes in
// order from its "BISECT: running pass (N) <name> ..." lines.
std::vector<std::string> list_passes(const TestCase& test_case, const std::string& opt_flag,
                                     const VersionDescriptor& version,
                                     const ToolchainConfig& config,
                                     const std::filesystem::path& work_dir);

// Builds with progressively limited pass counts and traces against the
// version's own baseline build to find the first violating pass.
FingerprintEntry first_violating_pass(const TestCase& test_case, const std::string& opt_flag,
                                      const VersionDescriptor& version,
                                      const ToolchainConfig& config,
                                      const std::filesystem::path& work_dir);

// Maps first_violating_pass over every configured version, in order. A
// version whose bisect aborts degrades to an Unsupported entry (logged via
// `log`, when given) instead of failing the whole case.
Fingerprint fingerprint_case(const TestCase& test_case, const std::string& opt_flag,
                             const ToolchainConfig& config,
                             const std::filesystem::path& work_dir,
                             const std::function<void(const std::string&)>& log = {});

struct Cluster {
    Fingerprint fingerprint;
    std::set<std::string> case_ids;
    std::string representative;
    std::optional<std::filesystem::path> reduced_source;
};

// Partitions cases by exact fingerprint equality; the representative is
// drawn uniformly at random with the recorded seed.
std::vector<Cluster> cluster_cases(const std::map<std::string, Fingerprint>& fingerprints,
                                   std::uint64_t seed);

struct ReducePlan {
    std::filesystem::path source; // representative's source
    std::string opt_flag;         // level the violation was found at
    Invariant invariant;          // invariant kind that must keep firing
    FingerprintEntry main_entry;  // fingerprint entry to preserve on the main version
};

// Runs the configured external reducer with a generated interestingness
// predicate script. The predicate is validated twice on the original source
// before reduction and once on the result; instability aborts with
// PredicateFlaky and the original is kept.
std::filesystem::path reduce_representative(const ReducePlan& plan, const ToolchainConfig& config,
                                            const std::filesystem::path& work_dir,
                                            const std::filesystem::path& config_path,
                                            const std::filesystem::path& self_binary);

// The predicate body shared by reduce_representative and the CLI's
// reduce-check subcommand: rebuilds the pair on the main version, checks that
// the invariant kind still fires and, when the entry names a pass, re-bisects
// and compares. Returns true when still interesting.
bool reduction_predicate(const std::filesystem::path& source, const std::string& opt_flag,
                         Invariant invariant, const FingerprintEntry& expected_entry,
                         const ToolchainConfig& config, const std::filesystem::path& scratch_dir);

} // namespace dbgdiff

#endif
