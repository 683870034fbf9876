#ifndef DBGDIFF_CAMPAIGN_HPP
#define DBGDIFF_CAMPAIGN_HPP

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dbgdiff/invariants.hpp"
#include "dbgdiff/toolchain.hpp"
#include "dbgdiff/triage.hpp"

namespace dbgdiff {

enum class CaseStatus { Clean, Violating, RejectedUb, Error };

const char* to_string(CaseStatus status);
std::optional<CaseStatus> case_status_from_string(const std::string& name);

struct CaseOutcome {
    std::string case_id;
    std::string level;
    std::uint64_t seed = 0;
    CaseStatus status = CaseStatus::Error;
    std::map<Invariant, std::size_t> violation_counts; // raw occurrences per invariant
    std::optional<Fingerprint> fingerprint;            // filled in by triage
    bool filter_unavailable = false;
    bool truncated_pair = false; // either trace truncated; lower confidence
    std::string error_detail;
    double duration_ms = 0.0;
    std::size_t completed_executions = 1; // resume guard; must stay 1
};

struct CampaignRecord {
    std::string id;
    std::uint64_t seed = 0;
    std::vector<std::string> levels;
    std::size_t cases_per_level = 0;
    bool self_check = false;
    std::string config_json;
    std::vector<CaseOutcome> outcomes;
};

struct CampaignPlan {
    std::vector<std::string> levels;
    std::size_t cases_per_level = 0;
    std::chrono::milliseconds wall_budget{0}; // 0 means no wall-clock budget
    std::size_t workers = 0;                  // 0 means hardware concurrency
    std::uint64_t seed = 1;
    bool keep_binaries = false;
    // Test hook: compile once at the baseline and trace that binary twice, so
    // any violation indicts the harness rather than the toolchain.
    bool self_check = false;
};

// Per-level-and-index generator seed; levels draw from disjoint streams.
std::uint64_t derive_case_seed(std::uint64_t campaign_seed, const std::string& level,
                               std::size_t index);

std::string make_case_id(const std::string& level, std::size_t index);

// Compiles and traces a trivial program to prove the toolchain and debugger
// are operational. Throws CanaryFailure.
void run_canary(const ToolchainConfig& config, const std::filesystem::path& scratch_dir);

// Runs (or resumes) a campaign in `campaign_dir`. Cases already holding an
// outcome record are not re-executed; per-case status files are the source of
// truth. Throws ConfigInvalid / CanaryFailure before any case runs.
CampaignRecord run_campaign(const ToolchainConfig& config, const CampaignPlan& plan,
                            const std::filesystem::path& campaign_dir, const std::string& id);

// Loads a campaign from disk and re-derives the aggregate tallies, verifying
// them against the stored ones. Throws UnknownCampaign / CampaignStateError.
CampaignRecord load_campaign(const std::filesystem::path& campaign_dir);

// Offline pair check: parses two trace files and runs every invariant.
std::vector<Violation> check_pair(const std::filesystem::path& opt_trace_path,
                                  const std::filesystem::path& unopt_trace_path,
                                  const CheckOptions& options = {},
                                  const std::string& case_id = "");

std::filesystem::path case_directory(const std::filesystem::path& campaign_dir,
                                     const std::string& case_id);

void save_case_outcome(const std::filesystem::path& campaign_dir, const CaseOutcome& outcome);

// Triage results live alongside the campaign record.
void save_clusters(const std::filesystem::path& campaign_dir,
                   const std::map<std::string, std::vector<Cluster>>& clusters_by_level);
std::map<std::string, std::vector<Cluster>> load_clusters(
    const std::filesystem::path& campaign_dir);

} // namespace dbgdiff

#endif
