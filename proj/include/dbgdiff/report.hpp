#ifndef DBGDIFF_REPORT_HPP
#define DBGDIFF_REPORT_HPP

#include <map>
#include <string>
#include <vector>

#include "dbgdiff/campaign.hpp"

namespace dbgdiff {

// The two halves of the per-level summary: raw violation counts and unique
// fingerprints per invariant, plus the cross-invariant unique total (a single
// fingerprint may incur violations of several invariants, so the total can be
// smaller than the sum).
struct LevelReport {
    std::string level;
    std::map<Invariant, std::size_t> raw_violations;
    std::map<Invariant, std::size_t> unique_fingerprints;
    std::size_t total_unique_fingerprints = 0;
    std::size_t cases_total = 0;
    std::size_t clean = 0;
    std::size_t violating = 0;
    std::size_t rejected_ub = 0;
    std::size_t errors = 0;
};

struct CampaignReport {
    std::string campaign_id;
    std::vector<LevelReport> levels; // in campaign level order
};

CampaignReport build_report(const CampaignRecord& record);

std::string render_text(const CampaignReport& report,
                        const std::map<std::string, std::vector<Cluster>>& clusters_by_level);
// Line-delimited JSON: one record per level plus one per cluster.
std::string render_records(const CampaignReport& report,
                           const std::map<std::string, std::vector<Cluster>>& clusters_by_level);

} // namespace dbgdiff

#endif
